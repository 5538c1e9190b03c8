import math
import random
from fractions import Fraction

import pytest

from unitdemand import (
    CapHigh,
    ClampRange,
    DiscreteDistribution,
    Instance,
    PriceVector,
    RaiseLow,
    ReplaceInfinite,
    TieBreak,
    exact_revenue,
    lift_solution_mhr,
    lift_solution_regular,
    restrict_prices,
    truncate_values_mhr,
    truncate_values_regular,
)
from conftest import random_instance

F = Fraction


def point_mass(v):
    return DiscreteDistribution((v,), (F(1),))


def the_item(inst, i=0):
    return inst.items[i]


class TestTruncateMhr:
    def test_interior_support_unchanged(self):
        d = DiscreteDistribution((1, 5), (F(1, 2), F(1, 2)))
        out = truncate_values_mhr(Instance((d,)), beta=2, eps=F(1, 10))
        assert the_item(out).support == (1, 5)
        assert the_item(out).masses == (F(1, 2), F(1, 2))

    def test_high_mass_clamps_to_cap(self):
        out = truncate_values_mhr(Instance((point_mass(100),)), beta=2, eps=0.1)
        (pt,) = [v for v, m in the_item(out).positive_points()]
        assert abs(float(pt) - 2 * math.log(10) * 2) < 1e-9

    def test_low_mass_moves_to_half_floor(self):
        out = truncate_values_mhr(
            Instance((point_mass(F(1, 100)),)), beta=2, eps=F(1, 10)
        )
        assert [v for v, m in the_item(out).positive_points()] == [F(1, 10)]

    def test_eps_domain(self):
        inst = Instance((point_mass(1),))
        for bad in (0, F(1, 4), F(3, 10), -1):
            with pytest.raises(ValueError):
                truncate_values_mhr(inst, beta=2, eps=bad)

    def test_masses_still_sum_to_one(self):
        rng = random.Random(11)
        for _ in range(50):
            inst = random_instance(rng)
            out = truncate_values_mhr(inst, beta=F(3, 2), eps=F(1, 8))
            for item in out.items:
                assert sum(item.masses, F(0)) == 1


class TestTruncateRegular:
    def test_low_point_formula(self):
        out = truncate_values_regular(
            Instance((point_mass(F(1, 100)), point_mass(1))), alpha=4, eps=F(1, 2)
        )
        assert [v for v, _ in the_item(out).positive_points()] == [F(1, 32)]

    def test_high_cap_formula(self):
        out = truncate_values_regular(
            Instance((point_mass(10**6), point_mass(1))), alpha=4, eps=F(1, 2)
        )
        assert [v for v, _ in the_item(out).positive_points()] == [2048]

    def test_interior_unchanged(self):
        out = truncate_values_regular(
            Instance((point_mass(1), point_mass(2))), alpha=4, eps=F(1, 2)
        )
        assert [v for v, _ in the_item(out).positive_points()] == [1]

    def test_eps_domain(self):
        inst = Instance((point_mass(1), point_mass(1)))
        with pytest.raises(ValueError):
            truncate_values_regular(inst, alpha=4, eps=1)
        with pytest.raises(ValueError):
            truncate_values_regular(inst, alpha=4, eps=0)


class TestRestrictPrices:
    def test_clamp_range_treats_infinity_as_large(self):
        pv = restrict_prices(PriceVector((F(1, 2), 3, math.inf)), ClampRange(1, 2))
        assert tuple(pv) == (1, 2, 2)

    def test_raise_low(self):
        pv = restrict_prices(PriceVector((F(1, 2), 3)), RaiseLow(1))
        assert tuple(pv) == (1, 3)

    def test_replace_infinite(self):
        pv = restrict_prices(PriceVector((4, math.inf)), ReplaceInfinite(4))
        assert tuple(pv) == (4, 4)

    def test_cap_high(self):
        pv = restrict_prices(PriceVector((4, 1)), CapHigh(2))
        assert tuple(pv) == (2, 1)


class TestLift:
    def test_tiny_price_clamped_then_raised(self):
        pv = lift_solution_mhr(PriceVector((F(1, 20),)), beta=2, eps=F(1, 10))
        assert tuple(pv) == (F(2, 10),)

    def test_inside_window_unchanged(self):
        pv = lift_solution_mhr(PriceVector((1, 2)), beta=2, eps=F(1, 10))
        assert tuple(pv) == (1, 2)

    def test_huge_price_clamped_to_cap(self):
        pv = lift_solution_mhr(PriceVector((1000,)), beta=2, eps=0.1)
        assert abs(float(pv[0]) - 2 * math.log(10) * 2) < 1e-9

    def test_regular_lift_window(self):
        pv = lift_solution_regular(
            PriceVector((F(1, 10**6), 10**9)), alpha=4, eps=F(1, 2), n=2
        )
        lo, hi = F(1, 2) * 4 / (4 * 16), 4 * 16 * 4 / F(1, 2) ** 3
        raised = F(1, 2) * 4 / (2 * 16)
        assert tuple(pv) == (raised, hi)
        assert lo < raised < hi


def clamped(pv, lo, hi):
    return restrict_prices(pv, ClampRange(lo, hi))


class TestRevenueProperties:
    def test_clamping_into_value_range_never_hurts(self):
        rng = random.Random(23)
        for _ in range(200):
            inst = random_instance(rng)
            u_min = min(it.u_min for it in inst.items)
            u_max = max(it.u_max for it in inst.items)
            pv = PriceVector(
                tuple(F(rng.randint(1, 80), rng.choice((1, 2))) for _ in inst.items)
            )
            before = exact_revenue(inst, pv)
            after = exact_revenue(inst, clamped(pv, u_min, u_max))
            assert after >= before

    def test_raising_low_prices_loses_at_most_the_floor(self):
        rng = random.Random(29)
        for _ in range(200):
            inst = random_instance(rng)
            a = F(rng.randint(1, 12), 2)
            pv = PriceVector(
                tuple(F(rng.randint(1, 40), rng.choice((1, 2))) for _ in inst.items)
            )
            before = exact_revenue(inst, pv)
            after = exact_revenue(inst, restrict_prices(pv, RaiseLow(a)))
            assert after >= before - a

    def test_lower_truncation_preserves_revenue_above_floor_exactly(self):
        # with all prices >= eps*beta and values below the upper cap, moving
        # sub-floor mass to the floor point cannot change any sale
        rng = random.Random(31)
        beta, eps = 2, F(1, 10)
        floor = eps * beta  # 1/5; support grain 1/20 so sub-floor points really move
        for _ in range(100):
            n = rng.randint(1, 3)
            items = []
            for _ in range(n):
                k = rng.randint(1, 3)
                sup = sorted(rng.sample(range(1, 70), k))
                cuts = sorted(rng.randint(0, 12) for _ in range(k - 1))
                parts = [b - a for a, b in zip([0] + cuts, cuts + [12])]
                items.append(
                    DiscreteDistribution(
                        tuple(F(s, 20) for s in sup),
                        tuple(F(p, 12) for p in parts),
                    )
                )
            inst = Instance(tuple(items), rng.choice(tuple(TieBreak)))
            out = truncate_values_mhr(inst, beta=beta, eps=eps)
            pv = PriceVector(tuple(F(rng.randint(4, 80), 20) for _ in range(n)))
            assert all(p >= floor for p in pv)
            assert exact_revenue(inst, pv) == exact_revenue(out, pv)
