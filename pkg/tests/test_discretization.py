import math
import random
from fractions import Fraction

import pytest

from unitdemand import (
    DiscreteDistribution,
    Instance,
    PriceVector,
    ResourceLimitError,
    RestrictedInstance,
    TieBreak,
    back_map_prices,
    brute_force_optimum,
    eps_bound,
    exact_revenue,
    full_discretize,
    horizontal_discretize,
    horizontal_grid_count,
    price_grid,
    snap_prices,
    value_grid_bound,
    vertical_round,
)

F = Fraction


def point_mass(v):
    return DiscreteDistribution((v,), (F(1),))


class TestPriceGrid:
    def test_unit_to_two_with_half_eps(self):
        grid = price_grid(1, 2, F(1, 2))
        assert grid == (F(3, 4), F(1), F(4, 3))

    def test_degenerate_ratio_single_price(self):
        for eps in (F(1, 4), F(1, 3)):
            grid = price_grid(1, 1, eps)
            assert grid == (1 + eps * eps - eps,)

    def test_eps_range(self):
        with pytest.raises(ValueError):
            price_grid(1, 2, F(3, 5))
        with pytest.raises(ValueError):
            price_grid(1, 2, 0)

    def test_exact_geometric_ratio(self):
        eps = F(1, 3)
        grid = price_grid(1, 7, eps)
        step = 1 / (1 - eps * eps)
        for a, b in zip(grid, grid[1:]):
            assert b / a == step


class TestSnapPrices:
    def test_at_lower_end(self):
        pv = snap_prices(PriceVector((1,)), 1, F(1, 2))
        assert tuple(pv) == (F(3, 4),)

    def test_interior_point(self):
        pv = snap_prices(PriceVector((F(6, 5),)), 1, F(1, 2))
        assert tuple(pv) == (F(3, 4),)

    def test_at_upper_end_hits_largest_grid_point(self):
        grid = price_grid(1, 2, F(1, 2))
        pv = snap_prices(PriceVector((2,)), 1, F(1, 2))
        assert tuple(pv) == (grid[-1],)

    def test_below_range_rejected(self):
        with pytest.raises(ValueError):
            snap_prices(PriceVector((F(1, 2),)), 1, F(1, 4))

    def test_snapped_price_stays_in_declared_window(self):
        rng = random.Random(5)
        eps = F(1, 3)
        lo_f, hi_f = 1 - eps, 1 + eps * eps - eps
        for _ in range(200):
            p = F(rng.randint(100, 5000), 100)
            (q,) = snap_prices(PriceVector((p,)), 1, eps)
            assert lo_f * p <= q <= hi_f * p


class TestHorizontal:
    def test_point_mass_at_lower_bound(self):
        delta = F(1, 10)
        res = horizontal_discretize(Instance((point_mass(1),)), delta)
        pts = [v for v, m in res.instance.items[0].positive_points()]
        assert pts == [1 + delta]

    def test_degenerate_ratio_single_point(self):
        res = horizontal_discretize(Instance((point_mass(3), point_mass(3))), F(1, 10))
        assert res.grid_count == 1

    def test_grid_count_formula_for_doubling_range(self):
        assert horizontal_grid_count(1, 2, F(1, 100)) == 7001

    def test_delta_domain_error(self):
        inst = Instance((point_mass(1), point_mass(2)))
        with pytest.raises(ValueError):
            horizontal_discretize(inst, F(1, 5))  # above the bound for r=2

    def test_coupling_window_exact(self):
        # every original value lands on a grid point within ((1+d-d^2), (1+d)] times it
        rng = random.Random(13)
        delta = F(1, 64)  # admissible up to ratio 16 for these supports
        lo, hi = 1 + delta - delta * delta, 1 + delta
        for _ in range(40):
            k = rng.randint(1, 4)
            sup = tuple(sorted(F(v, 4) for v in rng.sample(range(4, 60), k)))
            masses = [F(1, k)] * (k - 1)
            masses.append(1 - sum(masses, F(0)))
            inst = Instance((DiscreteDistribution(sup, tuple(masses)),))
            res = horizontal_discretize(inst, delta)
            item = res.instance.items[0]
            grid_of = {}
            for v in sup:
                snapped = [
                    g
                    for g, m in item.positive_points()
                    if lo * v < g <= hi * v
                ]
                assert len(snapped) >= 1
                grid_of[v] = snapped
            # each original point's whole mass arrives at its unique window point
            total = sum(m for _, m in item.positive_points())
            assert total == 1

    def test_oracle_items_get_interval_masses(self):
        from unitdemand import CdfOracle

        delta = F(1, 10)
        res = horizontal_discretize(Instance((CdfOracle.uniform(1, 2),)), delta)
        item = res.instance.items[0]
        assert sum(item.masses, F(0)) == 1
        ratio = 1 + delta * delta / (1 + delta - delta * delta)
        # an interior grid point's mass equals the uniform measure of its preimage
        pts = item.support
        j = len(pts) // 2
        a = pts[j]
        lo_pre = float(a / (1 + delta))
        hi_pre = float(a / (1 + delta - delta * delta))
        want = hi_pre - lo_pre  # uniform(1,2) density 1 on the interior
        assert abs(float(item.masses[j]) - want) < 1e-3

    def test_occupied_points_only_for_discrete_items(self):
        inst = Instance((point_mass(1), point_mass(40)))
        res = horizontal_discretize(inst, F(1, 128))
        assert len(res.instance.items[0].support) == 2
        assert res.grid_count > 1000


class TestBackMap:
    def test_zero_delta_identity(self):
        assert tuple(back_map_prices(PriceVector((1,)), 0)) == (1,)

    def test_exact_cancellation(self):
        d = F(1, 10)
        p = (1 + d - d * d) * (1 + d)
        assert tuple(back_map_prices(PriceVector((p,)), d)) == (1,)

    def test_plain_division(self):
        got = back_map_prices(PriceVector((2,)), F(1, 10))[0]
        assert got == F(2000, 1199)
        assert abs(float(got) - 1.6681) < 1e-4


class TestVerticalRound:
    def test_floor_with_head_absorption(self):
        inst = Instance((DiscreteDistribution((1, 2), (F(3, 10), F(7, 10))),))
        out = vertical_round(inst, 2, 1)  # unit 1/8
        assert out.items[0].masses == (F(3, 8), F(5, 8))

    def test_exact_multiples_unchanged(self):
        inst = Instance((DiscreteDistribution((1, 2), (F(1, 4), F(3, 4))),))
        out = vertical_round(inst, 2, 1)
        assert out.items[0].masses == (F(1, 4), F(3, 4))

    def test_zero_one_masses_unchanged(self):
        inst = Instance((DiscreteDistribution((1, 2), (F(0), F(1))),))
        out = vertical_round(inst, 2, 1)
        assert out.items[0].masses == (0, 1)

    def test_total_variation_bound(self):
        rng = random.Random(17)
        for _ in range(60):
            k = rng.randint(1, 5)
            cuts = sorted(rng.randint(0, 997) for _ in range(k - 1))
            parts = [b - a for a, b in zip([0] + cuts, cuts + [997])]
            sup = tuple(sorted(rng.sample(range(1, 40), k)))
            inst = Instance(
                (DiscreteDistribution(sup, tuple(F(p, 997) for p in parts)),)
            )
            r, n = rng.randint(1, 4), rng.randint(1, 3)
            out = vertical_round(inst, r, n)
            unit = F(1, (r * n) ** 3)
            tv = sum(
                abs(a - b)
                for a, b in zip(inst.items[0].masses, out.items[0].masses)
            ) / 2
            assert tv <= k * unit
            assert sum(out.items[0].masses, F(0)) == 1


class TestFullDiscretize:
    def test_degenerate_ratio(self):
        inst = Instance((point_mass(2), point_mass(2)))
        ri = full_discretize(inst, F(1, 4))
        assert ri.is_materialized and ri.k1 == 1 and ri.k2 == 1

    def test_eps_above_admissible_bound_rejected(self):
        inst = Instance((point_mass(1), point_mass(5)))
        bad = eps_bound(5) + 0.01
        with pytest.raises(ValueError):
            full_discretize(inst, bad)

    def test_symbolic_counts_match_grid_formulas(self, counterexample):
        # near the admissible accuracy bound the theorem-grade grids are far too
        # large to materialize; the formula counts must still be reported
        eps = F(66, 100)
        assert float(eps) < eps_bound(5)
        ri = full_discretize(counterexample, eps)
        assert not ri.is_materialized
        prov = ri.provenance
        d = (eps / 8) ** 8
        xi = d * d / (1 + d - d * d)
        u_min, u_max = F(1), F(5)
        expect_k1 = (
            math.floor(math.log(float(u_max / u_min)) / math.log1p(float(xi))) + 1
        )
        assert prov["k1_grid"] == expect_k1
        assert prov["k2_grid"] >= 1
        assert prov["delta"] == f"{d.numerator}/{d.denominator}"

    def test_practical_overrides_materialize(self, counterexample):
        ri = full_discretize(
            counterexample, F(1, 4), delta=F(1, 64), price_eps=F(1, 4)
        )
        assert ri.is_materialized
        assert ri.k1 == 4  # occupied grid points, one per distinct original value
        assert ri.k2 == ri.provenance["k2"] == ri.provenance["k2_grid"]
        assert ri.provenance["k1_grid"] == horizontal_grid_count(1, 5, F(1, 64))

    def test_delta_bound_respected(self):
        inst = Instance((point_mass(1), point_mass(5)))
        with pytest.raises(ValueError):
            full_discretize(inst, F(1, 4), delta=value_grid_bound(5) + 0.01)


class TestDiscretizationRevenue:
    def test_snap_loses_bounded_fraction(self):
        rng = random.Random(41)
        eps = F(1, 4)
        for _ in range(80):
            n = rng.randint(1, 3)
            k = rng.randint(1, 3)
            sup = tuple(sorted(F(v, 2) for v in rng.sample(range(2, 40), k)))
            items = []
            for _ in range(n):
                cuts = sorted(rng.randint(0, 12) for _ in range(k - 1))
                parts = [b - a for a, b in zip([0] + cuts, cuts + [12])]
                items.append(DiscreteDistribution(sup, tuple(F(p, 12) for p in parts)))
            inst = Instance(tuple(items), rng.choice(tuple(TieBreak)))
            u_min, u_max = sup[0], sup[-1]
            pv = PriceVector(
                tuple(
                    u_min + F(rng.randint(0, 16), 16) * (u_max - u_min)
                    for _ in range(n)
                )
            )
            before = exact_revenue(inst, pv)
            after = exact_revenue(inst, snap_prices(pv, u_min, eps))
            assert after >= (1 - 2 * eps) * before

    def test_horizontal_keeps_most_revenue_when_delta_tiny(self):
        # narrow supports admit a delta small enough for a meaningful bound
        base = 10**6
        sup1 = (F(base), F(base + 1))
        sup2 = (F(base), F(base + 2))
        inst = Instance(
            (
                DiscreteDistribution(sup1, (F(1, 2), F(1, 2))),
                DiscreteDistribution(sup2, (F(1, 3), F(2, 3))),
            ),
            TieBreak.LOWEST,
        )
        delta = F(1, 10**4)
        ri = horizontal_discretize(inst, delta)
        prices = sorted({v for it in inst.items for v in it.support})
        before = brute_force_optimum(inst, tuple(prices))[1]
        grid_prices = sorted(
            {v for it in ri.instance.items for v, m in it.positive_points()}
        )
        after = brute_force_optimum(ri.instance, tuple(grid_prices))[1]
        bound = (1 - 3 * float(delta) ** 0.125) * float(before)
        assert float(after) >= bound
        assert float(after) >= 0.99 * float(before)  # far above the formal bound here

    def test_vertical_round_revenue_shift_bounded(self):
        rng = random.Random(43)
        for _ in range(60):
            n = rng.randint(1, 3)
            k = rng.randint(1, 4)
            sup = tuple(sorted(rng.sample(range(1, 30), k)))
            items = []
            for _ in range(n):
                cuts = sorted(rng.randint(0, 61) for _ in range(k - 1))
                parts = [b - a for a, b in zip([0] + cuts, cuts + [61])]
                items.append(DiscreteDistribution(sup, tuple(F(p, 61) for p in parts)))
            inst = Instance(tuple(items), rng.choice(tuple(TieBreak)))
            prices = tuple(sorted(rng.sample(range(1, 30), rng.randint(1, 3))))
            r = F(max(prices), min(prices))
            rounded = vertical_round(inst, r, n)
            for _ in range(5):
                pv = PriceVector(tuple(rng.choice(prices) for _ in range(n)))
                shift = abs(exact_revenue(inst, pv) - exact_revenue(rounded, pv))
                assert shift <= 4 * k / (r * n**2) * min(prices)
