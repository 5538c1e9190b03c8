import random
from fractions import Fraction

import pytest
from conftest import random_restricted
from hypothesis import given, settings
from hypothesis import strategies as st

from unitdemand import (
    DiscreteDistribution,
    Instance,
    ResourceLimitError,
    RestrictedInstance,
    TieBreak,
    base_distribution,
    brute_force_optimum,
    canonical_round,
    compiled_kernel_available,
    exact_revenue,
    revenue_of,
    run_dp,
    transition,
)

F = Fraction


class TestBaseDistribution:
    def test_pair_of_values_single_price(self):
        wd = base_distribution((1, 2), (1,), M=6)
        assert wd.units == (6, 0)  # gap 0 at (v=1,p=1) beats gap 1

    def test_single_cell(self):
        wd = base_distribution((3,), (2,))
        assert wd.units == (1,)

    def test_pair_pair_min_gap_cell(self):
        # gaps row-major: 0, -1, 1, 0; minimum -1 sits at (v=1, p=2)
        wd = base_distribution((1, 2), (1, 2), M=4)
        assert wd.units == (0, 4, 0, 0)

    def test_gap_tie_breaks_to_first_cell_row_major(self):
        # cells (v=1,p=1) and (v=2,p=2) both have gap 0
        wd = base_distribution((1, 2), (1, 2, 5))
        assert wd.prob(0, 2) == 1  # but gap -4 at (v=1,p=5) wins outright

    def test_exact_tie(self):
        wd = base_distribution((1, 2), (2, 3))
        # gaps: -1, -2, 0, -1; unique min at (0,1)
        assert wd.units.index(wd.M) == 1


class TestTransition:
    def test_half_half_item_single_price(self):
        values, prices = (1, 2), (1,)
        wd = base_distribution(values, prices)
        item = DiscreteDistribution(values, (F(1, 2), F(1, 2)))
        for tie in (TieBreak.HIGHEST, TieBreak.LOWEST):
            out = transition(wd, item, 0, values, prices, tie)
            assert out == (F(1, 2), F(1, 2))

    def test_dominating_point_mass(self):
        values, prices = (1, 2, 8), (1, 3)
        wd = base_distribution(values, prices, M=1)
        item = DiscreteDistribution(values, (F(0), F(0), F(1)))
        out = transition(wd, item, 0, values, prices, TieBreak.LOWEST)
        want = [F(0)] * 6
        want[2 * 2 + 0] = F(1)  # cell (v=8, p=1)
        assert out == tuple(want)

    def test_price_index_out_of_range(self):
        values, prices = (1, 2), (1,)
        wd = base_distribution(values, prices)
        item = DiscreteDistribution(values, (F(1, 2), F(1, 2)))
        with pytest.raises(ValueError):
            transition(wd, item, 1, values, prices, TieBreak.LOWEST)

    def test_mass_conservation_random(self):
        rng = random.Random(7)
        values = (1, 2, 3)
        prices = (1, F(5, 2))
        for _ in range(50):
            parts = [rng.randint(0, 6) for _ in range(3)]
            if sum(parts) == 0:
                parts[0] = 1
            tot = sum(parts)
            item = DiscreteDistribution(values, tuple(F(p, tot) for p in parts))
            start = base_distribution(values, prices, M=1)
            tie = rng.choice(tuple(TieBreak))
            out = transition(start, item, rng.randrange(2), values, prices, tie)
            assert sum(out, F(0)) == 1


class TestCanonicalRound:
    def test_leftover_goes_to_first_fractional_cell(self):
        wd = canonical_round([F(3, 10), F(45, 100), F(1, 4)], 8)
        assert wd.units == (3, 3, 2)

    def test_exact_multiples_unchanged(self):
        wd = canonical_round([F(1, 4), F(1, 2), F(1, 4)], 8)
        assert wd.units == (2, 4, 2)

    def test_equal_thirds(self):
        wd = canonical_round([F(1, 3)] * 3, 4)
        assert wd.units == (2, 1, 1)

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            canonical_round([F(1, 2), F(1, 4)], 8)

    @given(
        weights=st.lists(st.integers(min_value=0, max_value=50), min_size=1, max_size=8).filter(
            lambda w: sum(w) > 0
        ),
        M=st.integers(min_value=1, max_value=400),
    )
    @settings(max_examples=200, deadline=None)
    def test_rounding_properties(self, weights, M):
        tot = sum(weights)
        probs = [F(w, tot) for w in weights]
        wd = canonical_round(probs, M)
        assert sum(wd.units) == M
        for u, p in zip(wd.units, probs):
            # each cell moves by strictly less than one unit
            assert abs(F(u, M) - p) < F(1, M)
            # cells already on the unit lattice never move at all
            if (p * M).denominator == 1:
                assert u == p * M


class TestRevenueOf:
    def test_sale_at_price_one(self):
        wd = canonical_round([0, 0, 1, 0], 2, k1=2, k2=2)
        assert revenue_of(wd, (1, 2), (1, 2)) == 1

    def test_no_sale_when_price_exceeds_value(self):
        wd = canonical_round([0, 1, 0, 0], 2, k1=2, k2=2)
        assert revenue_of(wd, (1, 2), (1, 2)) == 0

    def test_mixed_cells(self):
        wd = canonical_round([F(1, 2), 0, F(1, 2), 0], 8, k1=2, k2=2)
        assert revenue_of(wd, (1, 2), (1, 2)) == 1


def _restricted(items, prices, tie=TieBreak.LOWEST):
    return RestrictedInstance(Instance(tuple(items), tie), tuple(prices), 0)


class TestRunDp:
    def test_single_item_tie_between_prices(self):
        item = DiscreteDistribution((1, 2), (F(1, 2), F(1, 2)))
        ri = _restricted([item], (1, 2))
        a = run_dp(ri, M="exact")
        b = run_dp(ri, M="exact")
        assert a.predicted_revenue == 1
        assert tuple(a.prices) == tuple(b.prices)  # deterministic tie resolution
        assert a.layer_sizes == b.layer_sizes

    def test_counterexample_grid_recovers_known_optimum(self, counterexample):
        items = []
        support = (1, 3, F(7, 2), 5)
        for it in counterexample.items:
            masses = {v: m for v, m in it.positive_points()}
            items.append(
                DiscreteDistribution(
                    support, tuple(masses.get(v, F(0)) for v in support)
                )
            )
        ri = _restricted(items, (3, F(9, 2)))
        res = run_dp(ri, M="exact")
        assert tuple(res.prices) == (F(9, 2), 3)
        assert res.predicted_revenue == F(15, 4)
        assert exact_revenue(ri.instance, res.prices) == F(15, 4)
        assert res.layer_sizes[0] == 1 and len(res.layer_sizes) == 3

    def test_zero_mass_rows_stay_empty(self):
        support = (1, 2, 3)
        items = [
            DiscreteDistribution(support, (F(0), F(1, 3), F(2, 3))),
            DiscreteDistribution(support, (F(0), F(3, 4), F(1, 4))),
        ]
        ri = _restricted(items, (1, F(5, 2)))
        res = run_dp(ri, M="exact", keep_table=True)
        k2 = 2
        for layer in res.table.layers[1:]:
            for state in layer:
                assert all(u == 0 for u in state[:k2])

    def test_exact_mode_matches_brute_force(self):
        rng = random.Random(2024)
        for _ in range(40):
            tie = rng.choice(tuple(TieBreak))
            ri = random_restricted(rng, tie=tie)
            res = run_dp(ri, M="exact")
            _, best = brute_force_optimum(ri.instance, ri.price_set)
            assert exact_revenue(ri.instance, res.prices) == best

    def test_default_m_matches_side_cube(self):
        item = DiscreteDistribution((1, 2), (F(1, 2), F(1, 2)))
        ri = _restricted([item, item], (1, 3))
        res = run_dp(ri)
        assert res.M == (2 * 3) ** 3

    def test_exact_mode_m_is_denominator_power(self):
        item = DiscreteDistribution((1, 2), (F(1, 6), F(5, 6)))
        ri = _restricted([item, item], (1, 2))
        res = run_dp(ri, M="exact")
        assert res.M == 36

    def test_pure_and_compiled_agree(self):
        if not compiled_kernel_available():
            pytest.skip("compiled kernel unavailable in this build")
        rng = random.Random(99)
        for _ in range(25):
            ri = random_restricted(rng)
            a = run_dp(ri, M="exact", use_compiled=True)
            b = run_dp(ri, M="exact", use_compiled=False)
            assert tuple(a.prices) == tuple(b.prices)
            assert a.predicted_revenue == b.predicted_revenue
            assert a.layer_sizes == b.layer_sizes

    def test_rounded_default_m_both_kernels_agree(self):
        if not compiled_kernel_available():
            pytest.skip("compiled kernel unavailable in this build")
        rng = random.Random(31337)
        for _ in range(15):
            ri = random_restricted(rng)
            a = run_dp(ri, use_compiled=True)
            b = run_dp(ri, use_compiled=False)
            assert tuple(a.prices) == tuple(b.prices)
            assert a.predicted_revenue == b.predicted_revenue

    def test_state_cap_resource_error(self):
        rng = random.Random(5)
        items = []
        support = (1, 2, 3)
        for _ in range(3):
            parts = [rng.randint(1, 5) for _ in range(3)]
            tot = sum(parts)
            items.append(DiscreteDistribution(support, tuple(F(p, tot) for p in parts)))
        ri = _restricted(items, (1, 2, 3))
        with pytest.raises(ResourceLimitError) as err:
            run_dp(ri, M="exact", state_cap=2)
        assert "layer" in str(err.value)

    def test_symbolic_instance_rejected(self):
        ri = RestrictedInstance(None, None, 0, {"materialized": False})
        with pytest.raises(ResourceLimitError):
            run_dp(ri)

    def test_revenue_bound_with_default_m(self):
        rng = random.Random(404)
        for _ in range(30):
            ri = random_restricted(rng)
            res = run_dp(ri)
            _, best = brute_force_optimum(ri.instance, ri.price_set)
            achieved = exact_revenue(ri.instance, res.prices)
            n, r = ri.n, ri.price_ratio
            slack = (2 * ri.k1 * ri.k2 / (n * r) ** 2 + F(16, n)) * min(ri.price_set)
            assert achieved >= best - slack

    def test_tie_break_rules_can_differ(self):
        # a grid where the evaluator's rule changes which item wins a tie
        items = [
            DiscreteDistribution((2, 4), (F(1, 2), F(1, 2))),
            DiscreteDistribution((2, 4), (F(1, 2), F(1, 2))),
        ]
        for tie in (TieBreak.LOWEST, TieBreak.HIGHEST):
            ri = _restricted(items, (2, 4), tie=tie)
            res = run_dp(ri, M="exact")
            _, best = brute_force_optimum(ri.instance, ri.price_set)
            assert res.predicted_revenue == best
