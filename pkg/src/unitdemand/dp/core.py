"""Dynamic program over rounded winning-cell distributions.

The solver tracks, item by item, the distribution of the (value, price) cell
occupied by the current best item, with all probabilities rounded to integer
multiples of 1/M.  Item masses are integer multiples of 1/D where D is the
lcm of the mass denominators, so a transition is pure integer arithmetic:
every updated cell numerator is exact over M*D and canonical rounding maps it
back to units over M.  A compiled kernel handles the int64-safe case; a
big-int Python twin handles everything else and doubles as the fallback when
the extension is not built.

Grid values coming out of the discretization pipeline are exact rationals of
the form u_min*(1+xi)^j whose digit counts grow with j, so every ordering
step here is float-first with exact rational arbitration only where floats
collide.  Floats of exact rationals are correctly rounded, hence monotone:
distinct floats imply the same strict order as the exact values.
"""
from __future__ import annotations

import math
import os
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from ..distributions import DiscreteDistribution, TieBreak
from ..reductions import PriceVector
from ..util import ResourceLimitError, to_fraction
from . import _kernel_py

try:  # built by setup.py; optional
    from . import _kernel as _kernel_c
except ImportError:
    _kernel_c = None

# int64 products stay below 2^61, leaving headroom for in-kernel sums
_INT64_LIMIT = 1 << 61

# refuse to let a layer grow past this many distinct states by default
DEFAULT_STATE_CAP = 5_000_000

# cap on k1*k2 before the table itself becomes the bottleneck
_CELL_CAP = 1 << 20

# output elements per expansion batch (int64), keeps peak memory ~128 MB
_BATCH_ELEMS = 1 << 24


def compiled_kernel_available() -> bool:
    if os.environ.get("UNITDEMAND_PURE") == "1":
        return False
    return _kernel_c is not None


@dataclass(frozen=True)
class WinningDistribution:
    """Distribution of the winning (value index, price index) cell.

    ``units[i1 * k2 + i2]`` is the probability of cell (i1, i2) expressed in
    integer units of 1/M, row-major over value index then price index.
    """

    units: tuple
    k1: int
    k2: int
    M: int

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError("grid dimensions must be positive")
        if self.M < 1:
            raise ValueError("M must be a positive integer")
        if len(self.units) != self.k1 * self.k2:
            raise ValueError("units length must equal k1*k2")
        total = 0
        for u in self.units:
            if not isinstance(u, int) or isinstance(u, bool) or u < 0:
                raise ValueError("units must be nonnegative integers")
            total += u
        if total != self.M:
            raise ValueError(f"units sum to {total}, expected M={self.M}")

    @classmethod
    def point_mass(cls, k1: int, k2: int, M: int, cell: int) -> "WinningDistribution":
        units = [0] * (k1 * k2)
        units[cell] = M
        return cls(tuple(units), k1, k2, M)

    def prob(self, i1: int, i2: int) -> Fraction:
        return Fraction(self.units[i1 * self.k2 + i2], self.M)

    def as_probs(self) -> tuple:
        return tuple(Fraction(u, self.M) for u in self.units)


def _cum_count(values, values_float, t, t_float, weak, pad):
    """Index i such that values[:i] are < t (weak: <= t), floats first.

    values_float must be the correctly rounded floats of values; candidates
    inside the pad window around t_float get exact arbitration.  pad must
    bound |t_float - t| plus the float error of any candidate value; it is
    sized from the operand magnitudes, not |t|, because t is a difference
    and cancellation leaves the absolute error at the operand scale.
    """
    lo = bisect_left(values_float, t_float - pad)
    hi = bisect_right(values_float, t_float + pad)
    if lo == hi:
        return lo
    idx = lo
    for k in range(lo, hi):
        v = values[k]
        if v < t or (weak and v == t):
            idx = k + 1
        else:
            break
    return idx


class TransitionTables:
    """Gap machinery shared by the integer kernels and the exact evaluator.

    Precomputes, for a fixed (values, prices, tie_break) triple, the cell gap
    array, the gap-sorted cell order, and the boundaries of equal-gap groups.
    Cells are indexed row-major: cell = i1 * k2 + i2.
    """

    def __init__(self, values: Sequence, prices: Sequence, tie_break: TieBreak):
        vals = tuple(to_fraction(v) for v in values)
        prcs = tuple(to_fraction(p) for p in prices)
        if not vals or not prcs:
            raise ValueError("values and prices must be nonempty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("values must be strictly increasing")
        if any(b <= a for a, b in zip(prcs, prcs[1:])):
            raise ValueError("prices must be strictly increasing")
        if any(p <= 0 for p in prcs):
            raise ValueError("prices must be positive")
        self.values = vals
        self.prices = prcs
        self.tie_break = TieBreak(tie_break)
        self.k1 = len(vals)
        self.k2 = len(prcs)
        K = self.k1 * self.k2
        if K > _CELL_CAP:
            raise ResourceLimitError(f"cell grid of {K} entries exceeds {_CELL_CAP}")
        self.values_float = tuple(float(v) for v in vals)
        self.prices_float = tuple(float(p) for p in prcs)
        k2 = self.k2
        self.gaps = tuple(vals[c // k2] - prcs[c % k2] for c in range(K))
        gaps_float = tuple(
            self.values_float[c // k2] - self.prices_float[c % k2] for c in range(K)
        )
        # float-first sort with exact repair: a float gap of two correctly
        # rounded operands errs by up to ~2u(|v|+|p|), so cells whose exact
        # gaps are equal (or misordered by a few ulps) need not share a float.
        # Cells whose uncertainty intervals overlap are clustered and sorted
        # exactly; disjoint intervals prove strict exact order.
        err = tuple(
            4.0
            * (abs(self.values_float[c // k2]) + abs(self.prices_float[c % k2]))
            * 2.22e-16
            + 5e-308
            for c in range(K)
        )
        order = sorted(range(K), key=lambda c: (gaps_float[c], c))
        clusters = []  # [start position in order, max of (float gap + err)]
        for pos, c in enumerate(order):
            lo_c = gaps_float[c] - err[c]
            hi_c = gaps_float[c] + err[c]
            if clusters and lo_c <= clusters[-1][1]:
                clusters[-1][1] = max(clusters[-1][1], hi_c)
                # an interval can reach back past the current cluster; merge
                while len(clusters) > 1 and lo_c <= clusters[-2][1]:
                    _, top_hi = clusters.pop()
                    clusters[-1][1] = max(clusters[-1][1], top_hi)
            else:
                clusters.append([pos, hi_c])
        bounds = [s for s, _ in clusters] + [K]
        fixed = []
        for i in range(len(clusters)):
            run = order[bounds[i] : bounds[i + 1]]
            if len(run) > 1:
                run.sort(key=lambda c: (self.gaps[c], c))
            fixed.extend(run)
        self.order = tuple(fixed)
        cluster_starts = set(bounds[1:-1])
        starts = [0]
        for pos in range(1, K):
            if pos in cluster_starts or self.gaps[self.order[pos - 1]] != self.gaps[
                self.order[pos]
            ]:
                starts.append(pos)
        starts.append(K)
        self.group_start = tuple(starts)
        self.base_cell = self.order[0]
        # HIGHEST means a later item wins ties, so the displaced-mass sum is weak
        self.second_weak = self.tie_break is TieBreak.HIGHEST
        self._gaps_float = gaps_float

    # -- per-item preparation ------------------------------------------------

    def align_masses(self, item: DiscreteDistribution) -> tuple:
        """Mass of the item at each grid value (zero where absent)."""
        lookup = dict(zip(item.support, item.masses))
        grid = set(self.values)
        for v, m in item.positive_points():
            if v not in grid:
                raise ValueError(
                    f"item has mass at {float(v)} which is not a grid value"
                )
        return tuple(lookup.get(v, Fraction(0)) for v in self.values)

    def item_units(self, masses: Sequence, D: int) -> list:
        units = []
        for m in masses:
            scaled = to_fraction(m) * D
            if scaled.denominator != 1:
                raise ValueError("item mass is not a multiple of 1/D")
            units.append(int(scaled))
        if sum(units) != D:
            raise ValueError("item masses must sum to 1")
        return units

    def _coef_rows(self, cums):
        """coef[j][cell] = cums[i] with i = #{values whose gap at price j loses
        to gap(cell)}.  LOWEST keeps the incumbent on ties (weak comparison);
        HIGHEST makes it strict."""
        weak = self.tie_break is TieBreak.LOWEST
        vmax = abs(self.values_float[-1])
        rows = []
        for j in range(self.k2):
            pj = self.prices[j]
            pjf = self.prices_float[j]
            row = []
            for cell in range(self.k1 * self.k2):
                t = self.gaps[cell] + pj
                tf = self._gaps_float[cell] + pjf
                mag = (
                    abs(self.values_float[cell // self.k2])
                    + abs(self.prices_float[cell % self.k2])
                    + abs(pjf)
                    + vmax
                )
                pad = 4.0 * mag * 2.22e-16 + 5e-308
                idx = _cum_count(self.values, self.values_float, t, tf, weak, pad)
                row.append(cums[idx])
            rows.append(row)
        return rows

    def keep_coefficients(self, units: Sequence, D: int) -> list:
        """Integer first-term coefficients over D for the kernels."""
        cums = [0]
        for u in units:
            cums.append(cums[-1] + u)
        return self._coef_rows(cums)

    def prepare_item(self, item_or_masses) -> tuple:
        """Exact per-item data for :meth:`step`: (Fraction coef rows, masses)."""
        if isinstance(item_or_masses, DiscreteDistribution):
            masses = self.align_masses(item_or_masses)
        else:
            masses = tuple(to_fraction(m) for m in item_or_masses)
            if len(masses) != self.k1:
                raise ValueError("mass vector length must equal the value count")
            if sum(masses) != 1:
                raise ValueError("item masses must sum to 1")
        cums = [Fraction(0)]
        for m in masses:
            cums.append(cums[-1] + m)
        return self._coef_rows(cums), masses

    # -- exact transition over Fractions --------------------------------------

    def step(self, probs: Sequence, prepared: tuple, j: int) -> list:
        """One exact transition of the winning-cell distribution.

        ``probs`` is a length-K Fraction vector; ``prepared`` comes from
        :meth:`prepare_item`; ``j`` is the price index assigned to the item.
        """
        coef_rows, masses = prepared
        K = self.k1 * self.k2
        displaced = [None] * K  # prior mass the new item beats, per landing cell
        acc = Fraction(0)
        gs = self.group_start
        for g in range(len(gs) - 1):
            lo, hi = gs[g], gs[g + 1]
            gsum = Fraction(0)
            for pos in range(lo, hi):
                cell = self.order[pos]
                if not self.second_weak and cell % self.k2 == j:
                    displaced[cell] = acc
                gsum += probs[cell]
            acc += gsum
            if self.second_weak:
                for pos in range(lo, hi):
                    cell = self.order[pos]
                    if cell % self.k2 == j:
                        displaced[cell] = acc
        coef = coef_rows[j]
        out = []
        for cell in range(K):
            n = probs[cell] * coef[cell]
            if cell % self.k2 == j:
                n += displaced[cell] * masses[cell // self.k2]
            out.append(n)
        return out


# -- public ops ---------------------------------------------------------------


def base_distribution(values: Sequence, prices: Sequence, M: int = 1) -> WinningDistribution:
    """Initial state: all mass on the cell with the smallest gap.

    Ties in the gap go to the lexicographically smallest (value index, price
    index) pair, which is the first such cell in row-major order.
    """
    tabs = TransitionTables(values, prices, TieBreak.LOWEST)
    return WinningDistribution.point_mass(tabs.k1, tabs.k2, int(M), tabs.base_cell)


def transition(
    wd: WinningDistribution,
    item: DiscreteDistribution,
    j: int,
    values: Sequence,
    prices: Sequence,
    tie_break: TieBreak,
) -> tuple:
    """Exact (unrounded) transition; returns the k1*k2 Fraction vector.

    The integer kernels must agree with this after canonical rounding.
    """
    tabs = TransitionTables(values, prices, tie_break)
    if wd.k1 != tabs.k1 or wd.k2 != tabs.k2:
        raise ValueError("state shape does not match the grids")
    if not 0 <= j < tabs.k2:
        raise ValueError("price index out of range")
    prepared = tabs.prepare_item(item)
    return tuple(tabs.step(list(wd.as_probs()), prepared, j))


def canonical_round(matrix, M: int, k1: Optional[int] = None, k2: Optional[int] = None) -> WinningDistribution:
    """Round a probability matrix to integer units over M.

    Floors every entry to a multiple of 1/M, then hands the leftover l units
    to the first l cells with a positive fractional part, scanning row-major
    from the top.  The leftover count is an exact integer by construction;
    that is asserted, not repaired.
    """
    if M < 1:
        raise ValueError("M must be a positive integer")
    rows = list(matrix)
    if rows and isinstance(rows[0], (list, tuple)):
        flat = [to_fraction(x) for row in rows for x in row]
        k1 = len(rows) if k1 is None else k1
        k2 = len(rows[0]) if k2 is None else k2
    else:
        flat = [to_fraction(x) for x in rows]
        if k1 is None and k2 is None:
            k1, k2 = 1, len(flat)
        elif k1 is None:
            k1 = len(flat) // k2
        elif k2 is None:
            k2 = len(flat) // k1
    if k1 * k2 != len(flat):
        raise ValueError("matrix size does not match k1*k2")
    if any(x < 0 for x in flat):
        raise ValueError("probabilities must be nonnegative")
    if sum(flat) != 1:
        raise ValueError("probabilities must sum to exactly 1")
    units = []
    leftover = Fraction(0)
    fractional = []
    for x in flat:
        scaled = x * M
        q = scaled.numerator // scaled.denominator
        units.append(q)
        frac = scaled - q
        fractional.append(frac > 0)
        leftover += frac
    assert leftover.denominator == 1, "fractional parts must sum to an integer"
    l = int(leftover)
    for cell in range(len(units)):
        if l == 0:
            break
        if fractional[cell]:
            units[cell] += 1
            l -= 1
    return WinningDistribution(tuple(units), k1, k2, int(M))


def revenue_of(wd: WinningDistribution, values: Sequence, prices: Sequence) -> Fraction:
    """Expected payment: sum of price * cell mass over cells that sell."""
    vals = [to_fraction(v) for v in values]
    prcs = [to_fraction(p) for p in prices]
    if len(vals) != wd.k1 or len(prcs) != wd.k2:
        raise ValueError("grid sizes do not match the state shape")
    total = Fraction(0)
    for cell, u in enumerate(wd.units):
        if u == 0:
            continue
        v = vals[cell // wd.k2]
        p = prcs[cell % wd.k2]
        if v >= p:
            total += p * u
    return total / wd.M


class DpResult(NamedTuple):
    prices: PriceVector
    predicted_revenue: Fraction
    layer_sizes: tuple
    M: int
    table: Optional["DpTable"]


@dataclass(frozen=True)
class DpTable:
    """Per-layer reachable states plus the back-pointers that produced them."""

    layers: tuple  # layers[i] = sorted tuple of unit-vectors after i items
    back_pointers: tuple  # back_pointers[i][state] = (predecessor, price index)


def _sell_prices(tabs):
    """prices[cell] where the cell sells, None where the buyer walks."""
    out = []
    for cell in range(tabs.k1 * tabs.k2):
        v = tabs.values[cell // tabs.k2]
        p = tabs.prices[cell % tabs.k2]
        out.append(p if v >= p else None)
    return out


def _exact_row_revenue(row, sell, M):
    total = Fraction(0)
    for cell, u in enumerate(row):
        if u and sell[cell] is not None:
            total += sell[cell] * int(u)
    return total / M


def _run_dp_compiled(tabs, items, D, M, state_cap, keep_table):
    """int64 path: states keyed by big-endian bytes (lex == numeric order)."""
    K = tabs.k1 * tabs.k2
    k2 = tabs.k2
    base = np.zeros(K, dtype=np.int64)
    base[tabs.base_cell] = M
    key0 = base.astype(">i8").tobytes()
    states = {key0: base}
    back_pointers = [{key0: None}]
    layer_sizes = [1]
    layers = [(tuple(int(x) for x in base),)] if keep_table else None

    order = np.array(tabs.order, dtype=np.int64)
    gstart = np.array(tabs.group_start, dtype=np.int64)
    weak = 1 if tabs.second_weak else 0
    batch = max(1, _BATCH_ELEMS // (k2 * K))

    for layer, item in enumerate(items, start=1):
        masses = tabs.align_masses(item)
        units = tabs.item_units(masses, D)
        coef = np.array(tabs.keep_coefficients(units, D), dtype=np.int64)
        un = np.array(units, dtype=np.int64)
        keys = sorted(states)
        new = {}
        bp = {}
        for lo in range(0, len(keys), batch):
            chunk = keys[lo : lo + batch]
            st = np.stack([states[k] for k in chunk])
            out = np.empty((len(chunk) * k2, K), dtype=np.int64)
            _kernel_c.expand_states(st, coef, un, D, order, gstart, weak, k2, out)
            if not np.all(out.sum(axis=1) == M):
                raise AssertionError("kernel row mass mismatch")
            okeys = out.astype(">i8").tobytes()
            rb = K * 8
            for r in range(out.shape[0]):
                key = okeys[r * rb : (r + 1) * rb]
                if key not in new:
                    new[key] = out[r].copy()
                    bp[key] = (chunk[r // k2], r % k2)
                    if len(new) > state_cap:
                        raise ResourceLimitError(
                            f"layer {layer}: state count exceeded cap {state_cap}"
                        )
        states = new
        back_pointers.append(bp)
        layer_sizes.append(len(new))
        if keep_table:
            layers.append(
                tuple(
                    tuple(int(x) for x in new[k]) for k in sorted(new)
                )
            )

    sell = _sell_prices(tabs)
    sell_f = np.array([0.0 if p is None else float(p) for p in sell])
    keys = sorted(states)
    mat = np.stack([states[k] for k in keys]).astype(np.float64)
    rev_f = mat @ sell_f
    top = float(rev_f.max())
    # float dot error is ~K*eps relative; 1e-7 relative dwarfs it safely
    margin = 1e-7 * max(abs(top), 1e-9)
    cohort = [k for k, rf in zip(keys, rev_f) if rf >= top - margin]
    best_key = None
    best_rev = None
    for k in cohort:  # ascending keys: ties keep the lexicographically smallest
        rev = _exact_row_revenue(states[k], sell, M)
        if best_rev is None or rev > best_rev:
            best_key, best_rev = k, rev
    return best_key, best_rev, back_pointers, layer_sizes, layers


def _run_dp_pure(tabs, items, D, M, state_cap, keep_table):
    """Big-int path: states are tuples; used when int64 would overflow."""
    k2 = tabs.k2
    K = tabs.k1 * k2
    base = [0] * K
    base[tabs.base_cell] = M
    base = tuple(base)
    states = {base: None}
    back_pointers = [{base: None}]
    layer_sizes = [1]
    layers = [(base,)] if keep_table else None

    for layer, item in enumerate(items, start=1):
        masses = tabs.align_masses(item)
        units = tabs.item_units(masses, D)
        coef = tabs.keep_coefficients(units, D)
        preds = sorted(states)
        rows = _kernel_py.expand_states(
            preds, coef, units, D, tabs.order, tabs.group_start, tabs.second_weak, k2
        )
        new = {}
        bp = {}
        for idx, row in enumerate(rows):
            if sum(row) != M:
                raise AssertionError("kernel row mass mismatch")
            key = tuple(row)
            if key not in new:
                new[key] = None
                bp[key] = (preds[idx // k2], idx % k2)
                if len(new) > state_cap:
                    raise ResourceLimitError(
                        f"layer {layer}: state count exceeded cap {state_cap}"
                    )
        states = new
        back_pointers.append(bp)
        layer_sizes.append(len(new))
        if keep_table:
            layers.append(tuple(sorted(new)))

    sell = _sell_prices(tabs)
    best_key = None
    best_rev = None
    for key in sorted(states):
        rev = _exact_row_revenue(key, sell, M)
        if best_rev is None or rev > best_rev:
            best_key, best_rev = key, rev
    return best_key, best_rev, back_pointers, layer_sizes, layers


def run_dp(
    restricted,
    tie_break: Optional[TieBreak] = None,
    M: Union[int, str, None] = None,
    state_cap: int = DEFAULT_STATE_CAP,
    use_compiled: Optional[bool] = None,
    keep_table: bool = False,
) -> DpResult:
    """Solve a materialized restricted instance by forward dynamic programming.

    States are rounded winning-cell distributions (units over M).  Expansion
    iterates predecessors in sorted key order and price indices ascending;
    the first writer of a state keeps its back-pointer, so results do not
    depend on scheduling.  The winner is the final state of maximum revenue,
    ties to the lexicographically smallest unit vector.

    M=None picks ceil(n * price ratio)^3.  M="exact" picks D^n, which makes
    canonical rounding the identity and the prediction exact.
    """
    from ..discretization import RestrictedInstance

    if not isinstance(restricted, RestrictedInstance):
        raise TypeError("run_dp expects a RestrictedInstance")
    if not restricted.is_materialized:
        raise ResourceLimitError(
            "restricted instance is symbolic; rerun discretization with "
            "practical delta/price-eps so the grids materialize"
        )
    values = restricted.support
    prices = restricted.price_set
    items = restricted.instance.items
    n = len(items)
    tie = TieBreak(tie_break) if tie_break is not None else restricted.tie_break
    tabs = TransitionTables(values, prices, tie)

    D = math.lcm(*(m.denominator for it in items for m in it.masses))
    if M is None:
        scaled = n * restricted.price_ratio
        m_side = -(-scaled.numerator // scaled.denominator)
        M_val = m_side ** 3
    elif M == "exact":
        M_val = D ** n
    else:
        M_val = int(M)
        if M_val < 1:
            raise ValueError("M must be a positive integer")

    compiled_ok = compiled_kernel_available() and M_val * D < _INT64_LIMIT
    if use_compiled is True:
        if not compiled_kernel_available():
            raise RuntimeError("compiled kernel is not available")
        if M_val * D >= _INT64_LIMIT:
            raise ValueError("M*D too large for the compiled kernel")
        compiled_ok = True
    elif use_compiled is False:
        compiled_ok = False

    if compiled_ok:
        best_key, best_rev, bps, layer_sizes, layers = _run_dp_compiled(
            tabs, items, D, M_val, state_cap, keep_table
        )
    else:
        best_key, best_rev, bps, layer_sizes, layers = _run_dp_pure(
            tabs, items, D, M_val, state_cap, keep_table
        )

    chosen = []
    cur = best_key
    for i in range(n, 0, -1):
        pred, j = bps[i][cur]
        chosen.append(tabs.prices[j])
        cur = pred
    chosen.reverse()

    table = None
    if keep_table:
        bp_tuples = []
        for i, bp in enumerate(bps):
            layer = {}
            for key, val in bp.items():
                state = key if isinstance(key, tuple) else tuple(
                    int(x) for x in np.frombuffer(key, dtype=">i8")
                )
                if val is None:
                    layer[state] = None
                else:
                    pred, j = val
                    pred_t = pred if isinstance(pred, tuple) else tuple(
                        int(x) for x in np.frombuffer(pred, dtype=">i8")
                    )
                    layer[state] = (pred_t, j)
            bp_tuples.append(layer)
        table = DpTable(tuple(layers), tuple(bp_tuples))
    return DpResult(PriceVector(tuple(chosen)), best_rev, tuple(layer_sizes), M_val, table)
