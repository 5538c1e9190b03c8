"""Geometric price grids and horizontal/vertical value discretization.

The price grid is an exact geometric sequence with ratio 1/(1-eps^2); any
price snaps down onto it losing at most a 2*eps revenue fraction.  Horizontal
discretization pushes every value v onto the unique grid point a_j in
[1+delta-delta^2, 1+delta]*v; vertical rounding then floors the resulting
masses to multiples of 1/(rn)^3 so the DP can work over integers.

At the theorem's constants (delta = (eps/8)^8) the grids have far more points
than can ever be materialized; full_discretize then returns a symbolic
RestrictedInstance carrying the formula counts and grid parameters in
provenance instead of a concrete support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Union

from .distributions import DiscreteDistribution, Instance
from .reductions import PriceVector
from .util import ResourceLimitError, is_infinite, rational_str, to_fraction


def _ceil_log2(r) -> int:
    """Smallest k >= 0 with 2^k >= r."""
    if isinstance(r, float):
        if r <= 1.0:
            return 0
        return math.ceil(math.log2(r))
    rq = to_fraction(r)
    if rq <= 1:
        return 0
    k = max((rq.numerator // rq.denominator).bit_length() - 1, 0)
    while Fraction(2) ** k < rq:
        k += 1
    while k > 0 and Fraction(2) ** (k - 1) >= rq:
        k -= 1
    return k


def _floor_log_ratio(value: Fraction, ratio: Fraction) -> int:
    """Largest j >= 0 with ratio^j <= value, exact.  Needs value >= 1, ratio > 1."""
    if value < 1:
        raise ValueError("value must be >= 1")
    j = int(math.log(float(value)) / math.log(float(ratio))) if value > 1 else 0
    j = max(j, 0)
    p = ratio**j
    while p > value:
        j -= 1
        p /= ratio
    while p * ratio <= value:
        j += 1
        p *= ratio
    return j


def value_grid_bound(r) -> float:
    """Admissible upper bound on delta: 1/(4*ceil(log2 r))^{4/3} (>= 1 clamped)."""
    L = max(1, _ceil_log2(r))
    return (4.0 * L) ** (-4.0 / 3.0)


def eps_bound(r) -> float:
    """Admissible upper bound on full_discretize's eps: 1/(4*ceil(log2 r))^{1/6}."""
    L = max(1, _ceil_log2(r))
    return (4.0 * L) ** (-1.0 / 6.0)


def price_grid(u_min, u_max, eps, cap: int = 1_000_000) -> tuple:
    """{(1+eps^2-eps)*u_min / (1-eps^2)^i : i = 0..floor(log_{1/(1-eps^2)}(u_max/u_min))},
    ascending, exact rationals."""
    e = to_fraction(eps)
    # the closed upper end is usable: 1-e^2 = 3/4 keeps the ratio finite
    if not (0 < e <= Fraction(1, 2)):
        raise ValueError("eps must lie in (0, 1/2]")
    lo, hi = to_fraction(u_min), to_fraction(u_max)
    if not (0 < lo <= hi):
        raise ValueError("need 0 < u_min <= u_max")
    base = (1 + e * e - e) * lo
    ratio = 1 / (1 - e * e)
    target = hi / lo
    out = []
    acc = Fraction(1)
    while acc <= target:
        out.append(base * acc)
        acc *= ratio
        if len(out) > cap:
            raise ResourceLimitError(f"price grid exceeds cap {cap}")
    return tuple(out)


def snap_prices(pv: PriceVector, u_min, eps) -> PriceVector:
    """Map each price down to its grid point; output in [1-eps, 1+eps^2-eps]*input."""
    e = to_fraction(eps)
    if not (0 < e <= Fraction(1, 2)):
        raise ValueError("eps must lie in (0, 1/2]")
    lo = to_fraction(u_min)
    if lo <= 0:
        raise ValueError("u_min must be positive")
    base = (1 + e * e - e) * lo
    ratio = 1 / (1 - e * e)
    out = []
    for p in pv:
        if is_infinite(p):
            raise ValueError("cannot snap an infinite price")
        p = to_fraction(p)
        if p < lo:
            raise ValueError(f"price {p} below u_min {lo}")
        j = _floor_log_ratio(p / lo, ratio)
        q = base * ratio**j
        if not ((1 - e) * p <= q <= (1 + e * e - e) * p):
            raise AssertionError("snapped price left the guaranteed window")
        out.append(q)
    return PriceVector(tuple(out))


class HorizontalResult(NamedTuple):
    instance: Instance  # items over the common support of occupied grid points
    grid: tuple  # full value grid, or None when only occupied points were built
    mass_corrections: tuple  # (item index, correction, grid index) for oracle deficits
    grid_count: int  # number of points in the full grid, floor(log_{1+xi} r) + 1


# keep the full grid in the result only while it is cheap to do so
_FULL_GRID_KEEP = 4096


def horizontal_grid_count(u_min, u_max, delta) -> int:
    """Size of the full value grid, floor(log_{1+xi}(u_max/u_min)) + 1."""
    lo = to_fraction(u_min)
    hi = to_fraction(u_max)
    if not 0 < lo <= hi:
        raise ValueError("need 0 < u_min <= u_max")
    d = to_fraction(delta)
    if not 0 < d < 1:
        raise ValueError("delta must lie in (0, 1)")
    xi = d * d / (1 + d - d * d)
    return _floor_log_ratio(hi / lo, 1 + xi) + 1


def _declared_bounds(instance: Instance, u_min, u_max):
    if u_min is None:
        vals = []
        for it in instance.items:
            lo = it.u_min
            vals.append(to_fraction(lo) if not isinstance(lo, float) else to_fraction(lo))
        u_min = min(vals)
    else:
        u_min = to_fraction(u_min)
    if u_max is None:
        vals = []
        for it in instance.items:
            hi = it.u_max
            if is_infinite(hi):
                raise ValueError(
                    "unbounded item: declare u_max or truncate the instance first"
                )
            vals.append(to_fraction(hi))
        u_max = max(vals)
    else:
        u_max = to_fraction(u_max)
    if not (0 < u_min <= u_max):
        raise ValueError("need 0 < u_min <= u_max (truncate away zero values first)")
    return u_min, u_max


def _prob_below(item, x, precision: float = 1e-12) -> float:
    """Pr[X < x]; for continuous oracles this is the CDF query at the stated
    precision, for anything carrying atoms the strict version."""
    if hasattr(item, "prob_below"):
        return item.prob_below(x)
    return item.query(x, precision) if hasattr(item, "query") else item.cdf(x)


def horizontal_discretize(
    instance: Instance,
    delta,
    u_min=None,
    u_max=None,
    grid_cap: int = 100_000,
) -> HorizontalResult:
    """Common geometric value grid a_j = (1+delta)(1+xi)^j * u_min with
    xi = delta^2/(1+delta-delta^2), j = 0..floor(log_{1+xi}(u_max/u_min)).

    Each value v in [a_j/(1+delta), a_j/(1+delta-delta^2)) maps to a_j; for
    oracle items the cell mass is the CDF increment over that preimage.  Any
    residual oracle mass goes to the grid point nearest the item's median and
    is reported in mass_corrections.
    """
    u_min, u_max = _declared_bounds(instance, u_min, u_max)
    r = u_max / u_min
    bound = value_grid_bound(r)
    d = to_fraction(delta)
    if not (0 < float(d) < bound):
        raise ValueError(f"delta must lie in (0, {bound}) for r={float(r)}")
    xi = d * d / (1 + d - d * d)
    ratio = 1 + xi
    J = _floor_log_ratio(r, ratio)
    all_discrete = instance.all_discrete
    # grid values are u_min*(1+xi)^j exactly; their digit counts grow with j,
    # so budget the representation, not just the point count
    per_val_bits = (J + 1) * max(ratio.denominator.bit_length(), 1)
    if all_discrete:
        if per_val_bits > (1 << 26):
            raise ResourceLimitError(
                f"exact grid values would need ~{per_val_bits} bits each"
            )
    else:
        if J + 1 > grid_cap:
            raise ResourceLimitError(f"value grid needs {J + 1} points, cap {grid_cap}")
        if (J + 1) * per_val_bits // 2 > (1 << 31):
            raise ResourceLimitError("exact value grid would exceed the memory budget")

    corrections = []
    if all_discrete:
        # occupied cells only; the full grid is never materialized unless tiny
        per_item = []
        for idx, item in enumerate(instance.items):
            cells = {}
            for v, m in item.positive_points():
                if not (u_min <= v <= u_max):
                    raise ValueError(
                        f"item {idx}: support value {v} outside declared [u_min, u_max]"
                    )
                j = _floor_log_ratio(v / u_min, ratio)
                cells[j] = cells.get(j, Fraction(0)) + m
            per_item.append(cells)
        occupied = sorted(set().union(*(set(c) for c in per_item)))
        base = u_min * (1 + d)
        points = {j: base * ratio**j for j in occupied}
        support = tuple(points[j] for j in occupied)
        new_items = [
            DiscreteDistribution(
                support, tuple(cells.get(j, Fraction(0)) for j in occupied)
            )
            for cells in per_item
        ]
        grid = None
        if J + 1 <= _FULL_GRID_KEEP:
            grid = []
            acc = base
            for _ in range(J + 1):
                grid.append(acc)
                acc = acc * ratio
            grid = tuple(grid)
    else:
        # boundaries b_j = u_min * ratio^j; cell j = [b_j, b_{j+1}); a_j = b_j*(1+d)
        boundaries = []
        acc = u_min
        for _ in range(J + 2):
            boundaries.append(acc)
            acc = acc * ratio
        grid = tuple(b * (1 + d) for b in boundaries[:-1])

        precision = 1.0 / (10.0 * (J + 1))
        full_masses = []
        for idx, item in enumerate(instance.items):
            masses = [Fraction(0)] * (J + 1)
            if isinstance(item, DiscreteDistribution):
                for v, m in item.positive_points():
                    if not (u_min <= v <= u_max):
                        raise ValueError(
                            f"item {idx}: support value {v} outside declared [u_min, u_max]"
                        )
                    j = _floor_log_ratio(v / u_min, ratio)
                    masses[j] += m
            else:
                floats = [float(b) for b in boundaries]
                below = [_prob_below(item, x, precision) for x in floats]
                for j in range(J + 1):
                    hi_p = 1.0 if j == J else below[j + 1]
                    m = to_fraction(hi_p) - to_fraction(below[j])
                    if m < 0:
                        m = Fraction(0)
                    masses[j] = m
                deficit = 1 - sum(masses)
                if deficit != 0:
                    med = item.inverse_cdf(0.5) if hasattr(item, "inverse_cdf") else float(
                        boundaries[J // 2]
                    )
                    gridf = [float(g) for g in grid]
                    tgt = min(range(J + 1), key=lambda j: abs(gridf[j] - med))
                    masses[tgt] += deficit
                    if masses[tgt] < 0:
                        raise ValueError(
                            f"item {idx}: oracle mass correction went negative"
                        )
                    corrections.append((idx, float(deficit), tgt))
            if sum(masses) != 1:
                raise AssertionError("grid masses must sum to exactly 1")
            full_masses.append(masses)
        occupied = sorted(
            {j for masses in full_masses for j, m in enumerate(masses) if m > 0}
        )
        support = tuple(grid[j] for j in occupied)
        new_items = [
            DiscreteDistribution(support, tuple(masses[j] for j in occupied))
            for masses in full_masses
        ]
    inst = Instance(tuple(new_items), instance.tie_break, instance.shape)
    return HorizontalResult(inst, grid, tuple(corrections), J + 1)


def back_map_prices(pv: PriceVector, delta) -> PriceVector:
    """Divide every price by (1+delta-delta^2)(1+delta), the horizontal back-map."""
    d = to_fraction(delta)
    div = (1 + d - d * d) * (1 + d)
    return PriceVector(tuple(p if is_infinite(p) else to_fraction(p) / div for p in pv))


def _round_masses(masses, unit: Fraction):
    floored = [math.floor(m / unit) * unit for m in masses[1:]]
    head = 1 - sum(floored, Fraction(0))
    if head < 0:
        raise AssertionError("vertical rounding produced negative head mass")
    return (head, *floored)


def vertical_round(obj, r, n: int):
    """Floor all masses except the lowest support point's to multiples of
    1/(rn)^3; the lowest point absorbs the remainder.  Accepts an Instance
    with common support or a RestrictedInstance; returns the same kind."""
    rq = to_fraction(r)
    if rq <= 0 or n < 1:
        raise ValueError("need r > 0 and n >= 1")
    unit = 1 / (rq * n) ** 3
    if isinstance(obj, RestrictedInstance):
        if not obj.is_materialized:
            raise ValueError("cannot vertically round a symbolic RestrictedInstance")
        inner = vertical_round(obj.instance, r, n)
        return RestrictedInstance(inner, obj.price_set, obj.delta, obj.provenance)
    inst: Instance = obj
    support = None
    for it in inst.items:
        if not isinstance(it, DiscreteDistribution):
            raise TypeError("vertical rounding needs discrete items")
        if support is None:
            support = it.support
        elif it.support != support:
            raise ValueError("items must share a common support")
    items = tuple(
        DiscreteDistribution(it.support, _round_masses(it.masses, unit))
        for it in inst.items
    )
    return Instance(items, inst.tie_break, inst.shape)


@dataclass(frozen=True)
class RestrictedInstance:
    """A discretized instance with a finite price set.

    instance: items over one common support (None when only the symbolic
    grid description fits in memory); price_set: ascending exact prices
    (None when symbolic); delta: the horizontal delta used; provenance:
    JSON-safe record of grid formulas, counts and back-map constants.
    """

    instance: Union[Instance, None]
    price_set: Union[tuple, None]
    delta: Fraction
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "delta", to_fraction(self.delta))
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.price_set is not None:
            ps = tuple(to_fraction(p) for p in self.price_set)
            if not ps:
                raise ValueError("price_set must be nonempty")
            if ps[0] <= 0:
                raise ValueError("prices must be positive")
            for a, b in zip(ps, ps[1:]):
                if not a < b:
                    raise ValueError("price_set must be strictly increasing")
            object.__setattr__(self, "price_set", ps)
        if self.instance is not None:
            support = None
            for it in self.instance.items:
                if not isinstance(it, DiscreteDistribution):
                    raise TypeError("RestrictedInstance items must be discrete")
                if support is None:
                    support = it.support
                elif it.support != support:
                    raise ValueError("items must share the identical support list")

    @property
    def is_materialized(self) -> bool:
        return self.instance is not None and self.price_set is not None

    @property
    def support(self) -> tuple:
        return self.instance.items[0].support

    @property
    def k1(self) -> int:
        return len(self.support)

    @property
    def k2(self) -> int:
        return len(self.price_set)

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def price_ratio(self) -> Fraction:
        return self.price_set[-1] / self.price_set[0]

    @property
    def tie_break(self):
        return self.instance.tie_break


def _count_by_float(log_r: float, log_ratio: float) -> int:
    if log_r <= 0:
        return 1
    return int(math.floor(log_r / log_ratio)) + 1


def full_discretize(
    instance: Instance,
    eps,
    *,
    delta=None,
    price_eps=None,
    u_min=None,
    u_max=None,
    price_lo=None,
    price_hi=None,
    value_grid_cap: int = 200_000,
    price_grid_cap: int = 100_000,
) -> RestrictedInstance:
    """Theorem-grade reduction to a restricted instance.

    Defaults follow the reduction's proof: delta = (eps/8)^8 and a price grid
    whose snap slack 2*eps' equals 0.5*(eps/8)^8, i.e. eps' = (eps/8)^8/4;
    both are overridable and always recorded in provenance.  When the implied
    grids exceed the caps the result is symbolic: provenance carries the
    formula counts k1_grid/k2_grid and float grid parameters, and no support
    or price set is materialized.
    """
    u_min_d, u_max_d = _declared_bounds(instance, u_min, u_max)
    r = u_max_d / u_min_d
    ebound = eps_bound(r)
    epsf = float(eps)
    if not (0.0 < epsf < ebound):
        raise ValueError(
            f"eps={epsf} out of range for r={float(r)}; admissible bound {ebound}"
        )
    e = to_fraction(eps)
    d = to_fraction(delta) if delta is not None else (e / 8) ** 8
    if not (0 < float(d) < value_grid_bound(r)):
        raise ValueError(
            f"delta={float(d)} out of range; admissible bound {value_grid_bound(r)}"
        )
    e2 = to_fraction(price_eps) if price_eps is not None else (e / 8) ** 8 / 4
    if not (0 < e2 < Fraction(1, 2)):
        raise ValueError("price grid eps must lie in (0, 1/2)")

    xi = d * d / (1 + d - d * d)
    ratio = 1 + xi
    log_r = math.log(float(r))
    k1_grid = _count_by_float(log_r, math.log1p(float(xi)))
    back_div = (1 + d - d * d) * (1 + d)

    provenance = {
        "u_min": rational_str(u_min_d),
        "u_max": rational_str(u_max_d),
        "r": float(r),
        "eps": rational_str(e),
        "delta": rational_str(d),
        "xi": rational_str(xi),
        "price_eps": rational_str(e2),
        "k1_grid": k1_grid,
        "back_map_divisor": rational_str(back_div),
        "value_grid_ratio": float(ratio),
        "value_grid_base": float(u_min_d) * (1.0 + float(d)),
        "mass_corrections": [],
    }

    material_values = k1_grid <= value_grid_cap
    if material_values:
        try:
            horiz = horizontal_discretize(
                instance, d, u_min=u_min_d, u_max=u_max_d, grid_cap=value_grid_cap
            )
        except ResourceLimitError:
            # exact grid values too large to represent; fall back to symbolic
            material_values = False
            horiz = None
    if material_values:
        provenance["mass_corrections"] = [list(c) for c in horiz.mass_corrections]
        # support is already pruned to the union of positive-mass grid points;
        # all-zero rows carry nothing through the recurrence
        inner = horiz.instance
        support = inner.items[0].support
        v_lo, v_hi = support[0], support[-1]
        provenance["k1"] = len(support)
    else:
        inner = None
        v_lo = float(u_min_d) * (1.0 + float(d))
        v_hi = v_lo * math.exp(math.log1p(float(xi)) * (k1_grid - 1))
        provenance["k1"] = None

    p_lo = to_fraction(price_lo) if price_lo is not None else v_lo
    p_hi = to_fraction(price_hi) if price_hi is not None else v_hi
    if isinstance(v_lo, Fraction):
        p_lo = max(to_fraction(p_lo), v_lo) if price_lo is not None else v_lo
        p_hi = min(to_fraction(p_hi), v_hi) if price_hi is not None else v_hi
        if p_lo > p_hi:
            p_lo, p_hi = v_lo, v_hi
        pr = float(p_hi / p_lo)
        provenance["price_lo"] = rational_str(to_fraction(p_lo))
        provenance["price_hi"] = rational_str(to_fraction(p_hi))
    else:
        p_lo, p_hi = float(p_lo), float(p_hi)
        pr = p_hi / p_lo
        provenance["price_lo"] = p_lo
        provenance["price_hi"] = p_hi
    pratio = 1 / (1 - e2 * e2)
    # pratio - 1 underflows float(pratio) for theorem-grade eps; log via log1p
    k2_grid = _count_by_float(
        math.log(max(pr, 1.0)), math.log1p(float(e2 * e2 / (1 - e2 * e2)))
    )
    provenance["k2_grid"] = k2_grid
    provenance["price_grid_ratio"] = float(pratio)

    if material_values and k2_grid <= price_grid_cap:
        prices = price_grid(p_lo, p_hi, e2, cap=price_grid_cap)
        provenance["k2"] = len(prices)
        provenance["price_grid_base"] = float(prices[0])
        provenance["materialized"] = True
        return RestrictedInstance(inner, prices, d, provenance)

    provenance["k2"] = None
    provenance["price_grid_base"] = float(p_lo) * (1.0 + float(e2 * e2 - e2))
    provenance["materialized"] = False
    return RestrictedInstance(None, None, d, provenance)
