"""Value truncations and price-space restrictions.

Truncation squeezes each item's distribution into a bounded window around an
anchor (mass below the window collapses to a low point, mass above to the
window's top), losing only a controlled revenue fraction.  Price restriction
maps arbitrary price vectors into admissible ranges.  Both directions
compose: solve on the truncated instance, lift the prices back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .distributions import CdfOracle, DiscreteDistribution, Instance
from .util import is_infinite, to_fraction


@dataclass(frozen=True)
class PriceVector:
    """One price per item; entries are positive rationals or +inf (never offer)."""

    prices: tuple

    def __post_init__(self):
        out = []
        for p in self.prices:
            if is_infinite(p):
                out.append(math.inf)
                continue
            q = to_fraction(p)
            if q <= 0:
                raise ValueError("prices must be positive")
            out.append(q)
        object.__setattr__(self, "prices", tuple(out))

    def __len__(self):
        return len(self.prices)

    def __iter__(self):
        return iter(self.prices)

    def __getitem__(self, i):
        return self.prices[i]


# restriction modes; +inf counts as larger than any finite bound


@dataclass(frozen=True)
class ClampRange:
    lo: object
    hi: object

    def __post_init__(self):
        lo, hi = to_fraction(self.lo), to_fraction(self.hi)
        if not (0 < lo <= hi):
            raise ValueError("need 0 < lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def apply(self, p):
        if is_infinite(p) or p > self.hi:
            return self.hi
        if p < self.lo:
            return self.lo
        return p


@dataclass(frozen=True)
class RaiseLow:
    a: object

    def __post_init__(self):
        a = to_fraction(self.a)
        if a <= 0:
            raise ValueError("threshold must be positive")
        object.__setattr__(self, "a", a)

    def apply(self, p):
        if is_infinite(p):
            return p
        return self.a if p < self.a else p


@dataclass(frozen=True)
class CapHigh:
    h: object

    def __post_init__(self):
        h = to_fraction(self.h)
        if h <= 0:
            raise ValueError("cap must be positive")
        object.__setattr__(self, "h", h)

    def apply(self, p):
        if is_infinite(p) or p > self.h:
            return self.h
        return p


@dataclass(frozen=True)
class ReplaceInfinite:
    pmax: object

    def __post_init__(self):
        pmax = to_fraction(self.pmax)
        if pmax <= 0:
            raise ValueError("replacement price must be positive")
        object.__setattr__(self, "pmax", pmax)

    def apply(self, p):
        return self.pmax if is_infinite(p) else p


def restrict_prices(pv: PriceVector, mode) -> PriceVector:
    if not hasattr(mode, "apply"):
        raise TypeError("mode must be ClampRange, RaiseLow, CapHigh or ReplaceInfinite")
    return PriceVector(tuple(mode.apply(p) for p in pv))


class TruncatedOracle:
    """CDF-query view of an oracle item after the truncation coupling.

    Values below lo_cut collapse to the atom lo_point (< lo_cut); values at or
    above hi_cut collapse to the atom hi_cut.  Quacks like an oracle for
    sampling and CDF queries but belongs to no named family.
    """

    def __init__(self, base, lo_point, lo_cut, hi_cut):
        if not (0 < lo_point < lo_cut <= hi_cut):
            raise ValueError("need 0 < lo_point < lo_cut <= hi_cut")
        self.base = base
        self.lo_point = float(lo_point)
        self.lo_cut = float(lo_cut)
        self.hi_cut = float(hi_cut)

    @property
    def u_min(self):
        return self.lo_point

    @property
    def u_max(self):
        return self.hi_cut

    def cdf(self, x: float) -> float:
        x = float(x)
        if x < self.lo_point:
            return 0.0
        if x >= self.hi_cut:
            return 1.0
        return self.base.cdf(min(max(x, self.lo_cut), self.hi_cut))

    def query(self, x: float, precision: float = 1e-12) -> float:
        if precision <= 0:
            raise ValueError("precision must be positive")
        return self.cdf(x)

    def prob_below(self, x: float) -> float:
        """Pr[X < x]; differs from cdf at the two collapse atoms."""
        x = float(x)
        if x <= self.lo_point:
            return 0.0
        if x > self.hi_cut:
            return 1.0
        return self.base.cdf(min(max(x, self.lo_cut), self.hi_cut))

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        vals = self.base.sample(uniforms)
        return np.where(vals < self.lo_cut, self.lo_point, np.minimum(vals, self.hi_cut))


def _truncate_discrete(item: DiscreteDistribution, lo_point, lo_cut, hi_cut):
    acc = {}
    for v, m in zip(item.support, item.masses):
        if m == 0:
            continue
        if v < lo_cut:
            key = lo_point
        elif v >= hi_cut:
            key = hi_cut
        else:
            key = v
        acc[key] = acc.get(key, Fraction(0)) + m
    pts = sorted(acc)
    return DiscreteDistribution(tuple(pts), tuple(acc[p] for p in pts))


def _truncate_instance(instance: Instance, lo_point, lo_cut, hi_cut) -> Instance:
    items = []
    for item in instance.items:
        if isinstance(item, DiscreteDistribution):
            items.append(_truncate_discrete(item, lo_point, lo_cut, hi_cut))
        else:
            items.append(TruncatedOracle(item, lo_point, lo_cut, hi_cut))
    return Instance(tuple(items), instance.tie_break, instance.shape)


def truncate_values_mhr(instance: Instance, beta, eps) -> Instance:
    """Per-item coupling around an MHR anchor: values below eps*beta move to
    the point eps*beta/2, values at or above 2*log(1/eps)*beta move to that
    cap.  eps must lie in (0, 1/4).  Coinciding support points merge."""
    epsf = float(eps)
    if not (0.0 < epsf < 0.25):
        raise ValueError("eps must lie in (0, 1/4)")
    if float(beta) <= 0:
        raise ValueError("beta must be positive")
    if instance.all_discrete:
        e = to_fraction(eps)
        b = to_fraction(beta)
        lo_cut = e * b
        lo_point = lo_cut / 2
        hi_cut = to_fraction(2.0 * math.log(1.0 / epsf)) * b
    else:
        b = float(beta)
        lo_cut = epsf * b
        lo_point = lo_cut / 2.0
        hi_cut = 2.0 * math.log(1.0 / epsf) * b
    return _truncate_instance(instance, lo_point, lo_cut, hi_cut)


def truncate_values_regular(instance: Instance, alpha, eps) -> Instance:
    """Per-item coupling around a regular anchor: values below
    eps*alpha/(2n^4) move to eps*alpha/(4n^4), values at or above
    4n^4*alpha/eps^3 move to that cap.  eps in (0, 1)."""
    epsf = float(eps)
    if not (0.0 < epsf < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    if float(alpha) <= 0:
        raise ValueError("alpha must be positive")
    n4 = instance.n**4
    if instance.all_discrete:
        e = to_fraction(eps)
        a = to_fraction(alpha)
        lo_cut = e * a / (2 * n4)
        lo_point = lo_cut / 2
        hi_cut = 4 * n4 * a / e**3
    else:
        a = float(alpha)
        lo_cut = epsf * a / (2.0 * n4)
        lo_point = lo_cut / 2.0
        hi_cut = 4.0 * n4 * a / epsf**3
    return _truncate_instance(instance, lo_point, lo_cut, hi_cut)


def lift_solution_mhr(pv: PriceVector, beta, eps) -> PriceVector:
    """Map prices found on the truncated instance back to admissible originals:
    clamp into [eps*beta/2, 2*log(1/eps)*beta], then raise anything below
    eps*beta up to it."""
    epsf = float(eps)
    if not (0.0 < epsf < 0.25):
        raise ValueError("eps must lie in (0, 1/4)")
    b = to_fraction(beta)
    e = to_fraction(eps)
    lo = e * b / 2
    hi = to_fraction(2.0 * math.log(1.0 / epsf)) * b
    out = restrict_prices(pv, ClampRange(lo, hi))
    return restrict_prices(out, RaiseLow(e * b))


def lift_solution_regular(pv: PriceVector, alpha, eps, n: int) -> PriceVector:
    """Regular analog of lift_solution_mhr: clamp into
    [eps*alpha/(4n^4), 4n^4*alpha/eps^3], then raise below eps*alpha/(2n^4)."""
    epsf = float(eps)
    if not (0.0 < epsf < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    a = to_fraction(alpha)
    e = to_fraction(eps)
    n4 = n**4
    lo = e * a / (4 * n4)
    hi = 4 * n4 * a / e**3
    out = restrict_prices(pv, ClampRange(lo, hi))
    return restrict_prices(out, RaiseLow(e * a / (2 * n4)))
