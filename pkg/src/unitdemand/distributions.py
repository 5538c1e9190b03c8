"""Item-value distributions for unit-demand pricing instances.

Two representations coexist:

* DiscreteDistribution -- finite support, exact rational masses.  Everything
  downstream of discretization works on these, in exact arithmetic.
* CdfOracle -- a continuous family known only through CDF queries (the four
  shipped families have closed forms, but the contract is query access plus a
  declared anchor point).  Quantiles are found by bisection from the anchor.

An Instance bundles n independent items with a tie-breaking rule and an
optional shape tag ("mhr" or "regular") asserted by the caller; discrete
items are never classified automatically.
"""

from __future__ import annotations

import bisect
import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr, ndtri

from .util import (
    AnchoringError,
    ConvergenceError,
    to_fraction,
)

_BISECT_CAP = 400


class TieBreak(enum.Enum):
    """Winner among items with equal best surplus: lowest or highest index."""

    LOWEST = "lowest"
    HIGHEST = "highest"


class Shape(enum.Enum):
    MHR = "mhr"
    REGULAR_ONLY = "regular-only"
    NEITHER = "neither"


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite-support distribution: strictly increasing nonnegative rational
    support, nonnegative rational masses summing to exactly 1."""

    support: tuple
    masses: tuple

    def __post_init__(self):
        support = tuple(to_fraction(v) for v in self.support)
        masses = tuple(to_fraction(m) for m in self.masses)
        if len(support) != len(masses) or not support:
            raise ValueError("support and masses must be nonempty and equal-length")
        for a, b in zip(support, support[1:]):
            if not a < b:
                raise ValueError("support must be strictly increasing")
        if support[0] < 0:
            raise ValueError("support values must be nonnegative")
        if any(m < 0 for m in masses):
            raise ValueError("masses must be nonnegative")
        if sum(masses) != 1:
            raise ValueError("masses must sum to exactly 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "masses", masses)

    @cached_property
    def _cum(self) -> tuple:
        out, acc = [], Fraction(0)
        for m in self.masses:
            acc += m
            out.append(acc)
        return tuple(out)

    @property
    def u_min(self) -> Fraction:
        for v, m in zip(self.support, self.masses):
            if m > 0:
                return v
        raise ValueError("distribution has no positive mass")

    @property
    def u_max(self) -> Fraction:
        for v, m in zip(reversed(self.support), reversed(self.masses)):
            if m > 0:
                return v
        raise ValueError("distribution has no positive mass")

    def cdf(self, x) -> Fraction:
        """Pr[X <= x], exact."""
        x = to_fraction(x) if not isinstance(x, float) else x
        i = bisect.bisect_right(self.support, x)
        return Fraction(0) if i == 0 else self._cum[i - 1]

    def prob_below(self, x) -> Fraction:
        """Pr[X < x], exact."""
        x = to_fraction(x) if not isinstance(x, float) else x
        i = bisect.bisect_left(self.support, x)
        return Fraction(0) if i == 0 else self._cum[i - 1]

    def prob_at_least(self, x) -> Fraction:
        """Pr[X >= x], exact."""
        return 1 - self.prob_below(x)

    def mean(self) -> Fraction:
        return sum(v * m for v, m in zip(self.support, self.masses))

    def positive_points(self):
        """(value, mass) pairs with mass > 0."""
        return [(v, m) for v, m in zip(self.support, self.masses) if m > 0]

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        """Inverse-CDF map of uniforms in [0,1) onto the support (float values)."""
        cum = np.cumsum(np.array([float(m) for m in self.masses]))
        cum[-1] = 1.0
        idx = np.searchsorted(cum, uniforms, side="left")
        idx = np.minimum(idx, len(self.support) - 1)
        vals = np.array([float(v) for v in self.support])
        return vals[idx]


_FAMILIES = ("exponential", "uniform", "truncated-normal", "power-tail")


@dataclass(frozen=True)
class CdfOracle:
    """Continuous distribution exposed through CDF queries.

    family/params:
      exponential: (lambda,)            F(x) = 1 - exp(-lambda*x) on [0, inf)
      uniform: (a, b)                   uniform on [a, b], 0 <= a < b
      truncated-normal: (mu, sigma)     normal(mu, sigma) conditioned to [0, mu + 8*sigma]
      power-tail: (alpha,)              F(x) = 1 - x^-alpha on [1, inf), alpha >= 1

    anchor: a value x* with F(x*) in [anchor_c1, anchor_c2]; quantile searches
    start from it rather than from blind endpoints.
    """

    family: str
    params: tuple
    anchor_c1: float = 0.25
    anchor_c2: float = 0.75

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        fam, p = self.family, self.params
        if fam == "exponential":
            if len(p) != 1 or p[0] <= 0:
                raise ValueError("exponential requires lambda > 0")
        elif fam == "uniform":
            if len(p) != 2 or not (0 <= p[0] < p[1]):
                raise ValueError("uniform requires 0 <= a < b")
        elif fam == "truncated-normal":
            if len(p) != 2 or p[1] <= 0 or p[0] < 0:
                raise ValueError("truncated-normal requires mu >= 0, sigma > 0")
        elif fam == "power-tail":
            if len(p) != 1 or p[0] < 1:
                raise ValueError("power-tail requires alpha >= 1")
        else:
            raise ValueError(f"unknown family: {fam!r}")
        if not (0 < self.anchor_c1 <= self.anchor_c2 < 1):
            raise ValueError("anchor constants must satisfy 0 < c1 <= c2 < 1")

    @classmethod
    def exponential(cls, lam) -> "CdfOracle":
        return cls("exponential", (lam,))

    @classmethod
    def uniform(cls, a, b) -> "CdfOracle":
        return cls("uniform", (a, b))

    @classmethod
    def truncated_normal(cls, mu, sigma) -> "CdfOracle":
        return cls("truncated-normal", (mu, sigma))

    @classmethod
    def power_tail(cls, alpha) -> "CdfOracle":
        return cls("power-tail", (alpha,))

    @property
    def u_min(self) -> float:
        if self.family == "exponential":
            return 0.0
        if self.family == "uniform":
            return self.params[0]
        if self.family == "truncated-normal":
            return 0.0
        return 1.0

    @property
    def u_max(self) -> float:
        if self.family == "uniform":
            return self.params[1]
        if self.family == "truncated-normal":
            mu, sigma = self.params
            return mu + 8.0 * sigma
        return math.inf

    @cached_property
    def anchor(self) -> float:
        """The median; F(anchor) = 1/2 lies inside [anchor_c1, anchor_c2]."""
        x = self.inverse_cdf(0.5)
        if not (self.anchor_c1 <= self.cdf(x) <= self.anchor_c2):
            raise AnchoringError("anchor constants exclude the median")
        return x

    # closed forms; query() is the contractual access path

    def cdf(self, x: float) -> float:
        fam, p = self.family, self.params
        if fam == "exponential":
            return 0.0 if x < 0 else -math.expm1(-p[0] * x)
        if fam == "uniform":
            a, b = p
            if x <= a:
                return 0.0
            if x >= b:
                return 1.0
            return (x - a) / (b - a)
        if fam == "truncated-normal":
            mu, sigma = p
            lo, hi = 0.0, mu + 8.0 * sigma
            if x <= lo:
                return 0.0
            if x >= hi:
                return 1.0
            z0 = ndtr(-mu / sigma)
            z1 = ndtr(8.0)
            return float((ndtr((x - mu) / sigma) - z0) / (z1 - z0))
        alpha = p[0]
        if x <= 1.0:
            return 0.0
        return 1.0 - x ** (-alpha)

    def query(self, x: float, precision: float = 1e-12) -> float:
        """CDF value within +-precision (returned at full closed-form precision)."""
        if precision <= 0:
            raise ValueError("precision must be positive")
        return self.cdf(x)

    def pdf(self, x: float) -> float:
        fam, p = self.family, self.params
        if fam == "exponential":
            return 0.0 if x < 0 else p[0] * math.exp(-p[0] * x)
        if fam == "uniform":
            a, b = p
            return 1.0 / (b - a) if a <= x <= b else 0.0
        if fam == "truncated-normal":
            mu, sigma = p
            if not (0.0 <= x <= mu + 8.0 * sigma):
                return 0.0
            z0 = ndtr(-mu / sigma)
            z1 = ndtr(8.0)
            t = (x - mu) / sigma
            return math.exp(-0.5 * t * t) / (sigma * math.sqrt(2 * math.pi) * (z1 - z0))
        alpha = p[0]
        return alpha * x ** (-alpha - 1.0) if x >= 1.0 else 0.0

    def inverse_cdf(self, u: float) -> float:
        """min{x : F(x) >= u} in closed form."""
        if not (0.0 <= u <= 1.0):
            raise ValueError("u must lie in [0, 1]")
        fam, p = self.family, self.params
        if fam == "exponential":
            if u == 1.0:
                return math.inf
            return -math.log1p(-u) / p[0]
        if fam == "uniform":
            a, b = p
            return a + (b - a) * u
        if fam == "truncated-normal":
            mu, sigma = p
            z0 = ndtr(-mu / sigma)
            z1 = ndtr(8.0)
            if u == 0.0:
                return 0.0
            if u == 1.0:
                return mu + 8.0 * sigma
            return float(mu + sigma * ndtri(z0 + u * (z1 - z0)))
        alpha = p[0]
        if u == 1.0:
            return math.inf
        return (1.0 - u) ** (-1.0 / alpha)

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        fam, p = self.family, self.params
        if fam == "exponential":
            return -np.log1p(-uniforms) / p[0]
        if fam == "uniform":
            a, b = p
            return a + (b - a) * uniforms
        if fam == "truncated-normal":
            mu, sigma = p
            z0 = ndtr(-mu / sigma)
            z1 = ndtr(8.0)
            return mu + sigma * ndtri(z0 + uniforms * (z1 - z0))
        alpha = p[0]
        return (1.0 - uniforms) ** (-1.0 / alpha)


Item = Union[DiscreteDistribution, CdfOracle]


@dataclass(frozen=True)
class Instance:
    """n independent items plus the tie-breaking rule for equal surpluses.

    shape is an optional caller-asserted tag ("mhr" or "regular"); solvers that
    need an anchoring route require it, and nothing here ever infers it.
    """

    items: tuple
    tie_break: TieBreak = TieBreak.LOWEST
    shape: Union[str, None] = None

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ValueError("instance needs at least one item")
        for it in items:
            if not isinstance(it, (DiscreteDistribution, CdfOracle)) and not (
                hasattr(it, "cdf") and hasattr(it, "u_min")
            ):
                raise TypeError(f"not a distribution: {it!r}")
        if not isinstance(self.tie_break, TieBreak):
            object.__setattr__(self, "tie_break", TieBreak(self.tie_break))
        if self.shape is not None and self.shape not in ("mhr", "regular"):
            raise ValueError("shape must be 'mhr', 'regular' or None")
        object.__setattr__(self, "items", items)

    @property
    def n(self) -> int:
        return len(self.items)

    @property
    def all_discrete(self) -> bool:
        return all(isinstance(it, DiscreteDistribution) for it in self.items)


def quantile(dist, p, precision: float = 1e-9):
    """alpha_p = inf{x : F(x) >= 1 - 1/p} for p >= 1; alpha_1 = u_min.

    Discrete: the smallest support point whose CDF reaches the target, exact.
    Oracle: bisection from the anchor until |F(x) - target| <= precision,
    returning the upper bracket end.
    """
    p = to_fraction(p) if not isinstance(p, float) else p
    if p < 1:
        raise ValueError("quantile order p must be >= 1")
    if isinstance(dist, DiscreteDistribution):
        if p == 1:
            return dist.u_min
        target = 1 - Fraction(1, 1) / to_fraction(p)
        for v, c in zip(dist.support, dist._cum):
            if c >= target:
                return v
        return dist.support[-1]
    if p == 1:
        return dist.u_min
    target = 1.0 - 1.0 / float(p)
    return _oracle_quantile(dist, target, precision)


def _oracle_quantile(dist, target: float, precision: float) -> float:
    if precision <= 0:
        raise ValueError("precision must be positive")
    lo = hi = dist.anchor
    steps = 0
    while dist.cdf(hi) < target:
        hi = hi * 2.0 if hi > 0 else 1.0
        if not math.isinf(dist.u_max):
            hi = min(hi, dist.u_max)
            if dist.cdf(hi) >= target:
                break
        steps += 1
        if steps > _BISECT_CAP:
            raise ConvergenceError("quantile bracket expansion exceeded cap")
    while dist.cdf(lo) >= target:
        lo = lo / 2.0
        if lo < dist.u_min or lo == 0.0:
            lo = dist.u_min
            break
        steps += 1
        if steps > _BISECT_CAP:
            raise ConvergenceError("quantile bracket contraction exceeded cap")
    for _ in range(_BISECT_CAP):
        mid = 0.5 * (lo + hi)
        fm = dist.cdf(mid)
        if abs(fm - target) <= precision:
            return mid
        if fm < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-17 * max(1.0, abs(hi)):
            return hi
    raise ConvergenceError("quantile bisection did not converge")


def quantile_bracket(dist, p, rel: float):
    """[lo, hi] with lo <= alpha_p <= hi and hi <= (1+rel)*lo; oracle items only."""
    if rel <= 0:
        raise ValueError("relative width must be positive")
    p = float(p)
    if p <= 1:
        return (dist.u_min, dist.u_min)
    target = 1.0 - 1.0 / p
    lo = hi = dist.anchor
    steps = 0
    while dist.cdf(hi) < target:
        hi *= 2.0
        if not math.isinf(dist.u_max):
            hi = min(hi, dist.u_max)
            if dist.cdf(hi) >= target:
                break
        steps += 1
        if steps > _BISECT_CAP:
            raise ConvergenceError("bracket expansion exceeded cap")
    while dist.cdf(lo) >= target:
        lo /= 2.0
        if lo < dist.u_min or lo == 0.0:
            lo = dist.u_min
            break
        steps += 1
        if steps > _BISECT_CAP:
            raise ConvergenceError("bracket contraction exceeded cap")
    for _ in range(_BISECT_CAP):
        if lo > 0 and hi <= lo * (1.0 + rel):
            return (lo, hi)
        mid = 0.5 * (lo + hi)
        if dist.cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError("quantile bracket did not narrow")


def tail_contribution(dist, x):
    """Con[X >= x] = E[X * 1{X >= x}]; exact for discrete, closed form for oracles."""
    if isinstance(dist, DiscreteDistribution):
        x = to_fraction(x) if not isinstance(x, float) else x
        return sum(v * m for v, m in zip(dist.support, dist.masses) if v >= x)
    x = float(x)
    fam, p = dist.family, dist.params
    if fam == "exponential":
        lam = p[0]
        x = max(x, 0.0)
        return (x + 1.0 / lam) * math.exp(-lam * x)
    if fam == "uniform":
        a, b = p
        if x >= b:
            return 0.0
        x = max(x, a)
        return (b * b - x * x) / (2.0 * (b - a))
    if fam == "truncated-normal":
        mu, sigma = p
        hi = mu + 8.0 * sigma
        if x >= hi:
            return 0.0
        x = max(x, 0.0)
        z0 = ndtr(-mu / sigma)
        z1 = ndtr(8.0)
        bx, bu = (x - mu) / sigma, 8.0
        phi = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
        return (mu * (ndtr(bu) - ndtr(bx)) + sigma * (phi(bx) - phi(bu))) / (z1 - z0)
    alpha = p[0]
    x = max(x, 1.0)
    if alpha <= 1.0:
        return math.inf
    return alpha / (alpha - 1.0) * x ** (1.0 - alpha)


def revenue_curve(dist: CdfOracle, q, precision: float = 1e-9) -> float:
    """R(q) = q * F^{-1}(1-q) for q in (0, 1], within q * precision."""
    q = float(q)
    if not (0.0 < q <= 1.0):
        raise ValueError("q must lie in (0, 1]")
    if isinstance(dist, DiscreteDistribution):
        raise TypeError("revenue_curve is defined for CDF-oracle items")
    if q == 1.0:
        return float(dist.u_min)
    return q * dist.inverse_cdf(1.0 - q)


@dataclass(frozen=True)
class ShapeResult:
    shape: Shape
    inconclusive: bool
    detail: str = ""


def check_shape(dist: CdfOracle, grid_size: int = 256, tol: float = 1e-6) -> ShapeResult:
    """Advisory numeric classification of an oracle item.

    Evaluates hazard rate f/(1-F) and virtual value x - (1-F)/f by central
    differences on a geometric grid spanning [max(u_min, anchor/100),
    alpha_1000] and returns the strongest property holding up to tol at every
    usable grid point.  Discrete items are never classified (TypeError).
    """
    if isinstance(dist, DiscreteDistribution):
        raise TypeError("check_shape applies to CDF-oracle items only")
    if grid_size < 3:
        raise ValueError("grid_size must be at least 3")
    lo = max(dist.u_min, dist.anchor / 100.0)
    if lo <= 0.0:
        lo = dist.anchor / 100.0
    hi = quantile(dist, 1000.0, precision=1e-12)
    if hi <= lo:
        hi = lo * 2.0
    ratio = (hi / lo) ** (1.0 / (grid_size - 1))
    xs = [lo * ratio**i for i in range(grid_size)]
    h = 1e-5
    hazard, virtual, skipped = [], [], 0
    for x in xs:
        f_hi = dist.cdf(x * (1.0 + h))
        f_lo = dist.cdf(x / (1.0 + h))
        dens = (f_hi - f_lo) / (x * (1.0 + h) - x / (1.0 + h))
        surv = 1.0 - dist.cdf(x)
        if dens <= 1e-300 or surv <= 1e-12:
            skipped += 1
            hazard.append(None)
            virtual.append(None)
            continue
        hazard.append(dens / surv)
        virtual.append(x - surv / dens)
    inconclusive = skipped > grid_size // 4

    def nondecreasing(seq):
        prev = None
        for v in seq:
            if v is None:
                continue
            if prev is not None and v < prev - tol * max(1.0, abs(prev)):
                return False
            prev = v
        return True

    if nondecreasing(hazard):
        return ShapeResult(Shape.MHR, inconclusive)
    if nondecreasing(virtual):
        return ShapeResult(Shape.REGULAR_ONLY, inconclusive)
    return ShapeResult(Shape.NEITHER, inconclusive)


# JSON instance format:
#   {"tie_break": "lowest"|"highest", "class": "mhr"|"regular" (optional),
#    "items": [{"kind": "discrete", "support": [...], "masses": ["1/2", ...]}
#              | {"kind": "exponential", "lambda": 1.0}
#              | {"kind": "uniform", "a": 0, "b": 1}
#              | {"kind": "truncated-normal", "mu": 1.0, "sigma": 0.5}
#              | {"kind": "power-tail", "alpha": 2.0}]}
# Numeric entries may be numbers, "p/q" strings, or decimal strings; decimals
# are converted exactly from their printed digits.


def parse_instance(obj: dict) -> Instance:
    if not isinstance(obj, dict):
        raise ValueError("instance JSON must be an object")
    if "items" not in obj or not isinstance(obj["items"], list) or not obj["items"]:
        raise ValueError("instance JSON needs a nonempty 'items' list")
    items = []
    for k, spec in enumerate(obj["items"]):
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ValueError(f"item {k}: missing 'kind'")
        kind = spec["kind"]
        try:
            if kind == "discrete":
                items.append(
                    DiscreteDistribution(tuple(spec["support"]), tuple(spec["masses"]))
                )
            elif kind == "exponential":
                items.append(CdfOracle.exponential(float(to_fraction(spec["lambda"]))))
            elif kind == "uniform":
                items.append(
                    CdfOracle.uniform(
                        float(to_fraction(spec["a"])), float(to_fraction(spec["b"]))
                    )
                )
            elif kind == "truncated-normal":
                items.append(
                    CdfOracle.truncated_normal(
                        float(to_fraction(spec["mu"])), float(to_fraction(spec["sigma"]))
                    )
                )
            elif kind == "power-tail":
                items.append(CdfOracle.power_tail(float(to_fraction(spec["alpha"]))))
            else:
                raise ValueError(f"unknown distribution kind {kind!r}")
        except KeyError as e:
            raise ValueError(f"item {k}: missing field {e.args[0]!r}") from None
    tie = obj.get("tie_break", "lowest")
    if tie not in ("lowest", "highest"):
        raise ValueError("tie_break must be 'lowest' or 'highest'")
    shape = obj.get("class")
    if shape is not None and shape not in ("mhr", "regular"):
        raise ValueError("class must be 'mhr' or 'regular'")
    return Instance(tuple(items), TieBreak(tie), shape)


def load_instance(text: str) -> Instance:
    """Parse an instance from JSON text; floats are read as exact decimal strings."""
    obj = json.loads(text, parse_float=str)
    return parse_instance(obj)


def instance_to_json(inst: Instance) -> dict:
    from .util import rational_str

    items = []
    for it in inst.items:
        if isinstance(it, DiscreteDistribution):
            items.append(
                {
                    "kind": "discrete",
                    "support": [rational_str(v) for v in it.support],
                    "masses": [rational_str(m) for m in it.masses],
                }
            )
        elif isinstance(it, CdfOracle):
            if it.family == "exponential":
                items.append({"kind": "exponential", "lambda": it.params[0]})
            elif it.family == "uniform":
                items.append({"kind": "uniform", "a": it.params[0], "b": it.params[1]})
            elif it.family == "truncated-normal":
                items.append(
                    {"kind": "truncated-normal", "mu": it.params[0], "sigma": it.params[1]}
                )
            else:
                items.append({"kind": "power-tail", "alpha": it.params[0]})
        else:
            raise TypeError(f"cannot serialize item {it!r}")
    out = {"tie_break": inst.tie_break.value, "items": items}
    if inst.shape is not None:
        out["class"] = inst.shape
    return out
