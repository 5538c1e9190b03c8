"""Single posted price for many i.i.d. items with increasing hazard rate.

For large n a single anonymous price slightly under the 1/n-tail quantile is
already near-optimal, so the whole anchoring/discretization pipeline can be
skipped.  Below the activation threshold the solver reports FallBack and
leaves the work to the general pipeline.
"""
from __future__ import annotations

import math
from typing import Optional, Tuple

from .distributions import CdfOracle, DiscreteDistribution, quantile
from .util import ConvergenceError

_BISECT_STEPS = 200


def fast_path_threshold(eps: float) -> float:
    """log of the smallest n that activates the single-price fast path."""
    ep = eps / 12.0
    return math.log(1.0 / ep) / ep


def single_price_mhr(
    dist,
    n: int,
    eps: float,
    force_fast_path: bool = False,
) -> Tuple[Optional[float], str]:
    """Price n i.i.d. items at a single number, or decline.

    Returns (price, mode).  mode == "FastPath" means price = (1 - 2*eps')
    times a point within a relative eps'-window of the upper 1/n quantile,
    with eps' = eps/12.  mode == "FallBack" (price None) signals that n is
    below the activation threshold and the general pipeline should run.

    force_fast_path skips the threshold test; the price construction itself
    is valid for any n >= 1, only its near-optimality guarantee needs n huge.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if n < 1:
        raise ValueError("n must be a positive integer")
    ep = eps / 12.0
    if not force_fast_path and math.log(n) < fast_path_threshold(eps):
        return None, "FallBack"
    target = quantile_point(dist, n, rel_tol=min(ep, 1e-9))
    return (1.0 - 2.0 * ep) * target, "FastPath"


def quantile_point(dist, n: int, rel_tol: float = 1e-9) -> float:
    """Upper 1/n quantile, located to relative tolerance rel_tol.

    Discrete items resolve exactly; CDF oracles bisect from the anchor with
    geometric doubling, so the query count grows like log(log n) plus the
    refinement passes.
    """
    if isinstance(dist, DiscreteDistribution):
        return float(quantile(dist, n))
    if not isinstance(dist, CdfOracle):
        raise TypeError("expected a DiscreteDistribution or CdfOracle")
    if n == 1:
        return float(dist.u_min)
    target = 1.0 - 1.0 / n
    precision = min(rel_tol, 1e-12)
    x0 = float(dist.anchor)
    if x0 <= 0:
        x0 = max(float(dist.u_min), 1e-12)
    f0 = dist.query(x0, precision)
    lo = hi = x0
    if f0 >= target:
        # quantile at or below the anchor: halve down to a lower bracket
        for _ in range(_BISECT_STEPS):
            lo = lo / 2.0
            if lo < float(dist.u_min):
                lo = float(dist.u_min)
            if dist.query(lo, precision) < target or lo == float(dist.u_min):
                break
        else:
            raise ConvergenceError("failed to bracket the quantile from below")
    else:
        # geometric doubling sized by the anchor's tail mass
        rate = -math.log2(max(1.0 - f0, 1e-300))
        k = max(1, math.ceil(math.log2(max(n, 2)) / max(rate, 1e-12)))
        hi = x0 * (2.0 ** k)
        u_max = dist.u_max
        for _ in range(_BISECT_STEPS):
            if u_max != math.inf and hi >= float(u_max):
                hi = float(u_max)
                break
            if dist.query(hi, precision) >= target:
                break
            hi *= 2.0
        else:
            raise ConvergenceError("failed to bracket the quantile from above")
    for _ in range(_BISECT_STEPS):
        if hi <= lo * (1.0 + rel_tol) or hi - lo < 1e-300:
            break
        mid = 0.5 * (lo + hi)
        if dist.query(mid, precision) >= target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
