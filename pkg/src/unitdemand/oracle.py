"""Revenue oracles: exact evaluation, brute-force search, Monte Carlo.

exact_revenue runs the sequential winning-cell transition over the union
grids with exact rationals.  exact_revenue_enumerated is an independent
cross-check that enumerates the full product support and simulates the buyer
directly; the two must agree and are kept separate on purpose.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .distributions import DiscreteDistribution, Instance, TieBreak
from .dp.core import TransitionTables
from .reductions import PriceVector
from .util import ResourceLimitError, to_fraction

_Z99 = 2.5758293035489004  # two-sided 99% normal quantile

BRUTE_FORCE_CAP = 10_000_000


def _require_discrete(instance: Instance, what: str) -> None:
    if not instance.all_discrete:
        raise TypeError(f"{what} requires discrete items; truncate and discretize first")


def _price_list(prices) -> list:
    if isinstance(prices, PriceVector):
        return list(prices)
    out = []
    for p in prices:
        if isinstance(p, float) and math.isinf(p):
            out.append(math.inf)  # item never sells
        else:
            out.append(to_fraction(p))
    return out


def _union_value_grid(instance: Instance) -> list:
    vals = sorted({v for item in instance.items for v, _ in item.positive_points()})
    if not vals:
        raise ValueError("instance has no positive-mass values")
    return vals


class _PreparedEvaluator:
    """Exact revenue of price-index vectors over a fixed price grid.

    Shares the gap tables and per-item mass cumsums across calls so that
    brute-force search does not rebuild them k2^n times.
    """

    def __init__(self, instance: Instance, price_grid: Sequence, tie_break: TieBreak):
        self.values = _union_value_grid(instance)
        self.prices = [to_fraction(p) for p in price_grid]
        self.tabs = TransitionTables(self.values, self.prices, tie_break)
        self.items = [self.tabs.prepare_item(item) for item in instance.items]
        K = self.tabs.k1 * self.tabs.k2
        self._base = [Fraction(0)] * K
        self._base[self.tabs.base_cell] = Fraction(1)
        self._sell = []
        for cell in range(K):
            v = self.tabs.values[cell // self.tabs.k2]
            p = self.tabs.prices[cell % self.tabs.k2]
            self._sell.append(p if v >= p else None)

    def revenue(self, j_vec: Sequence[int]) -> Fraction:
        probs = list(self._base)
        for prepared, j in zip(self.items, j_vec):
            probs = self.tabs.step(probs, prepared, j)
        total = Fraction(0)
        for pr, p in zip(probs, self._sell):
            if p is not None and pr:
                total += p * pr
        return total


def exact_revenue(instance: Instance, prices, tie_break: Optional[TieBreak] = None) -> Fraction:
    """Exact expected revenue of a price vector on a discrete instance."""
    _require_discrete(instance, "exact_revenue")
    plist = _price_list(prices)
    if len(plist) != instance.n:
        raise ValueError("price vector length must match the item count")
    for p in plist:
        if p == math.inf:
            raise ValueError("exact_revenue requires finite prices; drop priced-out items")
        if p <= 0:
            raise ValueError("prices must be positive")
    tie = TieBreak(tie_break) if tie_break is not None else instance.tie_break
    grid = sorted(set(plist))
    ev = _PreparedEvaluator(instance, grid, tie)
    j_vec = [grid.index(p) for p in plist]
    return ev.revenue(j_vec)


def exact_revenue_enumerated(
    instance: Instance, prices, tie_break: Optional[TieBreak] = None
) -> Fraction:
    """Independent oracle: enumerate the product support, simulate the buyer.

    Exponential in n; intended for cross-checking exact_revenue on small
    instances, not for production use.
    """
    _require_discrete(instance, "exact_revenue_enumerated")
    plist = _price_list(prices)
    if len(plist) != instance.n:
        raise ValueError("price vector length must match the item count")
    tie = TieBreak(tie_break) if tie_break is not None else instance.tie_break
    supports = [item.positive_points() for item in instance.items]
    total = Fraction(0)
    for combo in itertools.product(*supports):
        prob = Fraction(1)
        for _, m in combo:
            prob *= m
        best_gap = None
        winner = None
        for i, (v, _) in enumerate(combo):
            gap = v - plist[i]
            if best_gap is None or gap > best_gap:
                best_gap, winner = gap, i
            elif gap == best_gap and tie is TieBreak.HIGHEST:
                winner = i
        if best_gap >= 0:
            total += prob * plist[winner]
    return total


def brute_force_optimum(
    instance: Instance,
    price_set: Iterable,
    tie_break: Optional[TieBreak] = None,
    cap: int = BRUTE_FORCE_CAP,
) -> tuple:
    """Best price vector drawn from a finite grid, by exhaustive search.

    Enumerates the grid in ascending lexicographic order and keeps strict
    improvements only, so revenue ties resolve to the lexicographically
    smallest vector.  Returns (PriceVector, exact revenue).
    """
    _require_discrete(instance, "brute_force_optimum")
    tie = TieBreak(tie_break) if tie_break is not None else instance.tie_break
    grid = sorted({to_fraction(p) for p in price_set})
    if not grid:
        raise ValueError("price set must be nonempty")
    if any(p <= 0 for p in grid):
        raise ValueError("prices must be positive")
    n = instance.n
    total = len(grid) ** n
    if total > cap:
        raise ResourceLimitError(
            f"brute force would evaluate {total} vectors (cap {cap})"
        )
    ev = _PreparedEvaluator(instance, grid, tie)
    best_vec = None
    best_rev = None
    for j_vec in itertools.product(range(len(grid)), repeat=n):
        rev = ev.revenue(j_vec)
        if best_rev is None or rev > best_rev:
            best_rev = rev
            best_vec = j_vec
    prices = PriceVector(tuple(grid[j] for j in best_vec))
    return prices, best_rev


def monte_carlo_revenue(
    instance: Instance,
    prices,
    samples: int,
    seed: int = 0,
    tie_break: Optional[TieBreak] = None,
    chunk: Optional[int] = None,
) -> dict:
    """Estimate expected revenue by simulation.

    Streams are counter-based (Philox keyed by (seed, item index)), so the
    estimate depends only on (seed, samples), not on chunking.  Returns
    {"estimate", "ci99", "samples", "seed"} where ci99 is the half-width of
    a 99% normal confidence interval.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    plist = _price_list(prices)
    if len(plist) != instance.n:
        raise ValueError("price vector length must match the item count")
    n = instance.n
    p_arr = np.array([float(p) for p in plist])
    tie = TieBreak(tie_break) if tie_break is not None else instance.tie_break
    gens = [
        np.random.Generator(np.random.Philox(key=[seed, i])) for i in range(n)
    ]
    if chunk is None:
        chunk = max(1, min(samples, 4_000_000 // max(n, 1)))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        cs = min(chunk, samples - done)
        gaps = np.empty((n, cs))
        for i, item in enumerate(instance.items):
            vals = item.sample(gens[i].random(cs))
            gaps[i] = vals - p_arr[i]
        if tie is TieBreak.LOWEST:
            winner = np.argmax(gaps, axis=0)
        else:
            winner = n - 1 - np.argmax(gaps[::-1], axis=0)
        best = gaps[winner, np.arange(cs)]
        pay = np.where(best >= 0.0, p_arr[winner], 0.0)
        total += float(pay.sum())
        total_sq += float((pay * pay).sum())
        done += cs
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    ci = _Z99 * math.sqrt(var / samples)
    return {"estimate": mean, "ci99": ci, "samples": samples, "seed": seed}
