import random
from fractions import Fraction
from pathlib import Path

import pytest

from unitdemand import DiscreteDistribution, Instance, RestrictedInstance, TieBreak

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name


@pytest.fixture
def counterexample() -> Instance:
    """Two items where pricing inside the supports is provably suboptimal."""
    return Instance(
        (
            DiscreteDistribution((1, 5), (Fraction(1, 2), Fraction(1, 2))),
            DiscreteDistribution((3, Fraction(7, 2)), (Fraction(1, 2), Fraction(1, 2))),
        ),
        TieBreak.LOWEST,
    )


def random_masses(rng: random.Random, k: int, denom: int = 12) -> tuple:
    """k nonnegative rationals with denominator dividing denom, summing to 1."""
    cuts = sorted(rng.randint(0, denom) for _ in range(k - 1))
    parts = []
    prev = 0
    for c in cuts:
        parts.append(c - prev)
        prev = c
    parts.append(denom - prev)
    return tuple(Fraction(p, denom) for p in parts)


def random_support(rng: random.Random, k: int, lo: int = 1, hi: int = 24) -> tuple:
    den = rng.choice((1, 1, 2, 4))
    vals = rng.sample(range(lo * den, hi * den), k)
    return tuple(sorted(Fraction(v, den) for v in vals))


def random_instance(
    rng: random.Random,
    n_max: int = 3,
    k_max: int = 3,
    tie: TieBreak | None = None,
    common_support: bool = False,
) -> Instance:
    n = rng.randint(1, n_max)
    if tie is None:
        tie = rng.choice((TieBreak.LOWEST, TieBreak.HIGHEST))
    if common_support:
        support = random_support(rng, rng.randint(1, k_max))
        items = tuple(
            DiscreteDistribution(support, random_masses(rng, len(support)))
            for _ in range(n)
        )
    else:
        items = []
        for _ in range(n):
            support = random_support(rng, rng.randint(1, k_max))
            items.append(DiscreteDistribution(support, random_masses(rng, len(support))))
        items = tuple(items)
    return Instance(items, tie)


def random_price_set(rng: random.Random, k2: int, lo: int = 1, hi: int = 30) -> tuple:
    den = rng.choice((1, 2, 3))
    vals = rng.sample(range(lo * den, hi * den), k2)
    return tuple(sorted(Fraction(v, den) for v in vals))


def random_restricted(
    rng: random.Random,
    n_max: int = 3,
    k1_max: int = 3,
    k2_max: int = 3,
    tie: TieBreak | None = None,
) -> RestrictedInstance:
    inst = random_instance(rng, n_max, k1_max, tie=tie, common_support=True)
    price_set = random_price_set(rng, rng.randint(1, k2_max))
    return RestrictedInstance(inst, price_set, 0)
