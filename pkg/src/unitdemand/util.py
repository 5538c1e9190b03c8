"""Shared helpers: exact rational conversion, report formatting, error types."""

from __future__ import annotations

import math
import sys
from fractions import Fraction
from numbers import Rational

# geometric-grid rationals routinely carry 10^4..10^5 digit numerators; the
# interpreter's int<->str conversion cap would reject printing them
if hasattr(sys, "set_int_max_str_digits"):
    sys.set_int_max_str_digits(0)


class ConvergenceError(RuntimeError):
    """A bisection or refinement loop hit its iteration cap without converging."""


class AnchoringError(RuntimeError):
    """No admissible anchor point exists for an item (e.g. an atom jumps past c2)."""


class ResourceLimitError(RuntimeError):
    """A state count, grid size or enumeration exceeded its declared cap."""


def to_fraction(x) -> Fraction:
    """Exact conversion to Fraction.

    Accepts int, Fraction, strings like "3/4" or "1.25", and floats
    (converted by their exact binary value, so dyadic literals stay clean).
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a number here")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        if math.isinf(x) or math.isnan(x):
            raise ValueError(f"cannot convert {x!r} to an exact rational")
        return Fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def rational_str(x) -> str:
    """Serialize a number for reports: Fractions as "p/q" (or "p"), floats as repr."""
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return str(x.numerator)
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def parse_number(s):
    """Parse a CLI/JSON scalar: "inf", "p/q", decimal string, int. Returns Fraction or inf."""
    if isinstance(s, (int, Fraction)):
        return to_fraction(s)
    if isinstance(s, float):
        return math.inf if math.isinf(s) else to_fraction(s)
    text = str(s).strip()
    if text in ("inf", "+inf", "Infinity", "+Infinity"):
        return math.inf
    return to_fraction(text)


def is_infinite(x) -> bool:
    return isinstance(x, float) and math.isinf(x)
