"""Numeric mode handling: exact rationals or 64-bit floats.

A model chooses one mode at construction time and every value derived
from it (probabilities, values, expectations) stays in that mode.
Exact mode stores `fractions.Fraction`, which keeps values in lowest
terms with a positive denominator. Float mode stores plain floats and
all comparisons go through the documented tolerances below.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

EXACT = "exact"
FLOAT = "float"
MODES = (EXACT, FLOAT)

Value = Union[Fraction, float]

#: row sums in float mode must match 1 up to this tolerance
ROW_SUM_TOL = 1e-12
#: interval iteration stops when the value bounds are this close
DEFAULT_EPS = 1e-10
#: float-mode slack for membership in the locally-optimal action sets
DEFAULT_ETA = 1e-9


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"unknown numeric mode {mode!r}; expected one of {MODES}")
    return mode


def parse_value(raw: object, mode: str) -> Value:
    """Parse a probability/reward literal for the given mode.

    Accepts "p/q" strings, decimal strings, ints, floats and Fractions.
    In exact mode decimal literals convert exactly ("0.25" -> 1/4); a
    raw float is first rendered via repr so 0.25 also becomes 1/4.
    """
    if mode == EXACT:
        if isinstance(raw, Fraction):
            return raw
        if isinstance(raw, bool):
            raise ValueError(f"cannot parse {raw!r} as a rational")
        if isinstance(raw, int):
            return Fraction(raw)
        if isinstance(raw, float):
            return Fraction(repr(raw))
        if isinstance(raw, str):
            return Fraction(raw)
        raise ValueError(f"cannot parse {raw!r} as a rational")
    if isinstance(raw, str):
        return float(Fraction(raw))
    if isinstance(raw, (int, float, Fraction)) and not isinstance(raw, bool):
        return float(raw)
    raise ValueError(f"cannot parse {raw!r} as a float")


def as_float(value: Value | None) -> float | None:
    if value is None:
        return None
    return float(value)


def format_value(value: Value) -> str:
    """Render a value losslessly: "p/q" for rationals, repr for floats."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    return repr(value)


def zero(mode: str) -> Value:
    return Fraction(0) if mode == EXACT else 0.0


def one(mode: str) -> Value:
    return Fraction(1) if mode == EXACT else 1.0


def values_equal(a: Value, b: Value, mode: str, tol: float = DEFAULT_ETA) -> bool:
    if mode == EXACT:
        return a == b
    return abs(a - b) <= tol


def convert_value(value: Value, mode: str) -> Value:
    """Move a value into `mode` (floats rationalize via repr)."""
    if mode == EXACT:
        return value if isinstance(value, Fraction) else Fraction(repr(float(value)))
    return float(value)
