"""Typed constants and the exact cost algebra.

All numeric computation in the verdict path uses exact rationals
(``fractions.Fraction``); floats never enter cost comparisons.  Infinite
penalties are modelled by the absorbing top element ``INF``.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

BOOL = "bool"
INT = "int"
RAT = "rat"
STRING = "string"

VAR_TYPES = (BOOL, INT, RAT, STRING)

# A concrete constant: bool, int, Fraction or str.
Value = Union[bool, int, Fraction, str]


class MalformedValueError(ValueError):
    pass


def parse_exact(raw) -> Union[int, Fraction]:
    """Parse a number given as int, Fraction, or exact decimal/ratio string.

    Strings like "0.25" or "41/20" convert exactly; floats are rejected
    because their binary value may not be the literal the user wrote.
    """
    if isinstance(raw, bool):
        raise MalformedValueError("expected a number, got a boolean")
    if isinstance(raw, (int, Fraction)):
        return raw
    if isinstance(raw, str):
        try:
            frac = Fraction(raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise MalformedValueError(f"not an exact number: {raw!r}") from exc
        return int(frac) if frac.denominator == 1 else frac
    if isinstance(raw, float):
        raise MalformedValueError(
            f"refusing float {raw!r}; pass a string for an exact value"
        )
    raise MalformedValueError(f"not a number: {raw!r}")


def coerce_value(raw, vtype: str) -> Value:
    """Coerce a parsed JSON scalar to a constant of the given type."""
    if vtype == BOOL:
        if isinstance(raw, bool):
            return raw
        raise MalformedValueError(f"expected bool, got {raw!r}")
    if vtype == STRING:
        if isinstance(raw, str):
            return raw
        raise MalformedValueError(f"expected string, got {raw!r}")
    if vtype == INT:
        value = parse_exact(raw)
        if isinstance(value, Fraction):
            raise MalformedValueError(f"expected integer, got {raw!r}")
        return value
    if vtype == RAT:
        value = parse_exact(raw)
        return value if isinstance(value, Fraction) else Fraction(value)
    raise MalformedValueError(f"unknown type {vtype!r}")


def value_type_of(value: Value) -> str:
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        return INT
    if isinstance(value, Fraction):
        return RAT
    if isinstance(value, str):
        return STRING
    raise MalformedValueError(f"not a constant: {value!r}")


def values_compatible(value: Value, vtype: str) -> bool:
    """Ints are acceptable where rationals are expected; nothing else mixes."""
    actual = value_type_of(value)
    return actual == vtype or (actual == INT and vtype == RAT)


class _Infinite:
    """Absorbing top element of the cost algebra."""

    __slots__ = ()

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __mul__(self, other):
        return self

    __rmul__ = __mul__

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("ucheck-infinite-cost")

    def __repr__(self):
        return "INF"


INF = _Infinite()

Cost = Union[Fraction, _Infinite]


def is_finite(cost: Cost) -> bool:
    return cost is not INF


def cost_sum(parts) -> Cost:
    total: Cost = Fraction(0)
    for part in parts:
        total = total + part
    return total


def render_decimal(q: Fraction, digits: int = 6) -> str:
    """Presentation-only decimal rendering; exact when the expansion terminates."""
    den = q.denominator
    while den % 2 == 0:
        den //= 2
    while den % 5 == 0:
        den //= 5
    if den == 1:
        places = 0
        while (q * 10 ** places).denominator != 1:
            places += 1
        scaled = q * 10 ** places
        text = str(abs(scaled.numerator)).rjust(places + 1, "0")
        sign = "-" if scaled.numerator < 0 else ""
        if places == 0:
            return sign + text
        return f"{sign}{text[:-places]}.{text[-places:]}"
    return f"{float(q):.{digits}g}"
