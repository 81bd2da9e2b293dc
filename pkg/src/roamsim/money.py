"""Exact money arithmetic in integer micro-units.

Every price, charge and settlement amount in this package is an `int`
counting 10^-6 of one settlement currency unit.  Scale factors (markups,
discounts, coverage, traffic mixes) are `fractions.Fraction` values parsed
from strings, so rating and settlement are exact and reproduce bit for bit
on any platform.  Floats never touch a money amount.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

Money = int

Rational = Union[int, Fraction]


def parse_fraction(text: Union[str, int]) -> Fraction:
    """Parse an exact fraction from a decimal string ("0.25") or ratio ("8/9").

    Ints pass through; floats are rejected because their decimal round-trip
    is platform-dependent noise we refuse to bake into scenarios.
    """
    if isinstance(text, bool):
        raise ValueError("fraction must be a string or int, got bool")
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, str):
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not an exact fraction: {text!r}") from exc
    raise ValueError(f"fraction must be a string or int, got {type(text).__name__}")


def round_half_up(value: Rational) -> int:
    """Round to the nearest integer, ties away from zero toward +infinity.

    Implemented as floor(value + 1/2) on exact rationals.
    """
    frac = Fraction(value)
    # Fraction normalises denominator > 0, so floor division is safe.
    return (2 * frac.numerator + frac.denominator) // (2 * frac.denominator)


def scale_money(amount: Money, factor: Rational) -> Money:
    """Scale a micro-unit amount by an exact factor, rounding half-up."""
    return round_half_up(Fraction(amount) * Fraction(factor))
