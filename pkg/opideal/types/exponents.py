import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Union

__all__ = ['ExponentKind', 'ExtExponent', 'ONE', 'TWO', 'INF', 'C0']


class ExponentKind(Enum):
    FINITE = "finite"
    INF = "inf"
    C0 = "c0"


@dataclass(frozen=True)
class ExtExponent:
    """An exponent in [1, inf] for l_r norms.

    Finite exponents are kept as fractions so conjugation is exact. The c0 tag
    is isometric to inf on finite blocks and only matters for duals.
    """
    kind: ExponentKind
    ratio: Fraction = Fraction(1)

    def __post_init__(self):
        if self.kind is ExponentKind.FINITE and self.ratio < 1:
            raise ValueError(f"exponent must be >= 1, got {self.ratio}")

    @classmethod
    def finite(cls, value: Union[int, float, str, Fraction]) -> 'ExtExponent':
        if isinstance(value, float):
            value = str(value)
        return cls(ExponentKind.FINITE, Fraction(value))

    @classmethod
    def parse(cls, value: Union[int, float, str, Fraction, 'ExtExponent']) -> 'ExtExponent':
        if isinstance(value, ExtExponent):
            return value
        if isinstance(value, str):
            text = value.strip().lower()
            if text in ("inf", "infinity", "∞"):
                return INF
            if text == "c0":
                return C0
            return cls.finite(text)
        if isinstance(value, float) and math.isinf(value):
            return INF
        return cls.finite(value)

    @property
    def value(self) -> float:
        if self.kind is ExponentKind.FINITE:
            return float(self.ratio)
        return math.inf

    @property
    def is_sup(self) -> bool:
        return self.kind is not ExponentKind.FINITE

    @property
    def reciprocal(self) -> float:
        if self.is_sup:
            return 0.0
        return float(1 / self.ratio)

    def conjugate(self) -> 'ExtExponent':
        if self.is_sup:
            return ONE
        if self.ratio == 1:
            return INF
        return ExtExponent(ExponentKind.FINITE, self.ratio / (self.ratio - 1))

    def same_norm(self, other: 'ExtExponent') -> bool:
        return self.value == other.value

    def __str__(self):
        if self.kind is ExponentKind.C0:
            return "c0"
        if self.kind is ExponentKind.INF:
            return "inf"
        if self.ratio.denominator == 1:
            return str(self.ratio.numerator)
        return repr(float(self.ratio))


ONE = ExtExponent(ExponentKind.FINITE, Fraction(1))
TWO = ExtExponent(ExponentKind.FINITE, Fraction(2))
INF = ExtExponent(ExponentKind.INF)
C0 = ExtExponent(ExponentKind.C0)
