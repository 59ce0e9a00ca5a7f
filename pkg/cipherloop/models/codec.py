from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True, slots=True)
class Fixed:
    """Grid point k * 2^-m of Q(n, m)."""

    k: int
    m: int
    saturated: bool = False

    @property
    def value(self) -> Fraction:
        return Fraction(self.k, 1 << self.m)

    def __float__(self) -> float:
        return self.k / (1 << self.m)


@dataclass(frozen=True, slots=True)
class EncodedInt:
    residue: int
    scale_exp: int
