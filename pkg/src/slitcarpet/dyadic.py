"""Exact dyadic rationals k/2^e, the coordinate type for all slit geometry.

Slit incidence must never be decided by a floating comparison, so every
coordinate that can touch a slit is carried as a reduced dyadic and all
arithmetic on it (add, subtract, multiply, scale by powers of two, compare)
is exact integer arithmetic.  Python floats are themselves dyadic rationals,
so `Dyadic.from_float` is lossless.
"""

from __future__ import annotations

import re
from typing import Union

__all__ = ["Dyadic", "DyadicLike", "as_dyadic"]

_FRACTION_RE = re.compile(r"^(-?\d+)/2\^(\d+)$")


class Dyadic:
    """Reduced dyadic rational: value = numerator / 2**exponent.

    Canonical form: the numerator is odd unless the value is zero, and zero
    is stored as 0/2^0.  Instances are immutable and hashable.
    """

    __slots__ = ("num", "exp")

    num: int
    exp: int

    def __init__(self, num: int, exp: int = 0):
        if exp < 0:
            num <<= -exp
            exp = 0
        if num == 0:
            exp = 0
        else:
            while num % 2 == 0 and exp > 0:
                num //= 2
                exp -= 1
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "exp", exp)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("Dyadic is immutable")

    # -- construction -------------------------------------------------

    @classmethod
    def from_float(cls, x: float) -> "Dyadic":
        """Lossless conversion; every finite float is a dyadic rational."""
        if x != x or x in (float("inf"), float("-inf")):
            raise ValueError(f"not a finite number: {x}")
        p, q = float(x).as_integer_ratio()
        return cls(p, q.bit_length() - 1)

    @classmethod
    def parse(cls, text: str) -> "Dyadic":
        """Parse 'num/2^e', an integer literal, or a decimal like '0.375'.

        Decimal strings are accepted only when the value is exactly dyadic
        (denominator a power of two after reduction).
        """
        text = text.strip()
        m = _FRACTION_RE.match(text)
        if m:
            return cls(int(m.group(1)), int(m.group(2)))
        if re.fullmatch(r"-?\d+", text):
            return cls(int(text))
        if re.fullmatch(r"-?\d*\.\d+", text):
            # value = num0 / 10^k = num0 / (2^k 5^k); dyadic iff 5^k divides num0
            intpart, frac = text.lstrip("-").split(".")
            sign = -1 if text.startswith("-") else 1
            num0 = sign * (int(intpart or "0") * 10 ** len(frac) + int(frac))
            k = len(frac)
            five = 5**k
            if num0 % five:
                raise ValueError(f"{text} is not a dyadic rational")
            return cls(num0 // five, k)
        raise ValueError(f"cannot parse dyadic: {text!r}")

    # -- arithmetic ----------------------------------------------------

    def _align(self, other: "Dyadic") -> tuple[int, int, int]:
        e = max(self.exp, other.exp)
        return (self.num << (e - self.exp), other.num << (e - other.exp), e)

    def __add__(self, other: DyadicLike) -> "Dyadic":
        other = as_dyadic(other)
        a, b, e = self._align(other)
        return Dyadic(a + b, e)

    def __sub__(self, other: DyadicLike) -> "Dyadic":
        other = as_dyadic(other)
        a, b, e = self._align(other)
        return Dyadic(a - b, e)

    def __neg__(self) -> "Dyadic":
        return Dyadic(-self.num, self.exp)

    def __mul__(self, other: DyadicLike) -> "Dyadic":
        other = as_dyadic(other)
        return Dyadic(self.num * other.num, self.exp + other.exp)

    __radd__ = __add__
    __rmul__ = __mul__

    def __rsub__(self, other: DyadicLike) -> "Dyadic":
        return as_dyadic(other) - self

    def scale_pow2(self, k: int) -> "Dyadic":
        """Exact multiplication by 2**k (k may be negative)."""
        return Dyadic(self.num, self.exp - k)

    def __abs__(self) -> "Dyadic":
        return Dyadic(abs(self.num), self.exp)

    # -- comparison / conversion ---------------------------------------

    def _cmp(self, other: DyadicLike) -> int:
        other = as_dyadic(other)
        a, b, _ = self._align(other)
        return (a > b) - (a < b)

    def __eq__(self, other) -> bool:
        if isinstance(other, (Dyadic, int, float)):
            return self._cmp(other) == 0
        return NotImplemented

    def __lt__(self, other) -> bool:
        return self._cmp(other) < 0

    def __le__(self, other) -> bool:
        return self._cmp(other) <= 0

    def __gt__(self, other) -> bool:
        return self._cmp(other) > 0

    def __ge__(self, other) -> bool:
        return self._cmp(other) >= 0

    def __hash__(self) -> int:
        return hash((self.num, self.exp))

    def __float__(self) -> float:
        return self.num / (1 << self.exp)

    def __bool__(self) -> bool:
        return self.num != 0

    def is_integer(self) -> bool:
        return self.exp == 0

    def numerator_at(self, exp: int) -> int:
        """Numerator after rescaling to denominator 2**exp; exact or raises."""
        if exp < self.exp:
            raise ValueError(f"{self} has no exact representation over 2^{exp}")
        return self.num << (exp - self.exp)

    def __repr__(self) -> str:
        return f"Dyadic({self.num}, {self.exp})"

    def __str__(self) -> str:
        if self.exp == 0:
            return str(self.num)
        return f"{self.num}/2^{self.exp}"


DyadicLike = Union[Dyadic, int, float]


def as_dyadic(x: DyadicLike) -> Dyadic:
    if isinstance(x, Dyadic):
        return x
    if isinstance(x, int):
        return Dyadic(x)
    if isinstance(x, float):
        return Dyadic.from_float(x)
    raise TypeError(f"cannot interpret {type(x).__name__} as Dyadic")
