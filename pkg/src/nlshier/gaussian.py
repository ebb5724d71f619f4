"""Exact complex numbers with rational real and imaginary parts."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[int, Fraction, "GaussianRational"]


@dataclass(frozen=True, slots=True)
class GaussianRational:
    """An element of Q(i).

    Both parts are kept as :class:`fractions.Fraction`, so every operation is
    exact and denominators are always in lowest terms.
    """

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "re", Fraction(self.re))
        object.__setattr__(self, "im", Fraction(self.im))

    @classmethod
    def coerce(cls, value: Number | complex) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, (int, Rational)):
            return cls(Fraction(value))
        if isinstance(value, complex):
            return cls(Fraction(value.real), Fraction(value.imag))
        if isinstance(value, float):
            return cls(Fraction(value))
        raise TypeError(f"cannot coerce {value!r} to GaussianRational")

    # arithmetic -------------------------------------------------------
    def __add__(self, other: Number) -> "GaussianRational":
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self) -> "GaussianRational":
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other: Number) -> "GaussianRational":
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other: Number) -> "GaussianRational":
        return GaussianRational.coerce(other) - self

    def __mul__(self, other: Number) -> "GaussianRational":
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussianRational(self.re * o.re - self.im * o.im,
                                self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other: Number) -> "GaussianRational":
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * o.conjugate()
        return GaussianRational(num.re / den, num.im / den)

    def __rtruediv__(self, other: Number) -> "GaussianRational":
        return GaussianRational.coerce(other) / self

    def __pow__(self, n: int) -> "GaussianRational":
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return (ONE / self) ** (-n)
        result, base = ONE, self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Rational)):
            return self.im == 0 and self.re == other
        if isinstance(other, complex):
            return complex(self) == other
        return NotImplemented

    def __hash__(self) -> int:
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self) -> bool:
        return bool(self.re) or bool(self.im)

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    # predicates -------------------------------------------------------
    @property
    def is_real(self) -> bool:
        return self.im == 0

    @property
    def is_imaginary(self) -> bool:
        return self.re == 0

    @property
    def is_integer(self) -> bool:
        """True for Gaussian integers."""
        return self.re.denominator == 1 and self.im.denominator == 1

    # text -------------------------------------------------------------
    def __str__(self) -> str:
        return format_coefficient(self)

    def __repr__(self) -> str:
        return f"GaussianRational({format_coefficient(self)!r})"

    @classmethod
    def parse(cls, text: str) -> "GaussianRational":
        return parse_coefficient(text)

    def to_json(self) -> dict:
        return {"re_num": self.re.numerator, "re_den": self.re.denominator,
                "im_num": self.im.numerator, "im_den": self.im.denominator}

    @classmethod
    def from_json(cls, data: dict) -> "GaussianRational":
        return cls(Fraction(data["re_num"], data["re_den"]),
                   Fraction(data["im_num"], data["im_den"]))


ZERO = GaussianRational()
ONE = GaussianRational(1)
I = GaussianRational(0, 1)


def _frac_str(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def format_coefficient(c: GaussianRational) -> str:
    """Render as ``3``, ``-1/8 i``, ``1/2 + 3 i``."""
    if c.im == 0:
        return _frac_str(c.re)
    im = f"{_frac_str(c.im)} i"
    if c.re == 0:
        return im
    sign = "-" if c.im < 0 else "+"
    return f"{_frac_str(c.re)} {sign} {_frac_str(abs(c.im))} i"


def parse_coefficient(text: str) -> GaussianRational:
    """Inverse of :func:`format_coefficient`; also accepts ``i``, ``-i``, ``2i``."""
    s = text.replace(" ", "")
    try:
        if not s.endswith("i"):
            return GaussianRational(Fraction(s))
        body = s[:-1].rstrip("*")
        cut = max(body.rfind("+"), body.rfind("-"))
        re_txt, im_txt = (body[:cut], body[cut:]) if cut > 0 else ("", body)
        if im_txt in ("", "+", "-"):
            im_txt += "1"
        return GaussianRational(Fraction(re_txt) if re_txt else Fraction(0), Fraction(im_txt))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"malformed coefficient {text!r}") from exc
