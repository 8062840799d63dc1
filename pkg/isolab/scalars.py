"""
Scalars
=======

Exact Gaussian rationals and the helpers that move scalars between exact
mode (``int``, ``Fraction``, ``GaussianRational``) and floating mode
(``complex``).

A ``GaussianRational`` with zero imaginary part never escapes an arithmetic
operation: results are normalized to ``Fraction`` so that real exact values
keep the cheaper representation.
"""

from fractions import Fraction
from numbers import Number
from typing import Any, Union

import sympy
from sympy.polys.domains import QQ_I
from sympy.polys.polyerrors import CoercionFailed

Exact = Union[int, Fraction, "GaussianRational"]
Scalar = Union[int, Fraction, "GaussianRational", float, complex]


class GaussianRational:
    """re + i·im with arbitrary-precision rational parts"""

    __slots__ = ("re", "im")

    def __init__(self, re: Any = 0, im: Any = 0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("GaussianRational is immutable")

    def __reduce__(self):
        return (GaussianRational, (self.re, self.im))

    @staticmethod
    def normalize(re: Fraction, im: Fraction) -> Exact:
        if im == 0:
            return re.numerator if re.denominator == 1 else re
        return GaussianRational(re, im)

    @staticmethod
    def _parts(other):
        if isinstance(other, GaussianRational):
            return other.re, other.im
        if isinstance(other, (int, Fraction)):
            return Fraction(other), Fraction(0)
        return None

    def __add__(self, other):
        parts = self._parts(other)
        if parts is None:
            return complex(self) + other if isinstance(other, (float, complex)) else NotImplemented
        return self.normalize(self.re + parts[0], self.im + parts[1])

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __pos__(self):
        return self

    def __sub__(self, other):
        parts = self._parts(other)
        if parts is None:
            return complex(self) - other if isinstance(other, (float, complex)) else NotImplemented
        return self.normalize(self.re - parts[0], self.im - parts[1])

    def __rsub__(self, other):
        parts = self._parts(other)
        if parts is None:
            return other - complex(self) if isinstance(other, (float, complex)) else NotImplemented
        return self.normalize(parts[0] - self.re, parts[1] - self.im)

    def __mul__(self, other):
        parts = self._parts(other)
        if parts is None:
            return complex(self) * other if isinstance(other, (float, complex)) else NotImplemented
        a, b = parts
        return self.normalize(self.re * a - self.im * b, self.re * b + self.im * a)

    __rmul__ = __mul__

    def _reciprocal(self) -> Exact:
        norm = self.re * self.re + self.im * self.im
        if norm == 0:
            raise ZeroDivisionError("GaussianRational division by zero")
        return self.normalize(self.re / norm, -self.im / norm)

    def __truediv__(self, other):
        parts = self._parts(other)
        if parts is None:
            return complex(self) / other if isinstance(other, (float, complex)) else NotImplemented
        return self * reciprocal(self.normalize(*parts))

    def __rtruediv__(self, other):
        parts = self._parts(other)
        if parts is None:
            return other / complex(self) if isinstance(other, (float, complex)) else NotImplemented
        return self._reciprocal() * self.normalize(*parts)

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int):
            return complex(self) ** exponent
        if exponent < 0:
            return reciprocal(self) ** (-exponent)
        result: Exact = 1
        base: Exact = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def _sympy_(self):
        return sympy.Rational(self.re) + sympy.I * sympy.Rational(self.im)

    @classmethod
    def from_sympy(cls, value) -> Exact:
        """Exact scalar of a sympy number in Q(i); raises TypeError outside it"""
        value = sympy.sympify(value)
        if value.atoms(sympy.Float):
            raise TypeError(f"{value} carries floats")
        try:
            element = QQ_I.from_sympy(value)
        except CoercionFailed:
            raise TypeError(f"{value} is not a Gaussian rational") from None
        return cls.normalize(Fraction(int(element.x.numerator), int(element.x.denominator)),
                             Fraction(int(element.y.numerator), int(element.y.denominator)))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __abs__(self):
        return abs(complex(self))

    def __eq__(self, other):
        parts = self._parts(other)
        if parts is None:
            if isinstance(other, (float, complex)):
                return complex(self) == other
            return NotImplemented
        return self.re == parts[0] and self.im == parts[1]

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"

    def __str__(self):
        sign = "+" if self.im >= 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}i)"


I_UNIT = GaussianRational(0, 1)


def is_exact(value: Any) -> bool:
    return isinstance(value, (int, Fraction, GaussianRational)) and not isinstance(value, bool)


def reciprocal(value: Scalar) -> Scalar:
    if isinstance(value, GaussianRational):
        return value._reciprocal()
    if isinstance(value, int):
        return Fraction(1, value)
    return 1 / value


def exact(value: Any) -> Exact:
    """Coerce ints, Fractions, decimal strings and "p/q" strings to an exact scalar"""
    if isinstance(value, GaussianRational):
        return GaussianRational.normalize(value.re, value.im)
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, int):
        return value
    if isinstance(value, (Fraction, str)):
        value = Fraction(value)
        return value.numerator if value.denominator == 1 else value
    if isinstance(value, float):
        value = Fraction(value)
        return value.numerator if value.denominator == 1 else value
    raise TypeError(f"cannot make {value!r} exact")


def to_complex(value: Any) -> complex:
    return complex(value)


def conjugate(value: Scalar) -> Scalar:
    if isinstance(value, (int, Fraction)):
        return value
    return value.conjugate()


def is_zero(value: Any) -> bool:
    return value == 0


def parse_scalar(raw: Any) -> Scalar:
    """Read a scalar in the file formats: int, "p/q", float, [re, im]"""
    if isinstance(raw, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(raw, int):
        return raw
    if isinstance(raw, str):
        return exact(raw)
    if isinstance(raw, float):
        return complex(raw)
    if isinstance(raw, (list, tuple)) and len(raw) == 2:
        re, im = raw
        if all(isinstance(part, (int, str)) and not isinstance(part, bool) for part in (re, im)):
            return GaussianRational.normalize(Fraction(re), Fraction(im))
        return complex(float(re), float(im))
    raise TypeError(f"unrecognized scalar {raw!r}")


def format_scalar(value: Any) -> Any:
    """Inverse of ``parse_scalar``"""
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    if isinstance(value, GaussianRational):
        return [format_scalar(value.re), format_scalar(value.im)]
    if isinstance(value, Number):
        value = complex(value)
        return [value.real, value.imag]
    raise TypeError(f"cannot format {value!r}")
