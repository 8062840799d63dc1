"""
Phase Polynomials
=================

Exact sparse multivariate polynomials over named generators, with the
canonical Poisson bracket of the lifted Darboux coordinates and a generic
Leibniz extension of any bracket table on generators.

Generators are ``Generator(kind, slot, row, col)`` tuples with 0-based
``row``/``col``. Kinds ``P`` and ``Q`` are canonical coordinates with
``{P_{j,ab}, Q_{j,cd}} = δ_ad δ_bc``; other kinds (deformation times ``T``,
coefficient symbols ``A``/``B``/``C``, the weight parameter ``L``) only
take part in the brackets their table gives them.
"""

from fractions import Fraction
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

from .errors import MissingGeneratorError
from .scalars import GaussianRational, Scalar, reciprocal


class Generator(NamedTuple):
    kind: str
    slot: int
    row: int = 0
    col: int = 0

    def __str__(self):
        return f"{self.kind}{self.slot}_{self.row + 1}{self.col + 1}"


def p_gen(slot: int, row: int = 0, col: int = 0) -> Generator:
    return Generator("P", slot, row, col)


def q_gen(slot: int, row: int = 0, col: int = 0) -> Generator:
    return Generator("Q", slot, row, col)


def t_gen(index: int) -> Generator:
    return Generator("T", index)


Monomial = Tuple[Tuple[Generator, int], ...]
ONE: Monomial = ()


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    powers: Dict[Generator, int] = dict(a)
    for g, e in b:
        powers[g] = powers.get(g, 0) + e
    return tuple(sorted(powers.items()))


class PhasePolynomial:
    """Immutable sparse polynomial {monomial: coefficient} in canonical form"""

    __slots__ = ("_terms",)

    def __init__(self, terms: Optional[Mapping[Monomial, Scalar]] = None):
        self._terms: Dict[Monomial, Scalar] = {
            mono: coeff for mono, coeff in (terms or {}).items() if coeff != 0
        }

    @classmethod
    def constant(cls, value: Scalar) -> "PhasePolynomial":
        return cls({ONE: value})

    @classmethod
    def generator(cls, g: Generator) -> "PhasePolynomial":
        return cls({((g, 1),): 1})

    @classmethod
    def zero(cls) -> "PhasePolynomial":
        return cls()

    @staticmethod
    def coerce(value: Union["PhasePolynomial", Scalar]) -> "PhasePolynomial":
        if isinstance(value, PhasePolynomial):
            return value
        return PhasePolynomial.constant(value)

    # ------------------------------------------------------------------
    # inspection

    def items(self) -> Iterator[Tuple[Monomial, Scalar]]:
        return iter(sorted(self._terms.items()))

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def generators(self) -> set:
        return {g for mono in self._terms for g, _ in mono}

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial"""
        return max((sum(e for _, e in mono) for mono in self._terms), default=-1)

    def degree_in(self, kinds: Iterable[str]) -> int:
        kinds = set(kinds)
        return max((sum(e for g, e in mono if g.kind in kinds) for mono in self._terms), default=-1)

    def bidegrees(self) -> set:
        """Set of (P-degree, Q-degree) pairs over the monomials"""
        return {
            (sum(e for g, e in mono if g.kind == "P"), sum(e for g, e in mono if g.kind == "Q"))
            for mono in self._terms
        }

    def coefficient(self, monomial: Monomial) -> Scalar:
        return self._terms.get(tuple(sorted(monomial)), 0)

    def is_constant(self) -> bool:
        return all(mono == ONE for mono in self._terms)

    # ------------------------------------------------------------------
    # arithmetic

    def __add__(self, other):
        if not isinstance(other, PhasePolynomial):
            if isinstance(other, (int, Fraction, GaussianRational, float, complex)):
                other = PhasePolynomial.constant(other)
            else:
                return NotImplemented
        terms = dict(self._terms)
        for mono, coeff in other._terms.items():
            terms[mono] = terms.get(mono, 0) + coeff
        return PhasePolynomial(terms)

    __radd__ = __add__

    def __neg__(self):
        return PhasePolynomial({mono: -coeff for mono, coeff in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, PhasePolynomial):
            return self + (-other)
        if isinstance(other, (int, Fraction, GaussianRational, float, complex)):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, factor: Scalar) -> "PhasePolynomial":
        if factor == 0:
            return PhasePolynomial()
        return PhasePolynomial({mono: coeff * factor for mono, coeff in self._terms.items()})

    def __mul__(self, other):
        if not isinstance(other, PhasePolynomial):
            if isinstance(other, (int, Fraction, GaussianRational, float, complex)):
                return self.scale(other)
            return NotImplemented
        terms: Dict[Monomial, Scalar] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                mono = _mono_mul(m1, m2)
                terms[mono] = terms.get(mono, 0) + c1 * c2
        return PhasePolynomial(terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction, GaussianRational, float, complex)):
            return self.scale(reciprocal(other))
        return NotImplemented

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("PhasePolynomial powers must be non-negative integers")
        result = PhasePolynomial.constant(1)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, PhasePolynomial):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction, GaussianRational, float, complex)):
            return self._terms == PhasePolynomial.constant(other)._terms
        return NotImplemented

    __hash__ = None  # type: ignore[assignment]

    # ------------------------------------------------------------------
    # calculus and substitution

    def diff(self, g: Generator) -> "PhasePolynomial":
        terms: Dict[Monomial, Scalar] = {}
        for mono, coeff in self._terms.items():
            for position, (h, e) in enumerate(mono):
                if h != g:
                    continue
                rest = mono[:position] + (((h, e - 1),) if e > 1 else ()) + mono[position + 1:]
                terms[rest] = terms.get(rest, 0) + coeff * e
                break
        return PhasePolynomial(terms)

    def substitute(self, mapping: Mapping[Generator, Union["PhasePolynomial", Scalar]]) -> "PhasePolynomial":
        """Replace generators by polynomials or scalars; unmapped generators stay"""
        powers: Dict[Tuple[Generator, int], PhasePolynomial] = {}
        result = PhasePolynomial()
        for mono, coeff in self._terms.items():
            kept: list = []
            term = PhasePolynomial.constant(coeff)
            for g, e in mono:
                if g in mapping:
                    key = (g, e)
                    if key not in powers:
                        powers[key] = PhasePolynomial.coerce(mapping[g]) ** e
                    term = term * powers[key]
                else:
                    kept.append((g, e))
            if kept:
                term = term * PhasePolynomial({tuple(kept): 1})
            result = result + term
        return result

    def evaluate(self, assignment: Mapping[Generator, Scalar]) -> Scalar:
        total: Scalar = 0
        for mono, coeff in self._terms.items():
            value = coeff
            for g, e in mono:
                if g not in assignment:
                    raise MissingGeneratorError(f"No value for generator {g}", {"generator": g})
                value = value * assignment[g] ** e
            total = total + value
        return total

    def map_coefficients(self, fn: Callable[[Scalar], Scalar]) -> "PhasePolynomial":
        return PhasePolynomial({mono: fn(coeff) for mono, coeff in self._terms.items()})

    def to_sympy(self, symbols: Optional[Mapping[Generator, object]] = None):
        import sympy

        symbols = dict(symbols or {})
        expr = sympy.Integer(0)
        for mono, coeff in self.items():
            term = sympy_scalar(coeff)
            for g, e in mono:
                if g not in symbols:
                    symbols[g] = sympy.Symbol(str(g))
                term = term * symbols[g] ** e
            expr = expr + term
        return expr

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for mono, coeff in self.items():
            factors = "*".join(str(g) if e == 1 else f"{g}^{e}" for g, e in mono)
            if not factors:
                parts.append(str(coeff))
            elif coeff == 1:
                parts.append(factors)
            else:
                parts.append(f"{coeff}*{factors}")
        return " + ".join(parts)


def sympy_scalar(value: Scalar):
    import sympy

    if isinstance(value, GaussianRational):
        return sympy.Rational(value.re.numerator, value.re.denominator) + \
            sympy.I * sympy.Rational(value.im.numerator, value.im.denominator)
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    if isinstance(value, int):
        return sympy.Integer(value)
    return sympy.sympify(complex(value))


def var(g: Generator) -> PhasePolynomial:
    return PhasePolynomial.generator(g)


def from_sympy(expr, generators: Mapping[object, Generator]) -> PhasePolynomial:
    """PhasePolynomial of a sympy polynomial in the given symbols (numeric coefficients only)"""
    import sympy

    symbols = list(generators)
    poly = sympy.Poly(sympy.expand(expr), *symbols)
    terms: Dict[Monomial, Scalar] = {}
    for exponents, coeff in poly.terms():
        mono = tuple(sorted((generators[s], e) for s, e in zip(symbols, exponents) if e))
        terms[mono] = scalar_from_sympy(coeff)
    return PhasePolynomial(terms)


def scalar_from_sympy(value) -> Scalar:
    if value.free_symbols:
        raise MissingGeneratorError("Coefficient still depends on symbols",
                                    {"symbols": sorted(str(s) for s in value.free_symbols)})
    if value.is_Integer:
        return int(value)
    try:
        return GaussianRational.from_sympy(value)
    except TypeError:
        return complex(value)


def reduce_modulo(f: PhasePolynomial, basis: Sequence[PhasePolynomial]) -> Tuple[PhasePolynomial, List[Scalar]]:
    """f minus its projection onto span(basis), and the coefficients of that projection

    The projection is orthogonal in the monomial coefficients and exact: the
    Hermitian normal equations are solved over the pivot columns of the basis.
    The remainder is zero exactly when f lies in the span.
    """
    import sympy

    basis = [PhasePolynomial.coerce(b) for b in basis]
    coefficients: List[Scalar] = [0] * len(basis)
    monomials = sorted({mono for g in [f] + basis for mono, _ in g.items()})
    if not basis or not monomials:
        return f, coefficients
    row = {mono: i for i, mono in enumerate(monomials)}

    def column(g: PhasePolynomial):
        out = sympy.zeros(len(monomials), 1)
        for mono, coeff in g.items():
            out[row[mono], 0] = sympy_scalar(coeff)
        return out

    spanning = sympy.Matrix.hstack(*[column(b) for b in basis])
    _, pivots = spanning.rref()
    if pivots:
        independent = spanning[:, list(pivots)]
        solution = (independent.H * independent).LUsolve(independent.H * column(f))
        for slot, value in zip(pivots, solution):
            coefficients[slot] = scalar_from_sympy(sympy.expand(sympy.radsimp(value)))
    remainder = f
    for c, b in zip(coefficients, basis):
        if c != 0:
            remainder = remainder - b * c
    return remainder, coefficients


# ----------------------------------------------------------------------
# brackets

BracketTable = Callable[[Generator, Generator], Optional[Union[PhasePolynomial, Scalar]]]


def partner(g: Generator) -> Optional[Generator]:
    """The canonical conjugate: P_{j,ab} <-> Q_{j,ba}"""
    if g.kind == "P":
        return Generator("Q", g.slot, g.col, g.row)
    if g.kind == "Q":
        return Generator("P", g.slot, g.col, g.row)
    return None


def canonical_table(x: Generator, y: Generator) -> Scalar:
    if partner(x) != y:
        return 0
    return 1 if x.kind == "P" else -1


def lie_poisson_bracket(f: PhasePolynomial, g: PhasePolynomial, table: BracketTable) -> PhasePolynomial:
    """Leibniz extension {f, g} = Σ ∂f/∂x ∂g/∂y {x, y}"""
    gens_g = sorted(g.generators())
    dg = {y: g.diff(y) for y in gens_g}
    result = PhasePolynomial()
    for x in sorted(f.generators()):
        dfx = None
        for y in gens_g:
            value = table(x, y)
            if value is None or (not isinstance(value, PhasePolynomial) and value == 0):
                continue
            if isinstance(value, PhasePolynomial) and value.is_zero():
                continue
            if dfx is None:
                dfx = f.diff(x)
            result = result + dfx * dg[y] * value
    return result


def canonical_bracket(f: PhasePolynomial, g: PhasePolynomial) -> PhasePolynomial:
    """Canonical bracket with {P_{j,ab}, Q_{j,cd}} = δ_ad δ_bc"""
    gens_g = g.generators()
    result = PhasePolynomial()
    for x in sorted(f.generators()):
        y = partner(x)
        if y is None or y not in gens_g:
            continue
        term = f.diff(x) * g.diff(y)
        result = result + term if x.kind == "P" else result - term
    return result
