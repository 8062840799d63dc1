from fractions import Fraction

import pytest
import sympy

from isolab.errors import MissingGeneratorError
from isolab.polynomial import (Generator, canonical_bracket, canonical_table, from_sympy,
                               lie_poisson_bracket, p_gen, partner, q_gen, reduce_modulo, var)
from isolab.scalars import I_UNIT

P = var(p_gen(0, 0, 1))
Q = var(q_gen(0, 1, 0))
X = var(q_gen(1, 0, 0))


def test_partner_transposes_indices():
    assert partner(p_gen(2, 0, 1)) == q_gen(2, 1, 0)
    assert partner(partner(q_gen(0, 1, 0))) == q_gen(0, 1, 0)
    assert partner(Generator("T", 1)) is None


def test_canonical_pair_brackets():
    assert canonical_bracket(P, Q) == 1
    assert canonical_bracket(Q, P) == -1
    assert canonical_bracket(P, X).is_zero()
    assert canonical_table(p_gen(0, 0, 1), q_gen(0, 1, 0)) == 1


def test_bracket_is_antisymmetric_and_leibniz():
    f = P * P * Q + X * Fraction(1, 2)
    g = Q * Q * P + I_UNIT * P
    assert canonical_bracket(f, g) == -canonical_bracket(g, f)
    h = P * X
    assert canonical_bracket(f, g * h) == canonical_bracket(f, g) * h + g * canonical_bracket(f, h)


def test_jacobi_identity():
    f, g, h = P * Q * Q, P * P + Q, Q * P * X
    total = (canonical_bracket(f, canonical_bracket(g, h)) + canonical_bracket(g, canonical_bracket(h, f))
             + canonical_bracket(h, canonical_bracket(f, g)))
    assert total.is_zero()


def test_lie_poisson_matches_canonical_for_canonical_table():
    f, g = P * P * Q, Q * Q * X + P
    assert lie_poisson_bracket(f, g, canonical_table) == canonical_bracket(f, g)


def test_arithmetic_degrees_and_derivatives():
    f = (P + Q) ** 3
    assert f.degree() == 3
    assert f.bidegrees() == {(3, 0), (2, 1), (1, 2), (0, 3)}
    assert (P * P * Q).degree_in("P") == 2
    assert (P * P * Q).degree_in(("P", "Q")) == 3
    assert (Q - Q).degree_in("P") == -1
    assert f.diff(p_gen(0, 0, 1)) == (P + Q) ** 2 * 3
    assert (f - f).is_zero()
    with pytest.raises(ValueError):
        P ** -1


def test_substitute_and_evaluate():
    f = P * Q + 2
    assert f.substitute({p_gen(0, 0, 1): Q}) == Q * Q + 2
    assert f.evaluate({p_gen(0, 0, 1): 3, q_gen(0, 1, 0): Fraction(1, 3)}) == 3
    with pytest.raises(MissingGeneratorError):
        f.evaluate({p_gen(0, 0, 1): 1})


def test_sympy_round_trip():
    f = P * Q * Fraction(3, 2) - I_UNIT * X
    symbols = {}
    expr = f.to_sympy(symbols)
    back = from_sympy(expr, {s: g for g, s in symbols.items()})
    assert back == f
    assert isinstance(expr, sympy.Expr)


def test_reduce_modulo_span():
    basis = [P * P, P * Q + Q * Q]
    remainder, coefficients = reduce_modulo(P * P * 2 - (P * Q + Q * Q) * Fraction(1, 3) + Q, basis)
    assert remainder == Q
    assert coefficients == [2, Fraction(-1, 3)]

    remainder, coefficients = reduce_modulo(P * Q, [P * P, P * P * 2])
    assert remainder == P * Q
    assert coefficients == [0, 0]


def test_reduce_modulo_without_basis():
    remainder, coefficients = reduce_modulo(P + Q, [])
    assert remainder == P + Q
    assert coefficients == []
