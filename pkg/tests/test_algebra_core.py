from fractions import Fraction

import numpy as np
import pytest

from isolab.algebra_core import (LieStructure, bracket_tensor, commutator, determinant, exact_inverse, identity,
                                 kron, matmul, matrices_equal, matrix_of_polynomials, object_matrix,
                                 permutation_operator, to_numeric, trace)
from isolab.errors import ShapeMismatchError, SingularityError
from isolab.polynomial import PhasePolynomial, canonical_bracket, p_gen, q_gen, var
from isolab.takiff import lifted_A, symbolic_slots


@pytest.mark.parametrize("m", [1, 2, 3])
def test_gl_structure(m):
    gl = LieStructure.gl(m)
    assert gl.dimension == m * m
    assert gl.check_structure_constants()
    assert gl.check_antisymmetry()
    assert gl.check_jacobi()
    assert gl.check_casimir()


def test_permutation_swaps_tensor_factors(random_rational_matrix):
    gl = LieStructure.gl(2)
    a, b = random_rational_matrix(2), random_rational_matrix(2)
    assert gl.check_swap(a, b)
    pi = permutation_operator(2)
    assert matrices_equal(matmul(pi, pi), identity(4))


def test_kron_index_convention():
    a = object_matrix([[1, 2], [3, 4]])
    out = kron(a, identity(2))
    # entry ((a, c), (b, d)) = A_ab δ_cd
    assert out[1 * 2 + 0, 0 * 2 + 0] == 3
    assert out[1 * 2 + 1, 0 * 2 + 0] == 0
    assert out[0 * 2 + 1, 1 * 2 + 1] == 2


def test_exact_inverse_and_determinant(random_rational_matrix):
    a = object_matrix([[2, 1], [Fraction(1, 2), 3]])
    inv = exact_inverse(a)
    assert matrices_equal(matmul(a, inv), identity(2))
    assert determinant(a) == Fraction(11, 2)
    b = random_rational_matrix(3)
    if determinant(b) != 0:
        assert matrices_equal(matmul(exact_inverse(b), b), identity(3))


def test_singular_inverse_raises():
    with pytest.raises(SingularityError):
        exact_inverse(object_matrix([[1, 2], [2, 4]]))
    assert determinant(object_matrix([[1, 2], [2, 4]])) == 0


def test_shapes_are_checked():
    with pytest.raises(ShapeMismatchError):
        matmul(object_matrix([[1, 2]]), object_matrix([[1, 2]]))
    with pytest.raises(ShapeMismatchError):
        trace(object_matrix([[1, 2]]))
    with pytest.raises(ShapeMismatchError):
        object_matrix([[1, 2], [3]])


def test_trace_of_commutator_vanishes(random_rational_matrix):
    a, b = random_rational_matrix(3), random_rational_matrix(3)
    assert trace(commutator(a, b)) == 0


def test_bracket_tensor_of_lifted_residue_is_kks():
    # r = 0: {A ⊗, A} = -[Π, A ⊗ 1]
    q, p = symbolic_slots(0, 2)
    a = lifted_A(q, p)[0]
    tensor = bracket_tensor(a, a, canonical_bracket)
    pi = permutation_operator(2)
    a1 = kron(a, identity(2))
    expected = -(matmul(pi, a1) - matmul(a1, pi))
    assert all(x == y for x, y in zip(tensor.flat, expected.flat))


def test_to_numeric_rejects_symbolic_entries():
    q, p = symbolic_slots(0, 1)
    with pytest.raises(TypeError):
        to_numeric(lifted_A(q, p)[0])
    np.testing.assert_allclose(to_numeric(object_matrix([[Fraction(1, 2)]])), [[0.5]])


def test_matrix_of_polynomials():
    q, p = symbolic_slots(0, 1)
    assert matrix_of_polynomials(q, p)[0, 0] == var(q_gen(0)) * var(p_gen(0))

    q, p = symbolic_slots(0, 2)
    product = matrix_of_polynomials(q, p)
    assert product[0, 0] == var(q_gen(0, 0, 0)) * var(p_gen(0, 0, 0)) + var(q_gen(0, 0, 1)) * var(p_gen(0, 1, 0))

    constant = matrix_of_polynomials([identity(2)], [identity(2)], lambda qs, ps: qs[0] - ps[0])
    assert all(isinstance(x, PhasePolynomial) and x.is_zero() for x in constant.flat)


def test_matrix_of_polynomials_checks_shapes():
    q, p = symbolic_slots(0, 2)
    with pytest.raises(ShapeMismatchError):
        matrix_of_polynomials(q, symbolic_slots(0, 3)[1])
    with pytest.raises(ShapeMismatchError):
        matrix_of_polynomials(q + q, p)
