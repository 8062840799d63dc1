from fractions import Fraction

import numpy as np
import pytest

from isolab.algebra_core import identity, matmul, matrices_equal, object_matrix, trace, zeros
from isolab.connection import (INF, ConnectionSpec, PoleData, TimeCoordinate, assemble, fuchs_residue_sum,
                               hamiltonians, irregular_hamiltonians, irregular_quadratic, katz_dimension,
                               katz_symplectic_count, local_laurent, pole_hamiltonian, residue_at_infinity,
                               residue_sum, schlesinger_spec, spectral_invariant, spectral_quadratic)
from isolab.errors import IndexRangeError, PoleEvaluationError, ShapeMismatchError, SingularityError
from isolab.monomials import TimeVector

A1 = object_matrix([[1, 0], [0, -1]])
A2 = object_matrix([[1, 2], [3, -1]])


def test_simple_pole_value():
    spec = schlesinger_spec([0], [identity(2)])
    assert matrices_equal(assemble(spec, 2), identity(2) * Fraction(1, 2))


def test_evaluation_at_pole_raises():
    spec = schlesinger_spec([0, 1], [A1, A2])
    with pytest.raises(PoleEvaluationError):
        assemble(spec, 1)


def test_partial_fractions_with_irregular_pole(random_rational_matrix):
    a0, a1, c = (random_rational_matrix(2) for _ in range(3))
    t1 = Fraction(3, 2)
    spec = ConnectionSpec(2, [PoleData(0, [a0, a1], times=(t1,)), PoleData(1, [c])])
    lam = Fraction(5, 3)
    expected = a0 / lam + a1 * t1 / lam ** 2 + c / (lam - 1)
    assert matrices_equal(assemble(spec, lam), expected)


def test_polynomial_part_at_infinity(random_rational_matrix):
    a0, b0, b1, b2 = (random_rational_matrix(2) for _ in range(4))
    spec = ConnectionSpec(2, [PoleData(0, [a0]), PoleData(INF, [b0, b1, b2])])
    lam = Fraction(-2, 7)
    assert matrices_equal(assemble(spec, lam), a0 / lam + b1 + b2 * lam)


def test_spec_validation():
    with pytest.raises(SingularityError):
        schlesinger_spec([1, 1], [A1, A2])
    with pytest.raises(ShapeMismatchError):
        ConnectionSpec(2, [PoleData(INF, [A1]), PoleData(INF, [A2])])
    with pytest.raises(ShapeMismatchError):
        ConnectionSpec(3, [PoleData(0, [A1])])
    with pytest.raises(ShapeMismatchError):
        PoleData(0, [A1, A2], times=(1, 2))


def test_time_coordinate_labels():
    assert str(TimeCoordinate("u", 1)) == "u[1]"
    assert str(TimeCoordinate("t", 2, 1)) == "t[2,1]"


def test_laurent_single_pole():
    spec = schlesinger_spec([0], [A2])
    laurent = local_laurent(spec, 0, 3)
    assert matrices_equal(laurent.coefficient(-1), A2)
    for n in range(0, 4):
        assert matrices_equal(laurent.coefficient(n), zeros(2))


def test_laurent_geometric_series():
    spec = schlesinger_spec([0, 1], [A1, A2])
    laurent = local_laurent(spec, 0, 4)
    for n in range(0, 5):
        assert matrices_equal(laurent.coefficient(n), -A2)


def test_laurent_resums_to_assemble(random_complex_matrix):
    a, b, c = (random_complex_matrix(2) for _ in range(3))
    spec = ConnectionSpec(2, [PoleData(0.0, [a, b], times=(0.8,)), PoleData(2.0, [c])])
    laurent = local_laurent(spec, 0, 60)
    lam = 0.3
    series = sum(laurent.coefficient(n) * lam ** n for n in range(-2, 61))
    np.testing.assert_allclose(series.astype(complex), assemble(spec, lam).astype(complex), atol=1e-9)


def test_laurent_order_must_be_nonnegative():
    with pytest.raises(IndexRangeError):
        local_laurent(schlesinger_spec([0], [A1]), 0, -1)


def test_spectral_invariants_simple_pole():
    spec = schlesinger_spec([0], [A2])
    assert spectral_invariant(spec, 0, 0) == 0
    assert spectral_invariant(spec, 0, 1) == trace(matmul(A2, A2)) * Fraction(1, 2)


def test_two_pole_residue():
    spec = schlesinger_spec([0, 1], [A1, A2])
    assert spectral_invariant(spec, 0, 0) == -2
    assert pole_hamiltonian(spec, 0) == -2


def test_schlesinger_hamiltonians(random_complex_matrix):
    positions = [0.0, 1.0, 0.4 + 0.3j]
    residues = [random_complex_matrix(2) for _ in positions]
    spec = schlesinger_spec(positions, residues)
    for i, u in enumerate(positions):
        expected = sum(np.trace(residues[i] @ residues[j]) / (u - v)
                       for j, v in enumerate(positions) if j != i)
        assert complex(pole_hamiltonian(spec, i)) == pytest.approx(complex(expected), abs=1e-12)


def test_pole_hamiltonian_at_infinity_rejected():
    spec = ConnectionSpec(2, [PoleData(0, [A1]), PoleData(INF, [A1, A2])])
    with pytest.raises(IndexRangeError):
        pole_hamiltonian(spec, 1)


def test_irregular_rank_one():
    t1 = Fraction(2, 3)
    spec = ConnectionSpec(2, [PoleData(0, [A1, A2], times=(t1,)), PoleData(1, [A2])])
    h1, = irregular_hamiltonians(spec, 0)
    assert h1 == spectral_invariant(spec, 0, 1) / t1


def test_irregular_rank_two_formula(random_rational_matrix):
    t1, t2 = Fraction(3, 4), Fraction(-2, 5)
    coeffs = [random_rational_matrix(2) for _ in range(3)]
    spec = ConnectionSpec(2, [PoleData(0, coeffs, times=(t1, t2)), PoleData(1, [random_rational_matrix(2)])])
    h1, h2 = irregular_quadratic(spec, 0)
    s1, s2 = spectral_quadratic(spec, 0, 1), spectral_quadratic(spec, 0, 2)
    assert (h1 - (s1 * (1 / t1) - s2 * (t2 / t1 ** 3))).is_zero()
    assert (h2 - s2 * (1 / t1 ** 2)).is_zero()


def test_irregular_needs_rank():
    with pytest.raises(IndexRangeError):
        irregular_hamiltonians(schlesinger_spec([0, 1], [A1, A2]), 0)


def test_hamiltonian_keys():
    spec = ConnectionSpec(2, [PoleData(0, [A1, A2], times=(1,)), PoleData(1, [A2], movable=False),
                              PoleData(INF, [A1, A2])])
    keys = {str(k) for k in hamiltonians(spec)}
    assert keys == {"u[0]", "t[0,1]", "t[2,1]"}


def test_residue_theorem(random_rational_matrix):
    spec = ConnectionSpec(2, [
        PoleData(0, [random_rational_matrix(2), random_rational_matrix(2)], times=(Fraction(1, 2),)),
        PoleData(1, [random_rational_matrix(2)]),
        PoleData(Fraction(-3, 2), [random_rational_matrix(2)]),
    ])
    assert residue_sum(spec).evaluate(spec.coefficient_values()) == 0


def test_residue_theorem_with_polynomial_part(random_rational_matrix):
    spec = ConnectionSpec(2, [PoleData(0, [random_rational_matrix(2)]),
                              PoleData(INF, [zeros(2), random_rational_matrix(2)])])
    assert residue_sum(spec).evaluate(spec.coefficient_values()) == 0


def test_spectral_invariants_gauge_invariant(random_rational_matrix):
    spec = ConnectionSpec(2, [PoleData(0, [random_rational_matrix(2) for _ in range(3)],
                                       times=(Fraction(2), Fraction(1, 3))),
                              PoleData(1, [random_rational_matrix(2)])])
    g = object_matrix([[1, 1], [0, 1]])
    g_inv = object_matrix([[1, -1], [0, 1]])
    gauged = spec.gauge_transform(g, g_inv)
    for k in range(4):
        assert spectral_invariant(spec, 0, k) == spectral_invariant(gauged, 0, k)


def test_katz_painleve_six():
    assert katz_dimension([[1, 1]] * 4) == 2
    assert katz_symplectic_count([[1, 1]] * 4) == 2


def test_katz_scalar_orbit():
    assert katz_dimension([[3], [3]]) == 2 - 9 - 9


def test_katz_matches_symplectic_count(rng):
    for _ in range(20):
        m = rng.randint(2, 4)
        types = []
        for _ in range(rng.randint(2, 5)):
            split = rng.randint(1, m)
            types.append([split, m - split] if split < m else [m])
        assert katz_dimension(types) == katz_symplectic_count(types)


def test_katz_rejects_bad_multiplicities():
    with pytest.raises(ShapeMismatchError):
        katz_dimension([[1, 1], [1, 2]])
    with pytest.raises(ShapeMismatchError):
        katz_dimension([[2]])


def test_fuchs_relation():
    spec = schlesinger_spec([0, 1, 2], [A1, A2, -(A1 + A2)])
    assert matrices_equal(fuchs_residue_sum(spec), zeros(2))
    spec = schlesinger_spec([0, 1], [A1, A2])
    assert matrices_equal(fuchs_residue_sum(spec), A1 + A2)
    assert matrices_equal(residue_at_infinity(spec), -(A1 + A2))


def test_time_vector_round_trip():
    spec = ConnectionSpec(2, [PoleData(0, [A1, A2], times=(1,)), PoleData(1, [A2])])
    moved = spec.with_times({TimeCoordinate("t", 0, 1): 3, TimeCoordinate("u", 1): 2})
    assert moved.time_value(TimeCoordinate("t", 0, 1)) == 3
    assert moved.poles[1].position == 2
    assert isinstance(moved.poles[0].times, TimeVector)
