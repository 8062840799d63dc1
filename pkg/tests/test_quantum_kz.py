import dataclasses
from fractions import Fraction

import numpy as np
import pytest
import sympy

from isolab.connection import ConnectionSpec, PoleData, TimeCoordinate, schlesinger_spec
from isolab.errors import AssignmentError, DegreePreservationError, DomainError, IndexRangeError, \
    ShapeMismatchError, SingularityError
from isolab.isoflow import FlowPath, IntegratorConfig, integrate_flow
from isolab.painleve import PainleveKind, PainleveParameters
from isolab.polynomial import p_gen, q_gen, var
from isolab.quantum_kz import (LEFT, WEYL, MonomialBasis, build_confluent_kz, classical_limit_check,
                               commutator_defect, confluent_kz_report, derivative, euler_operator, flatness_check,
                               frobenius_exponents, kz_residual, lifted_variable_count, multiply,
                               painleve_quantum_hamiltonians, piii_quantum_reduction, quantize_phase_polynomial,
                               quantum_report, residue_matrix, semiclassical_check, solve_kz)

PVI = PainleveParameters(PainleveKind.VI, {"theta0": Fraction(1, 3), "theta1": Fraction(1, 4),
                                           "thetat": Fraction(1, 5)})
PIV = PainleveParameters(PainleveKind.IV, {"thetat": Fraction(1, 3), "theta2": Fraction(1, 4), "theta3": 1,
                                           "I0": Fraction(1, 2)})
PIII = PainleveParameters(PainleveKind.III, {"theta1": Fraction(1, 3), "theta2": Fraction(1, 2), "theta3": 1,
                                             "I0": Fraction(1, 4)})
CONFIG = IntegratorConfig(rtol=1e-10, atol=1e-12)

Q0, P0, Q1, P1 = q_gen(0), p_gen(0), q_gen(1), p_gen(1)
CANONICAL = {Q0: multiply(0), P0: derivative(0), Q1: multiply(1), P1: derivative(1)}


def test_monomial_basis():
    basis = MonomialBasis(2, 2)
    assert basis.exponents == [(2, 0), (1, 1), (0, 2)]
    assert basis.index((1, 1)) == 1
    assert basis.label((1, 1)) == "x0*x1"
    assert basis.label((0, 2), ["x", "y"]) == "y^2"
    assert len(MonomialBasis(3, 2)) == 6
    with pytest.raises(IndexRangeError):
        basis.index((1, 0))
    with pytest.raises(IndexRangeError):
        MonomialBasis(0, 1)


def test_euler_operator_is_degree():
    basis = MonomialBasis(3, 2)
    assert euler_operator(basis) == sympy.eye(basis.size) * 2
    partial = quantize_phase_polynomial(var(Q0) * var(P0), CANONICAL, MonomialBasis(2, 2))
    np.testing.assert_allclose(np.diag(partial.matrix), [2, 1, 0])


def test_weyl_symmetrization():
    basis = MonomialBasis(1, 1)
    assignment = {Q0: multiply(0), P0: derivative(0)}
    left = quantize_phase_polynomial(var(Q0) * var(P0), assignment, basis, ordering=LEFT)
    weyl = quantize_phase_polynomial(var(Q0) * var(P0), assignment, basis, ordering=WEYL)
    assert left.matrix[0, 0] == 1
    assert weyl.matrix[0, 0] == 1.5


def test_degree_must_be_preserved():
    with pytest.raises(DegreePreservationError):
        quantize_phase_polynomial(var(Q0) * var(Q1) * var(P0), CANONICAL, MonomialBasis(2, 2))


def test_assignment_rules():
    basis = MonomialBasis(2, 1)
    h = var(Q0) * var(P0)
    with pytest.raises(AssignmentError):
        quantize_phase_polynomial(h, {Q0: multiply(0), P0: multiply(0)}, basis)
    with pytest.raises(AssignmentError):
        quantize_phase_polynomial(h, {Q0: multiply(0), P0: derivative(1)}, basis)
    with pytest.raises(AssignmentError):
        quantize_phase_polynomial(h, {Q0: multiply(0), P0: derivative(0, 0)}, basis)
    with pytest.raises(AssignmentError):
        quantize_phase_polynomial(h, {Q0: multiply(0)}, basis)
    with pytest.raises(IndexRangeError):
        quantize_phase_polynomial(h, CANONICAL, basis, ordering="right")


def test_classical_limit_weyl():
    pairs = [(var(Q0) * var(P0), var(Q1) * var(P0)), (var(Q0) * var(P1), var(Q1) * var(P0)),
             (var(Q0) * var(Q1) * var(P0) * var(P1), var(Q0) * var(P1))]
    report = classical_limit_check(pairs, CANONICAL, MonomialBasis(2, 3), WEYL)
    assert report.passed, report.failures


@pytest.mark.parametrize("params,degree", [(PVI, 1), (PIV, 2), (PIII, 2)])
def test_painleve_quantization(params, degree):
    assert quantum_report(params, degree).passed


def test_piii_reduces_to_scalar_operator():
    report = piii_quantum_reduction(PIII, 2)
    assert report.passed, report.failures


def test_piii_reduction_needs_unit_theta3():
    values = dict(PIII.values, theta3=2)
    with pytest.raises(DomainError):
        piii_quantum_reduction(PainleveParameters(PainleveKind.III, values), 1)


def test_quantization_guards():
    with pytest.raises(DomainError):
        painleve_quantum_hamiltonians(PainleveKind.IV, PVI, MonomialBasis(3, 1))
    with pytest.raises(ShapeMismatchError):
        painleve_quantum_hamiltonians(PainleveKind.VI, PVI, MonomialBasis(2, 1))
    symbolic = PainleveParameters(PainleveKind.VI, dict(PVI.values, theta0=sympy.Symbol("a")))
    system = painleve_quantum_hamiltonians(PainleveKind.VI, symbolic, MonomialBasis(3, 1))
    with pytest.raises(DomainError):
        system.operators({"t": 0.5})


def test_residue_exact_and_extrapolated_agree():
    system = painleve_quantum_hamiltonians(PainleveKind.VI, PVI, MonomialBasis(3, 1))
    exact = residue_matrix(system, 0)
    numeric = residue_matrix(dataclasses.replace(system, symbolic=None), 0)
    np.testing.assert_allclose(numeric, exact, atol=1e-6)
    exponents = frobenius_exponents(system, 0)
    assert exponents.shape == (system.basis.size,)
    assert np.all(np.isfinite(exponents))


def test_solve_painleve_four():
    system = painleve_quantum_hamiltonians(PainleveKind.IV, PIV, MonomialBasis(2, 2))
    initial = np.zeros(system.basis.size, dtype=complex)
    initial[0] = 1
    solution = solve_kz(system, initial, (0.5, 0.75), CONFIG)
    assert kz_residual(solution) < 1e-6
    assert solution.final.shape == (system.basis.size,)


def test_solve_guards():
    system = painleve_quantum_hamiltonians(PainleveKind.VI, PVI, MonomialBasis(3, 1))
    initial = np.eye(system.basis.size, dtype=complex)[0]
    with pytest.raises(SingularityError):
        solve_kz(system, initial, (0.5, 1.0), CONFIG)
    with pytest.raises(ShapeMismatchError):
        solve_kz(system, initial[:-1], (0.5, 0.6), CONFIG)


@pytest.fixture
def three_points(random_rational_matrix):
    return schlesinger_spec([0, 1, Fraction(1, 3)], [random_rational_matrix(2) for _ in range(3)],
                            [False, True, True])


def test_confluent_kz_flat(three_points):
    points = [{TimeCoordinate("u", 1): 1.0 + 0.1j, TimeCoordinate("u", 2): 0.4 + 0.3j}]
    report = confluent_kz_report(three_points, 1, points)
    assert report.passed, report.failures


def test_confluent_kz_solution(three_points):
    basis = MonomialBasis(lifted_variable_count(three_points), 1)
    system = build_confluent_kz(three_points, basis, hbar=0.5)
    assert commutator_defect(system, [{}]) < 1e-10
    u2 = TimeCoordinate("u", 2)
    initial = np.eye(basis.size, dtype=complex)[0]
    solution = solve_kz(system, initial, ({u2: 1 / 3}, {u2: 0.45 + 0.1j}), CONFIG)
    assert kz_residual(solution) < 1e-6


def test_confluent_kz_basis_must_match(three_points):
    with pytest.raises(ShapeMismatchError):
        build_confluent_kz(three_points, MonomialBasis(3, 1))


def test_painleve_time_derivative_is_exact():
    system = painleve_quantum_hamiltonians(PainleveKind.IV, PIV, MonomialBasis(2, 1))
    exact = system.time_derivative("t", "t", {"t": 0.5})
    stencil = dataclasses.replace(system, symbolic=None).time_derivative("t", "t", {"t": 0.5})
    np.testing.assert_allclose(exact, stencil, atol=1e-8)


@pytest.fixture
def with_rank_one_pole(random_rational_matrix):
    return ConnectionSpec(2, [PoleData(0, [random_rational_matrix(2)], movable=False),
                              PoleData(1, [random_rational_matrix(2)]),
                              PoleData(Fraction(1, 3), [random_rational_matrix(2), random_rational_matrix(2)],
                                       (Fraction(2),))])


def test_confluent_time_derivatives_are_exact(with_rank_one_pole):
    system = build_confluent_kz(with_rank_one_pole, MonomialBasis(lifted_variable_count(with_rank_one_pole), 1))
    u1, u2, t1 = TimeCoordinate("u", 1), TimeCoordinate("u", 2), TimeCoordinate("t", 2, 1)
    assert system.coordinates == [u1, u2, t1]
    point = {u1: 1.1 + 0.2j, u2: 0.4 + 0.3j, t1: 2.0 - 0.5j}
    stencil = dataclasses.replace(system, rates=None)
    for by in system.coordinates:
        for of in system.coordinates:
            np.testing.assert_allclose(system.time_derivative(by, of, point),
                                       stencil.time_derivative(by, of, point), atol=1e-6)


def test_flatness_over_several_times(random_rational_matrix):
    spec = schlesinger_spec([0, 1, Fraction(1, 3), Fraction(-1, 2)], [random_rational_matrix(2) for _ in range(4)],
                            [False, True, True, True])
    system = build_confluent_kz(spec, MonomialBasis(lifted_variable_count(spec), 1))
    u1, u2, u3 = (TimeCoordinate("u", i) for i in (1, 2, 3))
    assert system.coordinates == [u1, u2, u3]
    point = {u1: 1.2 + 0.1j, u2: 0.3 + 0.4j, u3: -0.6 - 0.2j}
    assert flatness_check(system, [point]) < 1e-8

    # Ĥ_{u1} + u2·1 keeps the operators commuting but breaks ∂_{u2}Ĥ_{u1} = ∂_{u1}Ĥ_{u2}
    eye = np.eye(system.basis.size)

    def family(p):
        out = system.family(p)
        out[u1] = out[u1] + p[u2] * eye
        return out

    def rates(by, p):
        out = system.rates(by, p)
        if by == u2:
            out[u1] = out[u1] + eye
        return out

    broken = dataclasses.replace(system, family=family, rates=rates)
    assert flatness_check(broken, [point]) > 0.99
    assert flatness_check(dataclasses.replace(broken, rates=None), [point]) > 0.99


def test_semiclassical_phase(random_complex_matrix):
    residues = [random_complex_matrix(2) for _ in range(4)]
    spec = schlesinger_spec([0, 1, 0.3 + 0.4j, 2.0 + 1.0j], residues, [False, False, True, True])
    coords = [TimeCoordinate("u", 2), TimeCoordinate("u", 3)]
    trajectory = integrate_flow(spec, FlowPath.straight(coords, (0.3 + 0.4j, 2.0 + 1.0j), (0.5 + 0.6j, 2.3 + 0.8j)),
                                CONFIG)
    report = semiclassical_check(trajectory, [1.0, 0.5, 0.1])
    assert report.passed, report.failures
    assert [check.name for check in report.checks] == ["dS = d log tau"]
    details = report.checks[0].details
    assert details["hbar=0.1"] == pytest.approx(10 * details["hbar=1"])
