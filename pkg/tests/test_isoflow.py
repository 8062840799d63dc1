import numpy as np
import pytest
from pydantic import ValidationError

from isolab.connection import ConnectionSpec, PoleData, TimeCoordinate, schlesinger_spec
from isolab.errors import IndexRangeError, MissingGeneratorError, ShapeMismatchError, SingularityError
from isolab.isoflow import (FlowPath, IntegratorConfig, LiftedLayout, coefficient_velocity, conservation_drift,
                            cross_derivative_defect, hamiltonian_commutation, hamiltonian_vector_field,
                            integrate_flow, integrate_polynomial_flow, malgrange_action_check, multi_time_field,
                            omega_form, polynomial_action_defect, tau_closedness, write_trajectory_csv,
                            zero_curvature_residual)
from isolab.polynomial import PhasePolynomial, p_gen, q_gen, var

U2, U3 = TimeCoordinate("u", 2), TimeCoordinate("u", 3)
T1 = TimeCoordinate("t", 0, 1)
CONFIG = IntegratorConfig(rtol=1e-10, atol=1e-12)


@pytest.fixture
def fuchsian(random_complex_matrix):
    residues = [random_complex_matrix(2) for _ in range(4)]
    return schlesinger_spec([0, 1, 0.3 + 0.4j, 2.0 + 1.0j], residues, [False, False, True, True])


@pytest.fixture
def schlesinger_trajectory(fuchsian):
    path = FlowPath.straight([U2], (0.3 + 0.4j,), (0.5 + 0.6j,))
    return integrate_flow(fuchsian, path, CONFIG)


def test_config_rejects_implicit_methods():
    with pytest.raises(ValidationError):
        IntegratorConfig(method="Radau")
    with pytest.raises(ValidationError):
        IntegratorConfig(rtol=0)


def test_path_shapes():
    path = FlowPath.staircase([U2, U3], (0, 0), (1, 2))
    assert path.knots == [(0j, 0j), (1 + 0j, 0j), (1 + 0j, 2 + 0j)]
    assert path.segments == 2
    assert path.point(1.5) == (1 + 0j, 1 + 0j)
    with pytest.raises(ShapeMismatchError):
        FlowPath([U2], [(0,)])
    with pytest.raises(ShapeMismatchError):
        FlowPath([U2], [(0,), (1, 2)])
    with pytest.raises(IndexRangeError):
        path.segment_of(2.5)


def test_path_through_collision_rejected(fuchsian):
    path = FlowPath.straight([U2], (0.5 + 0.5j,), (0.5 - 0.5j,))
    path.validate(fuchsian, 1e-3)
    with pytest.raises(SingularityError):
        FlowPath.straight([U2], (-0.5 + 0j,), (1.5 + 0j,)).validate(fuchsian, 1e-3)


def test_path_through_zero_time_rejected(random_complex_matrix):
    spec = ConnectionSpec(2, [PoleData(0, [random_complex_matrix(2), random_complex_matrix(2)], (1.0,)),
                              PoleData(1, [random_complex_matrix(2)], movable=False)])
    with pytest.raises(SingularityError):
        integrate_flow(spec, FlowPath.straight([T1], (1.0,), (-1.0,)), CONFIG)


def test_polynomial_vector_field():
    q, p = q_gen(0), p_gen(0)
    h = var(p) * var(q) * var(q)
    field = hamiltonian_vector_field(h, {q: 2, p: 3})
    assert field[q] == 4
    assert field[p] == -12
    assert hamiltonian_vector_field(PhasePolynomial.constant(5), {q: 2, p: 3}) == {q: 0, p: 0}
    with pytest.raises(MissingGeneratorError):
        hamiltonian_vector_field(h, {q: 2})


def test_schlesinger_velocity(fuchsian):
    layout = LiftedLayout(fuchsian)
    y = layout.trivial_state(fuchsian)
    times = {U2: 0.3 + 0.4j, U3: 2.0 + 1.0j}
    dy = multi_time_field(fuchsian, layout, times, {U3: 1}, y)
    qs, ps = layout.unpack(y)
    dq, dp = layout.unpack(dy)
    velocity = coefficient_velocity(layout, qs, ps, dq, dp)
    a = {i: fuchsian.poles[i].coefficients[0] for i in range(4)}
    u = [0, 1, 0.3 + 0.4j, 2.0 + 1.0j]
    for i in (0, 1, 2):
        expected = (a[i] @ a[3] - a[3] @ a[i]) / (u[i] - u[3])
        np.testing.assert_allclose(velocity[(i, 0)], expected, atol=1e-12)
    own = -sum((a[3] @ a[j] - a[j] @ a[3]) / (u[3] - u[j]) for j in range(3))
    np.testing.assert_allclose(velocity[(3, 0)], own, atol=1e-12)


def test_isolated_pole_is_frozen(random_complex_matrix):
    spec = schlesinger_spec([0], [random_complex_matrix(2)])
    trajectory = integrate_flow(spec, FlowPath.straight([TimeCoordinate("u", 0)], (0,), (1,)), CONFIG)
    np.testing.assert_allclose(trajectory.final, trajectory.y[0], atol=1e-14)
    assert malgrange_action_check(trajectory) == pytest.approx(0, abs=1e-12)


def test_schlesinger_conservation(schlesinger_trajectory):
    drift = conservation_drift(schlesinger_trajectory)
    assert drift["moment"] < 1e-8
    assert drift["casimir"] < 1e-8
    assert drift["eigenvalue"] < 1e-8


def test_schlesinger_action_identity(schlesinger_trajectory):
    assert malgrange_action_check(schlesinger_trajectory) < 1e-6


def test_omega_fuchsian(fuchsian):
    omega = omega_form(fuchsian, U2)
    lam = 1.5 - 0.5j
    expected = -fuchsian.poles[2].coefficients[0] / (lam - (0.3 + 0.4j))
    np.testing.assert_allclose(omega(lam), expected, atol=1e-14)
    with pytest.raises(IndexRangeError):
        omega_form(fuchsian, TimeCoordinate("t", 2, 1))


def test_zero_curvature(schlesinger_trajectory):
    samples = [3 + 3j, -1 - 1j, 0.7 - 0.5j]
    clean = zero_curvature_residual(schlesinger_trajectory, 0.5, U2, samples)
    assert clean < 1e-5
    perturbed = zero_curvature_residual(schlesinger_trajectory, 0.5, U2, samples, perturbation=0.1)
    assert perturbed > 1e-3
    with pytest.raises(IndexRangeError):
        zero_curvature_residual(schlesinger_trajectory, 0.5, U3, samples)


@pytest.fixture
def irregular(random_complex_matrix):
    return ConnectionSpec(2, [
        PoleData(0, [random_complex_matrix(2), random_complex_matrix(2)], (1.0,)),
        PoleData(0.5 + 0.5j, [random_complex_matrix(2)]),
        PoleData(1, [random_complex_matrix(2)], movable=False),
    ])


def test_cross_derivatives(irregular):
    layout = LiftedLayout(irregular)
    y = layout.trivial_state(irregular)
    times = {T1: 1.0 + 0j, TimeCoordinate("u", 1): 0.5 + 0.5j}
    assert cross_derivative_defect(irregular, y, times, T1, TimeCoordinate("u", 1)) < 1e-6


def test_rank_one_flow(irregular):
    trajectory = integrate_flow(irregular, FlowPath.straight([T1], (1.0,), (1.3 + 0.1j,)), CONFIG)
    assert conservation_drift(trajectory)["casimir"] < 1e-8
    assert malgrange_action_check(trajectory) < 1e-6


def test_lifted_hamiltonians_commute(random_rational_matrix):
    spec = ConnectionSpec(2, [PoleData(0, [random_rational_matrix(2), random_rational_matrix(2)], (1,)),
                              PoleData(2, [random_rational_matrix(2)]),
                              PoleData(1, [random_rational_matrix(2)], movable=False)])
    report = hamiltonian_commutation(spec)
    assert report.passed, report.failures


@pytest.mark.slow
def test_tau_path_independence(fuchsian):
    closed = tau_closedness(fuchsian, [U2, U3], (0.3 + 0.4j, 2.0 + 1.0j), (0.5 + 0.6j, 2.3 + 0.8j), CONFIG)
    assert closed["log_tau"] < 1e-6
    assert closed["state"] < 1e-6


def test_action_identity_needs_degree_two():
    q, p = q_gen(0), p_gen(0)
    quadratic = integrate_polynomial_flow(var(p) * var(p) * var(q) * var(q), {q: 0.5, p: 1.0}, (0.0, 0.5), CONFIG)
    assert polynomial_action_defect(quadratic, 0.25) < 1e-6
    cubic = integrate_polynomial_flow(var(p) * var(q) * var(q), {q: 0.5, p: 1.0}, (0.0, 0.5), CONFIG)
    assert polynomial_action_defect(cubic, 0.25) == pytest.approx(0.25, rel=1e-4)


def test_trajectory_csv(schlesinger_trajectory, tmp_path):
    target = tmp_path / "traj.csv"
    with target.open("w", newline="") as stream:
        rows = write_trajectory_csv(schlesinger_trajectory, stream)
    lines = target.read_text().splitlines()
    assert rows == CONFIG.samples + 1
    assert len(lines) == rows + 1
    header = lines[0].split(",")
    assert header[0] == "s"
    assert header[-3:] == ["log_tau.re", "log_tau.im", "casimir_drift"]
    assert "H_u[2].re" in header
