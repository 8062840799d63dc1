from fractions import Fraction

import pytest
import sympy

from isolab.errors import DomainError, IndexRangeError, SingularityError
from isolab.isoflow import IntegratorConfig
from isolab.painleve import (PainleveKind, PainleveParameters, ReducedState, build_painleve_spec, differs_by_constant,
                             gambier_constants, gambier_parameters, integrate_painleve, lift, okamoto_printed,
                             painleve_system, reduce, scalar_residual, stencil_derivatives, torus_commutation,
                             verify_painleve)

RUNS = {
    PainleveKind.V: ({"theta0": Fraction(3, 10), "thetat": Fraction(1, 5), "k": Fraction(11, 10),
                      "a": Fraction(2, 5)}, (0.4 + 0.1j, 0.3 - 0.2j)),
    PainleveKind.IV: ({"thetat": Fraction(1, 3), "theta2": Fraction(1, 4), "theta3": 1,
                       "I0": Fraction(1, 2)}, (0.5 + 0.2j, 0.3 + 0.1j)),
    PainleveKind.III: ({"theta1": Fraction(1, 3), "theta2": Fraction(1, 2), "theta3": 1,
                        "I0": Fraction(1, 4)}, (0.6 + 0.1j, 0.4 - 0.1j)),
    PainleveKind.II: ({"theta2": Fraction(1, 3), "theta3": Fraction(1, 2), "theta4": 1,
                       "I0": Fraction(1, 5)}, (0.5 + 0.3j, 0.2 + 0.1j)),
}
PVI = {"theta0": Fraction(1, 3), "theta1": Fraction(1, 4), "thetat": Fraction(1, 5)}
CONFIG = IntegratorConfig(rtol=1e-11, atol=1e-13)


def params(kind):
    return PainleveParameters(kind, RUNS[kind][0])


@pytest.mark.parametrize("raw,kind", [("VI", PainleveKind.VI), ("PIV", PainleveKind.IV), ("ii", PainleveKind.II)])
def test_parse_kind(raw, kind):
    assert PainleveKind.parse(raw) is kind


def test_unknown_kind():
    with pytest.raises(DomainError):
        PainleveKind.parse("VII")


def test_parameter_names_checked():
    with pytest.raises(DomainError):
        PainleveParameters(PainleveKind.VI, {"theta0": 1, "theta1": 1})
    with pytest.raises(DomainError):
        PainleveParameters(PainleveKind.VI, dict(PVI, k=1))


@pytest.mark.parametrize("kind,name", [(PainleveKind.V, "k"), (PainleveKind.IV, "theta3"),
                                       (PainleveKind.III, "theta2"), (PainleveKind.II, "theta4")])
def test_leading_term_must_be_regular(kind, name):
    values = dict(RUNS[kind][0])
    values[name] = 0
    with pytest.raises(SingularityError):
        PainleveParameters(kind, values)


def test_connection_builders():
    six = build_painleve_spec(PainleveParameters(PainleveKind.VI, PVI), Fraction(1, 2))
    assert six.m == 2
    assert [pole.position for pole in six.poles] == [0, 1, Fraction(1, 2)]
    assert [pole.movable for pole in six.poles] == [False, False, True]

    four = build_painleve_spec(params(PainleveKind.IV), Fraction(1))
    assert [pole.rank for pole in four.poles] == [0, 2]
    assert four.poles[1].name == "inf"

    two = build_painleve_spec(params(PainleveKind.II), Fraction(1))
    assert [pole.rank for pole in two.poles] == [3]
    assert two.poles[0].times.t(3) == 1


def test_painleve_six_identities():
    report = verify_painleve(PainleveParameters(PainleveKind.VI, PVI), Fraction(1, 2))
    assert report.passed, report.failures


@pytest.mark.parametrize("kind", [PainleveKind.V, PainleveKind.IV, PainleveKind.III, PainleveKind.II])
def test_exact_identities(kind):
    report = verify_painleve(params(kind), Fraction(1))
    assert report.passed, report.failures


@pytest.mark.parametrize("kind", [PainleveKind.V, PainleveKind.IV, PainleveKind.III, PainleveKind.II])
def test_torus_integral_is_conserved(kind):
    assert torus_commutation(painleve_system(params(kind))) == 0


def test_painleve_six_has_no_torus():
    system = painleve_system(PainleveParameters(PainleveKind.VI, PVI))
    assert system.reduced is None
    with pytest.raises(IndexRangeError):
        torus_commutation(system)


@pytest.mark.parametrize("kind", [PainleveKind.V, PainleveKind.IV, PainleveKind.III, PainleveKind.II])
def test_lift_then_reduce(kind):
    system = painleve_system(params(kind))
    u, v = RUNS[kind][1]
    point = lift(system, ReducedState(1.0, u, v), phi=0.3j)
    state = reduce(system, point, 1.0)
    assert state.position == pytest.approx(u)
    assert state.momentum == pytest.approx(v)
    assert state.action == pytest.approx(complex(system.action_level))


def test_gambier_constants():
    c = gambier_constants(Fraction(1, 2), Fraction(1, 3), 2, Fraction(1, 5))
    assert c.alpha == 2
    assert c.beta == -Fraction(8, 9)
    assert c.delta == -32


def test_gambier_inverse():
    original = {"theta0": 0.3, "thetat": 0.2, "k": 1.1, "a": 0.4}
    recovered = gambier_parameters(gambier_constants(**original))
    for name, value in original.items():
        assert recovered[name] == pytest.approx(value)


@pytest.mark.parametrize("kind", [PainleveKind.V, PainleveKind.IV, PainleveKind.III, PainleveKind.II])
def test_scalar_equation_residual(kind):
    system = painleve_system(params(kind))
    u, v = RUNS[kind][1]
    trajectory = integrate_painleve(system, ReducedState(1.0, u, v), (1.0, 1.25), CONFIG)
    assert scalar_residual(trajectory) < 1e-6


def test_intermediate_matches_reduced():
    system = painleve_system(params(PainleveKind.III))
    u, v = RUNS[PainleveKind.III][1]
    reduced = integrate_painleve(system, ReducedState(1.0, u, v), (1.0, 1.2), CONFIG)
    point = lift(system, ReducedState(1.0, u, v))
    intermediate = integrate_painleve(system, point, (1.0, 1.2), CONFIG, level="intermediate")
    for a, b in zip(reduced.reduced_at(1.2), intermediate.reduced_at(1.2)):
        assert a == pytest.approx(b, abs=1e-7)


def test_scalar_residual_guards():
    system = painleve_system(params(PainleveKind.V))
    u, v = RUNS[PainleveKind.V][1]
    trajectory = integrate_painleve(system, ReducedState(1.0, u, v), (1.0, 1.1), CONFIG)
    with pytest.raises(DomainError):
        scalar_residual(trajectory, times=[1.0005])
    six = painleve_system(PainleveParameters(PainleveKind.VI, PVI))
    with pytest.raises(IndexRangeError):
        integrate_painleve(six, ReducedState(0.5, 0.1, 0.1), (0.5, 0.6))


def test_okamoto_form_at_unit_theta3():
    system = painleve_system(params(PainleveKind.IV))
    x, y = system.target.position, system.target.momentum
    printed = okamoto_printed(params(PainleveKind.IV).symbolic(), x, y, system.t)
    assert differs_by_constant(system.target.hamiltonian, printed, (x, y))


def test_stencils_exact_on_quartics():
    h = 0.1
    values = [(1 + j * h) ** 3 for j in range(-2, 3)]
    first, second = stencil_derivatives(values, h)
    assert first == pytest.approx(3)
    assert second == pytest.approx(6)


def test_normal_form_symbols():
    system = painleve_system(params(PainleveKind.II))
    assert system.target.name == "P34"
    assert {str(s) for s in (system.target.position, system.target.momentum)} == {"q", "p"}
    assert isinstance(system.hamiltonian, sympy.Expr)
