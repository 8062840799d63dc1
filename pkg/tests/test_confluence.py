from fractions import Fraction

import pytest
import sympy

from isolab.algebra_core import generator_matrix, matmul, matrices_equal, trace, zeros
from isolab.confluence import (ConfluenceScenario, EpsLaurentMatrix, LaurentPole, confluence_casimirs,
                               confluence_step, confluent_effective, connection_defects, eps_limit, expected_limit,
                               generic_scenario, graded_model_brackets, hamiltonian_limit_check, merge_poles,
                               merged_hamiltonian_check, merged_hamiltonian_limit, merged_residue_defects,
                               one_plus_one, richardson, scenario_from_limit)
from isolab.connection import ConnectionSpec, PoleData, pole_hamiltonian
from isolab.errors import DivergenceError, ShapeMismatchError
from isolab.polynomial import reduce_modulo


@pytest.fixture
def mats(random_rational_matrix):
    return [random_rational_matrix(2) for _ in range(6)]


def test_laurent_arithmetic(mats):
    a = EpsLaurentMatrix(2, {-1: mats[0], 0: mats[1]})
    b = EpsLaurentMatrix(2, {-1: -mats[0]})
    total = a + b
    assert total.divergent_powers() == []
    assert matrices_equal(total.coefficient(0), mats[1])
    shifted = a.times_series([0, 2])
    assert shifted.j_min == 0
    assert matrices_equal(shifted.coefficient(0), mats[0] * 2)
    eps = Fraction(1, 3)
    assert matrices_equal(a.evaluate(eps), mats[0] * 3 + mats[1])


def test_laurent_shape_checked(mats):
    with pytest.raises(ShapeMismatchError):
        EpsLaurentMatrix(3, {0: mats[0]})


def test_one_plus_one(mats):
    w, b0, c0 = mats[:3]
    b = EpsLaurentMatrix(2, {-1: -w, 0: b0})
    c = EpsLaurentMatrix(2, {-1: w, 0: c0})
    a1, a0 = one_plus_one(b, c, Fraction(1, 2))
    assert matrices_equal(a1, w)
    assert matrices_equal(a0, b0 + c0)


def test_one_plus_one_divergent(mats):
    b = EpsLaurentMatrix(2, {0: mats[0]})
    c = EpsLaurentMatrix(2, {-1: mats[1]})
    with pytest.raises(DivergenceError):
        one_plus_one(b, c, 1)
    with pytest.raises(DivergenceError):
        one_plus_one(EpsLaurentMatrix(2, {-2: mats[0]}), c, 1)


def test_limit_coefficients_rank_zero(mats):
    limit, merging = [mats[0]], [mats[1], mats[2]]
    scenario = scenario_from_limit(0, limit, merging, (Fraction(3, 2),))
    pole = confluence_step(scenario)
    assert pole.rank == 1
    for actual, expected in zip(pole.coefficients, expected_limit(limit, merging)):
        assert matrices_equal(actual, expected)


def test_truncation_does_not_matter(mats):
    scenario = scenario_from_limit(0, mats[:2], mats[2:5], (Fraction(1, 2), 2))
    low = confluent_effective(scenario, 3)
    high = confluent_effective(scenario, 6)
    assert all(matrices_equal(a, b) for a, b in zip(low, high))
    with pytest.raises(ShapeMismatchError):
        confluent_effective(scenario, 1)


def test_uncancelled_base_diverges(mats):
    base = [EpsLaurentMatrix(2, {0: mats[0]})]
    merging = EpsLaurentMatrix(2, {-1: mats[1], 0: mats[2]})
    with pytest.raises(DivergenceError):
        confluence_step(ConfluenceScenario(0, base, merging, (1,)))


def test_scenario_needs_times(mats):
    with pytest.raises(ShapeMismatchError):
        ConfluenceScenario(0, [EpsLaurentMatrix.regular(mats[0])], EpsLaurentMatrix.regular(mats[1]), (1, 2))


def test_connection_converges(mats):
    scenario = scenario_from_limit(0, mats[:2], mats[2:5], (Fraction(1, 2), 1))
    others = [PoleData(3, [mats[5]])]
    defects = connection_defects(scenario, Fraction(7, 5), [Fraction(1, 10), Fraction(1, 100), Fraction(1, 1000)],
                                 others)
    assert defects[0] > defects[1] > defects[2]
    assert defects[2] < defects[0] / 10


def test_merged_residue_converges(mats):
    scenario = scenario_from_limit(0, mats[:1], mats[1:3], (Fraction(2),))
    others = [PoleData(1, [mats[3]])]
    defects = merged_residue_defects(scenario, [Fraction(1, 10), Fraction(1, 1000)], others)
    assert defects[1] < defects[0]


@pytest.mark.parametrize("rank,times", [(0, (Fraction(3, 2),)), (1, (Fraction(1, 2), Fraction(-1, 3)))])
def test_hamiltonian_limit(mats, rank, times):
    scenario = scenario_from_limit(0, mats[:rank + 1], mats[rank + 1:2 * rank + 3], times)
    report = hamiltonian_limit_check(scenario, [PoleData(2, [mats[5]])])
    assert report.passed, report.failures
    assert any(check.name.startswith("closed form") for check in report.checks)


def test_closed_form_rows_at_rank_two(mats):
    scenario = scenario_from_limit(0, mats[:2], mats[2:5], (Fraction(1, 2), Fraction(-1, 3)))
    names = [check.name for check in hamiltonian_limit_check(scenario, [PoleData(2, [mats[5]])]).checks]
    assert "closed form H_2 = S_2 / t_1^2" in names
    assert "closed form H_1 = (S_1 - t_2 H_2) / t_1" in names


def test_eps_limit():
    eps, x = sympy.symbols("epsilon x")
    assert eps_limit((x + eps) / (2 + eps), eps) == x / 2
    assert eps_limit(x * eps ** 2 / (eps + eps ** 3), eps) == 0
    assert eps_limit(x / eps - (x - eps) / eps, eps) == 1
    with pytest.raises(DivergenceError):
        eps_limit(x / eps, eps)


def _spectator():
    return [PoleData(1, [generator_matrix("R", 0, 2)], name="spectator")]


def test_merged_limit_rank_zero_explicit():
    t1 = Fraction(3, 2)
    scenario = generic_scenario(0, 2, (t1,))
    limit = merged_hamiltonian_limit(scenario, _spectator())
    a0 = generator_matrix("L", 0, 2) + generator_matrix("W", 0, 2)
    a1 = generator_matrix("W", 1, 2)
    r = generator_matrix("R", 0, 2)
    # spectator at 1, confluent pole at 0: H = Tr(B0 R)/(0-1) - Tr(B1 R)/(0-1)^2 with B1 = t1 A1
    expected = -trace(matmul(a0, r)) - trace(matmul(a1, r)) * t1
    assert limit == expected


@pytest.mark.parametrize("rank,times", [(0, (Fraction(3, 2),)), (1, (Fraction(1, 2), Fraction(-1, 3)))])
def test_merged_hamiltonian_is_exact(rank, times):
    report = merged_hamiltonian_check(generic_scenario(rank, 2, times), _spectator())
    assert report.passed, report.failures


def test_merged_limit_only_up_to_casimirs():
    scenario = generic_scenario(0, 2, (Fraction(3, 2),))
    others = _spectator()
    pole = confluence_step(scenario)
    target = pole_hamiltonian(ConnectionSpec(2, [pole] + others), 0)
    limit = merged_hamiltonian_limit(scenario, others)
    names = [name for name, _ in confluence_casimirs(scenario, pole, others)]
    basis = [b for _, b in confluence_casimirs(scenario, pole, others)]
    assert names == ["I_1", "I_2", "Tr B0 C0", "I_1 of spectator"]

    remainder, coefficients = reduce_modulo(limit + basis[0] * 3 - target, basis)
    assert remainder.is_zero()
    assert coefficients == [3, 0, 0, 0]

    stray = trace(matmul(pole.coefficients[0], others[0].coefficients[0]))
    remainder, _ = reduce_modulo(limit + stray - target, basis)
    assert not remainder.is_zero()


def test_merge_poles(mats):
    poles = [
        LaurentPole(0, [EpsLaurentMatrix(2, {-1: -mats[0], 0: mats[1]})], name="base"),
        LaurentPole(2, [EpsLaurentMatrix.regular(mats[2])]),
        LaurentPole(Fraction(1, 2), [EpsLaurentMatrix(2, {-1: mats[0], 0: mats[3]})]),
    ]
    spec = merge_poles(2, poles, base=0, merging=2, times=(Fraction(1, 4),))
    assert len(spec.poles) == 2
    assert spec.poles[0].rank == 1
    assert matrices_equal(spec.poles[0].coefficients[0], mats[1] + mats[3])
    assert matrices_equal(spec.poles[0].coefficients[1], mats[0])
    assert matrices_equal(spec.poles[1].coefficients[0], mats[2])


def test_merge_requires_simple_pole(mats):
    poles = [LaurentPole(0, [EpsLaurentMatrix.regular(mats[0])]),
             LaurentPole(1, [EpsLaurentMatrix.regular(mats[1]), EpsLaurentMatrix.regular(zeros(2))])]
    with pytest.raises(ShapeMismatchError):
        merge_poles(2, poles, base=0, merging=1, times=(1,))


@pytest.mark.parametrize("m", [1, 2])
def test_graded_model(m):
    assert graded_model_brackets(m).passed


def test_graded_model_only_rank_one():
    with pytest.raises(ShapeMismatchError):
        graded_model_brackets(2, r=2)


def test_richardson_removes_linear_term():
    f = lambda eps: 3 + 5 * eps
    assert richardson(f(Fraction(1, 10)), f(Fraction(1, 20)), 2) == 3
