from fractions import Fraction

import pytest

from isolab.algebra_core import determinant, matmul, trace
from isolab.errors import IndexRangeError, ShapeMismatchError, SingularityError
from isolab.polynomial import canonical_bracket
from isolab.sl2_charts import (chart_coordinates, degree0_matrix, pair_trace, sl2_takiff_parametrization,
                               verify_chart)

THETAS = {
    0: (Fraction(1, 3),),
    1: (Fraction(1, 2), 2),
    2: (Fraction(1, 2), Fraction(-1, 3), 1),
    3: (Fraction(1, 4), 1, Fraction(2, 3), 1),
}


@pytest.mark.parametrize("degree", [0, 1, 2])
def test_chart_checks(degree):
    report = verify_chart(degree, THETAS[degree])
    assert report.passed, report.failures


@pytest.mark.slow
def test_degree_three_chart():
    assert verify_chart(3, THETAS[3]).passed


def test_degree_zero_orbit():
    theta = Fraction(2, 5)
    a = degree0_matrix(theta, Fraction(3, 2), Fraction(-1, 7))
    assert trace(a) == 0
    assert determinant(a) == -theta * theta


def test_pair_trace_closed_form():
    ti, pi, qi = Fraction(1, 2), Fraction(3), Fraction(-2, 3)
    tj, pj, qj = Fraction(-1, 5), Fraction(1, 4), Fraction(5, 2)
    product = matmul(degree0_matrix(ti, pi, qi), degree0_matrix(tj, pj, qj))
    assert trace(product) == pair_trace(ti, pi, qi, tj, pj, qj)


def test_numeric_coordinates():
    coords = {"p1": Fraction(1, 2), "q1": 3, "p2": -1, "q2": Fraction(2, 3)}
    chart = sl2_takiff_parametrization(1, (Fraction(1, 3), 2), coords)
    a0, a1 = chart.coefficients
    assert trace(a0) == 0 and trace(a1) == 0
    assert trace(matmul(a1, a1)) == 8
    assert trace(matmul(a0, a1)) == 2 * Fraction(1, 3) * 2


def test_chart_orientation():
    coords = chart_coordinates(1)
    assert canonical_bracket(coords["p1"], coords["q1"]) == 1
    flipped = chart_coordinates(0)
    assert canonical_bracket(flipped["q"], flipped["p"]) == 1


def test_chart_errors():
    with pytest.raises(IndexRangeError):
        sl2_takiff_parametrization(4, (1,) * 5)
    with pytest.raises(ShapeMismatchError):
        sl2_takiff_parametrization(1, (1,))
    with pytest.raises(SingularityError):
        sl2_takiff_parametrization(2, (1, 1, 0))
    with pytest.raises(ShapeMismatchError):
        sl2_takiff_parametrization(1, (1, 1), {"p1": 0, "q1": 0})
