"""
sl2 Darboux Charts
==================

Explicit Darboux parametrizations of sl2 Takiff coadjoint orbits with
semisimple leading term θ_top·σ3, in local coordinates (p_i, q_i).

Every chart carries its diagonal-gauge coefficients D_0..D_r and the gauge
matrix Q_0, so that the orbit point is A_k = Q_0 D_k Q_0^{-1}. The degree-1
chart also carries the lifted slots Q_0, Q_1, P_0, P_1 with
lifted_A(Q, P) = A.

Degree 0:  A = [[pq - θ, -(pq - 2θ)p], [q, -pq + θ]]

Degree 1:  Q_0 = [[1, q_1], [0, 1]]·[[1, 0], [q_2, 1]]
           D_1 = θ_1 σ3,  D_0 = [[θ_0, p_2], [p_2 q_2² - 2θ_0 q_2 + p_1, -θ_0]]

Degree 2 and 3 charts are given in diagonal gauge only.

Coordinates are PhasePolynomials (``chart_coordinates``) or scalars. The
degree-0 chart is a Poisson map for {q, p} = 1 while the degree-1 chart is
one for {p, q} = 1; ``chart_coordinates`` places the generators accordingly.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .algebra_core import bracket_tensor, identity, matmul, object_matrix
from .errors import IndexRangeError, ShapeMismatchError, SingularityError
from .logging_utils import get_logger, traced
from .polynomial import Generator, PhasePolynomial, canonical_bracket, var
from .scalars import reciprocal
from .takiff import TakiffCoElement, casimir, kks_expected, lifted_A
from .verification import VerificationReport

logger = get_logger(__name__)

MAX_DEGREE = 3

# coordinate names each chart reads
CHART_NAMES = {
    0: ("p", "q"),
    1: ("p1", "q1", "p2", "q2"),
    2: ("p1", "q1", "p2", "q2", "p3", "q3"),
    3: ("p1", "q1", "p2", "q2", "p3", "q3", "p4", "q4"),
}

# degree-0 charts are Poisson for {q, p} = 1
DEFAULT_ORIENTATION = {0: "qp", 1: "pq", 2: "pq", 3: "pq"}


def sigma3(value) -> np.ndarray:
    return object_matrix([[value, 0], [0, -value]])


def chart_coordinates(degree: int, offset: int = 0, orientation: Optional[str] = None) -> Dict[str, PhasePolynomial]:
    """Symbolic chart coordinates as canonical generators

    Pair i uses slot ``offset + i``. With orientation ``"pq"`` the chart p_i is
    the P generator and q_i the Q generator, so {p_i, q_i} = 1; ``"qp"`` swaps
    the roles.
    """
    if degree not in CHART_NAMES:
        raise IndexRangeError("No sl2 chart of this degree", {"degree": degree})
    orientation = orientation or DEFAULT_ORIENTATION[degree]
    if orientation not in ("pq", "qp"):
        raise ValueError(f"Unknown orientation {orientation!r}")
    p_kind, q_kind = ("P", "Q") if orientation == "pq" else ("Q", "P")
    names = CHART_NAMES[degree]
    coords: Dict[str, PhasePolynomial] = {}
    for pair in range(len(names) // 2):
        p_name, q_name = names[2 * pair], names[2 * pair + 1]
        coords[p_name] = var(Generator(p_kind, offset + pair))
        coords[q_name] = var(Generator(q_kind, offset + pair))
    return coords


def degree0_matrix(theta, p, q) -> np.ndarray:
    pq = p * q
    return object_matrix([[pq - theta, -(pq - 2 * theta) * p], [q, -pq + theta]])


@dataclass
class Sl2Chart:
    degree: int
    theta: tuple
    diagonal: List[np.ndarray]
    gauge: np.ndarray
    gauge_inverse: np.ndarray
    q_slots: Optional[List[np.ndarray]] = None
    p_slots: Optional[List[np.ndarray]] = None

    @property
    def coefficients(self) -> List[np.ndarray]:
        return [matmul(self.gauge, d, self.gauge_inverse) for d in self.diagonal]

    def takiff(self) -> TakiffCoElement:
        return TakiffCoElement(self.coefficients)

    def lifted(self) -> Optional[TakiffCoElement]:
        if self.q_slots is None:
            return None
        return lifted_A(self.q_slots, self.p_slots)


def _unipotent_gauge(q1, q2):
    """[[1, q1], [0, 1]]·[[1, 0], [q2, 1]] and its polynomial inverse"""
    g = object_matrix([[1 + q1 * q2, q1], [q2, 1]])
    g_inv = object_matrix([[1, -q1], [-q2, 1 + q1 * q2]])
    return g, g_inv


def _degree1(theta, c) -> Sl2Chart:
    t0, t1 = theta
    p1, q1, p2, q2 = c["p1"], c["q1"], c["p2"], c["q2"]
    s = p2 * q2 * q2 - 2 * t0 * q2 + p1
    d0 = object_matrix([[t0, p2], [s, -t0]])
    d1 = sigma3(t1)
    g, g_inv = _unipotent_gauge(q1, q2)
    inv = reciprocal(2 * t1)
    l1 = object_matrix([[0, -p2 * inv], [s * inv, 0]])
    q_slots = [g, matmul(g, l1)]
    p_1 = matmul(d1, g_inv)
    p_0 = matmul(object_matrix([[t0, 0], [0, -t0]]) - matmul(p_1, q_slots[1]), g_inv)
    return Sl2Chart(1, tuple(theta), [d0, d1], g, g_inv, q_slots, [p_0, p_1])


def _degree2(theta, c) -> Sl2Chart:
    t0, t1, t2 = theta
    p1, q1, p2, q2, p3, q3 = (c[n] for n in CHART_NAMES[2])
    top = q1 * p1 + t0
    d0 = object_matrix([[top, p3], [p3 * q3 * q3 - 2 * top * q3 + p2, -top]])
    d1 = object_matrix([[t1, -2 * t2 * q1], [p1, -t1]])
    d2 = sigma3(t2)
    g, g_inv = _unipotent_gauge(q1, q2)
    return Sl2Chart(2, tuple(theta), [d0, d1, d2], g, g_inv)


def _degree3(theta, c) -> Sl2Chart:
    t0, t1, t2, t3 = theta
    p1, q1, p2, q2, p3, q3, p4, q4 = (c[n] for n in CHART_NAMES[3])
    shift = t2 - 4 * t3
    upper = -t3 * q3 ** 3 * q4 * q4 + shift * q4 * q3 * q3 - t3 * q3 + p4
    lower = -t3 * q3 * q3 * q4 ** 3 + shift * q4 * q4 * q3 + (2 * t2 - t3) * q4 + p3
    corner = 2 * t3 * q3 * q4 + t1
    residue = q3 * p3 - q4 * p4 + t0
    d0 = object_matrix([[residue, p2],
                        [p2 * q2 * q2 - 2 * p3 * q2 * q3 + 2 * p4 * q2 * q4 - 2 * t0 * q2 + p1, -residue]])
    d1 = object_matrix([[corner, upper], [lower, -corner]])
    d2 = object_matrix([[t2, -2 * t3 * q3], [2 * t3 * q4, -t2]])
    d3 = sigma3(t3)
    return Sl2Chart(3, tuple(theta), [d0, d1, d2, d3], identity(2), identity(2))


def sl2_takiff_parametrization(degree: int, theta: Sequence[Any],
                               coords: Optional[Mapping[str, Any]] = None) -> Sl2Chart:
    """Chart of the given degree; ``theta`` runs from the residue to the top coefficient"""
    if degree not in CHART_NAMES:
        raise IndexRangeError("sl2 charts exist for degrees 0..3", {"degree": degree})
    theta = tuple(theta)
    if len(theta) != degree + 1:
        raise ShapeMismatchError("Need one θ per coefficient", {"degree": degree, "theta": len(theta)})
    if degree >= 1 and theta[-1] == 0:
        raise SingularityError("Chart is singular for θ_top = 0", {"degree": degree})
    coords = dict(coords) if coords is not None else chart_coordinates(degree)
    missing = [n for n in CHART_NAMES[degree] if n not in coords]
    if missing:
        raise ShapeMismatchError("Missing chart coordinates", {"missing": missing})
    if degree == 0:
        a = degree0_matrix(theta[0], coords["p"], coords["q"])
        return Sl2Chart(0, theta, [a], identity(2), identity(2))
    build = {1: _degree1, 2: _degree2, 3: _degree3}[degree]
    chart = build(theta, coords)
    logger.debug("sl2_chart_built", degree=degree)
    return chart


def pair_trace(theta_i, p_i, q_i, theta_j, p_j, q_j):
    """Tr(A^{(i)} A^{(j)}) for two degree-0 charts in closed form"""
    return (2 * p_i * p_j * q_i * q_j - p_i * p_i * q_i * q_j - p_j * p_j * q_i * q_j
            - 2 * theta_j * p_i * q_i - 2 * theta_i * p_j * q_j
            + 2 * theta_i * p_i * q_j + 2 * theta_j * p_j * q_i + 2 * theta_i * theta_j)


# ----------------------------------------------------------------------
# exact checks


def _free_of_coordinates(value) -> bool:
    return not isinstance(value, PhasePolynomial) or value.is_constant()


@traced
def verify_chart(degree: int, theta: Sequence[Any]) -> VerificationReport:
    """Casimirs are constant, KKS holds (degrees 0, 1), the lift reproduces A (degree 1)"""
    report = VerificationReport(f"sl2 chart degree={degree}")
    chart = sl2_takiff_parametrization(degree, theta)
    a = chart.takiff()
    for k in range(1, degree + 2):
        with report.timed(f"I_{k} constant") as outcome:
            outcome["passed"] = _free_of_coordinates(PhasePolynomial.coerce(casimir(a, k)))
    if degree <= 1:
        for k in range(degree + 1):
            for l in range(degree + 1):
                with report.timed(f"KKS {{A_{k} (x) A_{l}}}") as outcome:
                    actual = bracket_tensor(a[k], a[l], canonical_bracket)
                    expected = kks_expected(k, l, a)
                    bad = sum(1 for x, y in zip(actual.flat, expected.flat)
                              if PhasePolynomial.coerce(x) != PhasePolynomial.coerce(y))
                    outcome["passed"] = bad == 0
                    outcome["defect"] = float(bad)
    lifted = chart.lifted()
    if lifted is not None:
        with report.timed("lifted_A = Q_0 D Q_0^{-1}") as outcome:
            bad = sum(1 for k in range(degree + 1)
                      for x, y in zip(lifted[k].flat, a[k].flat)
                      if PhasePolynomial.coerce(x) != PhasePolynomial.coerce(y))
            outcome["passed"] = bad == 0
            outcome["defect"] = float(bad)
    return report
