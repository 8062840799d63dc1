"""
Takiff Algebra
==============

Elements of the truncated current algebra g[z]/z^{r+1}, its dual, the
pairing between them and the lifted Darboux realization of coadjoint orbits:

    A_k = Σ_{i=0}^{r-k} Q_i P_{i+k},     Λ_k = Σ_{i=0}^{r-k} P_{i+k} Q_i.

With {P_{j,ab}, Q_{j,cd}} = δ_ad δ_bc the entries of A satisfy the graded
Kirillov-Kostant-Souriau relations

    {A_k ⊗, A_l} = −[Π, A_{k+l} ⊗ 1]   (k + l ≤ r),   0 otherwise.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .algebra_core import (
    bracket_tensor,
    commutator,
    exact_inverse,
    generator_matrix,
    is_symbolic_matrix,
    kron,
    matmul,
    permutation_operator,
    trace,
    zeros,
    identity,
)
from .errors import IndexRangeError, ShapeMismatchError
from .logging_utils import get_logger, traced
from .polynomial import PhasePolynomial, canonical_bracket
from .verification import VerificationReport

logger = get_logger(__name__)


def _check_coefficients(coefficients: Sequence[np.ndarray], what: str) -> Tuple[int, int]:
    if not coefficients:
        raise ShapeMismatchError(f"{what} needs at least one coefficient")
    shapes = {c.shape for c in coefficients}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"{what} coefficients differ in shape", {"shapes": sorted(shapes)})
    (shape,) = shapes
    if len(shape) != 2 or shape[0] != shape[1]:
        raise ShapeMismatchError(f"{what} coefficients must be square", {"shape": shape})
    return len(coefficients) - 1, shape[0]


@dataclass
class TakiffElement:
    """X = Σ X_i z^i truncated at z^r"""

    coefficients: List[np.ndarray]

    def __post_init__(self):
        self.coefficients = list(self.coefficients)
        self.r, self.m = _check_coefficients(self.coefficients, "TakiffElement")

    def __getitem__(self, i: int) -> np.ndarray:
        return self.coefficients[i]


@dataclass
class TakiffCoElement:
    """A = Σ A_k z^{-k-1}; symbolic entries are PhasePolynomials"""

    coefficients: List[np.ndarray]

    def __post_init__(self):
        self.coefficients = list(self.coefficients)
        self.r, self.m = _check_coefficients(self.coefficients, "TakiffCoElement")
        self.symbolic = any(is_symbolic_matrix(c) for c in self.coefficients)
        if self.symbolic and any(c.dtype != object for c in self.coefficients):
            raise ShapeMismatchError("Symbolic and numeric coefficients cannot be mixed")

    def __getitem__(self, k: int) -> np.ndarray:
        return self.coefficients[k]

    def gauge_transform(self, g: np.ndarray, g_inv: np.ndarray) -> "TakiffCoElement":
        return TakiffCoElement([matmul(g_inv, a, g) for a in self.coefficients])


@dataclass
class MomentValue:
    """Λ = Σ Λ_k z^{-k-1}, the moment of the inner gauge action"""

    coefficients: List[np.ndarray]

    def __post_init__(self):
        self.coefficients = list(self.coefficients)
        self.r, self.m = _check_coefficients(self.coefficients, "MomentValue")

    def __getitem__(self, k: int) -> np.ndarray:
        return self.coefficients[k]


def takiff_bracket(x: TakiffElement, y: TakiffElement) -> TakiffElement:
    if (x.r, x.m) != (y.r, y.m):
        raise ShapeMismatchError("Takiff bracket needs equal degree and dimension",
                                 {"left": (x.r, x.m), "right": (y.r, y.m)})
    out = []
    for i in range(x.r + 1):
        total = zeros(x.m)
        for j in range(i + 1):
            total = total + commutator(x[j], y[i - j])
        out.append(total)
    return TakiffElement(out)


def pairing(a: TakiffCoElement, x: TakiffElement):
    """⟨A, X⟩ = Σ_i Tr(A_i X_i)"""
    if (a.r, a.m) != (x.r, x.m):
        raise ShapeMismatchError("Pairing needs equal degree and dimension",
                                 {"co": (a.r, a.m), "element": (x.r, x.m)})
    total = 0
    for i in range(a.r + 1):
        total = total + trace(matmul(a[i], x[i]))
    return total


def coadjoint_action(x: TakiffElement, a: TakiffCoElement) -> TakiffCoElement:
    """(ad*_X A)_k = Σ_j [X_j, A_{k+j}], so that ⟨ad*_X A, Y⟩ = −⟨A, [X, Y]⟩"""
    if (a.r, a.m) != (x.r, x.m):
        raise ShapeMismatchError("Coadjoint action needs equal degree and dimension")
    out = []
    for k in range(a.r + 1):
        total = zeros(a.m)
        for j in range(a.r - k + 1):
            total = total + commutator(x[j], a[k + j])
        out.append(total)
    return TakiffCoElement(out)


def dual_basis(r: int, m: int) -> Tuple[List[TakiffElement], List[TakiffCoElement]]:
    """Bases X_{i,α} = E_α z^i and X^{i,α} = E_α^T z^{-i-1}, in matching order"""
    elements, co_elements = [], []
    for i in range(r + 1):
        for a in range(m):
            for b in range(m):
                unit = zeros(m)
                unit[a, b] = 1
                coeffs = [zeros(m) for _ in range(r + 1)]
                coeffs[i] = unit
                elements.append(TakiffElement(coeffs))
                co = [zeros(m) for _ in range(r + 1)]
                co[i] = unit.T.copy()
                co_elements.append(TakiffCoElement(co))
    return elements, co_elements


# ----------------------------------------------------------------------
# lifted Darboux coordinates


def symbolic_slots(r: int, m: int, offset: int = 0) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Generator matrices Q_i, P_i for i = 0..r at global slots offset+i"""
    q = [generator_matrix("Q", offset + i, m) for i in range(r + 1)]
    p = [generator_matrix("P", offset + i, m) for i in range(r + 1)]
    return q, p


def _check_slots(q: Sequence[np.ndarray], p: Sequence[np.ndarray]) -> Tuple[int, int]:
    if len(q) != len(p) or not q:
        raise ShapeMismatchError("Q and P need the same non-zero number of slots",
                                 {"q": len(q), "p": len(p)})
    _check_coefficients(list(q) + list(p), "slot")
    return len(q) - 1, q[0].shape[0]


def lifted_A(q: Sequence[np.ndarray], p: Sequence[np.ndarray]) -> TakiffCoElement:
    r, m = _check_slots(q, p)
    coeffs = []
    for k in range(r + 1):
        total = zeros(m)
        for i in range(r - k + 1):
            total = total + matmul(q[i], p[i + k])
        coeffs.append(total)
    return TakiffCoElement(coeffs)


def lifted_moment(q: Sequence[np.ndarray], p: Sequence[np.ndarray]) -> MomentValue:
    r, m = _check_slots(q, p)
    coeffs = []
    for k in range(r + 1):
        total = zeros(m)
        for i in range(r - k + 1):
            total = total + matmul(p[i + k], q[i])
        coeffs.append(total)
    return MomentValue(coeffs)


def trivial_lift(a: TakiffCoElement) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Q_0 = 1, Q_i = 0, P_k = A_k: a lifted point over the numeric element A"""
    q = [identity(a.m)] + [zeros(a.m) for _ in range(a.r)]
    p = [c.copy() for c in a.coefficients]
    return q, p


def kks_expected(k: int, l: int, a: TakiffCoElement) -> np.ndarray:
    """−[Π, A_{k+l} ⊗ 1] when k + l ≤ r, else zero"""
    if not (0 <= k <= a.r and 0 <= l <= a.r):
        raise IndexRangeError("KKS indices out of range", {"k": k, "l": l, "r": a.r})
    m = a.m
    if k + l > a.r:
        return zeros(m * m)
    pi = permutation_operator(m)
    tensor = kron(a[k + l], identity(m))
    return -(matmul(pi, tensor) - matmul(tensor, pi))


def casimir(a: TakiffCoElement, k: int):
    """I_k = res_{z=0} z^{r+k} Tr A² = Σ_{i+j=r+k-1} Tr(A_i A_j), 1 ≤ k ≤ r+1

    The top index k = r+1 gives Tr A_r², which Poisson-commutes with every
    coefficient as well: it is the only quadratic Casimir at r = 0 and the
    leading-term Casimir the confluence checks quotient by.
    """
    if not 1 <= k <= a.r + 1:
        raise IndexRangeError("Casimir index out of range", {"k": k, "r": a.r})
    total = 0
    target = a.r + k - 1
    for i in range(a.r + 1):
        j = target - i
        if 0 <= j <= a.r:
            total = total + trace(matmul(a[i], a[j]))
    return total


def gauge_transform(a, g: np.ndarray):
    """Conjugate every coefficient by a constant invertible g: A_k ↦ g^{-1} A_k g"""
    g_inv = exact_inverse(g)
    return a.gauge_transform(g, g_inv)


# ----------------------------------------------------------------------
# exact verification sweeps


@traced
def verify_kks(r: int, m: int) -> VerificationReport:
    report = VerificationReport(f"kks r={r} m={m}")
    q, p = symbolic_slots(r, m)
    a = lifted_A(q, p)
    for k in range(r + 1):
        for l in range(r + 1):
            with report.timed(f"{{A_{k} (x) A_{l}}}") as outcome:
                actual = bracket_tensor(a[k], a[l], canonical_bracket)
                expected = kks_expected(k, l, a)
                mismatched = [idx for idx, (x, y) in enumerate(zip(actual.flat, expected.flat)) if x != y]
                outcome["passed"] = not mismatched
                outcome["defect"] = float(len(mismatched))
                outcome["components"] = actual.size
    logger.info("kks_verified", r=r, m=m, passed=report.passed, pairs=len(report.checks))
    return report


@traced
def verify_inner_outer(r: int, m: int) -> VerificationReport:
    """Every Λ entry Poisson-commutes with every A entry"""
    report = VerificationReport(f"inner-outer r={r} m={m}")
    q, p = symbolic_slots(r, m)
    a = lifted_A(q, p)
    lam = lifted_moment(q, p)
    with report.timed("{Λ, A} = 0") as outcome:
        bad = 0
        for k in range(r + 1):
            for l in range(r + 1):
                for x in lam[k].flat:
                    for y in a[l].flat:
                        if not canonical_bracket(x, y).is_zero():
                            bad += 1
        outcome["passed"] = bad == 0
        outcome["defect"] = float(bad)
    return report


@traced
def verify_casimirs(r: int, m: int) -> VerificationReport:
    report = VerificationReport(f"casimirs r={r} m={m}")
    q, p = symbolic_slots(r, m)
    a = lifted_A(q, p)
    for k in range(1, r + 2):
        invariant = PhasePolynomial.coerce(casimir(a, k))
        with report.timed(f"I_{k}") as outcome:
            bad = sum(1 for i in range(r + 1) for x in a[i].flat
                      if not canonical_bracket(invariant, x).is_zero())
            outcome["passed"] = bad == 0
            outcome["defect"] = float(bad)
    return report
