"""
Weighted Monomial Matrices
==========================

For a rank-r pole with deformation times t = (t_1, ..., t_r) the matrix
M^(r)(t) collects the coefficients

    𝓜_{k,j} = [ε^j] (t_1 ε + t_2 ε² + ... + t_r ε^r)^k,    1 ≤ k ≤ j ≤ r.

It maps bare Takiff coefficients to effective ones (B_k = Σ_j A_j 𝓜_{k,j})
and turns spectral invariants into Hamiltonians (𝓜 H = S).

Times may be scalars or PhasePolynomials in the generators ``T_i``; every
identity below is checked exactly in the symbolic case.
"""

import math
from dataclasses import dataclass
from typing import Any, Iterator, List, Sequence, Tuple

import numpy as np

from .algebra_core import matmul, matrices_equal, zeros
from .errors import ShapeMismatchError, SingularityError
from .logging_utils import get_logger, traced
from .polynomial import Generator, PhasePolynomial, t_gen, var
from .scalars import reciprocal
from .verification import VerificationReport

logger = get_logger(__name__)

WEIGHT = Generator("L", 0)


@dataclass(frozen=True)
class TimeVector:
    """Deformation times t_1..t_r of one pole (stored 0-based)"""

    values: Tuple[Any, ...]

    @property
    def r(self) -> int:
        return len(self.values)

    def t(self, i: int):
        """1-based access t_i"""
        return self.values[i - 1]

    @classmethod
    def identity(cls, r: int) -> "TimeVector":
        return cls(tuple([1] + [0] * (r - 1)) if r else ())

    @classmethod
    def symbolic(cls, r: int) -> "TimeVector":
        return cls(tuple(var(t_gen(i)) for i in range(1, r + 1)))


def _as_times(t) -> TimeVector:
    return t if isinstance(t, TimeVector) else TimeVector(tuple(t))


@dataclass
class MonomialMatrix:
    """Upper-triangular r×r matrix, 1-based entries via ``entry``"""

    r: int
    matrix: np.ndarray

    def entry(self, k: int, j: int):
        return self.matrix[k - 1, j - 1]

    def __eq__(self, other):
        return isinstance(other, MonomialMatrix) and self.r == other.r and \
            matrices_equal(self.matrix, other.matrix)


def power_coefficients(t: TimeVector, order: int) -> List[List[Any]]:
    """rows[k][j] = [ε^j] P(ε)^k for 0 ≤ k, j ≤ order, with P truncated at ε^order"""
    base = [0] + [t.t(i) if i <= t.r else 0 for i in range(1, order + 1)]
    rows = [[1] + [0] * order]
    for _ in range(order):
        previous = rows[-1]
        row = [0] * (order + 1)
        for j in range(order + 1):
            total = 0
            for i in range(1, j + 1):
                if previous[j - i] != 0 and base[i] != 0:
                    total = total + previous[j - i] * base[i]
            row[j] = total
        rows.append(row)
    return rows


def build_M(r: int, t) -> MonomialMatrix:
    t = _as_times(t)
    if r < 1:
        raise ShapeMismatchError("M^(r) needs r ≥ 1", {"r": r})
    rows = power_coefficients(t, r)
    out = zeros(r)
    for k in range(1, r + 1):
        for j in range(1, r + 1):
            out[k - 1, j - 1] = rows[k][j]
    return MonomialMatrix(r, out)


def _multi_indices(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _multi_indices(total - first, parts - 1):
            yield (first,) + rest


def build_M_combinatorial(r: int, t) -> MonomialMatrix:
    """Σ over α with |α| = k and Σ i α_i = j of k!/(α_1!...α_r!) Π t_i^{α_i}"""
    t = _as_times(t)
    out = zeros(r)
    for k in range(1, r + 1):
        for alpha in _multi_indices(k, r):
            weight = sum((i + 1) * a for i, a in enumerate(alpha))
            if weight > r:
                continue
            coeff = math.factorial(k)
            for a in alpha:
                coeff //= math.factorial(a)
            term = coeff
            for i, a in enumerate(alpha):
                if a:
                    term = term * t.t(i + 1) ** a
            out[k - 1, weight - 1] = out[k - 1, weight - 1] + term
    return MonomialMatrix(r, out)


def back_substitute(m: MonomialMatrix, rhs: Sequence[Any]) -> List[Any]:
    """Solve M x = rhs for upper-triangular M; rhs items need + and scalar ×"""
    if len(rhs) != m.r:
        raise ShapeMismatchError("Right-hand side length differs from rank",
                                 {"rank": m.r, "rhs": len(rhs)})
    t1 = m.entry(1, 1)
    if isinstance(t1, PhasePolynomial) or t1 == 0:
        raise SingularityError("M^(r) needs a non-zero scalar t_1", {"t1": t1})
    x: List[Any] = [None] * m.r
    for k in range(m.r, 0, -1):
        acc = rhs[k - 1]
        for j in range(k + 1, m.r + 1):
            coeff = m.entry(k, j)
            if coeff != 0:
                acc = acc - x[j - 1] * coeff
        x[k - 1] = acc * reciprocal(m.entry(k, k))
    return x


def invert_M(m: MonomialMatrix) -> MonomialMatrix:
    columns = []
    for j in range(1, m.r + 1):
        unit = [1 if i == j else 0 for i in range(1, m.r + 1)]
        columns.append(back_substitute(m, unit))
    out = zeros(m.r)
    for j, column in enumerate(columns):
        for k, value in enumerate(column):
            out[k, j] = value
    return MonomialMatrix(m.r, out)


def compose_times(s, t) -> TimeVector:
    """Times of P_s(P_t(ε)) mod ε^{r+1}, so that M(s)·M(t) = M(compose_times(s, t))"""
    s, t = _as_times(s), _as_times(t)
    rows = power_coefficients(t, t.r)
    values = []
    for i in range(1, t.r + 1):
        total = 0
        for l in range(1, s.r + 1):
            total = total + s.t(l) * rows[l][i]
        values.append(total)
    return TimeVector(tuple(values))


def weight_scale(t, lam) -> TimeVector:
    """t_i ↦ λ^i t_i"""
    t = _as_times(t)
    return TimeVector(tuple(t.t(i) * lam ** i for i in range(1, t.r + 1)))


def apply_automorphism(a: Sequence[np.ndarray], t) -> List[np.ndarray]:
    """B_0 = A_0 and B_k = Σ_{j ≥ k} A_j 𝓜_{k,j}"""
    t = _as_times(t)
    r = len(a) - 1
    if t.r != r:
        raise ShapeMismatchError("Need one time per non-residue coefficient",
                                 {"coefficients": len(a), "times": t.r})
    if r == 0:
        return [a[0]]
    m = build_M(r, t)
    out = [a[0]]
    for k in range(1, r + 1):
        total = zeros(a[0].shape[0])
        for j in range(k, r + 1):
            coeff = m.entry(k, j)
            if coeff != 0:
                total = total + a[j] * coeff
        out.append(total)
    return out


def jmu_map(theta: Sequence[Any], t) -> List[Any]:
    """w_k = Σ_{j ≥ k} θ_j 𝓜_{k,j}"""
    t = _as_times(t)
    if len(theta) != t.r:
        raise ShapeMismatchError("Need one θ per time", {"theta": len(theta), "times": t.r})
    m = build_M(t.r, t)
    out = []
    for k in range(1, t.r + 1):
        total = 0
        for j in range(k, t.r + 1):
            total = total + theta[j - 1] * m.entry(k, j)
        out.append(total)
    return out


# ----------------------------------------------------------------------
# exact identity sweeps


def _equal(x, y) -> bool:
    return PhasePolynomial.coerce(x) == PhasePolynomial.coerce(y)


@traced
def verify_identities(r: int) -> VerificationReport:
    report = VerificationReport(f"monomials r={r}")
    t = TimeVector.symbolic(r + 1)
    small = build_M(r, TimeVector(t.values[:r]))
    big = build_M(r + 1, t)
    rows = power_coefficients(t, r + 1)

    with report.timed("stability M^(r+1)|_(r) = M^(r)") as outcome:
        bad = sum(1 for i in range(1, r + 1) for k in range(1, r + 1)
                  if not _equal(big.entry(i, k), small.entry(i, k)))
        outcome["passed"], outcome["defect"] = bad == 0, float(bad)

    with report.timed("last column law") as outcome:
        top = t_gen(r + 1)
        bad = 0 if _equal(big.entry(1, r + 1), t.t(r + 1)) else 1
        for i in range(2, r + 2):
            if not PhasePolynomial.coerce(big.entry(i, r + 1)).diff(top).is_zero():
                bad += 1
        pure = build_M(r + 1, TimeVector(tuple([0] * r + [t.t(r + 1)])))
        for i in range(1, r + 2):
            expected = t.t(r + 1) if i == 1 else 0
            if not _equal(pure.entry(i, r + 1), expected):
                bad += 1
        outcome["passed"], outcome["defect"] = bad == 0, float(bad)

    with report.timed("convolution 𝓜_{j,k} = Σ 𝓜_{j-i,p} 𝓜_{i,k-p}") as outcome:
        bad = 0
        for j in range(2, r + 2):
            for i in range(1, j):
                for k in range(1, r + 2):
                    total = 0
                    for p in range(0, k + 1):
                        total = total + rows[j - i][p] * rows[i][k - p]
                    if not _equal(total, rows[j][k]):
                        bad += 1
        outcome["passed"], outcome["defect"] = bad == 0, float(bad)

    with report.timed("combinatorial form") as outcome:
        outcome["passed"] = build_M_combinatorial(r + 1, t) == big

    with report.timed("determinant t_1^{r(r+1)/2}") as outcome:
        outcome["passed"] = _equal(determinant_of(small), t.t(1) ** (r * (r + 1) // 2))

    with report.timed("weight and degree homogeneity") as outcome:
        lam = var(WEIGHT)
        scaled = build_M(r, weight_scale(TimeVector(t.values[:r]), lam))
        bad = 0
        for k in range(1, r + 1):
            for j in range(1, r + 1):
                if not _equal(scaled.entry(k, j), lam ** j * small.entry(k, j)):
                    bad += 1
                entry = PhasePolynomial.coerce(small.entry(k, j))
                if not entry.is_zero() and {sum(e for _, e in mono) for mono, _ in entry.items()} != {k}:
                    bad += 1
        outcome["passed"], outcome["defect"] = bad == 0, float(bad)

    if r <= 4:
        with report.timed("group law M(s)M(t) = M(s∘t)") as outcome:
            s = TimeVector(tuple(var(Generator("S", i)) for i in range(1, r + 1)))
            tt = TimeVector(t.values[:r])
            product = matmul(build_M(r, s).matrix, build_M(r, tt).matrix)
            composed = build_M(r, compose_times(s, tt)).matrix
            outcome["passed"] = all(_equal(x, y) for x, y in zip(product.flat, composed.flat))
    return report


def determinant_of(m: MonomialMatrix):
    """Product of the diagonal; M^(r) is upper triangular"""
    total = 1
    for k in range(1, m.r + 1):
        total = total * m.entry(k, k)
    return total


@traced
def verify_ideal(r: int) -> VerificationReport:
    report = VerificationReport(f"ideal r={r}")
    t = TimeVector.symbolic(r)
    rows = power_coefficients(t, r)
    size = r + 1
    table = [[rows[k][j] for j in range(size)] for k in range(size)]

    with report.timed("border T_00 = 1, T_0k = T_k0 = 0") as outcome:
        bad = 0 if _equal(table[0][0], 1) else 1
        bad += sum(1 for k in range(1, size) if not (_equal(table[0][k], 0) and _equal(table[k][0], 0)))
        outcome["passed"], outcome["defect"] = bad == 0, float(bad)

    with report.timed("lower triangle T_ik = 0 for k < i") as outcome:
        bad = sum(1 for i in range(size) for k in range(i) if not _equal(table[i][k], 0))
        outcome["passed"], outcome["defect"] = bad == 0, float(bad)

    with report.timed("T_sl = Σ_{i+j=l} T_pi T_mj") as outcome:
        bad = 0
        for s in range(size):
            for p in range(s + 1):
                m_ = s - p
                for l in range(size):
                    total = 0
                    for i in range(l + 1):
                        total = total + table[p][i] * table[m_][l - i]
                    if not _equal(total, table[s][l]):
                        bad += 1
        outcome["passed"], outcome["defect"] = bad == 0, float(bad)
    return report
