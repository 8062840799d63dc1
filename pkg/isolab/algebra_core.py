"""
Algebra Core
============

Matrices over exact scalars, floats or phase polynomials, the gl_m structure
data and the permutation operator Π on C^m ⊗ C^m.

Matrices are numpy arrays. Exact and symbolic matrices use ``dtype=object``
so that entries stay ``Fraction``/``GaussianRational``/``PhasePolynomial``;
numeric matrices use ``complex128``. Tensor index convention: the entry
``(a, c), (b, d)`` of an operator on C^m ⊗ C^m lives at row ``a*m + c`` and
column ``b*m + d``, so ``kron(A, I)`` has entries ``A_ab δ_cd``.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .errors import ShapeMismatchError, SingularityError
from .polynomial import Generator, PhasePolynomial, var
from .scalars import reciprocal


def object_matrix(rows: Sequence[Sequence[object]]) -> np.ndarray:
    data = [list(row) for row in rows]
    out = np.empty((len(data), len(data[0]) if data else 0), dtype=object)
    for i, row in enumerate(data):
        if len(row) != out.shape[1]:
            raise ShapeMismatchError("Ragged matrix rows", {"row": i})
        for j, value in enumerate(row):
            out[i, j] = value
    return out


def zeros(m: int, n: int = None) -> np.ndarray:
    out = np.empty((m, m if n is None else n), dtype=object)
    out.fill(0)
    return out


def identity(m: int) -> np.ndarray:
    out = zeros(m)
    for i in range(m):
        out[i, i] = 1
    return out


def is_symbolic_matrix(matrix: np.ndarray) -> bool:
    return matrix.dtype == object and any(isinstance(x, PhasePolynomial) for x in matrix.flat)


def to_numeric(matrix: np.ndarray) -> np.ndarray:
    if is_symbolic_matrix(matrix):
        raise TypeError("symbolic matrix has no numeric value; evaluate it first")
    return np.array([[complex(x) for x in row] for row in matrix], dtype=complex)


def require_square(matrix: np.ndarray, name: str = "matrix") -> int:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeMismatchError(f"{name} must be square", {"shape": matrix.shape})
    return matrix.shape[0]


def matmul(*factors: np.ndarray) -> np.ndarray:
    result = factors[0]
    for factor in factors[1:]:
        if result.shape[1] != factor.shape[0]:
            raise ShapeMismatchError("Incompatible matrix product",
                                     {"left": result.shape, "right": factor.shape})
        result = result.dot(factor)
    return result


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return matmul(a, b) - matmul(b, a)


def trace(matrix: np.ndarray):
    require_square(matrix)
    total = 0
    for i in range(matrix.shape[0]):
        total = total + matrix[i, i]
    return total


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.dtype != object and b.dtype != object:
        return np.kron(a, b)
    outer = np.multiply.outer(a.astype(object), b.astype(object))
    m, n = a.shape
    p, q = b.shape
    return outer.transpose(0, 2, 1, 3).reshape(m * p, n * q)


def permutation_operator(m: int) -> np.ndarray:
    """Π with Π_{(a,c),(b,d)} = δ_ad δ_cb"""
    pi = zeros(m * m)
    for a in range(m):
        for c in range(m):
            pi[a * m + c, c * m + a] = 1
    return pi


def exact_inverse(matrix: np.ndarray) -> np.ndarray:
    """Gauss-Jordan inverse over exact scalars (or floats, without pivot search)"""
    n = require_square(matrix)
    work = np.concatenate([matrix.astype(object), identity(n)], axis=1)
    for col in range(n):
        pivot = next((row for row in range(col, n) if work[row, col] != 0), None)
        if pivot is None:
            raise SingularityError("Matrix is singular", {"column": col})
        if pivot != col:
            work[[col, pivot]] = work[[pivot, col]]
        inv_pivot = reciprocal(work[col, col])
        work[col] = work[col] * inv_pivot
        for row in range(n):
            if row != col and work[row, col] != 0:
                work[row] = work[row] - work[row, col] * work[col]
    return work[:, n:]


def determinant(matrix: np.ndarray):
    """Exact determinant by fraction-free elimination on a copy"""
    n = require_square(matrix)
    work = matrix.astype(object).copy()
    det = 1
    for col in range(n):
        pivot = next((row for row in range(col, n) if work[row, col] != 0), None)
        if pivot is None:
            return 0
        if pivot != col:
            work[[col, pivot]] = work[[pivot, col]]
            det = -det
        det = det * work[col, col]
        inv_pivot = reciprocal(work[col, col])
        for row in range(col + 1, n):
            if work[row, col] != 0:
                work[row] = work[row] - work[row, col] * inv_pivot * work[col]
    return det


def matrices_equal(a: np.ndarray, b: np.ndarray) -> bool:
    if a.shape != b.shape:
        return False
    return all(x == y for x, y in zip(a.flat, b.flat))


# ----------------------------------------------------------------------
# symbolic matrices


def generator_matrix(kind: str, slot: int, m: int) -> np.ndarray:
    """m×m matrix whose (a, b) entry is the generator (kind, slot, a, b)"""
    out = np.empty((m, m), dtype=object)
    for a in range(m):
        for b in range(m):
            out[a, b] = var(Generator(kind, slot, a, b))
    return out


def matrix_of_polynomials(q_slots: Sequence[np.ndarray], p_slots: Sequence[np.ndarray],
                          expression: Callable[[Sequence[np.ndarray], Sequence[np.ndarray]], np.ndarray] = None
                          ) -> np.ndarray:
    """Apply ``expression`` to slot matrices and return a matrix of PhasePolynomials

    The default expression is Σ_j Q_j P_j.
    """
    shapes = {s.shape for s in list(q_slots) + list(p_slots)}
    if len(shapes) != 1:
        raise ShapeMismatchError("Slot matrices must share one square shape", {"shapes": sorted(shapes)})
    (shape,) = shapes
    if shape[0] != shape[1]:
        raise ShapeMismatchError("Slot matrices must be square", {"shape": shape})
    if expression is None:
        if len(q_slots) != len(p_slots):
            raise ShapeMismatchError("Q and P slot counts differ",
                                     {"q": len(q_slots), "p": len(p_slots)})
        result = zeros(shape[0])
        for q, p in zip(q_slots, p_slots):
            result = result + matmul(q, p)
    else:
        result = expression(q_slots, p_slots)
    out = np.empty(result.shape, dtype=object)
    for index, value in np.ndenumerate(result):
        out[index] = PhasePolynomial.coerce(value)
    return out


def bracket_tensor(a: np.ndarray, b: np.ndarray,
                   bracket: Callable[[PhasePolynomial, PhasePolynomial], PhasePolynomial]) -> np.ndarray:
    """{A ⊗, B} with entry ((a, c), (b, d)) = {A_ab, B_cd}"""
    m = require_square(a)
    out = np.empty((m * m, m * m), dtype=object)
    for i in range(m):
        for j in range(m):
            for k in range(m):
                for l in range(m):
                    out[i * m + k, j * m + l] = bracket(PhasePolynomial.coerce(a[i, j]),
                                                        PhasePolynomial.coerce(b[k, l]))
    return out


# ----------------------------------------------------------------------
# gl_m structure data


@dataclass
class LieStructure:
    """gl_m with ordered basis E_rs, structure constants and Π"""

    m: int
    basis: List[Tuple[int, int]] = field(default_factory=list)
    structure_constants: Dict[Tuple[int, int], Dict[int, int]] = field(default_factory=dict)
    casimir: np.ndarray = None

    @classmethod
    def gl(cls, m: int) -> "LieStructure":
        basis = [(r, s) for r in range(m) for s in range(m)]
        index = {pair: i for i, pair in enumerate(basis)}
        constants: Dict[Tuple[int, int], Dict[int, int]] = {}
        for alpha, (a, b) in enumerate(basis):
            for beta, (c, d) in enumerate(basis):
                # [E_ab, E_cd] = δ_bc E_ad − δ_da E_cb
                entry: Dict[int, int] = {}
                if b == c:
                    entry[index[(a, d)]] = entry.get(index[(a, d)], 0) + 1
                if d == a:
                    entry[index[(c, b)]] = entry.get(index[(c, b)], 0) - 1
                entry = {gamma: v for gamma, v in entry.items() if v}
                if entry:
                    constants[(alpha, beta)] = entry
        return cls(m=m, basis=basis, structure_constants=constants, casimir=permutation_operator(m))

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def chi(self, gamma: int, alpha: int, beta: int) -> int:
        return self.structure_constants.get((alpha, beta), {}).get(gamma, 0)

    def elementary(self, alpha: int) -> np.ndarray:
        out = zeros(self.m)
        r, s = self.basis[alpha]
        out[r, s] = 1
        return out

    def check_structure_constants(self) -> bool:
        """χ reproduces the matrix commutator of the basis"""
        for alpha in range(self.dimension):
            for beta in range(self.dimension):
                expected = commutator(self.elementary(alpha), self.elementary(beta))
                built = zeros(self.m)
                for gamma, value in self.structure_constants.get((alpha, beta), {}).items():
                    built = built + self.elementary(gamma) * value
                if not matrices_equal(expected, built):
                    return False
        return True

    def check_antisymmetry(self) -> bool:
        n = self.dimension
        return all(self.chi(g, a, b) == -self.chi(g, b, a)
                   for a in range(n) for b in range(n) for g in range(n))

    def check_jacobi(self) -> bool:
        n = self.dimension
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    for out in range(n):
                        total = 0
                        for d in range(n):
                            total += (self.chi(d, b, c) * self.chi(out, a, d)
                                      + self.chi(d, c, a) * self.chi(out, b, d)
                                      + self.chi(d, a, b) * self.chi(out, c, d))
                        if total:
                            return False
        return True

    def check_casimir(self) -> bool:
        """Π² = I and Π = Σ E_ab ⊗ E_ba"""
        pi = self.casimir
        if not matrices_equal(matmul(pi, pi), identity(self.m * self.m)):
            return False
        built = zeros(self.m * self.m)
        for alpha, (a, b) in enumerate(self.basis):
            built = built + kron(self.elementary(alpha), self.elementary(self.basis.index((b, a))))
        return matrices_equal(built, pi)

    def check_swap(self, a: np.ndarray, b: np.ndarray) -> bool:
        """Π (A ⊗ B) Π = B ⊗ A"""
        pi = self.casimir
        return matrices_equal(matmul(pi, kron(a, b), pi), kron(b, a))
