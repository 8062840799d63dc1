"""
Connections
===========

Rational connections

    A(λ) = Σ_i Σ_k B_k^{(i)} / (λ - u_i)^{k+1} + Σ_{k ≥ 1} B_k^{(∞)} λ^{k-1}

with per-pole Takiff data, their local Laurent expansions, spectral
invariants S_k = ½ res (λ - u)^k Tr A(λ)² and the isomonodromic
Hamiltonians (H_u = S_0, 𝓜 H = S for the irregular times).

Every spectral invariant is a quadratic form Σ c_ab Tr(A_a A_b) in the bare
Takiff coefficients A_a, a = (pole, k); ``QuadraticHamiltonian`` keeps that
form so it can be evaluated on numbers, on phase polynomials, differentiated
for flows or quantized.

At infinity the local coordinate is ζ = 1/λ with Ã(ζ) = -ζ^{-2} A(1/ζ); the
residue of Ã at ζ = 0 is -Σ_i B_0^{(i)}.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .algebra_core import generator_matrix, matmul, trace, zeros
from .errors import IndexRangeError, PoleEvaluationError, ShapeMismatchError, SingularityError
from .logging_utils import get_logger
from .monomials import TimeVector, apply_automorphism, back_substitute, build_M
from .scalars import reciprocal

logger = get_logger(__name__)

INF = "inf"

Label = Tuple[int, int]


def is_infinite(position: Any) -> bool:
    return isinstance(position, str) and position == INF


class TimeCoordinate(NamedTuple):
    """``u`` (pole position) or ``t`` (irregular time t_k) of one pole"""

    kind: str
    pole: int
    k: int = 0

    def __str__(self):
        return f"u[{self.pole}]" if self.kind == "u" else f"t[{self.pole},{self.k}]"


@dataclass
class PoleData:
    """One pole: position (or INF), bare coefficients A_0..A_r, times t_1..t_r"""

    position: Any
    coefficients: List[np.ndarray]
    times: TimeVector = None
    theta: Optional[Tuple[Any, ...]] = None
    movable: bool = True
    name: str = ""

    def __post_init__(self):
        self.coefficients = list(self.coefficients)
        if not self.coefficients:
            raise ShapeMismatchError("A pole needs at least its residue coefficient")
        if self.times is None:
            self.times = TimeVector.identity(self.rank)
        elif not isinstance(self.times, TimeVector):
            self.times = TimeVector(tuple(self.times))
        if self.times.r != self.rank:
            raise ShapeMismatchError("A rank-r pole needs r times",
                                     {"rank": self.rank, "times": self.times.r})

    @property
    def rank(self) -> int:
        return len(self.coefficients) - 1

    @property
    def at_infinity(self) -> bool:
        return is_infinite(self.position)

    def effective(self) -> List[np.ndarray]:
        """B_0..B_r = apply_automorphism(A, t)"""
        return apply_automorphism(self.coefficients, self.times)

    def effective_weights(self) -> List[Dict[int, Any]]:
        """B_k = Σ_p weights[k][p] A_p"""
        if self.rank == 0:
            return [{0: 1}]
        mm = build_M(self.rank, self.times)
        out: List[Dict[int, Any]] = [{0: 1}]
        for k in range(1, self.rank + 1):
            out.append({p: mm.entry(k, p) for p in range(k, self.rank + 1) if mm.entry(k, p) != 0})
        return out


@dataclass
class ConnectionSpec:
    m: int
    poles: List[PoleData]
    fuchs: bool = False

    def __post_init__(self):
        self.poles = list(self.poles)
        finite = [p.position for p in self.poles if not p.at_infinity]
        if len(self.poles) - len(finite) > 1:
            raise ShapeMismatchError("At most one pole may sit at infinity")
        for i, u in enumerate(finite):
            for v in finite[i + 1:]:
                if u == v:
                    raise SingularityError("Pole positions must be distinct; merge poles by confluence",
                                           {"position": u})
        for index, pole in enumerate(self.poles):
            for coeff in pole.coefficients:
                if coeff.shape != (self.m, self.m):
                    raise ShapeMismatchError("Coefficient shape differs from m",
                                             {"pole": index, "shape": coeff.shape, "m": self.m})

    @property
    def finite_indices(self) -> List[int]:
        return [i for i, p in enumerate(self.poles) if not p.at_infinity]

    @property
    def infinity_index(self) -> Optional[int]:
        return next((i for i, p in enumerate(self.poles) if p.at_infinity), None)

    def labels(self) -> List[Label]:
        return [(i, k) for i, p in enumerate(self.poles) for k in range(p.rank + 1)]

    def coefficient_values(self) -> Dict[Label, np.ndarray]:
        return {(i, k): c for i, p in enumerate(self.poles) for k, c in enumerate(p.coefficients)}

    def with_coefficients(self, values: Mapping[Label, np.ndarray]) -> "ConnectionSpec":
        poles = []
        for i, pole in enumerate(self.poles):
            coeffs = [values.get((i, k), c) for k, c in enumerate(pole.coefficients)]
            poles.append(replace(pole, coefficients=coeffs))
        return ConnectionSpec(self.m, poles, self.fuchs)

    def time_value(self, coordinate: TimeCoordinate):
        pole = self.poles[coordinate.pole]
        return pole.position if coordinate.kind == "u" else pole.times.t(coordinate.k)

    def with_times(self, updates: Mapping[TimeCoordinate, Any]) -> "ConnectionSpec":
        poles = [replace(p) for p in self.poles]
        for coordinate, value in updates.items():
            pole = poles[coordinate.pole]
            if coordinate.kind == "u":
                poles[coordinate.pole] = replace(pole, position=value)
            else:
                values = list(pole.times.values)
                values[coordinate.k - 1] = value
                poles[coordinate.pole] = replace(pole, times=TimeVector(tuple(values)))
        return ConnectionSpec(self.m, poles, self.fuchs)

    def gauge_transform(self, g: np.ndarray, g_inv: np.ndarray) -> "ConnectionSpec":
        poles = [replace(p, coefficients=[matmul(g_inv, c, g) for c in p.coefficients]) for p in self.poles]
        return ConnectionSpec(self.m, poles, self.fuchs)


def time_coordinates(spec: ConnectionSpec) -> List[TimeCoordinate]:
    coords: List[TimeCoordinate] = []
    for i, pole in enumerate(spec.poles):
        if not pole.at_infinity and pole.movable:
            coords.append(TimeCoordinate("u", i))
        for k in range(1, pole.rank + 1):
            coords.append(TimeCoordinate("t", i, k))
    return coords


def schlesinger_spec(positions: Sequence[Any], residues: Sequence[np.ndarray],
                     movable: Optional[Sequence[bool]] = None) -> ConnectionSpec:
    """Fuchsian spec Σ A^{(i)}/(λ - u_i), simple pole at infinity left implicit"""
    if len(positions) != len(residues):
        raise ShapeMismatchError("One residue per position", {"positions": len(positions)})
    flags = list(movable) if movable is not None else [True] * len(positions)
    poles = [PoleData(u, [a], movable=f) for u, a, f in zip(positions, residues, flags)]
    return ConnectionSpec(residues[0].shape[0], poles)


# ----------------------------------------------------------------------
# evaluation and local expansions


def _binom(n: int, k: int) -> int:
    """Binomial coefficient for any integer n and k ≥ 0"""
    if k < 0:
        return 0
    if n >= 0:
        return math.comb(n, k) if k <= n else 0
    return (-1) ** k * math.comb(k - n - 1, k)


def assemble(spec: ConnectionSpec, lam, values: Optional[Mapping[Label, np.ndarray]] = None) -> np.ndarray:
    """A(λ0) from the effective coefficients (optionally with overriding bare values)"""
    if values is not None:
        spec = spec.with_coefficients(values)
    total = zeros(spec.m)
    for pole in spec.poles:
        b = pole.effective()
        if pole.at_infinity:
            for k in range(1, pole.rank + 1):
                total = total + b[k] * lam ** (k - 1)
            continue
        offset = lam - pole.position
        if offset == 0:
            raise PoleEvaluationError("A(λ) evaluated at a pole", {"position": pole.position})
        inv = reciprocal(offset)
        for k, coeff in enumerate(b):
            total = total + coeff * inv ** (k + 1)
    return total


def laurent_weights(spec: ConnectionSpec, pole_index: Optional[int], order: int) -> Dict[int, Dict[Label, Any]]:
    """Weights of L_n = Σ w[n][label] A_label in the expansion at a pole

    ``pole_index=None`` expands at infinity even when the spec has no pole there.
    The window is n ∈ [-r-1, order].
    """
    at_inf = pole_index is None or spec.poles[pole_index].at_infinity
    weights: Dict[int, Dict[Label, Any]] = {}

    def add(n: int, label: Label, w) -> None:
        if w == 0 or n > order:
            return
        bucket = weights.setdefault(n, {})
        bucket[label] = bucket.get(label, 0) + w

    center = None if at_inf else spec.poles[pole_index].position
    for j, pole in enumerate(spec.poles):
        eff = pole.effective_weights()
        for k, row in enumerate(eff):
            for p, w_kp in row.items():
                label = (j, p)
                if at_inf:
                    if pole.at_infinity:
                        if k >= 1:
                            add(-k - 1, label, -w_kp)
                    else:
                        u = pole.position
                        for s in range(0, order - k + 2):
                            c = _binom(-k - 1, s)
                            add(k - 1 + s, label, -w_kp * c * (-u) ** s if s else -w_kp * c)
                elif j == pole_index:
                    add(-k - 1, label, w_kp)
                elif pole.at_infinity:
                    if k >= 1:
                        for n in range(0, k):
                            power = k - 1 - n
                            add(n, label, w_kp * _binom(k - 1, n) * (center ** power if power else 1))
                else:
                    c = center - pole.position
                    inv = reciprocal(c)
                    for n in range(0, order + 1):
                        add(n, label, w_kp * _binom(-k - 1, n) * inv ** (k + 1 + n))
    return weights


@dataclass
class LocalLaurent:
    center: Any
    n_min: int
    order: int
    coefficients: Dict[int, np.ndarray] = field(default_factory=dict)

    def coefficient(self, n: int) -> np.ndarray:
        if n in self.coefficients:
            return self.coefficients[n]
        shape = next(iter(self.coefficients.values())).shape if self.coefficients else (0, 0)
        return zeros(shape[0])


def local_laurent(spec: ConnectionSpec, pole_index: Optional[int], order: int) -> LocalLaurent:
    if order < 0:
        raise IndexRangeError("Laurent window must reach n ≥ 0", {"order": order})
    weights = laurent_weights(spec, pole_index, order)
    values = spec.coefficient_values()
    coeffs: Dict[int, np.ndarray] = {}
    for n, row in weights.items():
        total = zeros(spec.m)
        for label, w in row.items():
            total = total + values[label] * w
        coeffs[n] = total
    rank = spec.poles[pole_index].rank if pole_index is not None else \
        (spec.poles[spec.infinity_index].rank if spec.infinity_index is not None else 0)
    center = INF if pole_index is None else spec.poles[pole_index].position
    return LocalLaurent(center, -rank - 1, order, coeffs)


# ----------------------------------------------------------------------
# quadratic forms in the Takiff coefficients


class QuadraticHamiltonian:
    """Σ_{a ≤ b} c_ab Tr(A_a A_b) over coefficient labels"""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[Tuple[Label, Label], Any]] = None):
        self.terms: Dict[Tuple[Label, Label], Any] = {}
        for (a, b), c in (terms or {}).items():
            key = (a, b) if a <= b else (b, a)
            self.terms[key] = self.terms.get(key, 0) + c
        self.terms = {key: c for key, c in self.terms.items() if c != 0}

    def __add__(self, other: "QuadraticHamiltonian") -> "QuadraticHamiltonian":
        merged = dict(self.terms)
        for key, c in other.terms.items():
            merged[key] = merged.get(key, 0) + c
        return QuadraticHamiltonian(merged)

    def __neg__(self):
        return self * -1

    def __sub__(self, other: "QuadraticHamiltonian") -> "QuadraticHamiltonian":
        return self + (-other)

    def __mul__(self, factor) -> "QuadraticHamiltonian":
        return QuadraticHamiltonian({key: c * factor for key, c in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, QuadraticHamiltonian):
            return NotImplemented
        return self.terms == other.terms

    __hash__ = None  # type: ignore[assignment]

    def is_zero(self) -> bool:
        return not self.terms

    def labels(self) -> List[Label]:
        return sorted({x for key in self.terms for x in key})

    def map_coefficients(self, fn) -> "QuadraticHamiltonian":
        return QuadraticHamiltonian({key: fn(c) for key, c in self.terms.items()})

    def evaluate(self, values: Mapping[Label, np.ndarray]):
        """Numeric value, or a PhasePolynomial when the matrices are symbolic"""
        total = 0
        for (a, b), c in sorted(self.terms.items()):
            total = total + trace(matmul(values[a], values[b])) * c
        return total

    def gradient(self, values: Mapping[Label, np.ndarray]) -> Dict[Label, np.ndarray]:
        """G_a with dH = Σ_a Tr(G_a dA_a)"""
        grads: Dict[Label, np.ndarray] = {}
        for (a, b), c in self.terms.items():
            if a == b:
                grads[a] = grads.get(a, 0) + values[a] * (2 * c)
            else:
                grads[a] = grads.get(a, 0) + values[b] * c
                grads[b] = grads.get(b, 0) + values[a] * c
        return grads

    def __repr__(self):
        inner = ", ".join(f"{c}·Tr(A{a}A{b})" for (a, b), c in sorted(self.terms.items()))
        return f"QuadraticHamiltonian({inner})"


def spectral_quadratic(spec: ConnectionSpec, pole_index: Optional[int], k: int) -> QuadraticHamiltonian:
    """S_k = ½ res (λ - u)^k Tr A² as a quadratic form (ζ-chart at infinity)"""
    if k < 0:
        raise IndexRangeError("Spectral invariants need k ≥ 0", {"k": k})
    rank = 0
    if pole_index is not None:
        rank = spec.poles[pole_index].rank
    elif spec.infinity_index is not None:
        rank = spec.poles[spec.infinity_index].rank
    order = max(rank - k, 0)
    weights = laurent_weights(spec, pole_index, order)
    terms: Dict[Tuple[Label, Label], Any] = {}
    target = -1 - k
    half = reciprocal(2)
    for n, row in weights.items():
        partner = weights.get(target - n)
        if partner is None:
            continue
        for a, wa in row.items():
            for b, wb in partner.items():
                key = (a, b) if a <= b else (b, a)
                terms[key] = terms.get(key, 0) + wa * wb * half
    return QuadraticHamiltonian(terms)


def spectral_invariant(spec: ConnectionSpec, pole_index: Optional[int], k: int):
    return spectral_quadratic(spec, pole_index, k).evaluate(spec.coefficient_values())


def pole_hamiltonian_quadratic(spec: ConnectionSpec, pole_index: int) -> QuadraticHamiltonian:
    if spec.poles[pole_index].at_infinity:
        raise IndexRangeError("H_u is defined for finite poles", {"pole": pole_index})
    return spectral_quadratic(spec, pole_index, 0)


def pole_hamiltonian(spec: ConnectionSpec, pole_index: int):
    return pole_hamiltonian_quadratic(spec, pole_index).evaluate(spec.coefficient_values())


def irregular_quadratic(spec: ConnectionSpec, pole_index: Optional[int]) -> List[QuadraticHamiltonian]:
    """H_1..H_r with M^(r)(t) H = (S_1..S_r)"""
    index = pole_index if pole_index is not None else spec.infinity_index
    pole = spec.poles[index]
    if pole.rank < 1:
        raise IndexRangeError("Irregular Hamiltonians need rank ≥ 1", {"pole": index})
    chart = None if pole.at_infinity else index
    s = [spectral_quadratic(spec, chart, k) for k in range(1, pole.rank + 1)]
    return back_substitute(build_M(pole.rank, pole.times), s)


def irregular_hamiltonians(spec: ConnectionSpec, pole_index: Optional[int]) -> List[Any]:
    values = spec.coefficient_values()
    return [h.evaluate(values) for h in irregular_quadratic(spec, pole_index)]


def hamiltonians(spec: ConnectionSpec) -> Dict[TimeCoordinate, QuadraticHamiltonian]:
    """One Hamiltonian per time coordinate"""
    out: Dict[TimeCoordinate, QuadraticHamiltonian] = {}
    for i, pole in enumerate(spec.poles):
        if not pole.at_infinity and pole.movable:
            out[TimeCoordinate("u", i)] = pole_hamiltonian_quadratic(spec, i)
        if pole.rank >= 1:
            for k, h in enumerate(irregular_quadratic(spec, i), start=1):
                out[TimeCoordinate("t", i, k)] = h
    return out


def residue_sum(spec: ConnectionSpec) -> QuadraticHamiltonian:
    """Σ_i S_0^{(i)} - S_2^{(∞)}: the sum of residues of ½ Tr A² dλ over the sphere"""
    total = QuadraticHamiltonian()
    for i in spec.finite_indices:
        total = total + spectral_quadratic(spec, i, 0)
    return total - spectral_quadratic(spec, None, 2)


def fuchs_residue_sum(spec: ConnectionSpec) -> np.ndarray:
    """Σ over finite poles of B_0^{(i)} (the gauge moment map)"""
    total = zeros(spec.m)
    for i in spec.finite_indices:
        total = total + spec.poles[i].coefficients[0]
    return total


def residue_at_infinity(spec: ConnectionSpec) -> np.ndarray:
    """Residue of Ã at ζ = 0, i.e. -Σ B_0^{(i)}"""
    return -fuchs_residue_sum(spec)


# ----------------------------------------------------------------------
# Katz dimension


def katz_dimension(spectral_types: Sequence[Sequence[int]]) -> int:
    """N = 2 - (1 - n) m² - Σ_i Σ_j (m_j^{(i)})², the last type being at infinity"""
    if len(spectral_types) < 2:
        raise ShapeMismatchError("Need at least one finite pole and infinity")
    m = sum(spectral_types[0])
    for types in spectral_types:
        if sum(types) != m or any(x <= 0 for x in types):
            raise ShapeMismatchError("Multiplicities must be positive and sum to m",
                                     {"types": list(types), "m": m})
    n = len(spectral_types) - 1
    return 2 - (1 - n) * m * m - sum(x * x for types in spectral_types for x in types)


def katz_symplectic_count(spectral_types: Sequence[Sequence[int]]) -> int:
    """Σ dim O_i - 2 dim PGL_m for semisimple orbits"""
    m = sum(spectral_types[0])
    orbit_dims = sum(m * m - sum(x * x for x in types) for types in spectral_types)
    return orbit_dims - 2 * (m * m - 1)


# ----------------------------------------------------------------------
# symbolic coefficient families


def symbolic_takiff_spec(spec: ConnectionSpec, kind: str = "A") -> Tuple[ConnectionSpec, Dict[int, Label]]:
    """Replace every bare coefficient by a matrix of generators (kind, slot, a, b)"""
    slots: Dict[int, Label] = {}
    values: Dict[Label, np.ndarray] = {}
    for slot, label in enumerate(spec.labels()):
        slots[slot] = label
        values[label] = generator_matrix(kind, slot, spec.m)
    return spec.with_coefficients(values), slots
