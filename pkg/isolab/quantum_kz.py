"""
Quantum KZ Systems
==================

Quantization of isomonodromic Hamiltonians in the polynomial representation
of the Weyl algebra. Every canonical coordinate is sent either to a
multiplication ``x_v·`` or to a scaled derivative ``c ∂/∂x_v``; operators
that keep the number of multiplications equal to the number of derivatives
act on the space of homogeneous polynomials of a fixed degree n, and their
matrices on the monomial basis turn the Schrödinger equations

    iħ ∂_a Ψ = Ĥ_a Ψ,     Ψ = Σ_{|α| = n} w_α x^α

into linear systems iħ ∂_a W = Ĥ_a W for the coefficient vector W.

``build_confluent_kz`` quantizes the Hamiltonians of a connection spec in
lifted coordinates; ``painleve_quantum_hamiltonians`` quantizes the
intermediate Painlevé Hamiltonians with their per-kind assignments.
"""

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Hashable, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy
from scipy.integrate import solve_ivp

from .algebra_core import to_numeric
from .connection import ConnectionSpec, Label, TimeCoordinate, hamiltonians, time_coordinates
from .errors import (
    AssignmentError,
    DegreePreservationError,
    DomainError,
    IndexRangeError,
    IntegrationError,
    PoleEvaluationError,
    ShapeMismatchError,
    SingularityError,
)
from .isoflow import IntegratorConfig, LiftedLayout, Trajectory
from .logging_utils import get_logger, traced
from .painleve import PainleveKind, PainleveParameters, intermediate_hamiltonian, stencil_derivatives
from .polynomial import Generator, PhasePolynomial, canonical_bracket, partner
from .scalars import I_UNIT, is_exact
from .verification import VerificationReport

logger = get_logger(__name__)

LEFT = "left"
WEYL = "weyl"
ORDERINGS = (LEFT, WEYL)

MULTIPLY = "multiply"
DERIVATIVE = "derivative"

FLATNESS_STEP = 1e-3
RESIDUE_STEP = 1e-4


# ----------------------------------------------------------------------
# basis and assignments


class MonomialBasis:
    """Exponent vectors α with |α| = n in V variables, graded lex (x_0^n first)"""

    def __init__(self, variables: int, degree: int):
        if variables < 1 or degree < 0:
            raise IndexRangeError("A monomial basis needs V ≥ 1 and n ≥ 0",
                                  {"variables": variables, "degree": degree})
        self.variables = variables
        self.degree = degree
        exponents = set()
        for combo in itertools.combinations_with_replacement(range(variables), degree):
            alpha = [0] * variables
            for v in combo:
                alpha[v] += 1
            exponents.add(tuple(alpha))
        self.exponents: List[Tuple[int, ...]] = sorted(exponents, reverse=True)
        self._index = {alpha: i for i, alpha in enumerate(self.exponents)}

    @property
    def size(self) -> int:
        return len(self.exponents)

    def __len__(self):
        return self.size

    def __iter__(self) -> Iterator[Tuple[int, ...]]:
        return iter(self.exponents)

    def index(self, alpha: Sequence[int]) -> int:
        try:
            return self._index[tuple(alpha)]
        except KeyError:
            raise IndexRangeError("Exponent vector is not in the basis",
                                  {"alpha": tuple(alpha), "degree": self.degree}) from None

    def label(self, alpha: Sequence[int], names: Optional[Sequence[str]] = None) -> str:
        names = names or [f"x{v}" for v in range(self.variables)]
        parts = [name if e == 1 else f"{name}^{e}" for name, e in zip(names, alpha) if e]
        return "*".join(parts) or "1"

    def __repr__(self):
        return f"MonomialBasis(variables={self.variables}, degree={self.degree}, size={self.size})"


@dataclass(frozen=True)
class QuantumSymbol:
    """Image of one canonical coordinate: ``factor·x_v`` or ``factor·∂/∂x_v``"""

    action: str
    variable: int
    factor: Any = 1


def multiply(variable: int, factor: Any = 1) -> QuantumSymbol:
    return QuantumSymbol(MULTIPLY, variable, factor)


def derivative(variable: int, factor: Any = 1) -> QuantumSymbol:
    return QuantumSymbol(DERIVATIVE, variable, factor)


def _check_assignment(assignment: Mapping[Hashable, QuantumSymbol], variables: int) -> None:
    seen: Dict[Tuple[str, int], Hashable] = {}
    for key, symbol in assignment.items():
        if symbol.action not in (MULTIPLY, DERIVATIVE):
            raise AssignmentError(f"Unknown action {symbol.action!r}", {"coordinate": key})
        if not 0 <= symbol.variable < variables:
            raise AssignmentError("Assignment refers to a variable outside the basis",
                                  {"coordinate": key, "variable": symbol.variable, "variables": variables})
        if symbol.factor == 0:
            raise AssignmentError("Quantization factor must be non-zero", {"coordinate": key})
        slot = (symbol.action, symbol.variable)
        if slot in seen:
            raise AssignmentError("Two coordinates share one operator",
                                  {"first": seen[slot], "second": key, "operator": slot})
        seen[slot] = key
        if isinstance(key, Generator) and key.kind in ("P", "Q"):
            other = assignment.get(partner(key))
            if other is not None and (other.variable != symbol.variable or other.action == symbol.action):
                raise AssignmentError("Conjugate coordinates must act on one variable as x and ∂",
                                      {"coordinate": key, "partner": partner(key)})


def _commutator_constant(assignment: Mapping[Generator, QuantumSymbol]):
    """c with [P̂, Q̂] = c on every assigned conjugate pair"""
    constants = []
    for g, symbol in assignment.items():
        if g.kind != "P" or partner(g) not in assignment:
            continue
        q_symbol = assignment[partner(g)]
        if symbol.action == DERIVATIVE:
            constants.append(symbol.factor * q_symbol.factor)
        else:
            constants.append(-(symbol.factor * q_symbol.factor))
    if not constants:
        raise AssignmentError("No conjugate pair is assigned")
    first = constants[0]
    if any(abs(complex(c - first)) > 1e-14 for c in constants[1:]):
        raise AssignmentError("Conjugate pairs carry different commutators", {"constants": constants})
    return first


# ----------------------------------------------------------------------
# ordering and matrices


def _weyl_weights(a: int, b: int) -> List[Tuple[int, Fraction]]:
    """Sym(x^a ∂^b) = Σ_k w_k x^{a-k} ∂^{b-k}, using [∂, x] = 1"""
    return [(k, Fraction(math.factorial(k) * math.comb(a, k) * math.comb(b, k), 2 ** k))
            for k in range(min(a, b) + 1)]


def _ordered_terms(factors: Iterable[Tuple[QuantumSymbol, int]], coefficient, variables: int,
                   ordering: str) -> List[Tuple[Tuple[int, ...], Tuple[int, ...], Any]]:
    """Normal-ordered (α, β, coefficient) terms of x^α ∂^β for one classical monomial"""
    alpha = [0] * variables
    beta = [0] * variables
    scale = coefficient
    for symbol, power in factors:
        if symbol.action == MULTIPLY:
            alpha[symbol.variable] += power
        else:
            beta[symbol.variable] += power
        if symbol.factor != 1:
            scale = scale * symbol.factor ** power
    if ordering == LEFT:
        return [(tuple(alpha), tuple(beta), scale)]
    terms: List[Tuple[Tuple[int, ...], Tuple[int, ...], Any]] = [((), (), scale)]
    for v in range(variables):
        expanded = []
        for head_a, head_b, c in terms:
            for k, w in _weyl_weights(alpha[v], beta[v]):
                expanded.append((head_a + (alpha[v] - k,), head_b + (beta[v] - k,), c * w if w != 1 else c))
        terms = expanded
    return terms


def _falling(n: int, k: int) -> int:
    return math.perm(n, k) if k <= n else 0


def _accumulate(terms: Iterable[Tuple[Sequence[Tuple[Hashable, int]], Any]],
                assignment: Mapping[Hashable, QuantumSymbol], basis: MonomialBasis,
                ordering: str) -> np.ndarray:
    """Object matrix of Σ (ordered monomial) on the basis; column = source monomial"""
    if ordering not in ORDERINGS:
        raise IndexRangeError(f"Unknown ordering {ordering!r}", {"known": list(ORDERINGS)})
    _check_assignment(assignment, basis.variables)
    matrix = np.empty((basis.size, basis.size), dtype=object)
    matrix.fill(0)
    for monomial, coefficient in terms:
        missing = [str(key) for key, _ in monomial if key not in assignment]
        if missing:
            raise AssignmentError("Coordinates without a quantization", {"missing": sorted(missing)})
        factors = [(assignment[key], power) for key, power in monomial]
        for alpha, beta, c in _ordered_terms(factors, coefficient, basis.variables, ordering):
            if sum(alpha) != sum(beta):
                raise DegreePreservationError("Quantized term changes the polynomial degree",
                                              {"multiplications": sum(alpha), "derivatives": sum(beta)})
            for col, gamma in enumerate(basis.exponents):
                weight = 1
                for g, b in zip(gamma, beta):
                    weight *= _falling(g, b)
                    if weight == 0:
                        break
                if weight == 0:
                    continue
                row = basis.index(tuple(g - b + a for g, b, a in zip(gamma, beta, alpha)))
                matrix[row, col] = matrix[row, col] + c * weight
    return matrix


@dataclass
class QuantumOperator:
    """Matrix of a degree-preserving operator on one MonomialBasis"""

    matrix: np.ndarray
    basis: MonomialBasis
    hbar: Any = 1
    ordering: str = LEFT
    exact: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.matrix.shape != (self.basis.size, self.basis.size):
            raise ShapeMismatchError("Operator matrix does not match its basis",
                                     {"shape": self.matrix.shape, "basis": self.basis.size})

    @classmethod
    def from_entries(cls, entries: np.ndarray, basis: MonomialBasis, hbar: Any = 1,
                     ordering: str = LEFT) -> "QuantumOperator":
        exact = entries if all(is_exact(x) for x in entries.flat) else None
        return cls(np.asarray(to_numeric(entries), dtype=complex), basis, hbar, ordering, exact)

    def apply(self, w: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(w, dtype=complex)

    def commutator(self, other: "QuantumOperator") -> np.ndarray:
        return self.matrix @ other.matrix - other.matrix @ self.matrix

    def __add__(self, other: "QuantumOperator") -> "QuantumOperator":
        return QuantumOperator(self.matrix + other.matrix, self.basis, self.hbar, self.ordering)

    def __sub__(self, other: "QuantumOperator") -> "QuantumOperator":
        return QuantumOperator(self.matrix - other.matrix, self.basis, self.hbar, self.ordering)

    def scale(self, factor) -> "QuantumOperator":
        return QuantumOperator(self.matrix * complex(factor), self.basis, self.hbar, self.ordering)


def quantize_phase_polynomial(h: PhasePolynomial, assignment: Mapping[Generator, QuantumSymbol],
                              basis: MonomialBasis, hbar: Any = 1, ordering: str = LEFT) -> QuantumOperator:
    """Ordered quantization of a phase polynomial on the degree-n span"""
    h = PhasePolynomial.coerce(h)
    entries = _accumulate(h.items(), assignment, basis, ordering)
    return QuantumOperator.from_entries(entries, basis, hbar, ordering)


def quantize_expression(expr, assignment: Mapping[sympy.Symbol, QuantumSymbol], basis: MonomialBasis,
                        ordering: str = LEFT) -> sympy.Matrix:
    """Same as ``quantize_phase_polynomial`` for a sympy polynomial whose coefficients may carry symbols"""
    symbols = list(assignment)
    stray = sympy.expand(expr).free_symbols - set(symbols)
    poly = sympy.Poly(sympy.expand(expr), *symbols)
    terms = [(tuple((s, e) for s, e in zip(symbols, exponents) if e), coeff)
             for exponents, coeff in poly.terms()]
    entries = _accumulate(terms, assignment, basis, ordering)
    logger.debug("expression_quantized", size=basis.size, parameters=sorted(str(s) for s in stray))
    return sympy.Matrix(basis.size, basis.size, lambda i, j: sympy.simplify(entries[i, j]))


# ----------------------------------------------------------------------
# KZ systems


Point = Mapping[Any, complex]


@dataclass
class KZSystem:
    """Ĥ_a(T) for every time coordinate a; the equations read iħ ∂_a W = Ĥ_a W"""

    coordinates: List[Any]
    basis: MonomialBasis
    hbar: Any
    base_point: Dict[Any, complex]
    family: Callable[[Point], Dict[Any, np.ndarray]]
    ordering: str = LEFT
    symbolic: Optional[Dict[Any, sympy.Matrix]] = None
    symbols: Dict[Any, sympy.Symbol] = field(default_factory=dict)
    singular: Callable[[Point], float] = None
    spec: Optional[ConnectionSpec] = None
    rates: Optional[Callable[[Any, Point], Dict[Any, np.ndarray]]] = None
    _compiled: Dict[Tuple[Any, Any], Callable] = field(default_factory=dict, init=False, repr=False, compare=False)

    def point(self, values: Optional[Point] = None) -> Dict[Any, complex]:
        point = dict(self.base_point)
        point.update(values or {})
        return point

    def operators(self, values: Optional[Point] = None) -> Dict[Any, np.ndarray]:
        return self.family(self.point(values))

    def operator(self, coordinate, values: Optional[Point] = None) -> QuantumOperator:
        matrix = self.operators(values)[coordinate]
        return QuantumOperator(matrix, self.basis, self.hbar, self.ordering)

    def distance_to_singular(self, values: Point) -> float:
        return math.inf if self.singular is None else self.singular(self.point(values))

    def time_derivative(self, by, of, values: Optional[Point] = None, h: float = FLATNESS_STEP) -> np.ndarray:
        """∂_by Ĥ_of at a point

        Exact when the system knows its time dependence (``rates`` or
        ``symbolic``); otherwise a five-point stencil of step ``h``.
        """
        point = self.point(values)
        if self.rates is not None:
            return self.rates(by, point)[of]
        if self.symbolic is not None and of in self.symbolic and by in self.symbols:
            return self._symbolic_derivative(by, of, point)
        stencil, _ = stencil_derivatives([self.family(_shifted(point, by, j * h))[of] for j in range(-2, 3)], h)
        return stencil

    def _symbolic_derivative(self, by, of, point: Point) -> np.ndarray:
        if (by, of) not in self._compiled:
            args = [self.symbols[c] for c in self.coordinates]
            rate = sympy.diff(self.symbolic[of], self.symbols[by])
            free = rate.free_symbols - set(args)
            if free:
                raise DomainError("Quantum Hamiltonian still carries symbolic parameters",
                                  {"symbols": sorted(str(s) for s in free)})
            self._compiled[(by, of)] = sympy.lambdify(args, rate, modules="numpy")
        value = self._compiled[(by, of)](*(complex(point[c]) for c in self.coordinates))
        return np.broadcast_to(np.asarray(value, dtype=complex), (self.basis.size, self.basis.size)).copy()


class LiftedQuantization:
    """Polynomial representation of the lifted slots: Q_{j,ab} ↦ x·, P_{j,ba} ↦ c ∂/∂x"""

    def __init__(self, spec: ConnectionSpec, factor: Any):
        self.layout = LiftedLayout(spec)
        self.m = spec.m
        self.factor = factor
        self.assignment: Dict[Generator, QuantumSymbol] = {}
        self.entries: Dict[Label, np.ndarray] = {
            label: value for label, value in self.layout.symbolic_values(spec).items()
            if label[0] in self.layout.dynamic
        }
        slots = sum(self.layout.ranks[i] + 1 for i in self.layout.dynamic)
        variable = 0
        for slot in range(slots):
            for a in range(self.m):
                for b in range(self.m):
                    g = Generator("Q", slot, a, b)
                    self.assignment[g] = multiply(variable)
                    self.assignment[partner(g)] = derivative(variable, factor)
                    variable += 1
        self.variables = variable
        self._operators: Dict[Tuple[int, Label], np.ndarray] = {}
        self._traces: Dict[Tuple[int, Label, Label], np.ndarray] = {}

    def entry_operators(self, label: Label, basis: MonomialBasis) -> np.ndarray:
        """(m, m, N, N) array of the quantized entries of A_label"""
        key = (basis.degree, label)
        if key not in self._operators:
            out = np.zeros((self.m, self.m, basis.size, basis.size), dtype=complex)
            if label in self.entries:
                for (a, b), poly in np.ndenumerate(self.entries[label]):
                    out[a, b] = quantize_phase_polynomial(poly, self.assignment, basis).matrix
            else:
                value = self.layout.frozen[label]
                eye = np.eye(basis.size, dtype=complex)
                for (a, b), x in np.ndenumerate(value):
                    out[a, b] = x * eye
            self._operators[key] = out
        return self._operators[key]

    def trace_operator(self, first: Label, second: Label, basis: MonomialBasis) -> np.ndarray:
        """Tr(Â_first Â_second) = Σ_{ab} Â_first[a, b] Â_second[b, a] as an operator product"""
        key = (basis.degree, first, second)
        if key not in self._traces:
            x = self.entry_operators(first, basis)
            y = self.entry_operators(second, basis)
            total = np.zeros((basis.size, basis.size), dtype=complex)
            for a in range(self.m):
                for b in range(self.m):
                    total += x[a, b] @ y[b, a]
            self._traces[key] = total
        return self._traces[key]


def lifted_variable_count(spec: ConnectionSpec) -> int:
    layout = LiftedLayout(spec)
    return sum((layout.ranks[i] + 1) * spec.m * spec.m for i in layout.dynamic)


def default_factor(hbar: Any):
    """c = iħ, exact when ħ is"""
    if is_exact(hbar):
        return I_UNIT * hbar
    return 1j * complex(hbar)


@traced
def build_confluent_kz(spec: ConnectionSpec, basis: MonomialBasis, hbar: Any = 1,
                       factor: Any = None) -> KZSystem:
    """Quantized isomonodromic Hamiltonians of ``spec`` in its lifted coordinates"""
    for i, pole in enumerate(spec.poles):
        if pole.rank >= 1 and pole.times.t(1) == 0:
            raise SingularityError("Irregular Hamiltonians need t_1 ≠ 0", {"pole": i})
    quantization = LiftedQuantization(spec, default_factor(hbar) if factor is None else factor)
    if basis.variables != quantization.variables:
        raise ShapeMismatchError("Basis does not match the lifted coordinates",
                                 {"expected": quantization.variables, "got": basis.variables})
    coordinates = time_coordinates(spec)
    base = {c: complex(spec.time_value(c)) for c in coordinates}
    for c in coordinates:
        for first, second in hamiltonians(spec)[c].terms:
            quantization.trace_operator(first, second, basis)

    def family(point: Point) -> Dict[TimeCoordinate, np.ndarray]:
        current = spec.with_times(point)
        out = {}
        for c, h in hamiltonians(current).items():
            total = np.zeros((basis.size, basis.size), dtype=complex)
            for (first, second), coefficient in h.terms.items():
                total += complex(coefficient) * quantization.trace_operator(first, second, basis)
            out[c] = total
        return out

    symbols = {c: sympy.Symbol(f"u_{c.pole}" if c.kind == "u" else f"t_{c.pole}_{c.k}") for c in coordinates}
    args = [symbols[c] for c in coordinates]
    symbolic: Dict[TimeCoordinate, Any] = {}
    compiled: Dict[TimeCoordinate, Dict[TimeCoordinate, List[Tuple[Callable, Label, Label]]]] = {}

    def rates(by: TimeCoordinate, point: Point) -> Dict[TimeCoordinate, np.ndarray]:
        # only the coefficients of Tr(Â_x Â_y) depend on the times
        if by not in compiled:
            if not symbolic:
                symbolic.update(hamiltonians(spec.with_times(symbols)))
            compiled[by] = {
                c: [(sympy.lambdify(args, sympy.diff(sympy.sympify(coefficient), symbols[by]), modules="numpy"),
                     first, second) for (first, second), coefficient in h.terms.items()]
                for c, h in symbolic.items()
            }
        values = [complex(point[c]) for c in coordinates]
        out = {}
        for c, terms in compiled[by].items():
            total = np.zeros((basis.size, basis.size), dtype=complex)
            for rate, first, second in terms:
                total += complex(rate(*values)) * quantization.trace_operator(first, second, basis)
            out[c] = total
        return out

    def singular(point: Point) -> float:
        current = spec.with_times(point)
        finite = [complex(current.poles[i].position) for i in current.finite_indices]
        gaps = [abs(a - b) for k, a in enumerate(finite) for b in finite[k + 1:]]
        firsts = [abs(complex(p.times.t(1))) for p in current.poles if p.rank >= 1]
        return min(gaps + firsts, default=math.inf)

    logger.info("kz_system_built", variables=basis.variables, degree=basis.degree, size=basis.size,
                coordinates=[str(c) for c in coordinates])
    return KZSystem(coordinates, basis, hbar, base, family, LEFT, symbols=symbols, singular=singular, spec=spec,
                    rates=rates)


# ----------------------------------------------------------------------
# flatness, solving, local exponents


def _shifted(point: Point, coordinate, step: complex) -> Dict[Any, complex]:
    out = dict(point)
    out[coordinate] = out[coordinate] + step
    return out


def flatness_check(system: KZSystem, points: Sequence[Point], h: float = FLATNESS_STEP) -> float:
    """max over pairs of ‖∂_aĤ_b - ∂_bĤ_a‖ + ‖[Ĥ_a, Ĥ_b]‖ at the sample points

    Time derivatives are exact whenever the system carries its time
    dependence; ``h`` is only used by the stencil fallback.
    """
    worst = 0.0
    for values in points:
        point = system.point(values)
        here = system.family(point)
        for a, b in itertools.combinations(system.coordinates, 2):
            bracket = here[a] @ here[b] - here[b] @ here[a]
            d_a_hb = system.time_derivative(a, b, point, h)
            d_b_ha = system.time_derivative(b, a, point, h)
            residual = float(np.max(np.abs(d_a_hb - d_b_ha))) + float(np.max(np.abs(bracket)))
            worst = max(worst, residual)
    return worst


def commutator_defect(system: KZSystem, points: Sequence[Point]) -> float:
    """max ‖[Ĥ_a, Ĥ_b]‖ over pairs and points"""
    worst = 0.0
    for values in points:
        here = system.operators(values)
        for a, b in itertools.combinations(system.coordinates, 2):
            worst = max(worst, float(np.max(np.abs(here[a] @ here[b] - here[b] @ here[a]))))
    return worst


@dataclass
class KZSolution:
    system: KZSystem
    start: Dict[Any, complex]
    end: Dict[Any, complex]
    s: np.ndarray
    w: np.ndarray
    solution: Any

    def point(self, s: float) -> Dict[Any, complex]:
        return {c: self.start[c] + s * (self.end[c] - self.start[c]) for c in self.start}

    def at(self, s: float) -> np.ndarray:
        return self.solution(s)

    @property
    def final(self) -> np.ndarray:
        return self.w[-1]


def _endpoint(system: KZSystem, value) -> Dict[Any, complex]:
    if isinstance(value, Mapping):
        return system.point({c: complex(x) for c, x in value.items()})
    if len(system.coordinates) != 1:
        raise ShapeMismatchError("Several time coordinates need endpoint mappings",
                                 {"coordinates": [str(c) for c in system.coordinates]})
    return system.point({system.coordinates[0]: complex(value)})


@traced
def solve_kz(system: KZSystem, initial: Sequence[complex], segment: Tuple[Any, Any],
             config: Optional[IntegratorConfig] = None) -> KZSolution:
    """Integrate iħ dW/ds = Σ_a (dT_a/ds) Ĥ_a(T(s)) W along the straight segment T(0) → T(1)"""
    config = config or IntegratorConfig()
    start, end = (_endpoint(system, x) for x in segment)
    if system.singular is not None:
        for s in np.linspace(0.0, 1.0, 65):
            here = {c: start[c] + s * (end[c] - start[c]) for c in start}
            if system.distance_to_singular(here) <= config.t1_margin:
                raise SingularityError("Segment runs into a singular time", {"s": float(s)})
    w0 = np.asarray(initial, dtype=complex)
    if w0.shape != (system.basis.size,):
        raise ShapeMismatchError("Initial vector does not match the basis",
                                 {"expected": system.basis.size, "got": w0.shape})
    rates = {c: end[c] - start[c] for c in system.coordinates}
    scale = 1 / (1j * complex(system.hbar))

    def rhs(s, w):
        point = {c: start[c] + s * rates[c] for c in system.coordinates}
        matrices = system.family(point)
        total = sum((rates[c] * matrices[c] for c in system.coordinates if rates[c] != 0),
                    np.zeros((system.basis.size, system.basis.size), dtype=complex))
        return scale * (total @ w)

    grid = np.linspace(0.0, 1.0, config.samples + 1)
    try:
        sol = solve_ivp(rhs, (0.0, 1.0), w0, method=config.method, rtol=config.rtol, atol=config.atol,
                        max_step=config.max_step, t_eval=grid, dense_output=True)
    except (PoleEvaluationError, SingularityError, ZeroDivisionError) as e:
        raise IntegrationError(f"KZ operator failed along the segment: {e}") from e
    if not sol.success:
        raise IntegrationError(f"Integrator stopped: {sol.message}", {"s": float(sol.t[-1])})
    logger.info("kz_solved", size=system.basis.size, evaluations=int(sol.nfev))
    return KZSolution(system, start, end, sol.t, sol.y.T, sol.sol)


def kz_residual(solution: KZSolution, samples: int = 9, h: float = 1e-4) -> float:
    """max |iħ dW/ds - Σ_a (dT_a/ds) Ĥ_a W| at interior points"""
    system = solution.system
    rates = {c: solution.end[c] - solution.start[c] for c in system.coordinates}
    worst = 0.0
    for s in np.linspace(0.1, 0.9, samples):
        dw, _ = stencil_derivatives([solution.at(s + j * h) for j in range(-2, 3)], h)
        matrices = system.family(solution.point(s))
        total = sum(rates[c] * matrices[c] for c in system.coordinates)
        worst = max(worst, float(np.max(np.abs(1j * complex(system.hbar) * dw - total @ solution.at(s)))))
    return worst


def residue_matrix(system: KZSystem, t0: complex, coordinate=None, delta: float = RESIDUE_STEP) -> np.ndarray:
    """lim (T_a - t0) Ĥ_a, exactly from the symbolic entries when available"""
    coordinate = system.coordinates[0] if coordinate is None else coordinate
    if system.symbolic is not None and coordinate in system.symbolic:
        t = system.symbols[coordinate]
        others = {system.symbols[c]: system.base_point[c] for c in system.coordinates if c != coordinate}
        at = sympy.nsimplify(complex(t0).real) + sympy.I * sympy.nsimplify(complex(t0).imag)
        matrix = system.symbolic[coordinate].subs(others).applyfunc(
            lambda e: sympy.cancel((t - at) * e).subs(t, at))
        return np.array(matrix.evalf(), dtype=complex)

    def scaled(step: complex) -> np.ndarray:
        point = system.point({coordinate: t0 + step})
        return step * system.family(point)[coordinate]

    near = (scaled(delta) + scaled(-delta)) / 2
    far = (scaled(2 * delta) + scaled(-2 * delta)) / 2
    return (4 * near - far) / 3


def frobenius_exponents(system: KZSystem, t0: complex, coordinate=None) -> np.ndarray:
    """Eigenvalues of the residue of Ĥ/(iħ) at a simple pole t0"""
    residue = residue_matrix(system, t0, coordinate)
    return np.sort_complex(np.linalg.eigvals(residue / (1j * complex(system.hbar))))


# ----------------------------------------------------------------------
# Painlevé quantum Hamiltonians

# coordinate -> (action, variable, unit); the derivative factor is unit·ħ
PAINLEVE_ASSIGNMENTS: Dict[PainleveKind, Dict[str, Tuple[str, int, Any]]] = {
    PainleveKind.VI: {"qt": (MULTIPLY, 0, 1), "pt": (DERIVATIVE, 0, sympy.I),
                      "q0": (MULTIPLY, 1, 1), "p0": (DERIVATIVE, 1, sympy.I),
                      "q1": (MULTIPLY, 2, 1), "p1": (DERIVATIVE, 2, sympy.I)},
    PainleveKind.V: {"q0": (MULTIPLY, 0, 1), "p0": (DERIVATIVE, 0, -sympy.I),
                     "qt": (MULTIPLY, 1, 1), "pt": (DERIVATIVE, 1, -sympy.I)},
    PainleveKind.IV: {"q3": (MULTIPLY, 0, 1), "p3": (DERIVATIVE, 0, 1),
                      "qt": (DERIVATIVE, 1, 1), "pt": (MULTIPLY, 1, 1)},
    PainleveKind.III: {"q1": (MULTIPLY, 0, 1), "p1": (DERIVATIVE, 0, sympy.I),
                       "q2": (DERIVATIVE, 1, sympy.I), "p2": (MULTIPLY, 1, 1)},
    PainleveKind.II: {"q3": (DERIVATIVE, 0, -sympy.I), "p3": (MULTIPLY, 0, 1),
                      "q4": (MULTIPLY, 1, 1), "p4": (DERIVATIVE, 1, -sympy.I)},
}

# variables of the PV and PVI quantizations, in the order of the basis
VARIABLE_NAMES: Dict[PainleveKind, Tuple[str, ...]] = {
    PainleveKind.VI: ("x_t", "x_0", "x_1"),
    PainleveKind.V: ("x_0", "x_t"),
    PainleveKind.IV: ("x", "y"),
    PainleveKind.III: ("x", "y"),
    PainleveKind.II: ("x", "y"),
}

# poles of the time-dependent coefficients
SINGULAR_TIMES: Dict[PainleveKind, Tuple[int, ...]] = {
    PainleveKind.VI: (0, 1),
    PainleveKind.V: (0,),
    PainleveKind.IV: (),
    PainleveKind.III: (0,),
    PainleveKind.II: (),
}


def quantum_intermediate(params: PainleveParameters) -> Tuple[sympy.Expr, Dict[str, sympy.Symbol], sympy.Symbol]:
    """The classical Hamiltonian that gets quantized, with its chart symbols and time

    PV uses the chart in which the pole at ∞ contributes 2kq_tp_t; the other
    kinds quantize their intermediate Hamiltonian as it stands.
    """
    if params.kind != PainleveKind.V:
        return intermediate_hamiltonian(params)
    c = params.symbolic()
    t = sympy.Symbol("t")
    names = {n: sympy.Symbol(n) for n in ("q0", "p0", "qt", "pt")}
    q0, p0, qt, pt = (names[n] for n in ("q0", "p0", "qt", "pt"))
    th0, tht, k = c["theta0"], c["thetat"], c["k"]
    th = (2 * t * k * qt * pt - q0 * qt * p0 ** 2 + 2 * q0 * qt * p0 * pt - q0 * qt * pt ** 2
          + 2 * th0 * qt * p0 + 2 * tht * q0 * pt + 2 * th0 * tht)
    return sympy.expand(th / t), names, t


def painleve_assignment(kind: PainleveKind, names: Mapping[str, sympy.Symbol], hbar: Any = 1,
                        factor: Any = None) -> Dict[sympy.Symbol, QuantumSymbol]:
    """Per-kind assignment; ``factor`` replaces unit·ħ on every derivative"""
    out = {}
    for name, (action, variable, unit) in PAINLEVE_ASSIGNMENTS[kind].items():
        scale = 1
        if action == DERIVATIVE:
            scale = sympy.sympify(factor) if factor is not None else unit * sympy.nsimplify(hbar)
        out[names[name]] = QuantumSymbol(action, variable, scale)
    return out


@traced
def painleve_quantum_hamiltonians(kind: Any, params: PainleveParameters, basis: MonomialBasis,
                                  hbar: Any = 1, factor: Any = None, ordering: str = LEFT) -> KZSystem:
    """Ĥ(t) of one Painlevé kind on the degree-n span, exact in t and the parameters"""
    kind = PainleveKind.parse(kind)
    if kind != params.kind:
        raise DomainError("Parameters belong to another kind", {"kind": kind.value, "params": params.kind.value})
    expected = len(VARIABLE_NAMES[kind])
    if basis.variables != expected:
        raise ShapeMismatchError(f"P{kind.value} quantizes {expected} variables",
                                 {"basis": basis.variables})
    expr, names, t = quantum_intermediate(params)
    assignment = painleve_assignment(kind, names, hbar, factor)
    matrix = quantize_expression(expr, assignment, basis, ordering)
    free = matrix.free_symbols - {t}
    compiled = sympy.lambdify(t, matrix, modules="numpy") if not free else None

    def family(point: Point) -> Dict[str, np.ndarray]:
        if compiled is None:
            raise DomainError("Quantum Hamiltonian still carries symbolic parameters",
                              {"symbols": sorted(str(s) for s in free)})
        return {"t": np.asarray(compiled(complex(point["t"])), dtype=complex)}

    poles = SINGULAR_TIMES[kind]

    def singular(point: Point) -> float:
        return min((abs(complex(point["t"]) - p) for p in poles), default=math.inf)

    logger.info("painleve_quantized", kind=kind.value, degree=basis.degree, size=basis.size)
    return KZSystem(["t"], basis, hbar, {"t": 2.0}, family, ordering, {"t": matrix}, {"t": t}, singular)


def euler_operator(basis: MonomialBasis, variables: Optional[Sequence[int]] = None) -> sympy.Matrix:
    """Î = Σ x_v ∂/∂x_v, diagonal with eigenvalue n on the degree-n span"""
    x = [sympy.Symbol(f"x{v}") for v in range(basis.variables)]
    p = [sympy.Symbol(f"d{v}") for v in range(basis.variables)]
    assignment = {}
    for v in range(basis.variables):
        assignment[x[v]] = multiply(v)
        assignment[p[v]] = derivative(v)
    chosen = range(basis.variables) if variables is None else variables
    return quantize_expression(sum(x[v] * p[v] for v in chosen), assignment, basis)


def ode_operator_matrix(coefficients: Sequence[sympy.Expr], q: sympy.Symbol, degree: int) -> sympy.Matrix:
    """Matrix of Σ_j a_j(q) d^j/dq^j on polynomials g = Σ_{k ≤ n} w_k q^k (column = q^k)"""
    size = degree + 1
    out = sympy.zeros(size, size)
    for k in range(size):
        image = sympy.expand(sum(a * sympy.diff(q ** k, q, j) for j, a in enumerate(coefficients)))
        poly = sympy.Poly(image, q)
        for (power,), value in poly.terms():
            if power >= size:
                raise DegreePreservationError("Reduced operator leaves the polynomial space",
                                              {"power": power, "degree": degree})
            out[power, k] = value
    return out


def dehomogenized(matrix: sympy.Matrix, basis: MonomialBasis) -> sympy.Matrix:
    """Rewrite a two-variable operator in the basis q^k ↔ x^{n-k} y^k, q = y/x"""
    if basis.variables != 2:
        raise ShapeMismatchError("Dehomogenization needs two variables", {"variables": basis.variables})
    n = basis.degree
    order = [basis.index((n - k, k)) for k in range(n + 1)]
    return sympy.Matrix(n + 1, n + 1, lambda i, j: matrix[order[i], order[j]])


def piii_reduced_coefficients(params: PainleveParameters, degree: int, t: sympy.Symbol,
                              q: sympy.Symbol) -> List[sympy.Expr]:
    """Coefficients (g, g', g'') of t·Ĥ_III on Ψ = x^n g(y/x), unit derivative factor and θ3 = 1"""
    c = params.symbolic()
    th1, th2, th3 = c["theta1"], c["theta2"], c["theta3"]
    return [degree * q, -q ** 2 - 2 * th1 * q + 4 * t * th2 * th3, q ** 2]


def piii_quantum_reduction(params: PainleveParameters, degree: int) -> VerificationReport:
    """t·Ĥ restricted to the Î = n eigenspace equals the reduced PIII operator"""
    if params.kind != PainleveKind.III or params["theta3"] != 1:
        raise DomainError("The PIII reduction is stated for θ3 = 1", {"kind": params.kind.value})
    report = VerificationReport(f"PIII quantum reduction n={degree}")
    basis = MonomialBasis(2, degree)
    system = painleve_quantum_hamiltonians(PainleveKind.III, params, basis, factor=1)
    t = system.symbols["t"]
    q = sympy.Symbol("q")
    with report.timed("Î commutes with Ĥ") as outcome:
        euler = euler_operator(basis)
        commutator = (euler * system.symbolic["t"] - system.symbolic["t"] * euler).applyfunc(sympy.simplify)
        outcome["passed"] = commutator.is_zero_matrix
    with report.timed("restriction equals reduced operator") as outcome:
        full = dehomogenized(t * system.symbolic["t"], basis).applyfunc(sympy.expand)
        reduced = ode_operator_matrix(piii_reduced_coefficients(params, degree, t, q), q, degree)
        difference = (full - reduced).applyfunc(sympy.simplify)
        outcome["passed"] = difference.is_zero_matrix
    return report


# ----------------------------------------------------------------------
# classical limit and semiclassical check


def classical_limit_check(pairs: Sequence[Tuple[PhasePolynomial, PhasePolynomial]],
                          assignment: Mapping[Generator, QuantumSymbol], basis: MonomialBasis,
                          ordering: str = WEYL, tol: float = 1e-12) -> VerificationReport:
    """(1/c)[Â, B̂] against the quantized canonical bracket of the symbols"""
    report = VerificationReport(f"classical limit ({ordering})")
    c = complex(_commutator_constant(assignment))
    for index, (f, g) in enumerate(pairs):
        with report.timed(f"pair {index}") as outcome:
            qf = quantize_phase_polynomial(f, assignment, basis, ordering=ordering)
            qg = quantize_phase_polynomial(g, assignment, basis, ordering=ordering)
            bracket = canonical_bracket(PhasePolynomial.coerce(f), PhasePolynomial.coerce(g))
            expected = quantize_phase_polynomial(bracket, assignment, basis, ordering=ordering).matrix
            defect = float(np.max(np.abs(qf.commutator(qg) / c - expected), initial=0.0))
            outcome["passed"] = defect <= tol
            outcome["defect"] = defect
    return report


def _momenta_norm(trajectory: Trajectory, y: np.ndarray) -> float:
    _, ps = trajectory.layout.unpack(y)
    return max((float(np.max(np.abs(x))) for i in ps for x in ps[i]), default=0.0)


def semiclassical_check(trajectory: Trajectory, hbars: Sequence[float], segment: int = 0, points: int = 8,
                        h: float = 1e-5, floor: float = 1e-12, tol: float = 1e-6) -> VerificationReport:
    """Leading WKB order along a classical trajectory: d(S/ħ) = d(log τ)/ħ for every ħ

    S is integrated from Σ Tr(P dQ) - Σ H dT; the Euler identity for
    Hamiltonians of degree two gives dS = Σ H dT = d log τ. The identity is
    classical, so one check carries it; the per-ħ phase mismatch is that
    defect divided by ħ and is listed in the check details.
    """
    layout = trajectory.layout
    report = VerificationReport("semiclassical phase")
    samples = np.linspace(segment + 0.1, segment + 0.9, points)
    delta = dict(zip(trajectory.path.coordinates, trajectory.path.delta(segment)))
    rates = []
    for s in samples:
        y = trajectory.dense(s)
        if _momenta_norm(trajectory, y) <= floor:
            raise DomainError("Trajectory passes through zero action", {"s": float(s)})
        dy = (trajectory.dense(s + h) - trajectory.dense(s - h)) / (2 * h)
        qs, ps = layout.unpack(y)
        dqs, _ = layout.unpack(dy)
        p_dq = sum((complex(np.trace(ps[i][j] @ dqs[i][j])) for i in layout.dynamic
                    for j in range(layout.ranks[i] + 1)), 0j)
        h_dt = sum((value * delta.get(c, 0) for c, value in trajectory.hamiltonian_values(s).items()), 0j)
        rates.append((p_dq - h_dt, complex(dy[layout.tau_index])))
    with report.timed("dS = d log tau") as outcome:
        classical = max((abs(ds - dtau) for ds, dtau in rates), default=0.0)
        outcome["passed"] = classical <= tol
        outcome["defect"] = classical
        # phase mismatch of exp(iS/ħ) against τ^(i/ħ), reported, not tested
        for hbar in hbars:
            outcome[f"hbar={hbar:g}"] = classical / hbar
    return report


def quantum_report(params: PainleveParameters, degree: int, t_value: float = 0.5, hbar: Any = 1) -> VerificationReport:
    """Degree preservation and single-time checks of one Painlevé quantization"""
    report = VerificationReport(f"P{params.kind.value} quantum n={degree}")
    basis = MonomialBasis(len(VARIABLE_NAMES[params.kind]), degree)
    with report.timed("degree-preserving quantization") as outcome:
        system = painleve_quantum_hamiltonians(params.kind, params, basis, hbar)
        outcome["size"] = basis.size
    with report.timed("finite at regular time") as outcome:
        matrix = system.operators({"t": t_value})["t"]
        outcome["passed"] = bool(np.all(np.isfinite(matrix)))
    return report


def confluent_kz_report(spec: ConnectionSpec, degree: int, points: Sequence[Point], hbar: Any = 1,
                        tol: float = 1e-8) -> VerificationReport:
    report = VerificationReport(f"confluent KZ n={degree}")
    basis = MonomialBasis(lifted_variable_count(spec), degree)
    system = build_confluent_kz(spec, basis, hbar)
    with report.timed("commutativity") as outcome:
        defect = commutator_defect(system, points)
        outcome["passed"] = defect <= 1e-10
        outcome["defect"] = defect
    with report.timed("flatness") as outcome:
        defect = flatness_check(system, points)
        outcome["passed"] = defect <= tol
        outcome["defect"] = defect
    return report
