"""
Isomonodromic Flows
===================

Numerical integration of the multi-time isomonodromic Hamiltonian systems in
lifted Darboux coordinates.

Every finite pole, and the pole at infinity when its rank is positive,
carries lifted slots Q_0..Q_r, P_0..P_r with bare coefficients
A_k = Σ_j Q_j P_{j+k} (at infinity the slots realize -A_k). For a quadratic
Hamiltonian with dH = Σ_k Tr(G_k dA_k) the canonical equations read

    dQ_s/ds = Σ_{p ≤ s} G_p Q_{s-p},      dP_j/ds = -Σ_k P_{j+k} G_k.

A path s ↦ T(s) through time space is piecewise linear; along segment k the
flow is generated by Σ_a (dT_a/ds) H_a and log τ is integrated as one more
component of the state, d log τ/ds = Σ_a (dT_a/ds) H_a.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Any, Dict, IO, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator
from scipy.integrate import solve_ivp

from .algebra_core import to_numeric
from .config import IsolabConfig
from .connection import (
    INF,
    ConnectionSpec,
    Label,
    QuadraticHamiltonian,
    TimeCoordinate,
    assemble,
    hamiltonians,
)
from .errors import (
    ConfigurationError,
    IndexRangeError,
    IntegrationError,
    MissingGeneratorError,
    PoleEvaluationError,
    ShapeMismatchError,
    SingularityError,
)
from .logging_utils import get_logger, traced
from .monomials import TimeVector, build_M
from .polynomial import Generator, PhasePolynomial, canonical_bracket, partner, t_gen
from .takiff import TakiffCoElement, casimir, lifted_A, lifted_moment, symbolic_slots
from .verification import VerificationReport

logger = get_logger(__name__)

EXPLICIT_METHODS = ("RK45", "RK23", "DOP853")


class IntegratorConfig(BaseModel):
    """Settings of one integration run"""

    method: str = "DOP853"
    rtol: float = Field(default=1e-10, gt=0)
    atol: float = Field(default=1e-12, gt=0)
    max_step: float = Field(default=math.inf, gt=0)
    t1_margin: float = Field(default=1e-3, ge=0)
    samples: int = Field(default=16, ge=1)

    @field_validator("method")
    @classmethod
    def _explicit_rk(cls, value: str) -> str:
        if value not in EXPLICIT_METHODS:
            raise ValueError(f"method must be one of {', '.join(EXPLICIT_METHODS)}")
        return value

    @classmethod
    def from_config(cls, config: IsolabConfig, **overrides: Any) -> "IntegratorConfig":
        values: Dict[str, Any] = {"rtol": config.tol, "atol": config.tol * 1e-2,
                                  "t1_margin": config.t1_margin}
        values.update({key: value for key, value in overrides.items() if value is not None})
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid integrator settings: {e.errors()[0]['msg']}",
                                     {"fields": sorted(values)}) from e


# ----------------------------------------------------------------------
# paths through time space


def _segment_min_abs(a: complex, b: complex) -> float:
    """min over s ∈ [0, 1] of |a + s (b - a)|"""
    d = b - a
    if d == 0:
        return abs(a)
    s = -((a.conjugate() * d).real) / abs(d) ** 2
    s = min(max(s, 0.0), 1.0)
    return abs(a + s * d)


@dataclass
class FlowPath:
    coordinates: List[TimeCoordinate]
    knots: List[Tuple[complex, ...]]

    def __post_init__(self):
        self.coordinates = list(self.coordinates)
        self.knots = [tuple(complex(x) for x in knot) for knot in self.knots]
        if len(self.knots) < 2:
            raise ShapeMismatchError("A path needs at least two knots")
        for knot in self.knots:
            if len(knot) != len(self.coordinates):
                raise ShapeMismatchError("Knot length differs from the coordinate count",
                                         {"knot": len(knot), "coordinates": len(self.coordinates)})

    @classmethod
    def straight(cls, coordinates: Sequence[TimeCoordinate], start: Sequence[Any],
                 end: Sequence[Any]) -> "FlowPath":
        return cls(list(coordinates), [tuple(start), tuple(end)])

    @classmethod
    def staircase(cls, coordinates: Sequence[TimeCoordinate], start: Sequence[Any],
                  end: Sequence[Any]) -> "FlowPath":
        """Move one coordinate at a time, in the given order"""
        knots = [tuple(start)]
        current = list(start)
        for i, value in enumerate(end):
            current[i] = value
            knots.append(tuple(current))
        return cls(list(coordinates), knots)

    @property
    def segments(self) -> int:
        return len(self.knots) - 1

    def segment_of(self, s: float) -> int:
        if not 0 <= s <= self.segments:
            raise IndexRangeError("Path parameter outside the path", {"s": s, "segments": self.segments})
        return min(int(math.floor(s)), self.segments - 1)

    def delta(self, segment: int) -> Tuple[complex, ...]:
        a, b = self.knots[segment], self.knots[segment + 1]
        return tuple(y - x for x, y in zip(a, b))

    def point(self, s: float) -> Tuple[complex, ...]:
        k = self.segment_of(s)
        return tuple(x + (s - k) * d for x, d in zip(self.knots[k], self.delta(k)))

    def updates(self, s: float) -> Dict[TimeCoordinate, complex]:
        return dict(zip(self.coordinates, self.point(s)))

    def validate(self, spec: ConnectionSpec, margin: float) -> None:
        """Reject paths through t_1 = 0 or through colliding positions"""
        index = {c: i for i, c in enumerate(self.coordinates)}

        def track(coord: TimeCoordinate, k: int) -> Tuple[complex, complex]:
            if coord in index:
                i = index[coord]
                return self.knots[k][i], self.knots[k + 1][i]
            value = complex(spec.time_value(coord))
            return value, value

        for k in range(self.segments):
            for i, pole in enumerate(spec.poles):
                if pole.rank >= 1:
                    a, b = track(TimeCoordinate("t", i, 1), k)
                    if _segment_min_abs(a, b) <= margin:
                        raise SingularityError("Path comes too close to t_1 = 0",
                                               {"pole": i, "segment": k, "margin": margin})
            finite = spec.finite_indices
            for x, i in enumerate(finite):
                for j in finite[x + 1:]:
                    ai, bi = track(TimeCoordinate("u", i), k)
                    aj, bj = track(TimeCoordinate("u", j), k)
                    if _segment_min_abs(ai - aj, bi - bj) <= margin:
                        raise SingularityError("Path runs through a pole collision",
                                               {"poles": (i, j), "segment": k})


# ----------------------------------------------------------------------
# lifted coordinates


class LiftedLayout:
    """Flat complex state vector: lifted slots of every dynamic pole, then log τ"""

    def __init__(self, spec: ConnectionSpec):
        self.m = spec.m
        self.ranks = {i: p.rank for i, p in enumerate(spec.poles)}
        self.dynamic = [i for i, p in enumerate(spec.poles) if not p.at_infinity or p.rank >= 1]
        self.sign = {i: -1 if spec.poles[i].at_infinity else 1 for i in self.dynamic}
        self.frozen: Dict[Label, np.ndarray] = {
            (i, k): to_numeric(c)
            for i, p in enumerate(spec.poles) if i not in self.dynamic
            for k, c in enumerate(p.coefficients)
        }
        self.offsets: Dict[int, int] = {}
        cursor = 0
        for i in self.dynamic:
            self.offsets[i] = cursor
            cursor += 2 * (self.ranks[i] + 1) * self.m * self.m
        self.tau_index = cursor
        self.size = cursor + 1

    def unpack(self, y: np.ndarray) -> Tuple[Dict[int, List[np.ndarray]], Dict[int, List[np.ndarray]]]:
        qs: Dict[int, List[np.ndarray]] = {}
        ps: Dict[int, List[np.ndarray]] = {}
        block = self.m * self.m
        for i in self.dynamic:
            n = self.ranks[i] + 1
            start = self.offsets[i]
            chunk = np.asarray(y[start:start + 2 * n * block]).reshape(2 * n, self.m, self.m)
            qs[i] = list(chunk[:n])
            ps[i] = list(chunk[n:])
        return qs, ps

    def pack(self, qs: Mapping[int, Sequence[np.ndarray]], ps: Mapping[int, Sequence[np.ndarray]],
             log_tau: complex = 0j) -> np.ndarray:
        y = np.zeros(self.size, dtype=complex)
        block = self.m * self.m
        for i in self.dynamic:
            n = self.ranks[i] + 1
            start = self.offsets[i]
            stacked = np.concatenate([np.asarray(x, dtype=complex).reshape(-1) for x in list(qs[i]) + list(ps[i])])
            y[start:start + 2 * n * block] = stacked
        y[self.tau_index] = log_tau
        return y

    def bare_values(self, qs, ps) -> Dict[Label, np.ndarray]:
        values = dict(self.frozen)
        for i in self.dynamic:
            r = self.ranks[i]
            for k in range(r + 1):
                total = sum(qs[i][j] @ ps[i][j + k] for j in range(r - k + 1))
                values[(i, k)] = self.sign[i] * total
        return values

    def symbolic_values(self, spec: ConnectionSpec) -> Dict[Label, np.ndarray]:
        """A_k as matrices of phase polynomials in the generators Q/P_{slot,ab}

        Slots are numbered pole by pole over the dynamic poles; frozen poles
        keep their exact coefficients.
        """
        values: Dict[Label, np.ndarray] = {
            (i, k): c for i, p in enumerate(spec.poles) if i not in self.dynamic
            for k, c in enumerate(p.coefficients)
        }
        offset = 0
        for i in self.dynamic:
            r = self.ranks[i]
            q, p = symbolic_slots(r, self.m, offset)
            element = lifted_A(q, p)
            for k in range(r + 1):
                values[(i, k)] = element[k] * self.sign[i]
            offset += r + 1
        return values

    def moments(self, qs, ps) -> Dict[int, List[np.ndarray]]:
        """Λ_k = Σ_j P_{j+k} Q_j per dynamic pole"""
        return {i: [to_numeric(x) for x in lifted_moment(qs[i], ps[i]).coefficients] for i in self.dynamic}

    def trivial_state(self, spec: ConnectionSpec) -> np.ndarray:
        """Q_0 = 1, P_k = ±A_k"""
        qs, ps = {}, {}
        for i in self.dynamic:
            pole = spec.poles[i]
            eye = np.eye(self.m, dtype=complex)
            qs[i] = [eye] + [np.zeros((self.m, self.m), dtype=complex) for _ in range(pole.rank)]
            ps[i] = [self.sign[i] * to_numeric(c) for c in pole.coefficients]
        return self.pack(qs, ps)


def lifted_vector_field(layout: LiftedLayout, h: QuadraticHamiltonian, qs, ps):
    """(dQ, dP) of the canonical flow of a quadratic Hamiltonian"""
    values = layout.bare_values(qs, ps)
    grads = h.gradient(values)
    zero = np.zeros((layout.m, layout.m), dtype=complex)
    dq: Dict[int, List[np.ndarray]] = {}
    dp: Dict[int, List[np.ndarray]] = {}
    for i in layout.dynamic:
        r = layout.ranks[i]
        g = [layout.sign[i] * np.asarray(grads.get((i, k), zero), dtype=complex) for k in range(r + 1)]
        dq[i] = [sum((g[p] @ qs[i][s - p] for p in range(s + 1)), zero) for s in range(r + 1)]
        dp[i] = [-sum((ps[i][j + k] @ g[k] for k in range(r - j + 1)), zero) for j in range(r + 1)]
    return dq, dp


def coefficient_velocity(layout: LiftedLayout, qs, ps, dq, dp) -> Dict[Label, np.ndarray]:
    """dA_k = Σ_j (dQ_j P_{j+k} + Q_j dP_{j+k}), with the sign of the chart"""
    out: Dict[Label, np.ndarray] = {}
    for i in layout.dynamic:
        r = layout.ranks[i]
        for k in range(r + 1):
            total = sum(dq[i][j] @ ps[i][j + k] + qs[i][j] @ dp[i][j + k] for j in range(r - k + 1))
            out[(i, k)] = layout.sign[i] * total
    return out


def hamiltonian_vector_field(h: PhasePolynomial, assignment: Mapping[Generator, Any]) -> Dict[Generator, Any]:
    """dQ_{j,ab} = ∂H/∂P_{j,ba}, dP_{j,ab} = -∂H/∂Q_{j,ba} at the given point"""
    missing = h.generators() - set(assignment)
    if missing:
        raise MissingGeneratorError("Hamiltonian depends on generators without values",
                                    {"missing": sorted(str(g) for g in missing)})
    out: Dict[Generator, Any] = {}
    for g in assignment:
        if g.kind not in ("P", "Q"):
            continue
        derivative = h.diff(partner(g))
        value = derivative.evaluate(assignment) if not derivative.is_zero() else 0
        out[g] = value if g.kind == "Q" else -value
    return out


def _complex_hamiltonians(spec: ConnectionSpec) -> Dict[TimeCoordinate, QuadraticHamiltonian]:
    return {c: h.map_coefficients(complex) for c, h in hamiltonians(spec).items()}


def _combined(hs: Mapping[TimeCoordinate, QuadraticHamiltonian],
              rates: Mapping[TimeCoordinate, complex]) -> QuadraticHamiltonian:
    total = QuadraticHamiltonian()
    for coord, rate in rates.items():
        if coord not in hs:
            raise IndexRangeError("No Hamiltonian for this time coordinate", {"coordinate": str(coord)})
        total = total + hs[coord] * rate
    return total


def multi_time_field(spec: ConnectionSpec, layout: LiftedLayout,
                     times: Mapping[TimeCoordinate, complex],
                     rates: Mapping[TimeCoordinate, complex], y: np.ndarray) -> np.ndarray:
    """dZ/ds = Σ_a rate_a X_{H_a}(Z) at the given times, with d log τ/ds appended"""
    current = spec.with_times(times)
    hs = _complex_hamiltonians(current)
    rates = {c: r for c, r in rates.items() if r != 0}
    qs, ps = layout.unpack(y)
    dq, dp = lifted_vector_field(layout, _combined(hs, rates), qs, ps)
    values = layout.bare_values(qs, ps)
    dtau = sum((rate * complex(hs[c].evaluate(values)) for c, rate in rates.items()), 0j)
    return layout.pack(dq, dp, dtau)


# ----------------------------------------------------------------------
# trajectories


@dataclass
class TauAccumulator:
    """log τ sampled along the path"""

    s: List[float] = field(default_factory=list)
    log_tau: List[complex] = field(default_factory=list)

    def record(self, s: float, value: complex) -> None:
        self.s.append(float(s))
        self.log_tau.append(complex(value))

    @property
    def value(self) -> complex:
        return self.log_tau[-1] if self.log_tau else 0j


@dataclass
class Trajectory:
    spec: ConnectionSpec
    layout: LiftedLayout
    path: FlowPath
    s: np.ndarray
    y: np.ndarray
    solutions: List[Any]
    tau: TauAccumulator

    def dense(self, s: float) -> np.ndarray:
        return self.solutions[self.path.segment_of(s)](s)

    def spec_at(self, s: float, y: Optional[np.ndarray] = None) -> ConnectionSpec:
        y = self.dense(s) if y is None else y
        qs, ps = self.layout.unpack(y)
        return self.spec.with_times(self.path.updates(s)).with_coefficients(self.layout.bare_values(qs, ps))

    def hamiltonian_values(self, s: float) -> Dict[TimeCoordinate, complex]:
        y = self.dense(s)
        qs, ps = self.layout.unpack(y)
        values = self.layout.bare_values(qs, ps)
        hs = _complex_hamiltonians(self.spec.with_times(self.path.updates(s)))
        return {c: complex(h.evaluate(values)) for c, h in hs.items()}

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]


@traced
def integrate_flow(spec: ConnectionSpec, path: FlowPath, config: Optional[IntegratorConfig] = None,
                   initial: Optional[np.ndarray] = None) -> Trajectory:
    """Integrate the lifted flow along ``path``, starting from the trivial lift of ``spec``"""
    config = config or IntegratorConfig()
    path.validate(spec, config.t1_margin)
    spec = spec.with_times(path.updates(0))
    layout = LiftedLayout(spec)
    y = layout.trivial_state(spec) if initial is None else np.asarray(initial, dtype=complex)
    if y.shape != (layout.size,):
        raise ShapeMismatchError("Initial state has the wrong size", {"expected": layout.size, "got": y.shape})
    samples_s: List[np.ndarray] = []
    samples_y: List[np.ndarray] = []
    solutions = []
    for k in range(path.segments):
        start = path.knots[k]
        delta = path.delta(k)
        rates = dict(zip(path.coordinates, delta))

        def rhs(s, state, start=start, delta=delta, k=k, rates=rates):
            times = {c: x + (s - k) * d for c, x, d in zip(path.coordinates, start, delta)}
            return multi_time_field(spec, layout, times, rates, state)

        grid = np.linspace(k, k + 1, config.samples + 1)
        try:
            sol = solve_ivp(rhs, (k, k + 1), y, method=config.method, rtol=config.rtol, atol=config.atol,
                            max_step=config.max_step, t_eval=grid, dense_output=True)
        except (PoleEvaluationError, SingularityError, ZeroDivisionError) as e:
            raise IntegrationError(f"Vector field failed on segment {k}: {e}", {"segment": k}) from e
        if not sol.success:
            where = float(sol.t[-1]) if sol.t.size else float(k)
            raise IntegrationError(f"Integrator stopped: {sol.message}",
                                   {"segment": k, "s": where, "times": path.point(where)})
        keep = slice(1, None) if k else slice(None)
        samples_s.append(sol.t[keep])
        samples_y.append(sol.y.T[keep])
        solutions.append(sol.sol)
        y = sol.y[:, -1]
        logger.info("flow_segment_done", segment=k, evaluations=int(sol.nfev))
    s = np.concatenate(samples_s)
    ys = np.concatenate(samples_y)
    tau = TauAccumulator()
    for value_s, state in zip(s, ys):
        tau.record(value_s, state[layout.tau_index])
    return Trajectory(spec, layout, path, s, ys, solutions, tau)


# ----------------------------------------------------------------------
# Ω and zero curvature


@dataclass
class OmegaForm:
    """Finite center: Σ_p W_p (λ - u)^{-p}; infinity: Σ_p W_p λ^p"""

    center: Any
    terms: Dict[int, np.ndarray]
    m: int

    @property
    def at_infinity(self) -> bool:
        return isinstance(self.center, str) and self.center == INF

    def __call__(self, lam) -> np.ndarray:
        total = np.zeros((self.m, self.m), dtype=complex)
        for p, w in self.terms.items():
            total = total + w * self._power(lam, p)
        return total

    def d_lambda(self, lam) -> np.ndarray:
        total = np.zeros((self.m, self.m), dtype=complex)
        for p, w in self.terms.items():
            if self.at_infinity:
                if p:
                    total = total + w * p * complex(lam) ** (p - 1)
            else:
                total = total - w * p * self._power(lam, p + 1)
        return total

    def _power(self, lam, p):
        if self.at_infinity:
            return complex(lam) ** p
        offset = complex(lam) - complex(self.center)
        if offset == 0:
            raise PoleEvaluationError("Ω evaluated at its pole", {"center": self.center})
        return offset ** (-p)


def _time_derivative_weights(times: TimeVector, k: int) -> Dict[Tuple[int, int], complex]:
    """∂𝓜_{p,j}/∂t_k at the given times"""
    r = times.r
    symbolic = build_M(r, TimeVector.symbolic(r))
    assignment = {t_gen(i): times.t(i) for i in range(1, r + 1)}
    out = {}
    for p in range(1, r + 1):
        for j in range(p, r + 1):
            value = PhasePolynomial.coerce(symbolic.entry(p, j)).diff(t_gen(k))
            if not value.is_zero():
                out[(p, j)] = complex(value.evaluate(assignment))
    return out


def omega_form(spec: ConnectionSpec, direction: TimeCoordinate) -> OmegaForm:
    """Ω with ∂_λ Ω equal to the explicit time derivative of A; zero constant term"""
    pole = spec.poles[direction.pole]
    center = pole.position
    terms: Dict[int, np.ndarray] = {}
    if direction.kind == "u":
        if pole.at_infinity:
            raise IndexRangeError("Infinity has no position time")
        for k, b in enumerate(pole.effective()):
            terms[k + 1] = -to_numeric(b)
        return OmegaForm(center, terms, spec.m)
    if not 1 <= direction.k <= pole.rank:
        raise IndexRangeError("Irregular time out of range", {"k": direction.k, "rank": pole.rank})
    weights = _time_derivative_weights(pole.times, direction.k)
    bare = [to_numeric(c) for c in pole.coefficients]
    for (p, j), w in weights.items():
        db = bare[j] * w
        sign = 1 if pole.at_infinity else -1
        terms[p] = terms.get(p, 0) + sign * db / p
    return OmegaForm(center, terms, spec.m)


def _numeric_connection(spec: ConnectionSpec, lam) -> np.ndarray:
    return to_numeric(assemble(spec, lam))


def zero_curvature_residual(trajectory: Trajectory, s: float, direction: TimeCoordinate,
                            lam_samples: Sequence[complex], h: float = 1e-4,
                            perturbation: float = 0.0) -> float:
    """max over λ of |∂_a A - ∂_λ Ω + [A, Ω]| with ∂_a A by central differences

    The path segment around ``s`` must move only ``direction``.
    """
    path = trajectory.path
    k = path.segment_of(s)
    delta = dict(zip(path.coordinates, path.delta(k)))
    rate = delta.get(direction, 0)
    if rate == 0 or any(d != 0 for c, d in delta.items() if c != direction):
        raise IndexRangeError("Segment must move exactly the chosen direction", {"direction": str(direction)})
    lo, hi = max(s - h, k), min(s + h, k + 1)
    before, after = trajectory.spec_at(lo), trajectory.spec_at(hi)
    center = trajectory.spec_at(s)
    if perturbation:
        i = trajectory.layout.dynamic[0]
        bump = np.zeros((center.m, center.m), dtype=complex)
        bump[0, -1] = perturbation
        values = center.coefficient_values()
        values[(i, 0)] = to_numeric(values[(i, 0)]) + bump
        center = center.with_coefficients(values)
    omega = omega_form(center, direction)
    worst = 0.0
    for lam in lam_samples:
        d_a = (_numeric_connection(after, lam) - _numeric_connection(before, lam)) / ((hi - lo) * rate)
        a = _numeric_connection(center, lam)
        w = omega(lam)
        residual = d_a - omega.d_lambda(lam) + a @ w - w @ a
        worst = max(worst, float(np.max(np.abs(residual))))
    return worst


# ----------------------------------------------------------------------
# diagnostics


def _p_dot_q(layout: LiftedLayout, y: np.ndarray, dy: np.ndarray) -> complex:
    qs, ps = layout.unpack(y)
    dqs, _ = layout.unpack(dy)
    return sum((complex(np.trace(ps[i][j] @ dqs[i][j])) for i in layout.dynamic
                for j in range(layout.ranks[i] + 1)), 0j)


def malgrange_action_check(trajectory: Trajectory, segment: int = 0, points: int = 8,
                           h: float = 1e-5) -> float:
    """max |Σ_j Tr(P_j dQ_j/ds) - 2 d log τ/ds| over interior points of one segment"""
    layout = trajectory.layout
    worst = 0.0
    for s in np.linspace(segment + 0.1, segment + 0.9, points):
        y = trajectory.dense(s)
        dy = (trajectory.dense(s + h) - trajectory.dense(s - h)) / (2 * h)
        defect = abs(_p_dot_q(layout, y, dy) - 2 * dy[layout.tau_index])
        worst = max(worst, defect)
    return worst


@dataclass
class PolynomialFlow:
    """Autonomous canonical flow of a PhasePolynomial Hamiltonian"""

    hamiltonian: PhasePolynomial
    generators: List[Generator]
    solution: Any

    def assignment(self, s: float) -> Dict[Generator, complex]:
        return dict(zip(self.generators, self.solution(s)))


def integrate_polynomial_flow(h: PhasePolynomial, initial: Mapping[Generator, Any], span: Tuple[float, float],
                              config: Optional[IntegratorConfig] = None) -> PolynomialFlow:
    config = config or IntegratorConfig()
    generators = sorted(initial)
    y0 = np.array([complex(initial[g]) for g in generators], dtype=complex)

    def rhs(_s, y):
        field_values = hamiltonian_vector_field(h, dict(zip(generators, y)))
        return np.array([field_values.get(g, 0) for g in generators], dtype=complex)

    sol = solve_ivp(rhs, span, y0, method=config.method, rtol=config.rtol, atol=config.atol,
                    dense_output=True)
    if not sol.success:
        raise IntegrationError(f"Integrator stopped: {sol.message}", {"s": float(sol.t[-1])})
    return PolynomialFlow(h, generators, sol.sol)


def polynomial_action_defect(flow: PolynomialFlow, s: float, h: float = 1e-5) -> float:
    """|Σ P_{ab} dQ_{ba}/ds - 2H| at s"""
    here = flow.assignment(s)
    ahead, behind = flow.assignment(s + h), flow.assignment(s - h)
    total = 0j
    for g in flow.generators:
        if g.kind != "P":
            continue
        q = partner(g)
        if q in here:
            total += here[g] * (ahead[q] - behind[q]) / (2 * h)
    return abs(total - 2 * complex(flow.hamiltonian.evaluate(here)))


def conservation_drift(trajectory: Trajectory) -> Dict[str, float]:
    """Max drift of the moments Λ, the Casimirs and the residue spectra along the trajectory"""
    layout = trajectory.layout
    first_q, first_p = layout.unpack(trajectory.y[0])
    moments0 = layout.moments(first_q, first_p)
    values0 = layout.bare_values(first_q, first_p)
    drift = {"moment": 0.0, "casimir": 0.0, "eigenvalue": 0.0}

    def casimirs(values):
        out = {}
        for i in layout.dynamic:
            element = TakiffCoElement([values[(i, k)] for k in range(layout.ranks[i] + 1)])
            for k in range(1, element.r + 2):
                out[(i, k)] = complex(casimir(element, k))
        return out

    def spectra(values):
        return {i: np.sort_complex(np.linalg.eigvals(values[(i, 0)]))
                for i in layout.dynamic if layout.ranks[i] == 0}

    cas0, spec0 = casimirs(values0), spectra(values0)
    for y in trajectory.y[1:]:
        qs, ps = layout.unpack(y)
        values = layout.bare_values(qs, ps)
        moments = layout.moments(qs, ps)
        for i in layout.dynamic:
            for a, b in zip(moments[i], moments0[i]):
                drift["moment"] = max(drift["moment"], float(np.max(np.abs(a - b))))
        for key, value in casimirs(values).items():
            drift["casimir"] = max(drift["casimir"], abs(value - cas0[key]))
        for i, eig in spectra(values).items():
            drift["eigenvalue"] = max(drift["eigenvalue"], float(np.max(np.abs(eig - spec0[i]))))
    return drift


@traced
def hamiltonian_commutation(spec: ConnectionSpec) -> VerificationReport:
    """{H_a, H_b} = 0 as phase polynomials in the lifted coordinates, at the times of ``spec``"""
    report = VerificationReport("hamiltonian commutation")
    values = LiftedLayout(spec).symbolic_values(spec)
    polys = {c: PhasePolynomial.coerce(h.evaluate(values)) for c, h in hamiltonians(spec).items()}
    coords = sorted(polys, key=str)
    for x, a in enumerate(coords):
        for b in coords[x + 1:]:
            with report.timed(f"{{H_{a}, H_{b}}}") as outcome:
                bracket = canonical_bracket(polys[a], polys[b])
                outcome["passed"] = bracket.is_zero()
                outcome["defect"] = float(len(bracket))
    return report


def cross_derivative_defect(spec: ConnectionSpec, y: np.ndarray, times: Mapping[TimeCoordinate, complex],
                            a: TimeCoordinate, b: TimeCoordinate, h: float = 1e-6) -> float:
    """|d_b H_a - d_a H_b| with total derivatives along the flows"""
    layout = LiftedLayout(spec)

    def value(coord, state, at):
        current = spec.with_times(at)
        qs, ps = layout.unpack(state)
        return complex(_complex_hamiltonians(current)[coord].evaluate(layout.bare_values(qs, ps)))

    def along(flow_coord, measured):
        velocity = multi_time_field(spec, layout, times, {flow_coord: 1}, y)
        shifted = []
        for sign in (1, -1):
            at = dict(times)
            at[flow_coord] = at[flow_coord] + sign * h
            shifted.append(value(measured, y + sign * h * velocity, at))
        return (shifted[0] - shifted[1]) / (2 * h)

    return abs(along(b, a) - along(a, b))


def tau_closedness(spec: ConnectionSpec, coordinates: Sequence[TimeCoordinate], start: Sequence[Any],
                   end: Sequence[Any], config: Optional[IntegratorConfig] = None) -> Dict[str, float]:
    """Compare log τ and the end point on the diagonal and on the staircase path"""
    diagonal = integrate_flow(spec, FlowPath.straight(coordinates, start, end), config)
    stairs = integrate_flow(spec, FlowPath.staircase(coordinates, start, end), config)
    layout = diagonal.layout
    end_d = layout.bare_values(*layout.unpack(diagonal.final))
    end_s = layout.bare_values(*layout.unpack(stairs.final))
    state = max(float(np.max(np.abs(end_d[key] - end_s[key]))) for key in end_d)
    return {"log_tau": abs(diagonal.tau.value - stairs.tau.value), "state": state}


# ----------------------------------------------------------------------
# CSV output


def trajectory_header(trajectory: Trajectory) -> List[str]:
    layout = trajectory.layout
    columns = ["s"]
    for coord in trajectory.path.coordinates:
        columns += [f"{coord}.re", f"{coord}.im"]
    for i in layout.dynamic:
        for kind in ("Q", "P"):
            for j in range(layout.ranks[i] + 1):
                for a in range(layout.m):
                    for b in range(layout.m):
                        name = f"{kind}{i}.{j}_{a + 1}{b + 1}"
                        columns += [f"{name}.re", f"{name}.im"]
    hs = sorted(hamiltonians(trajectory.spec), key=str)
    for coord in hs:
        columns += [f"H_{coord}.re", f"H_{coord}.im"]
    columns += ["log_tau.re", "log_tau.im", "casimir_drift"]
    return columns


def trajectory_rows(trajectory: Trajectory) -> Iterator[List[float]]:
    layout = trajectory.layout
    first = layout.bare_values(*layout.unpack(trajectory.y[0]))

    def casimir_values(values):
        out = []
        for i in layout.dynamic:
            element = TakiffCoElement([values[(i, k)] for k in range(layout.ranks[i] + 1)])
            out += [complex(casimir(element, k)) for k in range(1, element.r + 2)]
        return out

    reference = casimir_values(first)
    for s, y in zip(trajectory.s, trajectory.y):
        row: List[float] = [float(s)]
        for value in trajectory.path.point(float(s)):
            row += [value.real, value.imag]
        qs, ps = layout.unpack(y)
        for i in layout.dynamic:
            for slots in (qs[i], ps[i]):
                for matrix in slots:
                    for value in matrix.reshape(-1):
                        row += [value.real, value.imag]
        values = layout.bare_values(qs, ps)
        hs = _complex_hamiltonians(trajectory.spec.with_times(trajectory.path.updates(float(s))))
        for coord in sorted(hs, key=str):
            value = complex(hs[coord].evaluate(values))
            row += [value.real, value.imag]
        tau = y[layout.tau_index]
        drift = max((abs(x - y0) for x, y0 in zip(casimir_values(values), reference)), default=0.0)
        row += [tau.real, tau.imag, drift]
        yield row


def write_trajectory_csv(trajectory: Trajectory, stream: IO[str]) -> int:
    writer = csv.writer(stream)
    writer.writerow(trajectory_header(trajectory))
    count = 0
    for row in trajectory_rows(trajectory):
        writer.writerow(row)
        count += 1
    logger.info("trajectory_written", rows=count)
    return count
