"""
Painlevé Systems
================

The non-ramified Painlevé equations VI, V, IV, III and II as isomonodromic
systems of sl2 connections:

* ``build_painleve_spec`` assembles the connection from the sl2 Darboux charts,
  so its Hamiltonian comes out of the generic ``connection.hamiltonians``.
* ``painleve_system`` carries the intermediate Hamiltonian in four (PVI: six)
  chart coordinates as a sympy expression, the torus-action integral, the
  canonical change to (I, φ, u, v), the reduced Hamiltonian at a fixed level
  of I and the final normal form (Gambier for V, Okamoto for IV, P34 for II).
* ``scalar_residual`` checks an integrated trajectory against the scalar
  equation of its kind with five-point stencils on the dense output.

Coordinates come in (position, momentum) pairs with ω = Σ d(momentum) ∧ d(position)
and position' = ∂H/∂momentum. The degree-0 charts of PVI and PV are Poisson
maps for the opposite orientation, which ``PainleveSystem.orientation`` records.
"""

import cmath
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy
from scipy.integrate import solve_ivp

from .algebra_core import zeros
from .connection import INF, ConnectionSpec, PoleData, TimeCoordinate, hamiltonians
from .errors import DomainError, IndexRangeError, IntegrationError, SingularityError
from .isoflow import IntegratorConfig
from .logging_utils import get_logger, traced
from .polynomial import Generator, PhasePolynomial, sympy_scalar
from .sl2_charts import chart_coordinates, pair_trace, sigma3, sl2_takiff_parametrization
from .verification import VerificationReport

logger = get_logger(__name__)


class PainleveKind(str, Enum):
    VI = "VI"
    V = "V"
    IV = "IV"
    III = "III"
    II = "II"

    @classmethod
    def parse(cls, raw: Any) -> "PainleveKind":
        if isinstance(raw, cls):
            return raw
        text = str(raw).strip().upper()
        if text.startswith("P") and text[1:] in cls.__members__:
            text = text[1:]
        try:
            return cls(text)
        except ValueError:
            raise DomainError(f"Unknown Painlevé kind {raw!r}", {"known": [k.value for k in cls]}) from None


PARAMETERS: Dict[PainleveKind, Tuple[str, ...]] = {
    PainleveKind.VI: ("theta0", "theta1", "thetat"),
    PainleveKind.V: ("theta0", "thetat", "k", "a"),
    PainleveKind.IV: ("thetat", "theta2", "theta3", "I0"),
    PainleveKind.III: ("theta1", "theta2", "theta3", "I0"),
    PainleveKind.II: ("theta2", "theta3", "theta4", "I0"),
}

# leading terms that get diagonalized
TOP_PARAMETERS: Dict[PainleveKind, Tuple[str, ...]] = {
    PainleveKind.VI: (),
    PainleveKind.V: ("k",),
    PainleveKind.IV: ("theta3",),
    PainleveKind.III: ("theta2", "theta3"),
    PainleveKind.II: ("theta4",),
}

# chart coordinates as (position, momentum)
PAIRS: Dict[PainleveKind, Tuple[Tuple[str, str], ...]] = {
    PainleveKind.VI: (("q0", "p0"), ("q1", "p1"), ("qt", "pt")),
    PainleveKind.V: (("q0", "p0"), ("qt", "pt")),
    PainleveKind.IV: (("q3", "p3"), ("qt", "pt")),
    PainleveKind.III: (("q1", "p1"), ("q2", "p2")),
    PainleveKind.II: (("q3", "p3"), ("q4", "p4")),
}

# intermediate H = factor · (connection Hamiltonian) + coordinate-free terms
CONNECTION_FACTOR = {
    PainleveKind.VI: 1,
    PainleveKind.V: 2,
    PainleveKind.IV: 1,
    PainleveKind.III: 1,
    PainleveKind.II: -1,
}

# coefficients of dI∧dφ and dv∧du in the pullback of Σ dp∧dq
REDUCTION_PULLBACK = {
    PainleveKind.V: (1, -1),
    PainleveKind.IV: (1, 1),
    PainleveKind.III: (1, 1),
    PainleveKind.II: (1, 1),
}

DEFAULT_STENCIL_STEP = 1e-3


@dataclass(frozen=True)
class PainleveParameters:
    kind: PainleveKind
    values: Mapping[str, Any]

    def __post_init__(self):
        kind = PainleveKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "values", dict(self.values))
        expected = PARAMETERS[kind]
        missing = [name for name in expected if name not in self.values]
        unknown = [name for name in self.values if name not in expected]
        if missing or unknown:
            raise DomainError(f"Parameters do not match P{kind.value}",
                              {"missing": missing, "unknown": unknown, "expected": list(expected)})
        for name in TOP_PARAMETERS[kind]:
            if self.values[name] == 0:
                raise SingularityError(f"P{kind.value} needs {name} ≠ 0 to diagonalize the leading term",
                                       {"parameter": name})

    def __getitem__(self, name: str):
        return self.values[name]

    def symbolic(self) -> Dict[str, Any]:
        return {name: value if isinstance(value, sympy.Basic) else sympy_scalar(value)
                for name, value in self.values.items()}


@dataclass
class ReducedState:
    t: Any
    position: complex
    momentum: complex
    action: Optional[complex] = None


@dataclass
class HamiltonianForm:
    """A one-degree-of-freedom Hamiltonian: position' = H_momentum, momentum' = -H_position"""

    name: str
    position: sympy.Symbol
    momentum: sympy.Symbol
    hamiltonian: sympy.Expr

    def field(self, t: sympy.Symbol) -> Callable:
        rhs = [sympy.diff(self.hamiltonian, self.momentum), -sympy.diff(self.hamiltonian, self.position)]
        return sympy.lambdify((t, self.position, self.momentum), rhs, modules="numpy")


@dataclass
class CanonicalChange:
    """old = forward(new), new = inverse(old)"""

    old: Tuple[sympy.Symbol, ...]
    new: Tuple[sympy.Symbol, ...]
    forward: Dict[sympy.Symbol, sympy.Expr]
    inverse: Dict[sympy.Symbol, sympy.Expr]

    def pullback(self, pairs: Sequence[Tuple[sympy.Symbol, sympy.Symbol]]) -> sympy.Matrix:
        return symplectic_pullback(pairs, self.forward, self.new)


@dataclass
class PainleveSystem:
    params: PainleveParameters
    t: sympy.Symbol
    pairs: List[Tuple[sympy.Symbol, sympy.Symbol]]
    hamiltonian: sympy.Expr
    orientation: int = 1
    torus_integral: Optional[sympy.Expr] = None
    action: Optional[sympy.Symbol] = None
    reduction: Optional[CanonicalChange] = None
    reduced: Optional[HamiltonianForm] = None
    target_change: Optional[CanonicalChange] = None
    target: Optional[HamiltonianForm] = None
    _compiled: Dict[str, Callable] = field(default_factory=dict, repr=False)

    @property
    def kind(self) -> PainleveKind:
        return self.params.kind

    @property
    def coordinates(self) -> List[sympy.Symbol]:
        return [s for pair in self.pairs for s in pair]

    @property
    def action_level(self):
        """Fixed value of the torus integral in the reduced system"""
        return self.params["a"] if self.kind == PainleveKind.V else self.params["I0"]

    def intermediate_field(self) -> Callable:
        """(t, y) ↦ dy/dt for y = (positions..., momenta...)"""
        if "intermediate" not in self._compiled:
            positions = [q for q, _ in self.pairs]
            momenta = [p for _, p in self.pairs]
            rhs = [self.orientation * sympy.diff(self.hamiltonian, p) for p in momenta] + \
                  [-self.orientation * sympy.diff(self.hamiltonian, q) for q in positions]
            self._compiled["intermediate"] = sympy.lambdify((self.t, *positions, *momenta), rhs, modules="numpy")
        compiled = self._compiled["intermediate"]
        return lambda t, y: np.asarray(compiled(t, *y), dtype=complex)

    def compiled(self, key: str, build: Callable[[], Callable]) -> Callable:
        if key not in self._compiled:
            self._compiled[key] = build()
        return self._compiled[key]


# ----------------------------------------------------------------------
# connections


def _single_generator(poly: PhasePolynomial) -> Generator:
    (g,) = poly.generators()
    return g


def _chart_with_names(degree: int, offset: int, names: Mapping[str, str]):
    """Chart coordinates where only the named ones are live; the rest are zero"""
    coords = chart_coordinates(degree, offset)
    symbols: Dict[Generator, sympy.Symbol] = {}
    for chart_name in list(coords):
        if chart_name in names:
            symbols[_single_generator(coords[chart_name])] = sympy.Symbol(names[chart_name])
        else:
            coords[chart_name] = 0
    return coords, symbols


def _painleve_connection(params: PainleveParameters, t) -> Tuple[ConnectionSpec, TimeCoordinate,
                                                                 Dict[Generator, sympy.Symbol]]:
    kind = params.kind
    symbols: Dict[Generator, sympy.Symbol] = {}

    def degree0(theta, slot, suffix):
        coords, names = _chart_with_names(0, slot, {"p": "p" + suffix, "q": "q" + suffix})
        symbols.update(names)
        return sl2_takiff_parametrization(0, (theta,), coords).coefficients[0]

    if kind == PainleveKind.VI:
        poles = [PoleData(0, [degree0(params["theta0"], 0, "0")], movable=False, name="0"),
                 PoleData(1, [degree0(params["theta1"], 1, "1")], movable=False, name="1"),
                 PoleData(t, [degree0(params["thetat"], 2, "t")], name="t")]
        return ConnectionSpec(2, poles), TimeCoordinate("u", 2), symbols
    if kind == PainleveKind.V:
        poles = [PoleData(0, [degree0(params["theta0"], 0, "0")], movable=False, name="0"),
                 PoleData(t, [degree0(params["thetat"], 1, "t")], name="t"),
                 PoleData(INF, [zeros(2), sigma3(params["k"])], movable=False, name="inf")]
        return ConnectionSpec(2, poles), TimeCoordinate("u", 1), symbols
    if kind == PainleveKind.IV:
        a_t = degree0(params["thetat"], 0, "t")
        coords, names = _chart_with_names(2, 1, {"p1": "p3", "q1": "q3"})
        symbols.update(names)
        chart = sl2_takiff_parametrization(2, (0, params["theta2"], params["theta3"]), coords)
        infinity = [zeros(2), -chart.diagonal[1], -chart.diagonal[2]]
        poles = [PoleData(t, [a_t], name="t"), PoleData(INF, infinity, times=(1, 0), movable=False, name="inf")]
        return ConnectionSpec(2, poles), TimeCoordinate("u", 0), symbols
    if kind == PainleveKind.III:
        coords, names = _chart_with_names(1, 0, {"p1": "p1", "q1": "q1", "p2": "p2", "q2": "q2"})
        symbols.update(names)
        chart = sl2_takiff_parametrization(1, (params["theta1"], params["theta2"]), coords)
        poles = [PoleData(0, chart.coefficients, times=(t,), movable=False, name="0"),
                 PoleData(INF, [zeros(2), sigma3(params["theta3"])], movable=False, name="inf")]
        return ConnectionSpec(2, poles), TimeCoordinate("t", 0, 1), symbols
    coords, names = _chart_with_names(3, 0, {n: n for n in ("p3", "q3", "p4", "q4")})
    symbols.update(names)
    chart = sl2_takiff_parametrization(3, (0, params["theta2"], params["theta3"], params["theta4"]), coords)
    infinity = [zeros(2)] + chart.diagonal[1:]
    poles = [PoleData(INF, infinity, times=(1, 0, t), movable=False, name="inf")]
    return ConnectionSpec(2, poles), TimeCoordinate("t", 0, 3), symbols


def build_painleve_spec(params: PainleveParameters, t) -> ConnectionSpec:
    """The connection of the given kind at time ``t`` with chart entries as PhasePolynomials"""
    spec, _, _ = _painleve_connection(params, t)
    return spec


def connection_hamiltonian(params: PainleveParameters, t) -> sympy.Expr:
    """The generic isomonodromic Hamiltonian of the Painlevé connection, in chart symbols"""
    spec, coordinate, symbols = _painleve_connection(params, t)
    value = hamiltonians(spec)[coordinate].evaluate(spec.coefficient_values())
    return PhasePolynomial.coerce(value).to_sympy(symbols)


# ----------------------------------------------------------------------
# sympy forms


def _intermediate(kind: PainleveKind, s: Mapping[str, sympy.Symbol], c: Mapping[str, Any], t):
    if kind == PainleveKind.VI:
        h0 = pair_trace(c["thetat"], s["pt"], s["qt"], c["theta0"], s["p0"], s["q0"])
        h1 = pair_trace(c["thetat"], s["pt"], s["qt"], c["theta1"], s["p1"], s["q1"])
        return h0 / t + h1 / (t - 1)
    if kind == PainleveKind.V:
        p0, q0, pt, qt = s["p0"], s["q0"], s["pt"], s["qt"]
        th0, tht, k = c["theta0"], c["thetat"], c["k"]
        return 4 * k * (pt * qt - tht) - 2 / t * (qt * q0 * (pt - p0) ** 2
                                                 - 2 * (q0 * tht - qt * th0) * (pt - p0) - 2 * th0 * tht)
    if kind == PainleveKind.IV:
        p3, q3, pt, qt = s["p3"], s["q3"], s["pt"], s["qt"]
        tht, th2, th3 = c["thetat"], c["theta2"], c["theta3"]
        return (pt * qt - 2 * tht) * pt * p3 - 2 * (pt * qt - tht) * (t * th3 + th2) + 2 * th3 * q3 * qt
    if kind == PainleveKind.III:
        p1, q1, p2, q2 = s["p1"], s["q1"], s["p2"], s["q2"]
        th1, th2, th3 = c["theta1"], c["theta2"], c["theta3"]
        return (p2 ** 2 * q2 ** 2 + 4 * t * th2 * th3 * q1 * q2 - 2 * th1 * p2 * q2 + p1 * p2) / t
    p3, q3, p4, q4 = s["p3"], s["q3"], s["p4"], s["q4"]
    th2, th3, th4 = c["theta2"], c["theta3"], c["theta4"]
    corner = 2 * th4 * q3 * q4 + th2
    upper = (th3 - 4 * th4) * q4 * q3 ** 2 - th4 * q3 + p4 - th4 * q3 ** 3 * q4 ** 2
    lower = (th3 - 4 * th4) * q4 ** 2 * q3 + (2 * th3 - th4) * q4 + p3 - th4 * q3 ** 2 * q4 ** 3
    return -corner ** 2 - 2 * t * corner * th4 - upper * lower


def _torus_integral(kind: PainleveKind, s: Mapping[str, sympy.Symbol]):
    if kind == PainleveKind.V:
        return s["q0"] * s["p0"] + s["qt"] * s["pt"]
    if kind == PainleveKind.IV:
        return s["q3"] * s["p3"] - s["qt"] * s["pt"]
    if kind == PainleveKind.III:
        return s["q1"] * s["p1"] - s["q2"] * s["p2"]
    if kind == PainleveKind.II:
        return s["p3"] * s["q3"] - s["p4"] * s["q4"]
    return None


def _reduction(kind: PainleveKind, s: Mapping[str, sympy.Symbol], i, phi, u, v) -> Optional[CanonicalChange]:
    e = sympy.exp(phi)
    if kind == PainleveKind.V:
        forward = {s["q0"]: e, s["qt"]: -e * u, s["p0"]: (i + u * v) / e, s["pt"]: v / e}
        inverse = {i: s["q0"] * s["p0"] + s["qt"] * s["pt"], phi: sympy.log(s["q0"]),
                   u: -s["qt"] / s["q0"], v: s["pt"] * s["q0"]}
    elif kind == PainleveKind.IV:
        forward = {s["q3"]: e, s["qt"]: u / e, s["p3"]: (i + u * v) / e, s["pt"]: e * v}
        inverse = {i: s["q3"] * s["p3"] - s["qt"] * s["pt"], phi: sympy.log(s["q3"]),
                   u: s["q3"] * s["qt"], v: s["pt"] / s["q3"]}
    elif kind == PainleveKind.III:
        forward = {s["q1"]: e, s["q2"]: -u / e, s["p1"]: (i + u * v) / e, s["p2"]: -e * v}
        inverse = {i: s["q1"] * s["p1"] - s["q2"] * s["p2"], phi: sympy.log(s["q1"]),
                   u: -s["q1"] * s["q2"], v: -s["p2"] / s["q1"]}
    elif kind == PainleveKind.II:
        forward = {s["q3"]: e, s["q4"]: u / e, s["p3"]: (i + u * v) / e, s["p4"]: e * v}
        inverse = {i: s["p3"] * s["q3"] - s["p4"] * s["q4"], phi: sympy.log(s["q3"]),
                   u: s["q3"] * s["q4"], v: s["p4"] / s["q3"]}
    else:
        return None
    return CanonicalChange(tuple(forward), (i, phi, v, u), forward, inverse)


def printed_reduced_hamiltonian(kind: PainleveKind, c: Mapping[str, Any], u, v, t):
    """Reduced Hamiltonians at the fixed torus level, as usually written"""
    if kind == PainleveKind.V:
        th0, tht, k, a = c["theta0"], c["thetat"], c["k"], c["a"]
        return (-4 * k * (u * v + tht) + 2 * u / t * (v - a - u * v + tht / u + th0) ** 2
                - 2 / t * (tht ** 2 / u + th0 ** 2 * u))
    if kind == PainleveKind.IV:
        tht, th2, th3, i0 = c["thetat"], c["theta2"], c["theta3"], c["I0"]
        return (u * v - 2 * tht) * v * (u * v + i0) - 2 * (u * v - tht) * (t * th3 + th2) + 2 * th3 * u
    if kind == PainleveKind.III:
        th1, th2, th3, i0 = c["theta1"], c["theta2"], c["theta3"], c["I0"]
        return (v ** 2 * u ** 2 - (v ** 2 + 2 * th1 * v + 4 * t * th2 * th3) * u - i0 * v) / t
    if kind == PainleveKind.II:
        th2, th3, th4, i0 = c["theta2"], c["theta3"], c["theta4"], c["I0"]
        return (-(2 * th4 * u + th2) ** 2 - 2 * t * (2 * th4 * u + th2) * th4
                - (v - th4 * u ** 2 + (th3 - 4 * th4) * u - th4)
                * (u * v + (th3 - 4 * th4) * u ** 2 + (2 * th3 - th4) * u + i0 - th4 * u ** 3))
    raise IndexRangeError("PVI has no torus reduction")


def okamoto_printed(c: Mapping[str, Any], x, y, t):
    """PIV normal form as usually printed; it agrees with the reduced system only at θ_3 = 1"""
    th2, th3, tht, i0 = c["theta2"], c["theta3"], c["thetat"], c["I0"]
    return (2 * y * x ** 2 + (th3 * y ** 2 + (-2 * t * th3 - 2 * th2) * y - 2 * i0) * x
            + (-i0 * th3 - 2 * th3 * tht) * y)


def p34_hamiltonian(c: Mapping[str, Any], q, p, t):
    th2, th3, th4, i0 = c["theta2"], c["theta3"], c["theta4"], c["I0"]
    return (p ** 2 / 2 - th4 ** 2 * q ** 4 + (2 * th4 ** 2 * t + 2 * th2 * th4 - th3 ** 2 / 2) * q ** 2
            - i0 ** 2 / (2 * q ** 2))


def _p34_shift(c: Mapping[str, Any], u):
    th3, th4, i0 = c["theta3"], c["theta4"], c["I0"]
    return (2 * th4 * u ** 3 - 2 * u ** 2 * th3 + 8 * th4 * u ** 2 - 2 * u * th3 + 2 * th4 * u - i0) / (2 * u)


def _normalize(expr):
    return sympy.cancel(sympy.powsimp(sympy.expand(expr), combine="exp"))


def intermediate_hamiltonian(params: PainleveParameters) -> Tuple[sympy.Expr, Dict[str, sympy.Symbol], sympy.Symbol]:
    """The intermediate Hamiltonian with its chart symbols (by name) and the time symbol"""
    t = sympy.Symbol("t")
    names = {name: sympy.Symbol(name) for pair in PAIRS[params.kind] for name in pair}
    return sympy.expand(_intermediate(params.kind, names, params.symbolic(), t)), names, t


@traced
def painleve_system(params: PainleveParameters) -> PainleveSystem:
    """Intermediate Hamiltonian, torus reduction and normal form of one kind"""
    kind = params.kind
    c = params.symbolic()
    hamiltonian, names, t = intermediate_hamiltonian(params)
    pairs = [(names[q], names[p]) for q, p in PAIRS[kind]]
    system = PainleveSystem(params, t, pairs, hamiltonian,
                            orientation=-1 if kind in (PainleveKind.VI, PainleveKind.V) else 1,
                            torus_integral=_torus_integral(kind, names))
    if kind == PainleveKind.VI:
        return system
    i, phi, u, v = sympy.symbols("I phi u v")
    change = _reduction(kind, names, i, phi, u, v)
    level = c["a"] if kind == PainleveKind.V else c["I0"]
    reduced = _normalize(system.hamiltonian.subs(change.forward).subs(i, level))
    system.action = i
    system.reduction = change
    system.reduced = HamiltonianForm(f"P{kind.value} reduced", u, v, reduced)
    if kind == PainleveKind.IV:
        x, y = sympy.symbols("x y")
        forward = {u: x * (x * y - c["I0"]), v: 1 / x}
        inverse = {x: 1 / v, y: v * (u * v + c["I0"])}
        system.target_change = CanonicalChange((u, v), (y, x), forward, inverse)
        system.target = HamiltonianForm("Okamoto", x, y, sympy.expand(_normalize(reduced.subs(forward))))
    elif kind == PainleveKind.II:
        q, p = sympy.symbols("q p")
        forward = {u: -q ** 2 / 2, v: -p / q + _p34_shift(c, -q ** 2 / 2)}
        inverse = {q: sympy.sqrt(-2 * u), p: -(v - _p34_shift(c, u)) * sympy.sqrt(-2 * u)}
        system.target_change = CanonicalChange((u, v), (p, q), forward, inverse)
        system.target = HamiltonianForm("P34", q, p, p34_hamiltonian(c, q, p, t))
    elif kind == PainleveKind.III:
        system.target = HamiltonianForm("P3 (D6)", u, v, printed_reduced_hamiltonian(kind, c, u, v, t))
    else:
        system.target = system.reduced
    logger.debug("painleve_system_built", kind=kind.value)
    return system


# ----------------------------------------------------------------------
# symbolic identities


def symplectic_pullback(pairs: Sequence[Tuple[sympy.Symbol, sympy.Symbol]],
                        forward: Mapping[sympy.Symbol, sympy.Expr],
                        new: Sequence[sympy.Symbol]) -> sympy.Matrix:
    """Ω with Σ dp∧dq = Σ_{a<b} Ω[a, b] dx_a∧dx_b in the new coordinates x"""
    n = len(new)
    omega = sympy.zeros(n, n)
    for q, p in pairs:
        dq = [sympy.diff(forward.get(q, q), x) for x in new]
        dp = [sympy.diff(forward.get(p, p), x) for x in new]
        for a in range(n):
            for b in range(n):
                omega[a, b] += dp[a] * dq[b] - dp[b] * dq[a]
    return omega.applyfunc(lambda entry: sympy.simplify(entry))


def poisson_bracket(f, g, pairs: Sequence[Tuple[sympy.Symbol, sympy.Symbol]]):
    """{f, g} = Σ ∂f/∂q ∂g/∂p - ∂f/∂p ∂g/∂q"""
    return sum(sympy.diff(f, q) * sympy.diff(g, p) - sympy.diff(f, p) * sympy.diff(g, q) for q, p in pairs)


def torus_commutation(system: PainleveSystem) -> sympy.Expr:
    if system.torus_integral is None:
        raise IndexRangeError("PVI carries no torus integral")
    return sympy.simplify(poisson_bracket(system.torus_integral, system.hamiltonian, system.pairs))


def differs_by_constant(a, b, coordinates: Sequence[sympy.Symbol]) -> bool:
    """a - b has no dependence on the given coordinates"""
    difference = sympy.expand(a - b)
    return all(sympy.simplify(sympy.diff(difference, x)) == 0 for x in coordinates)


def _pullback_matches(matrix: sympy.Matrix, expected: Mapping[Tuple[int, int], int]) -> bool:
    n = matrix.shape[0]
    return all(matrix[a, b] == expected.get((a, b), -expected.get((b, a), 0))
               for a in range(n) for b in range(n))


@traced
def verify_painleve(params: PainleveParameters, t_value) -> VerificationReport:
    """Exact identities of one kind at a numeric time"""
    report = VerificationReport(f"painleve P{params.kind.value}")
    system = painleve_system(params)
    kind = system.kind
    c = params.symbolic()
    at_t = sympy_scalar(t_value)
    with report.timed("intermediate H vs connection Hamiltonian") as outcome:
        generic = connection_hamiltonian(params, t_value)
        outcome["passed"] = differs_by_constant(system.hamiltonian.subs(system.t, at_t),
                                                CONNECTION_FACTOR[kind] * generic, system.coordinates)
        outcome["factor"] = CONNECTION_FACTOR[kind]
    if kind == PainleveKind.VI:
        return report
    with report.timed("torus integral commutes") as outcome:
        outcome["passed"] = torus_commutation(system) == 0
    with report.timed("reduction pullback") as outcome:
        first, second = REDUCTION_PULLBACK[kind]
        matrix = system.reduction.pullback(system.pairs)
        outcome["passed"] = _pullback_matches(matrix, {(0, 1): first, (2, 3): second})
    with report.timed("reduced Hamiltonian") as outcome:
        u, v = system.reduced.position, system.reduced.momentum
        printed = printed_reduced_hamiltonian(kind, c, u, v, system.t)
        outcome["passed"] = differs_by_constant(system.reduced.hamiltonian, printed, (u, v))
    if system.target_change is not None:
        with report.timed(f"{system.target.name} pullback") as outcome:
            matrix = system.target_change.pullback([(system.reduced.position, system.reduced.momentum)])
            outcome["passed"] = _pullback_matches(matrix, {(0, 1): 1})
        with report.timed(f"{system.target.name} Hamiltonian") as outcome:
            substituted = _normalize(system.reduced.hamiltonian.subs(system.target_change.forward))
            outcome["passed"] = differs_by_constant(substituted, system.target.hamiltonian,
                                                    (system.target.position, system.target.momentum))
    return report


# ----------------------------------------------------------------------
# PV Gambier form


@dataclass(frozen=True)
class GambierConstants:
    alpha: complex
    beta: complex
    gamma: complex
    delta: complex


def gambier_constants(theta0, thetat, k, a) -> GambierConstants:
    return GambierConstants(8 * theta0 ** 2, -8 * thetat ** 2, 4 * k * (4 * (a - theta0 - thetat) - 1), -8 * k ** 2)


def gambier_parameters(constants: GambierConstants) -> Dict[str, complex]:
    """Inverse of ``gambier_constants`` on the principal square-root branch"""
    k = cmath.sqrt(-constants.delta / 8)
    if k == 0:
        raise SingularityError("δ = 0 leaves k undetermined")
    theta0 = cmath.sqrt(constants.alpha / 8)
    thetat = cmath.sqrt(-constants.beta / 8)
    a = (constants.gamma / (4 * k) + 1) / 4 + theta0 + thetat
    return {"theta0": theta0, "thetat": thetat, "k": k, "a": a}


def gambier_rhs(u, du, t, c: GambierConstants):
    return ((1 / (2 * u) + 1 / (u - 1)) * du ** 2 - du / t + (u - 1) ** 2 / t ** 2 * (c.alpha * u + c.beta / u)
            + c.gamma * u / t + c.delta * u * (u + 1) / (u - 1))


# ----------------------------------------------------------------------
# numerics

STENCIL_FIRST = (1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12)
STENCIL_SECOND = (-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12)


def stencil_derivatives(values: Sequence[complex], h: float) -> Tuple[complex, complex]:
    """First and second derivative at the middle of five equally spaced samples"""
    first = sum(w * f for w, f in zip(STENCIL_FIRST, values)) / h
    second = sum(w * f for w, f in zip(STENCIL_SECOND, values)) / h ** 2
    return first, second


@dataclass
class PainleveTrajectory:
    system: PainleveSystem
    level: str
    t_span: Tuple[float, float]
    solution: Any

    def state(self, t: float) -> np.ndarray:
        return self.solution(t)

    def reduced_at(self, t: float) -> Tuple[complex, complex, complex]:
        """(u, v, I) at time t"""
        y = self.state(t)
        if self.level == "reduced":
            return complex(y[0]), complex(y[1]), complex(self.system.action_level)
        state = reduce(self.system, dict(zip(_state_names(self.system), y)), t)
        return state.position, state.momentum, state.action


def _state_names(system: PainleveSystem) -> List[str]:
    return [str(q) for q, _ in system.pairs] + [str(p) for _, p in system.pairs]


def reduce(system: PainleveSystem, values: Mapping[str, complex], t) -> ReducedState:
    """(u, v, I) of an intermediate point"""
    if system.reduction is None:
        raise IndexRangeError("PVI has no torus reduction")
    change = system.reduction
    old = list(change.old)
    i, _, v, u = change.new

    def build():
        return sympy.lambdify(old, [change.inverse[u], change.inverse[v], change.inverse[i]], modules="numpy")

    compiled = system.compiled("reduce", build)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = [complex(x) for x in compiled(*[complex(values[str(s)]) for s in old])]
    if not all(cmath.isfinite(x) for x in out):
        raise DomainError("Point lies outside the domain of the torus reduction",
                          {"kind": system.kind.value, "t": t})
    return ReducedState(t, out[0], out[1], out[2])


def lift(system: PainleveSystem, state: ReducedState, phi: complex = 0j) -> Dict[str, complex]:
    """An intermediate point over a reduced one, at angle φ and level I = state.action"""
    if system.reduction is None:
        raise IndexRangeError("PVI has no torus reduction")
    change = system.reduction
    i, angle, v, u = change.new
    action = system.action_level if state.action is None else state.action
    point = {i: action, angle: phi, u: state.position, v: state.momentum}
    return {str(s): complex(sympy.N(expr.subs(point))) for s, expr in change.forward.items()}


def _target_point(system: PainleveSystem, u: complex, v: complex,
                  reference: Optional[Tuple[complex, complex]] = None) -> Tuple[complex, complex]:
    """(position, momentum) of the normal form; the P34 branch follows ``reference``"""
    change = system.target_change
    if change is None:
        return u, v
    position, momentum = system.target.position, system.target.momentum
    pu, pv = change.old

    def build():
        return sympy.lambdify((pu, pv), [change.inverse[position], change.inverse[momentum]], modules="numpy")

    compiled = system.compiled("target", build)
    with np.errstate(divide="ignore", invalid="ignore"):
        x, y = (complex(z) for z in compiled(u + 0j, v + 0j))
    if not (cmath.isfinite(x) and cmath.isfinite(y)):
        raise DomainError("Point lies outside the domain of the normal-form change", {"u": u, "v": v})
    if system.kind == PainleveKind.II and reference is not None and abs(x - reference[0]) > abs(x + reference[0]):
        x, y = -x, -y
    return x, y


@traced
def integrate_painleve(system: PainleveSystem, initial, t_span: Tuple[float, float],
                       config: Optional[IntegratorConfig] = None, level: str = "reduced") -> PainleveTrajectory:
    """Integrate the reduced (u, v) system from a ReducedState or the intermediate one from a point dict"""
    config = config or IntegratorConfig()
    if level == "reduced":
        if system.reduced is None:
            raise IndexRangeError("PVI has no reduced system")
        reduced_field = system.compiled("reduced_field", lambda: system.reduced.field(system.t))
        y0 = np.array([initial.position, initial.momentum], dtype=complex)

        def rhs(t, y):
            return np.asarray(reduced_field(t, y[0], y[1]), dtype=complex)
    elif level == "intermediate":
        y0 = np.array([complex(initial[name]) for name in _state_names(system)], dtype=complex)
        rhs = system.intermediate_field()
    else:
        raise IndexRangeError(f"Unknown level {level!r}", {"known": ["reduced", "intermediate"]})

    def checked(t, y):
        dy = rhs(t, y)
        if not np.all(np.isfinite(dy)):
            raise IntegrationError("Vector field became singular", {"kind": system.kind.value, "t": float(t)})
        return dy

    with np.errstate(divide="ignore", invalid="ignore"):
        sol = solve_ivp(checked, t_span, y0, method=config.method, rtol=config.rtol, atol=config.atol,
                        max_step=config.max_step, dense_output=True)
    if not sol.success:
        raise IntegrationError(f"Integrator stopped: {sol.message}",
                               {"kind": system.kind.value, "t": float(sol.t[-1])})
    logger.info("painleve_integrated", kind=system.kind.value, level=level, evaluations=int(sol.nfev))
    return PainleveTrajectory(system, level, tuple(t_span), sol.sol)


def _sample_times(trajectory: PainleveTrajectory, times: Optional[Sequence[float]], h: float,
                  count: int) -> List[float]:
    lo, hi = sorted(trajectory.t_span)
    if times is None:
        margin = 3 * h
        return list(np.linspace(lo + margin, hi - margin, count))
    for t in times:
        if t - 2 * h < lo or t + 2 * h > hi:
            raise DomainError("Stencil leaves the trajectory", {"t": t, "h": h, "span": (lo, hi)})
    return list(times)


def scalar_residual(trajectory: PainleveTrajectory, times: Optional[Sequence[float]] = None,
                    h: float = DEFAULT_STENCIL_STEP, count: int = 9) -> float:
    """Max residual of the scalar equation (V) or of the normal-form Hamilton equations (IV, III, II)"""
    system = trajectory.system
    if system.kind == PainleveKind.VI:
        raise IndexRangeError("PVI is checked through its isomonodromic flow, not a scalar residual")
    samples = _sample_times(trajectory, times, h, count)
    worst = 0.0
    if system.kind == PainleveKind.V:
        c = system.params
        constants = gambier_constants(*(complex(c[n]) for n in ("theta0", "thetat", "k", "a")))
        for t in samples:
            values = [trajectory.reduced_at(t + j * h)[0] for j in range(-2, 3)]
            du, ddu = stencil_derivatives(values, h)
            worst = max(worst, abs(ddu - gambier_rhs(values[2], du, t, constants)))
        return worst
    target_field = system.compiled("target_field", lambda: system.target.field(system.t))
    for t in samples:
        u, v, _ = trajectory.reduced_at(t)
        centre = _target_point(system, u, v)
        points = []
        for j in range(-2, 3):
            uj, vj, _ = trajectory.reduced_at(t + j * h)
            points.append(_target_point(system, uj, vj, centre))
        dx, _ = stencil_derivatives([x for x, _ in points], h)
        dy, _ = stencil_derivatives([y for _, y in points], h)
        fx, fy = (complex(z) for z in target_field(t, *centre))
        worst = max(worst, abs(dx - fx), abs(dy - fy))
    return worst
