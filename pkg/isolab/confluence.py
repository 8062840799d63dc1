"""
Confluence
==========

A simple pole with residue C(ε) travels along v = u + P(ε),
P(ε) = t_1 ε + ... + t_{r+1} ε^{r+1}, into a rank-r pole at u whose bare
coefficients A_k(ε) are Laurent series in ε. Expanding C/(λ - v) around u
gives effective coefficients

    B̃_i = [ε^0] (B_i(ε) + C(ε) P(ε)^i),    i = 0..r+1,

of a rank-(r+1) pole with times t_1..t_{r+1}, provided every negative power
of ε cancels. The bare coefficients of the new pole are recovered through
M^(r+1)(t).
"""

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from .algebra_core import bracket_tensor, generator_matrix, matmul, trace, zeros
from .connection import (
    ConnectionSpec,
    PoleData,
    assemble,
    irregular_quadratic,
    pole_hamiltonian,
    spectral_quadratic,
    symbolic_takiff_spec,
)
from .errors import DivergenceError, ShapeMismatchError
from .logging_utils import get_logger, traced
from .monomials import TimeVector, back_substitute, build_M, power_coefficients
from .polynomial import (Generator, PhasePolynomial, from_sympy, lie_poisson_bracket, reduce_modulo, scalar_from_sympy,
                         var)
from .scalars import reciprocal, to_complex
from .takiff import TakiffCoElement, casimir, kks_expected
from .verification import VerificationReport

logger = get_logger(__name__)


def _is_zero_matrix(matrix: np.ndarray) -> bool:
    return all(x == 0 for x in matrix.flat)


@dataclass
class EpsLaurentMatrix:
    """Σ_j W^[j] ε^j over a finite window of powers"""

    m: int
    terms: Dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for j, w in self.terms.items():
            if w.shape != (self.m, self.m):
                raise ShapeMismatchError("Laurent coefficient shape differs from m",
                                         {"power": j, "shape": w.shape, "m": self.m})
        self.terms = {j: w for j, w in self.terms.items() if not _is_zero_matrix(w)}

    @classmethod
    def regular(cls, matrix: np.ndarray) -> "EpsLaurentMatrix":
        return cls(matrix.shape[0], {0: matrix})

    @property
    def j_min(self) -> int:
        return min(self.terms, default=0)

    def coefficient(self, j: int) -> np.ndarray:
        return self.terms.get(j, zeros(self.m))

    def __add__(self, other: "EpsLaurentMatrix") -> "EpsLaurentMatrix":
        merged = dict(self.terms)
        for j, w in other.terms.items():
            merged[j] = merged[j] + w if j in merged else w
        return EpsLaurentMatrix(self.m, merged)

    def __neg__(self) -> "EpsLaurentMatrix":
        return EpsLaurentMatrix(self.m, {j: -w for j, w in self.terms.items()})

    def __sub__(self, other: "EpsLaurentMatrix") -> "EpsLaurentMatrix":
        return self + (-other)

    def scale(self, factor) -> "EpsLaurentMatrix":
        return EpsLaurentMatrix(self.m, {j: w * factor for j, w in self.terms.items()})

    def times_series(self, series: Sequence[Any]) -> "EpsLaurentMatrix":
        """Product with the power series Σ_n series[n] ε^n"""
        out: Dict[int, np.ndarray] = {}
        for j, w in self.terms.items():
            for n, c in enumerate(series):
                if c == 0:
                    continue
                out[j + n] = out[j + n] + w * c if j + n in out else w * c
        return EpsLaurentMatrix(self.m, out)

    def evaluate(self, eps) -> np.ndarray:
        if isinstance(eps, int):
            eps = Fraction(eps)
        total = zeros(self.m)
        for j, w in self.terms.items():
            total = total + w * eps ** j
        return total

    def divergent_powers(self) -> List[int]:
        return sorted(j for j in self.terms if j < 0)


@dataclass
class ConfluenceScenario:
    """Base pole at u (bare A_k(ε), times t_1..t_r) and a merging simple pole C(ε)"""

    position: Any
    base: List[EpsLaurentMatrix]
    merging: EpsLaurentMatrix
    times: Tuple[Any, ...]
    name: str = ""

    def __post_init__(self):
        self.base = list(self.base)
        self.times = tuple(self.times)
        if len(self.times) != self.rank + 1:
            raise ShapeMismatchError("A rank-r base pole needs r+1 merged times",
                                     {"rank": self.rank, "times": len(self.times)})
        sizes = {s.m for s in self.base} | {self.merging.m}
        if len(sizes) != 1:
            raise ShapeMismatchError("Scenario matrices differ in size", {"sizes": sorted(sizes)})

    @property
    def rank(self) -> int:
        return len(self.base) - 1

    @property
    def m(self) -> int:
        return self.merging.m

    def base_times(self) -> TimeVector:
        return TimeVector(self.times[:self.rank])

    def trajectory(self, eps):
        """v(ε) = u + Σ t_i ε^i"""
        return self.position + sum(t * eps ** (i + 1) for i, t in enumerate(self.times))

    def effective_base(self) -> List[EpsLaurentMatrix]:
        """B_i(ε) = Σ_k A_k(ε) M^(r)_{i,k}(t_1..t_r)"""
        if self.rank == 0:
            return [self.base[0]]
        mm = build_M(self.rank, self.base_times())
        out = [self.base[0]]
        for i in range(1, self.rank + 1):
            total = EpsLaurentMatrix(self.m)
            for k in range(i, self.rank + 1):
                coeff = mm.entry(i, k)
                if coeff != 0:
                    total = total + self.base[k].scale(coeff)
            out.append(total)
        return out

    def at(self, eps, others: Sequence[PoleData] = ()) -> ConnectionSpec:
        """The connection before the limit: poles at u and v(ε) plus ``others``"""
        base = PoleData(self.position, [a.evaluate(eps) for a in self.base], self.base_times(),
                        name=self.name or "base")
        merging = PoleData(self.trajectory(eps), [self.merging.evaluate(eps)], name="merging")
        return ConnectionSpec(self.m, [base, merging] + list(others))


def _check_cancellation(series: EpsLaurentMatrix, what: str) -> None:
    bad = series.divergent_powers()
    if bad:
        raise DivergenceError(f"Uncancelled negative ε powers in {what}", {"powers": bad})


def one_plus_one(b: EpsLaurentMatrix, c: EpsLaurentMatrix, t1) -> Tuple[np.ndarray, np.ndarray]:
    """Two simple poles merging along v = u + t_1 ε: returns (Ã_1, Ã_0)"""
    for series, what in ((b, "B"), (c, "C")):
        if series.j_min < -1:
            raise DivergenceError(f"{what} has poles of order > 1 in ε", {"j_min": series.j_min})
    _check_cancellation(b + c, "B + C")
    a1 = c.coefficient(-1)
    a0 = b.coefficient(0) + c.coefficient(0)
    logger.debug("one_plus_one", t1=str(t1))
    return a1, a0


def confluent_effective(scenario: ConfluenceScenario, truncation: Optional[int] = None) -> List[np.ndarray]:
    """B̃_0..B̃_{r+1} of the confluent pole"""
    r = scenario.rank
    order = truncation if truncation is not None else r + 2
    if order < r + 1:
        raise ShapeMismatchError("Truncation must keep every power of P(ε)", {"order": order, "rank": r})
    powers = power_coefficients(TimeVector(scenario.times), order)
    base = scenario.effective_base()
    out = []
    for i in range(r + 2):
        total = scenario.merging.times_series(powers[i])
        if i <= r:
            total = total + base[i]
        _check_cancellation(total, f"B̃_{i}")
        out.append(total.coefficient(0))
    return out


def confluence_step(scenario: ConfluenceScenario, truncation: Optional[int] = None) -> PoleData:
    """The rank-(r+1) pole left at u when the simple pole has merged"""
    effective = confluent_effective(scenario, truncation)
    times = TimeVector(scenario.times)
    bare = back_substitute(build_M(scenario.rank + 1, times), effective[1:])
    pole = PoleData(scenario.position, [effective[0]] + list(bare), times,
                    name=scenario.name or "confluent")
    logger.info("confluence_step", rank=pole.rank)
    return pole


def scenario_from_limit(position, limit: Sequence[np.ndarray], merging: Sequence[np.ndarray],
                        times: Sequence[Any], higher: Optional[Sequence[np.ndarray]] = None,
                        name: str = "") -> ConfluenceScenario:
    """Scenario whose limit is known

    ``limit`` holds A^[k,0] (k = 0..r) and ``merging`` holds W^[0], W^[-1], ..., W^[-r-1].
    The base coefficients are A_k(ε) = -Σ_{l=1}^{r+1-k} W^[-k-l] ε^{-l} + A^[k,0]
    (+ ε·higher[k]), so that Ã_k = W^[-k] + A^[k,0] and Ã_{r+1} = W^[-r-1].
    """
    r = len(limit) - 1
    if len(merging) != r + 2:
        raise ShapeMismatchError("Need W^[0]..W^[-r-1]", {"rank": r, "merging": len(merging)})
    m = limit[0].shape[0]
    base = []
    for k in range(r + 1):
        terms = {0: limit[k]}
        for l in range(1, r + 2 - k):
            terms[-l] = -merging[k + l]
        if higher is not None:
            terms[1] = higher[k]
        base.append(EpsLaurentMatrix(m, terms))
    c = EpsLaurentMatrix(m, {-j: w for j, w in enumerate(merging)})
    return ConfluenceScenario(position, base, c, tuple(times), name)


def expected_limit(limit: Sequence[np.ndarray], merging: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Ã_k = W^[-k] + A^[k,0] and Ã_{r+1} = W^[-r-1]"""
    out = [merging[k] + a for k, a in enumerate(limit)]
    out.append(merging[len(limit)])
    return out


# ----------------------------------------------------------------------
# specs with ε-dependent poles


@dataclass
class LaurentPole:
    position: Any
    coefficients: List[EpsLaurentMatrix]
    times: Tuple[Any, ...] = ()
    movable: bool = True
    name: str = ""


def merge_poles(m: int, poles: Sequence[LaurentPole], base: int, merging: int,
                times: Sequence[Any], truncation: Optional[int] = None) -> ConnectionSpec:
    """Confluent spec: pole ``merging`` (simple) collides with pole ``base``"""
    if len(poles[merging].coefficients) != 1:
        raise ShapeMismatchError("The merging pole must be simple", {"pole": merging})
    b = poles[base]
    scenario = ConfluenceScenario(b.position, b.coefficients, poles[merging].coefficients[0],
                                  tuple(times), b.name)
    merged = replace(confluence_step(scenario, truncation), movable=b.movable)
    out: List[PoleData] = []
    for index, pole in enumerate(poles):
        if index == merging:
            continue
        if index == base:
            out.append(merged)
            continue
        for series in pole.coefficients:
            _check_cancellation(series, f"pole {index}")
        out.append(PoleData(pole.position, [s.coefficient(0) for s in pole.coefficients],
                            pole.times or None, movable=pole.movable, name=pole.name))
    return ConnectionSpec(m, out)


# ----------------------------------------------------------------------
# graded model of the coefficient brackets (1+1 case)


def graded_table(kinds: Sequence[str] = ("B", "C"), lowest: int = -1, highest: int = 0):
    """{X^[i]_ab, X^[j]_cd} = δ_bc X^[i+j]_ad - δ_ad X^[i+j]_cb for each kind X

    Slot s carries the power j = s + lowest; brackets landing below ``lowest``
    or above ``highest`` vanish, different kinds commute.
    """

    def table(x: Generator, y: Generator):
        if x.kind != y.kind or x.kind not in kinds:
            return 0
        power = x.slot + y.slot + 2 * lowest
        if power < lowest or power > highest:
            return 0
        target = power - lowest
        a, b, c, d = x.row, x.col, y.row, y.col
        result = PhasePolynomial()
        if b == c:
            result = result + var(Generator(x.kind, target, a, d))
        if a == d:
            result = result - var(Generator(x.kind, target, c, b))
        return result

    return table


def _graded_matrix(kind: str, power: int, m: int, lowest: int = -1) -> np.ndarray:
    out = np.empty((m, m), dtype=object)
    for a in range(m):
        for b in range(m):
            out[a, b] = var(Generator(kind, power - lowest, a, b))
    return out


@traced
def graded_model_brackets(m: int = 2, r: int = 1) -> VerificationReport:
    """Ã_1 = C^[-1], Ã_0 = B^[0] + C^[0] close into the rank-1 Takiff relations"""
    if r != 1:
        raise ShapeMismatchError("The graded model realizes the 1+1 step", {"r": r})
    report = VerificationReport(f"graded model m={m}")
    table = graded_table()
    bracket = lambda f, g: lie_poisson_bracket(f, g, table)
    c_lo = _graded_matrix("C", -1, m)
    a1 = c_lo
    a0 = _graded_matrix("B", 0, m) + _graded_matrix("C", 0, m)
    # constraint C^[-1] = -B^[-1]: B^[-1] never enters Ã
    target = TakiffCoElement([a0, a1])
    for k in range(2):
        for l in range(2):
            with report.timed(f"{{A_{k} (x) A_{l}}}") as outcome:
                actual = bracket_tensor(target[k], target[l], bracket)
                expected = kks_expected(k, l, target)
                bad = sum(1 for x, y in zip(actual.flat, expected.flat)
                          if PhasePolynomial.coerce(x) != PhasePolynomial.coerce(y))
                outcome["passed"] = bad == 0
                outcome["defect"] = float(bad)
    with report.timed("third pole commutes") as outcome:
        third = var(Generator("D", 0, 0, 0))
        bad = sum(1 for k in range(2) for x in target[k].flat if not bracket(x, third).is_zero())
        outcome["passed"] = bad == 0
        outcome["defect"] = float(bad)
    return report


# ----------------------------------------------------------------------
# Hamiltonians across the limit


@traced
def hamiltonian_limit_check(scenario: ConfluenceScenario, others: Sequence[PoleData] = ()) -> VerificationReport:
    """M^(r+1)·(H̃_1..H̃_{r+1}) = (S̃_1..S̃_{r+1}) on the confluent pole, exactly

    The ``linear system`` rows restate the system H̃ was solved from. The
    ``closed form`` rows compare against H̃ written out directly in S̃ and t.
    """
    report = VerificationReport("confluent hamiltonians")
    pole = confluence_step(scenario)
    spec = ConnectionSpec(scenario.m, [pole] + list(others))
    symbolic, _ = symbolic_takiff_spec(spec)
    values = symbolic.coefficient_values()
    hs = irregular_quadratic(symbolic, 0)
    mm = build_M(pole.rank, pole.times)
    for k in range(1, pole.rank + 1):
        with report.timed(f"linear system row {k} (consistency)") as outcome:
            combined = spectral_quadratic(symbolic, 0, k) * -1
            for j in range(k, pole.rank + 1):
                coeff = mm.entry(k, j)
                if coeff != 0:
                    combined = combined + hs[j - 1] * coeff
            outcome["passed"] = combined.is_zero()
            outcome["defect"] = float(len(combined.terms))
    with report.timed("truncation r+2 vs r+4") as outcome:
        low = confluent_effective(scenario, scenario.rank + 2)
        high = confluent_effective(scenario, scenario.rank + 4)
        outcome["passed"] = all(all(x == y for x, y in zip(a.flat, b.flat)) for a, b in zip(low, high))
    if pole.rank == 1:
        with report.timed("closed form H_1 = S_1 / t_1") as outcome:
            direct = spectral_quadratic(symbolic, 0, 1) * reciprocal(scenario.times[0])
            outcome["passed"] = (direct - hs[0]).is_zero()
    if pole.rank == 2:
        t1, t2 = scenario.times[:2]
        s1, s2 = (spectral_quadratic(symbolic, 0, k) for k in (1, 2))
        h2 = s2 * reciprocal(t1 * t1)
        h1 = (s1 - h2 * t2) * reciprocal(t1)
        with report.timed("closed form H_2 = S_2 / t_1^2") as outcome:
            outcome["passed"] = (h2 - hs[1]).is_zero()
        with report.timed("closed form H_1 = (S_1 - t_2 H_2) / t_1") as outcome:
            outcome["passed"] = (h1 - hs[0]).is_zero()
    logger.info("hamiltonian_limit_check", rank=pole.rank, passed=report.passed,
                labels=len(values))
    return report


def merged_residue_defects(scenario: ConfluenceScenario, eps_values: Sequence[Any],
                           others: Sequence[PoleData] = ()) -> List[float]:
    """|H_u(ε) + H_v(ε) - H̃_u| at each ε; tends to zero with ε"""
    confluent = ConnectionSpec(scenario.m, [confluence_step(scenario)] + list(others))
    target = pole_hamiltonian(confluent, 0)
    defects = []
    for eps in eps_values:
        spec = scenario.at(eps, others)
        merged = pole_hamiltonian(spec, 0) + pole_hamiltonian(spec, 1)
        defects.append(abs(to_complex(merged - target)))
    return defects


def generic_scenario(r: int, m: int, times: Sequence[Any], position: Any = 0) -> ConfluenceScenario:
    """``scenario_from_limit`` with generator matrices: A^[k,0] of kind ``L``, W^[-j] of kind ``W``"""
    limit = [generator_matrix("L", k, m) for k in range(r + 1)]
    merging = [generator_matrix("W", j, m) for j in range(r + 2)]
    return scenario_from_limit(position, limit, merging, times)


def _sympy_matrix(matrix: np.ndarray, symbols: Dict[Generator, Any]) -> np.ndarray:
    out = np.empty(matrix.shape, dtype=object)
    for index, value in np.ndenumerate(matrix):
        out[index] = PhasePolynomial.coerce(value).to_sympy(symbols)
    return out


def _lowest_order(expr, eps) -> Tuple[int, Any]:
    poly = sympy.Poly(expr, eps)
    order = min(exponents[0] for exponents in poly.monoms())
    return order, poly.coeff_monomial(eps ** order)


def eps_limit(expr, eps):
    """lim_{ε→0} of a rational function of ε; negative net order raises DivergenceError"""
    numerator, denominator = sympy.fraction(sympy.together(sympy.sympify(expr)))
    if sympy.expand(numerator) == 0:
        return sympy.Integer(0)
    n_order, n_lead = _lowest_order(numerator, eps)
    d_order, d_lead = _lowest_order(denominator, eps)
    if n_order < d_order:
        raise DivergenceError("Expression diverges as ε → 0", {"order": n_order - d_order})
    if n_order > d_order:
        return sympy.Integer(0)
    return sympy.expand(n_lead / d_lead)


def confluence_casimirs(scenario: ConfluenceScenario, pole: PoleData,
                        others: Sequence[PoleData] = ()) -> List[Tuple[str, PhasePolynomial]]:
    """The Casimir basis that pre- and post-confluence Hamiltonians are compared modulo

    I_1..I_{r+2} of the confluent pole, Tr(B^[0] C^[0]) of the finite parts of the
    colliding residues, and I_1..I_{r+1} of every spectator pole.
    """
    merged = TakiffCoElement(pole.coefficients)
    basis = [(f"I_{k}", casimir(merged, k)) for k in range(1, merged.r + 2)]
    basis.append(("Tr B0 C0", trace(matmul(scenario.base[0].coefficient(0), scenario.merging.coefficient(0)))))
    for index, other in enumerate(others):
        spectator = TakiffCoElement(other.coefficients)
        basis.extend((f"I_{k} of {other.name or index}", casimir(spectator, k))
                     for k in range(1, spectator.r + 2))
    return [(name, PhasePolynomial.coerce(value)) for name, value in basis]


def merged_hamiltonian_limit(scenario: ConfluenceScenario, others: Sequence[PoleData] = ()) -> PhasePolynomial:
    """lim_{ε→0} (H_u(ε) + H_v(ε)), computed with ε as a sympy symbol

    Entries of the scenario and of ``others`` may be PhasePolynomials; the
    result is exact in them.
    """
    matrices = [w for series in scenario.base + [scenario.merging] for w in series.terms.values()]
    matrices += [c for other in others for c in other.coefficients]
    generators = sorted({g for matrix in matrices for x in matrix.flat
                         for g in PhasePolynomial.coerce(x).generators()})
    symbols = {g: sympy.Symbol(str(g)) for g in generators}

    def lift(series: EpsLaurentMatrix) -> EpsLaurentMatrix:
        return EpsLaurentMatrix(series.m, {j: _sympy_matrix(w, symbols) for j, w in series.terms.items()})

    lifted = ConfluenceScenario(scenario.position, [lift(s) for s in scenario.base], lift(scenario.merging),
                                scenario.times, scenario.name)
    spectators = [replace(other, coefficients=[_sympy_matrix(c, symbols) for c in other.coefficients])
                  for other in others]
    eps = sympy.Symbol("epsilon")
    spec = lifted.at(eps, spectators)
    total = sympy.sympify(pole_hamiltonian(spec, 0)) + sympy.sympify(pole_hamiltonian(spec, 1))
    limit = eps_limit(total, eps)
    if not generators:
        return PhasePolynomial.constant(scalar_from_sympy(sympy.sympify(limit)))
    return from_sympy(limit, {symbol: g for g, symbol in symbols.items()})


@traced
def merged_hamiltonian_check(scenario: ConfluenceScenario, others: Sequence[PoleData] = ()) -> VerificationReport:
    """H̃_u = lim (H_u(ε) + H_v(ε)) exactly, modulo ``confluence_casimirs``"""
    report = VerificationReport(f"merged hamiltonian r={scenario.rank}")
    pole = confluence_step(scenario)
    target = PhasePolynomial.coerce(pole_hamiltonian(ConnectionSpec(scenario.m, [pole] + list(others)), 0))
    limit = merged_hamiltonian_limit(scenario, others)
    basis = confluence_casimirs(scenario, pole, others)
    remainder, coefficients = reduce_modulo(limit - target, [b for _, b in basis])
    with report.timed("limit equals confluent H_u mod Casimirs") as outcome:
        outcome["passed"] = remainder.is_zero()
        outcome["defect"] = float(len(remainder))
        outcome["casimir_shift"] = {name: str(c) for (name, _), c in zip(basis, coefficients) if c != 0}
    logger.info("merged_hamiltonian_check", rank=scenario.rank, passed=report.passed,
                basis=len(basis))
    return report


def connection_defects(scenario: ConfluenceScenario, lam, eps_values: Sequence[Any],
                       others: Sequence[PoleData] = ()) -> List[float]:
    """max |A(λ; ε) - Ã(λ)| at each ε"""
    confluent = ConnectionSpec(scenario.m, [confluence_step(scenario)] + list(others))
    target = assemble(confluent, lam)
    out = []
    for eps in eps_values:
        diff = assemble(scenario.at(eps, others), lam) - target
        out.append(max(abs(to_complex(x)) for x in diff.flat))
    return out


def richardson(f_coarse, f_fine, ratio) -> Any:
    """First-order Richardson extrapolation of f(ε) to ε = 0 from ε and ε/ratio"""
    return (f_fine * ratio - f_coarse) / (ratio - 1)
