"""
Command Line Interface
======================

``isolab <subcommand> [flags]``. Every subcommand produces a JSON payload,
optionally a CSV trajectory, and optionally a verification report that
decides the exit code:

    0  success
    1  a verification check failed
    2  usage or input error (bad flags, malformed or missing files)

``verify-all`` runs the whole identity and acceptance suite through the
process pool of ``verification.run_sweep``; ISOLAB_THREADS caps its size.
"""

import argparse
import random
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from rich.console import Console

from .algebra_core import generator_matrix, object_matrix
from .config import IsolabConfig
from .confluence import (confluence_step, expected_limit, generic_scenario, graded_model_brackets,
                         hamiltonian_limit_check, merge_poles, merged_hamiltonian_check, scenario_from_limit)
from .connection import (ConnectionSpec, PoleData, TimeCoordinate, hamiltonians as connection_hamiltonians,
                         katz_dimension, katz_symplectic_count, schlesinger_spec, spectral_invariant)
from .errors import DomainError, ExitCode, IndexRangeError, IsolabError, ShapeMismatchError, SpecFormatError
from .isoflow import (FlowPath, IntegratorConfig, conservation_drift, hamiltonian_commutation, integrate_flow,
                      integrate_polynomial_flow, malgrange_action_check, polynomial_action_defect,
                      tau_closedness, write_trajectory_csv)
from .logging_utils import get_logger, setup_logging, tracer
from .monomials import TimeVector, build_M, invert_M, verify_ideal, verify_identities
from .painleve import (PainleveKind, PainleveParameters, ReducedState, integrate_painleve, painleve_system,
                       scalar_residual, verify_painleve)
from .polynomial import p_gen, q_gen, var
from .quantum_kz import (LEFT, ORDERINGS, SINGULAR_TIMES, VARIABLE_NAMES, WEYL, MonomialBasis, build_confluent_kz,
                         classical_limit_check, commutator_defect, confluent_kz_report, derivative,
                         flatness_check, frobenius_exponents, kz_residual, lifted_variable_count, multiply,
                         painleve_quantum_hamiltonians, piii_quantum_reduction, quantum_report,
                         semiclassical_check, solve_kz)
from .scalars import exact, format_scalar, parse_scalar
from .sl2_charts import verify_chart
from .spec_io import (connection_to_dict, load_confluence, load_connection_spec, load_painleve, load_path,
                      matrix_to_json, parse_time_coordinate, write_json, write_kz_csv, write_painleve_csv)
from .takiff import verify_casimirs, verify_inner_outer, verify_kks
from .verification import VerificationReport, run_sweep

logger = get_logger(__name__)

CSV_COMMANDS = ("flow", "painleve", "kz")
KZ_KINDS = ("schlesinger", "confluent") + tuple(f"painleve-{k.value}" for k in PainleveKind)

RESIDUAL_TOL = 1e-6


class RunConfig(BaseModel):
    """One invocation: the subcommand, its output options and the merged settings"""

    command: str
    out: Optional[str] = None
    format: str = "json"
    seed: int = 7
    verbose: bool = False
    settings: IsolabConfig


@dataclass
class CommandResult:
    payload: Dict[str, Any]
    report: Optional[VerificationReport] = None
    write_csv: Optional[Callable[[IO[str]], int]] = None


# ----------------------------------------------------------------------
# flag parsing


def _scalar_list(text: str) -> List[Any]:
    try:
        return [parse_scalar(part.strip()) for part in text.split(",") if part.strip()]
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise argparse.ArgumentTypeError(f"not a list of scalars: {text!r}") from e


def _index_pair(text: str) -> Tuple[int, int]:
    try:
        first, second = (int(part) for part in text.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected i,j: {text!r}") from e
    return first, second


def _real_range(text: str) -> Tuple[float, float]:
    try:
        lo, hi = (float(part) for part in text.split(":"))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected a:b: {text!r}") from e
    return lo, hi


def _complex_range(text: str) -> Tuple[complex, complex]:
    try:
        lo, hi = (complex(part.strip().replace(" ", "")) for part in text.split(":"))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected a:b: {text!r}") from e
    return lo, hi


def _complex_list(text: str) -> List[complex]:
    try:
        return [complex(part.strip()) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from e


def _common_flags() -> argparse.ArgumentParser:
    """Flags accepted before and after the subcommand"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed of randomized checks")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS,
                        help="json everywhere; csv for flow, painleve and kz trajectories")
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS,
                        help="debug logging and a report table on stderr")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="process pool size (overrides ISOLAB_THREADS)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="isolab", parents=[common],
                                     description="Isomonodromic deformations on Takiff coadjoint orbits")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("bracket-verify", parents=[common], help="exact KKS, Casimir and inner/outer checks")
    p.add_argument("--max-rank", type=int, default=None, help="ranks 0..R (default ISOLAB_MAX_RANK)")
    p.add_argument("--m", type=int, default=2, help="matrix sizes 1..m")

    p = sub.add_parser("monomials", parents=[common], help="the matrix M^(r)(t) or its inverse")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--times", type=_scalar_list, default=None, help="t1,...,tr (default 1,0,...,0)")
    p.add_argument("--inverse", action="store_true")
    p.add_argument("--verify", action="store_true", help="also run the exact identities for this rank")

    p = sub.add_parser("hamiltonians", parents=[common], help="isomonodromic Hamiltonians of a connection")
    p.add_argument("--spec", required=True)
    p.add_argument("--symbolic", action="store_true", help="quadratic forms Σ c Tr(A_a A_b) instead of values")

    p = sub.add_parser("confluence", parents=[common], help="merge a simple pole into another pole")
    p.add_argument("--spec", required=True)
    p.add_argument("--merge", type=_index_pair, default=None, help="base,merging pole indices")
    p.add_argument("--times", type=_scalar_list, default=None, help="t1,...,t(r+1) of the merging path")
    p.add_argument("--truncation", type=int, default=None)

    p = sub.add_parser("flow", parents=[common], help="integrate the lifted isomonodromic flow")
    p.add_argument("--spec", required=True)
    p.add_argument("--path", required=True)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--method", default=None, help="RK45, RK23 or DOP853")

    p = sub.add_parser("painleve", parents=[common], help="integrate one Painlevé system")
    p.add_argument("--kind", default=None, help="VI, V, IV, III or II")
    p.add_argument("--params", required=True)
    p.add_argument("--trange", type=_real_range, default=None, help="a:b")
    p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("kz", parents=[common], help="solve a quantized (confluent) KZ system")
    p.add_argument("--kind", choices=KZ_KINDS, required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--spec", required=True, help="connection spec, or Painlevé parameters for painleve-*")
    p.add_argument("--segment", type=_complex_range, default=None, help="a:b along one time coordinate")
    p.add_argument("--coordinate", default=None, help="u[i] or t[i,k] (default: the first one)")
    p.add_argument("--hbar", type=float, default=None)
    p.add_argument("--ordering", choices=ORDERINGS, default=LEFT)
    p.add_argument("--initial", type=_complex_list, default=None, help="W(0) (default e_0)")
    p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("verify-all", parents=[common], help="the full identity and acceptance suite")
    p.add_argument("--max-rank", type=int, default=None)
    p.add_argument("--m", type=int, default=2)
    return parser


# ----------------------------------------------------------------------
# shared helpers


def _merged(suite: str, reports: Sequence[VerificationReport]) -> VerificationReport:
    report = VerificationReport(suite)
    for part in reports:
        report.extend(part)
    return report


def _integrator(settings: IsolabConfig, tol: Optional[float], method: Optional[str] = None) -> IntegratorConfig:
    if tol is None:
        return IntegratorConfig.from_config(settings, method=method)
    return IntegratorConfig.from_config(settings, rtol=tol, atol=tol * 1e-2, method=method)


def _hbar(value: float):
    return int(value) if float(value).is_integer() else value


def _complex_json(values) -> List[List[float]]:
    return [[complex(x).real, complex(x).imag] for x in values]


def _random_rational(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(-5, 5), rng.randint(1, 3))


def _random_exact_matrix(rng: random.Random, m: int) -> np.ndarray:
    return object_matrix([[_random_rational(rng) for _ in range(m)] for _ in range(m)])


def _random_complex_matrix(rng: np.random.Generator, m: int, scale: float = 0.5) -> np.ndarray:
    return scale * (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)))


# ----------------------------------------------------------------------
# subcommands


def _bracket_verify(args: argparse.Namespace, run: RunConfig) -> CommandResult:
    max_rank = run.settings.max_rank if args.max_rank is None else args.max_rank
    if max_rank < 0 or args.m < 1:
        raise IndexRangeError("Need --max-rank ≥ 0 and --m ≥ 1", {"max_rank": max_rank, "m": args.m})
    tasks = [(check, {"r": r, "m": m})
             for r in range(max_rank + 1) for m in range(1, args.m + 1)
             for check in (verify_kks, verify_casimirs, verify_inner_outer)]
    report = _merged("bracket-verify", run_sweep(tasks, run.settings.threads))
    return CommandResult({"command": run.command, "max_rank": max_rank, "m": args.m}, report)


def _monomials(args: argparse.Namespace, run: RunConfig) -> CommandResult:
    if args.rank < 0:
        raise IndexRangeError("Rank must be ≥ 0", {"rank": args.rank})
    times = TimeVector.identity(args.rank) if args.times is None else TimeVector(tuple(args.times))
    if times.r != args.rank:
        raise ShapeMismatchError("Need one time per rank", {"rank": args.rank, "times": times.r})
    matrix = build_M(args.rank, times)
    if args.inverse:
        matrix = invert_M(matrix)
    payload = {
        "command": run.command,
        "rank": args.rank,
        "times": [format_scalar(t) for t in times.values],
        "inverse": args.inverse,
        "matrix": matrix_to_json(matrix.matrix),
    }
    report = None
    if args.verify:
        report = _merged("monomials", [verify_identities(args.rank), verify_ideal(args.rank)])
    return CommandResult(payload, report)


def _label(label) -> List[int]:
    return [int(label[0]), int(label[1])]


def _hamiltonians(args: argparse.Namespace, run: RunConfig) -> CommandResult:
    spec = load_connection_spec(args.spec)
    hs = connection_hamiltonians(spec)
    values = spec.coefficient_values()
    entries = {}
    for coordinate in sorted(hs, key=str):
        h = hs[coordinate]
        if args.symbolic:
            entries[str(coordinate)] = [{"a": _label(a), "b": _label(b), "coefficient": format_scalar(c)}
                                        for (a, b), c in sorted(h.terms.items())]
        else:
            entries[str(coordinate)] = format_scalar(h.evaluate(values))
    spectral = {}
    if not args.symbolic:
        for i in spec.finite_indices:
            pole = spec.poles[i]
            spectral[str(i)] = [format_scalar(spectral_invariant(spec, i, k)) for k in range(pole.rank + 2)]
    payload = {"command": run.command, "m": spec.m, "hamiltonians": entries}
    if spectral:
        payload["spectral"] = spectral
    return CommandResult(payload)


def _confluence(args: argparse.Namespace, run: RunConfig) -> CommandResult:
    scenario = load_confluence(args.spec)
    merge = args.merge or scenario.merge
    times = tuple(args.times) if args.times is not None else scenario.times
    if merge is None or times is None:
        raise SpecFormatError("Confluence needs --merge and --times, or the same keys in the scenario file")
    base, merging = merge
    count = len(scenario.poles)
    if not (0 <= base < count and 0 <= merging < count) or base == merging:
        raise IndexRangeError("Merge indices must name two different poles", {"merge": merge, "poles": count})
    spec = merge_poles(scenario.m, scenario.poles, base, merging, times, args.truncation)
    payload = {"command": run.command, "merge": list(merge), "spec": connection_to_dict(spec)}
    return CommandResult(payload)


def _flow(args: argparse.Namespace, run: RunConfig) -> CommandResult:
    spec = load_connection_spec(args.spec)
    path = load_path(args.path, spec)
    config = _integrator(run.settings, args.tol, args.method)
    trajectory = integrate_flow(spec, path, config)
    drift_tol = max(100 * config.rtol, 1e-8)
    report = VerificationReport("flow")
    drift = conservation_drift(trajectory)
    for name in ("moment", "casimir", "eigenvalue"):
        report.record(f"{name} conservation", drift[name] <= drift_tol, drift[name])
    action = max(malgrange_action_check(trajectory, k) for k in range(path.segments))
    report.record("action = 2 log tau rate", action <= RESIDUAL_TOL, action)
    payload = {
        "command": run.command,
        "segments": path.segments,
        "log_tau": format_scalar(complex(trajectory.tau.value)),
        "drift": drift,
        "report": report.to_dict(),
    }
    return CommandResult(payload, report, lambda stream: write_trajectory_csv(trajectory, stream))


def _painleve(args: argparse.Namespace, run: RunConfig) -> CommandResult:
    data = load_painleve(args.params, args.kind)
    trange = args.trange or data.trange
    if trange is None:
        raise SpecFormatError("Painlevé runs need --trange or a trange in the parameter file")
    system = painleve_system(data.params)
    if data.initial is not None and system.reduced is not None:
        level = "reduced"
        initial = ReducedState(trange[0], data.initial.position, data.initial.momentum)
    elif data.point is not None:
        level, initial = "intermediate", data.point
    else:
        raise SpecFormatError("Painlevé runs need an initial (u, v) or an intermediate point",
                              {"kind": system.kind.value})
    reason = "reduced (u, v) given" if level == "reduced" else "intermediate point given"
    tracer.log_decision(level, reason, "painleve")
    config = _integrator(run.settings, args.tol)
    trajectory = integrate_painleve(system, initial, trange, config, level)
    report = verify_painleve(data.params, exact(trange[0]))
    payload = {"command": run.command, "kind": system.kind.value, "level": level, "trange": list(trange)}
    if system.kind != PainleveKind.VI:
        residual = scalar_residual(trajectory)
        report.record("scalar equation residual", residual <= RESIDUAL_TOL, residual)
        payload["residual"] = residual
    payload["report"] = report.to_dict()
    return CommandResult(payload, report, lambda stream: write_painleve_csv(trajectory, stream))


def _kz(args: argparse.Namespace, run: RunConfig) -> CommandResult:
    hbar = _hbar(run.settings.hbar if args.hbar is None else args.hbar)
    config = _integrator(run.settings, args.tol)
    report = VerificationReport(f"kz {args.kind}")
    payload: Dict[str, Any] = {"command": run.command, "kind": args.kind, "degree": args.degree}
    if args.kind.startswith("painleve-"):
        kind = PainleveKind.parse(args.kind.split("-", 1)[1])
        data = load_painleve(args.spec, kind.value)
        basis = MonomialBasis(len(VARIABLE_NAMES[kind]), args.degree)
        system = painleve_quantum_hamiltonians(kind, data.params, basis, hbar, ordering=args.ordering)
        segment = args.segment or (tuple(data.trange) if data.trange else None)
        if segment is None:
            raise SpecFormatError("KZ runs need --segment or a trange in the parameter file")
        endpoints = tuple(complex(x) for x in segment)
        payload["frobenius"] = {str(t0): _complex_json(frobenius_exponents(system, t0))
                                for t0 in SINGULAR_TIMES[kind]}
    else:
        if args.ordering != LEFT:
            raise DomainError("Connection KZ systems use the left ordering of their trace products",
                              {"ordering": args.ordering})
        spec = load_connection_spec(args.spec)
        if args.kind == "schlesinger" and any(pole.rank for pole in spec.poles):
            raise DomainError("Schlesinger KZ needs simple poles only; use --kind confluent")
        basis = MonomialBasis(lifted_variable_count(spec), args.degree)
        system = build_confluent_kz(spec, basis, hbar)
        if not system.coordinates:
            raise DomainError("The connection has no deformation times")
        coordinate = system.coordinates[0] if args.coordinate is None else parse_time_coordinate(args.coordinate)
        if coordinate not in system.coordinates:
            raise IndexRangeError("Unknown time coordinate", {"coordinate": str(coordinate),
                                                              "known": [str(c) for c in system.coordinates]})
        base = system.point()
        if args.segment is None:
            segment = (base[coordinate], base[coordinate] + 0.25)
        else:
            segment = args.segment
        endpoints = ({coordinate: segment[0]}, {coordinate: segment[1]})
        defect = commutator_defect(system, [base])
        report.record("commutativity", defect <= 1e-10, defect)
        flat = flatness_check(system, [base])
        report.record("flatness", flat <= RESIDUAL_TOL, flat)
        payload["coordinate"] = str(coordinate)
    initial = np.zeros(basis.size, dtype=complex)
    if args.initial is None:
        initial[0] = 1
    else:
        initial = np.asarray(args.initial, dtype=complex)
    solution = solve_kz(system, initial, endpoints, config)
    residual = kz_residual(solution)
    report.record("KZ residual", residual <= RESIDUAL_TOL, residual)
    payload.update({"size": basis.size, "final": _complex_json(solution.final), "report": report.to_dict()})
    return CommandResult(payload, report, lambda stream: write_kz_csv(solution, stream))


# ----------------------------------------------------------------------
# verify-all suites; module level so the process pool can pickle them


def _chart_suite() -> VerificationReport:
    thetas = {0: (Fraction(1, 3),), 1: (Fraction(1, 2), 2), 2: (1, Fraction(-1, 2), 3), 3: (1, 2, -1, Fraction(3, 2))}
    return _merged("sl2 charts", [verify_chart(degree, theta) for degree, theta in thetas.items()])


def _commutation_suite(seed: int) -> VerificationReport:
    rng = random.Random(seed)
    fuchsian = schlesinger_spec([0, 1, Fraction(1, 3)], [_random_exact_matrix(rng, 2) for _ in range(3)])
    irregular = ConnectionSpec(2, [
        PoleData(0, [_random_exact_matrix(rng, 2)], movable=False),
        PoleData(1, [_random_exact_matrix(rng, 2)], movable=False),
        PoleData(Fraction(1, 2), [_random_exact_matrix(rng, 2) for _ in range(2)], (Fraction(2),)),
    ])
    higher = ConnectionSpec(2, [
        PoleData(0, [_random_exact_matrix(rng, 2) for _ in range(3)], (1, Fraction(1, 2))),
        PoleData(1, [_random_exact_matrix(rng, 2)]),
    ])
    return _merged("commutation", [hamiltonian_commutation(spec) for spec in (fuchsian, irregular, higher)])


def _confluence_suite(seed: int) -> VerificationReport:
    rng = random.Random(seed)
    reports = [graded_model_brackets(2, 1)]
    for r in (0, 1):
        limit = [_random_exact_matrix(rng, 2) for _ in range(r + 1)]
        merging = [_random_exact_matrix(rng, 2) for _ in range(r + 2)]
        times = (Fraction(2), Fraction(1, 3))[:r + 1]
        scenario = scenario_from_limit(0, limit, merging, times)
        others = [PoleData(1, [_random_exact_matrix(rng, 2)])]
        reports.append(hamiltonian_limit_check(scenario, others))
        spectator = PoleData(1, [generator_matrix("R", 0, 2)], name="spectator")
        reports.append(merged_hamiltonian_check(generic_scenario(r, 2, times), [spectator]))
        if r == 0:
            report = VerificationReport("confluence limit")
            pole = confluence_step(scenario)
            expected = expected_limit(limit, merging)
            bad = sum(1 for a, b in zip(pole.coefficients, expected) for x, y in zip(a.flat, b.flat) if x != y)
            report.record("1+1 limit coefficients", bad == 0, bad)
            reports.append(report)
    return _merged("confluence", reports)


def _fuchsian_flow_spec(seed: int) -> Tuple[ConnectionSpec, List[TimeCoordinate]]:
    rng = np.random.default_rng(seed)
    residues = [_random_complex_matrix(rng, 2) for _ in range(4)]
    spec = schlesinger_spec([0, 1, 0.3 + 0.4j, 2.0 + 1.0j], residues, [False, False, True, True])
    return spec, [TimeCoordinate("u", 2), TimeCoordinate("u", 3)]


def _flow_suite(seed: int, tol: float) -> VerificationReport:
    report = VerificationReport("flows")
    config = IntegratorConfig(rtol=tol, atol=tol * 1e-2)
    spec, coords = _fuchsian_flow_spec(seed)
    start, end = (0.3 + 0.4j, 2.0 + 1.0j), (0.5 + 0.6j, 2.3 + 0.8j)
    trajectory = integrate_flow(spec, FlowPath.straight(coords, start, end), config)
    drift = conservation_drift(trajectory)
    bound = max(100 * tol, 1e-8)
    for name in ("moment", "casimir", "eigenvalue"):
        report.record(f"schlesinger {name} conservation", drift[name] <= bound, drift[name])
    action = malgrange_action_check(trajectory)
    report.record("schlesinger action = 2 log tau rate", action <= RESIDUAL_TOL, action)
    closed = tau_closedness(spec, coords, start, end, config)
    report.record("tau closed on two paths", closed["log_tau"] <= RESIDUAL_TOL, closed["log_tau"])
    report.record("end point path independent", closed["state"] <= RESIDUAL_TOL, closed["state"])

    rng = np.random.default_rng(seed + 1)
    irregular = ConnectionSpec(2, [
        PoleData(0, [_random_complex_matrix(rng, 2) for _ in range(2)], (1.0,)),
        PoleData(1, [_random_complex_matrix(rng, 2)], movable=False),
    ])
    t1 = TimeCoordinate("t", 0, 1)
    trajectory = integrate_flow(irregular, FlowPath.straight([t1], (1.0,), (1.3 + 0.1j,)), config)
    drift = conservation_drift(trajectory)
    report.record("rank-1 casimir conservation", drift["casimir"] <= bound, drift["casimir"])
    action = malgrange_action_check(trajectory)
    report.record("rank-1 action = 2 log tau rate", action <= RESIDUAL_TOL, action)
    return report


def _semiclassical_suite(seed: int, tol: float) -> VerificationReport:
    config = IntegratorConfig(rtol=tol, atol=tol * 1e-2)
    spec, coords = _fuchsian_flow_spec(seed)
    path = FlowPath.straight(coords, (0.3 + 0.4j, 2.0 + 1.0j), (0.5 + 0.6j, 2.3 + 0.8j))
    report = semiclassical_check(integrate_flow(spec, path, config), [1.0, 0.5, 0.1])
    # a cubic Hamiltonian breaks the action identity
    q, p = q_gen(0), p_gen(0)
    flow = integrate_polynomial_flow(var(p) * var(q) * var(q), {q: 0.5, p: 1.0}, (0.0, 0.5), config)
    defect = polynomial_action_defect(flow, 0.25)
    report.record("cubic Hamiltonian violates the action identity", defect > 1e-3, defect)
    return report


PAINLEVE_RUNS = {
    PainleveKind.V: ({"theta0": Fraction(3, 10), "thetat": Fraction(1, 5), "k": Fraction(11, 10),
                      "a": Fraction(2, 5)}, (0.4 + 0.1j, 0.3 - 0.2j)),
    PainleveKind.IV: ({"thetat": Fraction(1, 3), "theta2": Fraction(1, 4), "theta3": 1,
                       "I0": Fraction(1, 2)}, (0.5 + 0.2j, 0.3 + 0.1j)),
    PainleveKind.III: ({"theta1": Fraction(1, 3), "theta2": Fraction(1, 2), "theta3": 1,
                        "I0": Fraction(1, 4)}, (0.6 + 0.1j, 0.4 - 0.1j)),
    PainleveKind.II: ({"theta2": Fraction(1, 3), "theta3": Fraction(1, 2), "theta4": 1,
                       "I0": Fraction(1, 5)}, (0.5 + 0.3j, 0.2 + 0.1j)),
}

PVI_PARAMETERS = {"theta0": Fraction(1, 3), "theta1": Fraction(1, 4), "thetat": Fraction(1, 5)}


def _painleve_suite(kind: str, tol: float) -> VerificationReport:
    kind = PainleveKind.parse(kind)
    if kind == PainleveKind.VI:
        return verify_painleve(PainleveParameters(kind, PVI_PARAMETERS), Fraction(1, 2))
    values, (u, v) = PAINLEVE_RUNS[kind]
    params = PainleveParameters(kind, values)
    report = verify_painleve(params, Fraction(1))
    system = painleve_system(params)
    trajectory = integrate_painleve(system, ReducedState(1.0, u, v), (1.0, 1.25),
                                    IntegratorConfig(rtol=tol, atol=tol * 1e-2))
    residual = scalar_residual(trajectory)
    report.record("scalar equation residual", residual <= RESIDUAL_TOL, residual)
    return report


def _quantum_suite(seed: int) -> VerificationReport:
    reports = [quantum_report(PainleveParameters(PainleveKind.VI, PVI_PARAMETERS), 1)]
    for kind in (PainleveKind.V, PainleveKind.IV, PainleveKind.III, PainleveKind.II):
        reports.append(quantum_report(PainleveParameters(kind, PAINLEVE_RUNS[kind][0]), 2))
    reports.append(piii_quantum_reduction(PainleveParameters(PainleveKind.III, PAINLEVE_RUNS[PainleveKind.III][0]), 2))

    rng = random.Random(seed)
    spec = schlesinger_spec([0, 1, Fraction(1, 3)], [_random_exact_matrix(rng, 2) for _ in range(3)],
                            [False, True, True])
    points = [{TimeCoordinate("u", 1): 1.0 + 0.1j, TimeCoordinate("u", 2): 0.4 + 0.3j}]
    reports.append(confluent_kz_report(spec, 1, points))

    q0, p0, q1, p1 = q_gen(0), p_gen(0), q_gen(1), p_gen(1)
    assignment = {q0: multiply(0), p0: derivative(0), q1: multiply(1), p1: derivative(1)}
    pairs = [(var(q0) * var(p0), var(q1) * var(p0)), (var(q0) * var(p1), var(q1) * var(p0)),
             (var(q0) * var(q1) * var(p0) * var(p1), var(q0) * var(p1))]
    reports.append(classical_limit_check(pairs, assignment, MonomialBasis(2, 3), WEYL))
    return _merged("quantum", reports)


def _katz_suite(seed: int) -> VerificationReport:
    rng = random.Random(seed)
    report = VerificationReport("katz")
    report.record("sl2 four points", katz_dimension([[1, 1]] * 4) == 2)
    for trial in range(5):
        m = rng.randint(2, 4)
        types = []
        for _ in range(rng.randint(3, 5)):
            parts, left = [], m
            while left:
                part = rng.randint(1, left)
                parts.append(part)
                left -= part
            types.append(parts)
        n, count = katz_dimension(types), katz_symplectic_count(types)
        report.record(f"random data {trial}", n == count, abs(n - count), dimension=n)
    return report


def _verify_all_tasks(max_rank: int, m: int, seed: int, tol: float) -> List[Tuple[Callable, Dict[str, Any]]]:
    tasks: List[Tuple[Callable, Dict[str, Any]]] = []
    for r in range(max_rank + 1):
        for size in range(1, m + 1):
            tasks += [(verify_kks, {"r": r, "m": size}), (verify_casimirs, {"r": r, "m": size}),
                      (verify_inner_outer, {"r": r, "m": size})]
    tasks += [(verify_identities, {"r": r}) for r in range(1, 7)]
    tasks += [(verify_ideal, {"r": r}) for r in range(1, 5)]
    tasks += [
        (_chart_suite, {}),
        (_commutation_suite, {"seed": seed}),
        (_confluence_suite, {"seed": seed}),
        (_flow_suite, {"seed": seed, "tol": tol}),
        (_semiclassical_suite, {"seed": seed, "tol": tol}),
        (_quantum_suite, {"seed": seed}),
        (_katz_suite, {"seed": seed}),
    ]
    tasks += [(_painleve_suite, {"kind": kind.value, "tol": tol}) for kind in PainleveKind]
    return tasks


def _verify_all(args: argparse.Namespace, run: RunConfig) -> CommandResult:
    max_rank = run.settings.max_rank if args.max_rank is None else args.max_rank
    if max_rank < 0 or args.m < 1:
        raise IndexRangeError("Need --max-rank ≥ 0 and --m ≥ 1", {"max_rank": max_rank, "m": args.m})
    tasks = _verify_all_tasks(max_rank, args.m, run.seed, run.settings.tol)
    logger.info("verify_all_started", tasks=len(tasks), threads=run.settings.threads)
    report = _merged("verify-all", run_sweep(tasks, run.settings.threads))
    payload = {"command": run.command, "max_rank": max_rank, "m": args.m, "seed": run.seed}
    return CommandResult(payload, report)


HANDLERS: Dict[str, Callable[[argparse.Namespace, RunConfig], CommandResult]] = {
    "bracket-verify": _bracket_verify,
    "monomials": _monomials,
    "hamiltonians": _hamiltonians,
    "confluence": _confluence,
    "flow": _flow,
    "painleve": _painleve,
    "kz": _kz,
    "verify-all": _verify_all,
}


# ----------------------------------------------------------------------
# entry point


def _run_config(args: argparse.Namespace) -> RunConfig:
    verbose = getattr(args, "verbose", False)
    settings = IsolabConfig.from_env({
        "threads": getattr(args, "threads", None),
        "log_level": "DEBUG" if verbose else None,
    })
    settings.validate_environment()
    default_format = "csv" if args.command in CSV_COMMANDS else "json"
    return RunConfig(command=args.command, out=getattr(args, "out", None),
                     format=getattr(args, "format", default_format), seed=getattr(args, "seed", 7),
                     verbose=verbose, settings=settings)


def _emit(result: CommandResult, run: RunConfig) -> None:
    payload = dict(result.payload)
    if result.report is not None and "report" not in payload:
        payload["report"] = result.report.to_dict()
    if run.format == "csv":
        if result.write_csv is None:
            raise SpecFormatError(f"{run.command} has no CSV output", {"format": run.format})
        if run.out is None:
            result.write_csv(sys.stdout)
        else:
            with open(run.out, "w", encoding="utf-8", newline="") as stream:
                result.write_csv(stream)
            logger.info("csv_written", path=run.out)
        return
    write_json(payload, run.out, sys.stdout)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run one subcommand and return the exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return ExitCode.OK if e.code in (0, None) else ExitCode.USAGE_ERROR
    try:
        run_config = _run_config(args)
        setup_logging(run_config.settings.log_level, run_config.settings.log_dir)
        logger.info("command_started", command=args.command, threads=run_config.settings.threads)
        result = HANDLERS[args.command](args, run_config)
        _emit(result, run_config)
    except IsolabError as e:
        logger.error("command_failed", command=args.command, error=type(e).__name__, code=e.code)
        print(f"isolab {args.command}: {type(e).__name__}: {e.message}", file=sys.stderr)
        return ExitCode.USAGE_ERROR
    report = result.report
    if report is None:
        return ExitCode.OK
    if run_config.verbose or sys.stderr.isatty():
        report.render(Console(stderr=True))
    if not report.passed:
        logger.warning("verification_failed", command=args.command, failures=len(report.failures))
        return ExitCode.VERIFICATION_FAILED
    return ExitCode.OK


def main() -> None:
    sys.exit(run())
