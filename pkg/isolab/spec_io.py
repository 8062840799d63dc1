"""
Structured I/O
==============

JSON/YAML input files validated against JSON schemas, deterministic JSON
output and the CSV writers of the Painlevé and KZ runs.

Scalars follow one convention in both directions: integers and ``"p/q"``
strings are exact rationals, ``["p/q", "r/s"]`` pairs exact Gaussian
rationals, and pairs of floats ``[re, im]`` complex numbers.
"""

import csv
import json
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import jsonschema
import numpy as np
import yaml

from .algebra_core import object_matrix
from .confluence import EpsLaurentMatrix, LaurentPole
from .connection import INF, ConnectionSpec, PoleData, TimeCoordinate, is_infinite, time_coordinates
from .errors import SpecFormatError
from .isoflow import FlowPath
from .logging_utils import get_logger
from .painleve import PainleveKind, PainleveParameters, PainleveTrajectory, ReducedState
from .scalars import format_scalar, parse_scalar
from .takiff import lifted_A

logger = get_logger(__name__)

SCALAR_SCHEMA: Dict[str, Any] = {
    "anyOf": [
        {"type": "integer"},
        {"type": "number"},
        {"type": "string", "pattern": r"^\s*[-+]?\d+(\.\d+)?(\s*/\s*\d+)?\s*$"},
        {"type": "array", "minItems": 2, "maxItems": 2,
         "items": {"anyOf": [{"type": "number"}, {"type": "string"}]}},
    ]
}

MATRIX_SCHEMA: Dict[str, Any] = {
    "type": "array", "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": SCALAR_SCHEMA},
}

POLE_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "position": {"anyOf": [{"const": INF}, SCALAR_SCHEMA]},
        "rank": {"type": "integer", "minimum": 0},
        "times": {"type": "array", "items": SCALAR_SCHEMA},
        "coefficients": {"type": "array", "minItems": 1, "items": MATRIX_SCHEMA},
        "Q": {"type": "array", "minItems": 1, "items": MATRIX_SCHEMA},
        "P": {"type": "array", "minItems": 1, "items": MATRIX_SCHEMA},
        "theta": {"type": "array", "items": SCALAR_SCHEMA},
        "movable": {"type": "boolean"},
        "name": {"type": "string"},
    },
    "required": ["position"],
    "oneOf": [{"required": ["coefficients"]}, {"required": ["Q", "P"]}],
    "additionalProperties": False,
}

CONNECTION_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "m": {"type": "integer", "minimum": 1},
        "poles": {"type": "array", "minItems": 1, "items": POLE_SCHEMA},
        "fuchs": {"type": "boolean"},
    },
    "required": ["m", "poles"],
    "additionalProperties": False,
}

PATH_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "coordinates": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "knots": {"type": "array", "minItems": 2, "items": {"type": "array", "items": SCALAR_SCHEMA}},
        "staircase": {"type": "boolean"},
    },
    "required": ["coordinates", "knots"],
    "additionalProperties": False,
}

PAINLEVE_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "kind": {"type": "string"},
        "params": {"type": "object", "additionalProperties": SCALAR_SCHEMA},
        "initial": {
            "type": "object",
            "properties": {"u": SCALAR_SCHEMA, "v": SCALAR_SCHEMA},
            "required": ["u", "v"],
            "additionalProperties": False,
        },
        "point": {"type": "object", "additionalProperties": SCALAR_SCHEMA},
        "trange": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
    },
    "required": ["params"],
    "additionalProperties": False,
}

SERIES_SCHEMA: Dict[str, Any] = {
    "oneOf": [
        MATRIX_SCHEMA,
        {"type": "object", "patternProperties": {r"^-?\d+$": MATRIX_SCHEMA},
         "minProperties": 1, "additionalProperties": False},
    ]
}

CONFLUENCE_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "m": {"type": "integer", "minimum": 1},
        "poles": {
            "type": "array", "minItems": 2,
            "items": {
                "type": "object",
                "properties": {
                    "position": {"anyOf": [{"const": INF}, SCALAR_SCHEMA]},
                    "coefficients": {"type": "array", "minItems": 1, "items": SERIES_SCHEMA},
                    "times": {"type": "array", "items": SCALAR_SCHEMA},
                    "movable": {"type": "boolean"},
                    "name": {"type": "string"},
                },
                "required": ["position", "coefficients"],
                "additionalProperties": False,
            },
        },
        "merge": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "integer", "minimum": 0}},
        "times": {"type": "array", "minItems": 1, "items": SCALAR_SCHEMA},
    },
    "required": ["m", "poles"],
    "additionalProperties": False,
}

_COORDINATE = re.compile(r"^\s*(?:u\[(\d+)\]|t\[(\d+)\s*,\s*(\d+)\])\s*$")


# ----------------------------------------------------------------------
# reading


def load_document(path: Union[str, Path]) -> Any:
    """JSON, or YAML for ``.yml``/``.yaml`` files"""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            if path.suffix.lower() in (".yml", ".yaml"):
                return yaml.safe_load(handle)
            return json.load(handle)
    except FileNotFoundError:
        raise SpecFormatError(f"Input file not found: {path}", {"path": path}) from None
    except (OSError, json.JSONDecodeError, yaml.YAMLError) as e:
        raise SpecFormatError(f"Cannot read {path}: {e}", {"path": path}) from e


def validate(document: Any, schema: Mapping[str, Any], what: str) -> None:
    try:
        jsonschema.validate(instance=document, schema=schema)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise SpecFormatError(f"Invalid {what} at {where}: {e.message}", {"path": where}) from e


def _scalar(raw: Any, where: str):
    try:
        return parse_scalar(raw)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise SpecFormatError(f"Bad scalar at {where}: {raw!r}", {"path": where}) from e


def parse_matrix(rows: Sequence[Sequence[Any]], m: Optional[int] = None, where: str = "matrix") -> np.ndarray:
    matrix = object_matrix([[_scalar(x, where) for x in row] for row in rows])
    if m is not None and matrix.shape != (m, m):
        raise SpecFormatError(f"{where} must be {m}x{m}", {"path": where, "shape": matrix.shape})
    return matrix


def _position(raw: Any, where: str):
    return INF if raw == INF else _scalar(raw, where)


def parse_time_coordinate(text: str) -> TimeCoordinate:
    """``u[i]`` or ``t[i,k]``, as printed by TimeCoordinate"""
    match = _COORDINATE.match(text)
    if match is None:
        raise SpecFormatError(f"Bad time coordinate {text!r}", {"expected": "u[i] or t[i,k]"})
    if match.group(1) is not None:
        return TimeCoordinate("u", int(match.group(1)))
    return TimeCoordinate("t", int(match.group(2)), int(match.group(3)))


def _pole_from_dict(entry: Mapping[str, Any], m: int, index: int) -> PoleData:
    where = f"poles/{index}"
    position = _position(entry["position"], f"{where}/position")
    if "coefficients" in entry:
        coefficients = [parse_matrix(c, m, f"{where}/coefficients/{k}") for k, c in enumerate(entry["coefficients"])]
    else:
        q = [parse_matrix(c, m, f"{where}/Q/{k}") for k, c in enumerate(entry["Q"])]
        p = [parse_matrix(c, m, f"{where}/P/{k}") for k, c in enumerate(entry["P"])]
        if len(q) != len(p):
            raise SpecFormatError("Q and P need the same number of slots", {"path": where})
        sign = -1 if is_infinite(position) else 1
        coefficients = [c * sign for c in lifted_A(q, p).coefficients]
    rank = entry.get("rank", len(coefficients) - 1)
    if rank != len(coefficients) - 1:
        raise SpecFormatError("Rank differs from the number of coefficients",
                              {"path": where, "rank": rank, "coefficients": len(coefficients)})
    times = [_scalar(t, f"{where}/times") for t in entry["times"]] if "times" in entry else None
    theta = tuple(_scalar(x, f"{where}/theta") for x in entry["theta"]) if "theta" in entry else None
    return PoleData(position, coefficients, times, theta, entry.get("movable", True), entry.get("name", ""))


def connection_from_dict(document: Any) -> ConnectionSpec:
    validate(document, CONNECTION_SCHEMA, "connection spec")
    m = document["m"]
    poles = [_pole_from_dict(entry, m, i) for i, entry in enumerate(document["poles"])]
    return ConnectionSpec(m, poles, document.get("fuchs", False))


def load_connection_spec(path: Union[str, Path]) -> ConnectionSpec:
    spec = connection_from_dict(load_document(path))
    logger.info("spec_loaded", path=str(path), m=spec.m, poles=len(spec.poles))
    return spec


def path_from_dict(document: Any, spec: Optional[ConnectionSpec] = None) -> FlowPath:
    validate(document, PATH_SCHEMA, "path")
    coordinates = [parse_time_coordinate(c) for c in document["coordinates"]]
    if spec is not None:
        known = set(time_coordinates(spec))
        unknown = [str(c) for c in coordinates if c not in known]
        if unknown:
            raise SpecFormatError("Path moves times the spec does not have", {"unknown": unknown})
    knots = [tuple(_scalar(x, f"knots/{i}") for x in knot) for i, knot in enumerate(document["knots"])]
    if document.get("staircase", False):
        if len(knots) != 2:
            raise SpecFormatError("A staircase path takes exactly a start and an end knot")
        return FlowPath.staircase(coordinates, knots[0], knots[1])
    return FlowPath(coordinates, knots)


def load_path(path: Union[str, Path], spec: Optional[ConnectionSpec] = None) -> FlowPath:
    return path_from_dict(load_document(path), spec)


@dataclass
class PainleveRun:
    params: PainleveParameters
    initial: Optional[ReducedState] = None
    point: Optional[Dict[str, complex]] = None
    trange: Optional[Tuple[float, float]] = None


def painleve_from_dict(document: Any, kind: Optional[str] = None) -> PainleveRun:
    """A Painlevé run; ``kind`` fills in or must agree with the document's kind"""
    validate(document, PAINLEVE_SCHEMA, "Painlevé parameters")
    declared = document.get("kind")
    if declared is None and kind is None:
        raise SpecFormatError("Painlevé kind missing from both the document and the command line")
    if declared is not None and kind is not None and PainleveKind.parse(declared) != PainleveKind.parse(kind):
        raise SpecFormatError("Painlevé kind disagrees with the document", {"document": declared, "requested": kind})
    values = {name: _scalar(value, f"params/{name}") for name, value in document["params"].items()}
    params = PainleveParameters(kind if declared is None else declared, values)
    trange = tuple(document["trange"]) if "trange" in document else None
    initial = None
    if "initial" in document:
        t0 = trange[0] if trange else None
        initial = ReducedState(t0, complex(_scalar(document["initial"]["u"], "initial/u")),
                               complex(_scalar(document["initial"]["v"], "initial/v")))
    point = None
    if "point" in document:
        point = {name: complex(_scalar(value, f"point/{name}")) for name, value in document["point"].items()}
    return PainleveRun(params, initial, point, trange)


def load_painleve(path: Union[str, Path], kind: Optional[str] = None) -> PainleveRun:
    return painleve_from_dict(load_document(path), kind)


def _series(raw: Any, m: int, where: str) -> EpsLaurentMatrix:
    if isinstance(raw, list):
        return EpsLaurentMatrix(m, {0: parse_matrix(raw, m, where)})
    return EpsLaurentMatrix(m, {int(j): parse_matrix(w, m, f"{where}/{j}") for j, w in raw.items()})


@dataclass
class ConfluenceInput:
    m: int
    poles: List[LaurentPole]
    merge: Optional[Tuple[int, int]] = None
    times: Optional[Tuple[Any, ...]] = None


def confluence_from_dict(document: Any) -> ConfluenceInput:
    validate(document, CONFLUENCE_SCHEMA, "confluence scenario")
    m = document["m"]
    poles = []
    for i, entry in enumerate(document["poles"]):
        where = f"poles/{i}"
        series = [_series(c, m, f"{where}/coefficients/{k}") for k, c in enumerate(entry["coefficients"])]
        times = tuple(_scalar(t, f"{where}/times") for t in entry.get("times", ()))
        poles.append(LaurentPole(_position(entry["position"], f"{where}/position"), series, times,
                                 entry.get("movable", True), entry.get("name", "")))
    merge = tuple(document["merge"]) if "merge" in document else None
    times = tuple(_scalar(t, "times") for t in document["times"]) if "times" in document else None
    return ConfluenceInput(m, poles, merge, times)


def load_confluence(path: Union[str, Path]) -> ConfluenceInput:
    return confluence_from_dict(load_document(path))


# ----------------------------------------------------------------------
# writing


def matrix_to_json(matrix: np.ndarray) -> List[List[Any]]:
    return [[format_scalar(x) for x in row] for row in np.asarray(matrix, dtype=object)]


def connection_to_dict(spec: ConnectionSpec) -> Dict[str, Any]:
    poles = []
    for pole in spec.poles:
        entry: Dict[str, Any] = {
            "position": INF if pole.at_infinity else format_scalar(pole.position),
            "rank": pole.rank,
            "times": [format_scalar(t) for t in pole.times.values],
            "coefficients": [matrix_to_json(c) for c in pole.coefficients],
        }
        if pole.theta is not None:
            entry["theta"] = [format_scalar(x) for x in pole.theta]
        if not pole.movable:
            entry["movable"] = False
        if pole.name:
            entry["name"] = pole.name
        poles.append(entry)
    document = {"m": spec.m, "poles": poles}
    if spec.fuchs:
        document["fuchs"] = True
    return document


def dumps(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2)


def write_json(payload: Any, destination: Optional[Union[str, Path]] = None, stream: Optional[IO[str]] = None) -> None:
    text = dumps(payload) + "\n"
    if destination is None:
        (stream if stream is not None else sys.stdout).write(text)
        return
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("json_written", path=str(path))


def _complex_columns(name: str) -> List[str]:
    return [f"{name}.re", f"{name}.im"]


def write_painleve_csv(trajectory: PainleveTrajectory, stream: IO[str], samples: int = 64) -> int:
    """t, (u, v, I) and the raw state at evenly spaced times"""
    writer = csv.writer(stream)
    lo, hi = trajectory.t_span
    first = trajectory.state(lo)
    reduced = trajectory.system.reduction is not None or trajectory.level == "reduced"
    columns = ["t"]
    if reduced:
        columns += _complex_columns("u") + _complex_columns("v") + _complex_columns("I")
    columns += [c for k in range(len(first)) for c in _complex_columns(f"y{k}")]
    writer.writerow(columns)
    count = 0
    for t in np.linspace(lo, hi, samples + 1):
        head = trajectory.reduced_at(t) if reduced else ()
        row: List[float] = [float(t)]
        for value in (*head, *trajectory.state(t)):
            value = complex(value)
            row += [value.real, value.imag]
        writer.writerow(row)
        count += 1
    logger.info("painleve_trajectory_written", rows=count)
    return count


def write_kz_csv(solution, stream: IO[str]) -> int:
    """s, the time coordinates and the coefficient vector W"""
    writer = csv.writer(stream)
    system = solution.system
    columns = ["s"]
    for c in system.coordinates:
        columns += _complex_columns(str(c))
    columns += [c for k in range(system.basis.size) for c in _complex_columns(f"w{k}")]
    writer.writerow(columns)
    for s, w in zip(solution.s, solution.w):
        row: List[float] = [float(s)]
        point = solution.point(float(s))
        for c in system.coordinates:
            row += [point[c].real, point[c].imag]
        for value in w:
            row += [value.real, value.imag]
        writer.writerow(row)
    logger.info("kz_solution_written", rows=len(solution.s))
    return len(solution.s)
