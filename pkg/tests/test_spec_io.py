import io
import json
from fractions import Fraction

import pytest

from isolab.algebra_core import matrices_equal, object_matrix
from isolab.connection import INF, TimeCoordinate
from isolab.errors import SpecFormatError
from isolab.painleve import PainleveKind
from isolab.spec_io import (confluence_from_dict, connection_from_dict, connection_to_dict, load_connection_spec,
                            load_painleve, painleve_from_dict, parse_time_coordinate, path_from_dict, write_json)

TWO_POLES = {
    "m": 2,
    "poles": [
        {"position": 0, "coefficients": [[[1, 0], [0, -1]]], "name": "origin"},
        {"position": "1/2", "coefficients": [[["1/2", 2], [3, "-1/2"]]], "movable": False},
    ],
}


def test_connection_from_dict():
    spec = connection_from_dict(TWO_POLES)
    assert spec.m == 2
    assert spec.poles[1].position == Fraction(1, 2)
    assert not spec.poles[1].movable
    assert spec.poles[0].name == "origin"
    assert matrices_equal(spec.poles[1].coefficients[0],
                          object_matrix([[Fraction(1, 2), 2], [3, Fraction(-1, 2)]]))


def test_connection_written_back():
    document = connection_to_dict(connection_from_dict(TWO_POLES))
    assert document["poles"][1]["position"] == "1/2"
    assert document["poles"][1]["coefficients"] == [[["1/2", 2], [3, "-1/2"]]]
    assert document["poles"][1]["movable"] is False
    assert connection_to_dict(connection_from_dict(document)) == document


def test_lifted_pole_input():
    document = {"m": 1, "poles": [{"position": 0, "Q": [[[2]]], "P": [[[3]]]},
                                  {"position": INF, "Q": [[[1]], [[1]]], "P": [[[1]], [[2]]]}]}
    spec = connection_from_dict(document)
    assert spec.poles[0].coefficients[0][0, 0] == 6
    assert spec.poles[1].at_infinity
    assert spec.poles[1].rank == 1


@pytest.mark.parametrize("document", [
    {"poles": TWO_POLES["poles"]},
    {"m": 2, "poles": []},
    {"m": 2, "poles": [{"position": 0}]},
    {"m": 2, "poles": [{"position": 0, "coefficients": [[[1, 0], [0, 1]]], "colour": "red"}]},
    {"m": 2, "poles": [{"position": 0, "coefficients": [[[1, 0], [0, "one"]]]}]},
])
def test_schema_violations(document):
    with pytest.raises(SpecFormatError):
        connection_from_dict(document)


def test_wrong_matrix_size():
    document = {"m": 3, "poles": TWO_POLES["poles"]}
    with pytest.raises(SpecFormatError):
        connection_from_dict(document)


def test_rank_must_match_coefficients():
    document = {"m": 2, "poles": [dict(TWO_POLES["poles"][0], rank=1)]}
    with pytest.raises(SpecFormatError):
        connection_from_dict(document)


def test_missing_file(tmp_path):
    with pytest.raises(SpecFormatError):
        load_connection_spec(tmp_path / "absent.json")


def test_broken_json(tmp_path):
    target = tmp_path / "broken.json"
    target.write_text("{\"m\": 2,", encoding="utf-8")
    with pytest.raises(SpecFormatError):
        load_connection_spec(target)


def test_yaml_accepted(tmp_path):
    target = tmp_path / "spec.yaml"
    target.write_text(
        "m: 2\n"
        "poles:\n"
        "  - position: 0\n"
        "    coefficients:\n"
        "      - [[1, 0], [0, -1]]\n"
        "  - position: 1\n"
        "    coefficients:\n"
        "      - [[-1, 0], [0, 1]]\n",
        encoding="utf-8",
    )
    spec = load_connection_spec(target)
    assert len(spec.poles) == 2
    assert spec.poles[1].coefficients[0][0, 0] == -1


@pytest.mark.parametrize("text,expected", [
    ("u[3]", TimeCoordinate("u", 3)),
    ("t[0,2]", TimeCoordinate("t", 0, 2)),
    (" t[1, 1] ", TimeCoordinate("t", 1, 1)),
])
def test_time_coordinates(text, expected):
    assert parse_time_coordinate(text) == expected


def test_bad_time_coordinate():
    with pytest.raises(SpecFormatError):
        parse_time_coordinate("s[1]")


def test_path_checked_against_spec():
    spec = connection_from_dict(TWO_POLES)
    path = path_from_dict({"coordinates": ["u[0]"], "knots": [[0], [[0.1, 0.2]]]}, spec)
    assert path.knots[-1] == (0.1 + 0.2j,)
    with pytest.raises(SpecFormatError):
        path_from_dict({"coordinates": ["t[0,1]"], "knots": [[1], [2]]}, spec)
    with pytest.raises(SpecFormatError):
        path_from_dict({"coordinates": ["u[0]"], "knots": [[0], [1], [2]], "staircase": True})


PAINLEVE = {"params": {"thetat": "1/3", "theta2": "1/4", "theta3": 1, "I0": "1/2"},
            "initial": {"u": [0.5, 0.2], "v": [0.3, 0.1]}, "trange": [1.0, 1.5]}


def test_painleve_kind_from_flag():
    run = painleve_from_dict(PAINLEVE, "IV")
    assert run.params.kind is PainleveKind.IV
    assert run.params["thetat"] == Fraction(1, 3)
    assert run.initial.t == 1.0
    assert run.initial.position == 0.5 + 0.2j
    assert run.trange == (1.0, 1.5)


def test_painleve_kind_conflict(tmp_path):
    target = tmp_path / "piv.json"
    target.write_text(json.dumps(dict(PAINLEVE, kind="PIV")), encoding="utf-8")
    assert load_painleve(target, "iv").params.kind is PainleveKind.IV
    with pytest.raises(SpecFormatError):
        load_painleve(target, "II")


def test_painleve_needs_kind_and_params():
    with pytest.raises(SpecFormatError):
        painleve_from_dict(PAINLEVE)
    with pytest.raises(SpecFormatError):
        painleve_from_dict({"kind": "IV"})


def test_confluence_scenario():
    document = {
        "m": 1,
        "poles": [
            {"position": 0, "coefficients": [{"-1": [[-1]], "0": [[2]]}]},
            {"position": "1/2", "coefficients": [{"-1": [[1]]}]},
        ],
        "merge": [0, 1],
        "times": ["1/2"],
    }
    scenario = confluence_from_dict(document)
    assert scenario.merge == (0, 1)
    assert scenario.times == (Fraction(1, 2),)
    assert scenario.poles[0].coefficients[0].divergent_powers() == [-1]


def test_write_json_is_sorted(tmp_path):
    stream = io.StringIO()
    write_json({"b": 1, "a": [1, 2]}, stream=stream)
    assert stream.getvalue().index('"a"') < stream.getvalue().index('"b"')
    target = tmp_path / "nested" / "out.json"
    write_json({"x": "1/2"}, target)
    assert json.loads(target.read_text(encoding="utf-8")) == {"x": "1/2"}
