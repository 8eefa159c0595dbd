from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uqtmlab import library
from uqtmlab.cli import builtin_machine_text
from uqtmlab.fileio import (
    ParseError,
    ReportError,
    RunReport,
    emit_machine,
    emit_matrix,
    emit_report,
    parse_input,
    parse_input_spec,
    parse_machine_file,
    parse_matrix_file,
    to_json,
)
from uqtmlab.state import Config

IDENTITY = """\
# minimal machine: halt qubit only
proc_qubits 1
halt_qubit 0
rule 0 0 -> 0 0 R 1 0
rule 0 1 -> 0 1 R 1 0
rule 1 0 -> 1 0 R 1 0
rule 1 1 -> 1 1 R 1 0
"""


def test_parse_minimal_identity():
    m = parse_machine_file(IDENTITY)
    assert m.same_table(library.identity_machine())


def test_non_total_names_the_pair():
    text = IDENTITY.replace("rule 1 1 -> 1 1 R 1 0\n", "")
    with pytest.raises(ParseError, match=r"non-total.*q=1, s=1"):
        parse_machine_file(text)


@pytest.mark.parametrize(
    "text,line,col",
    [
        ("proc_qubits 1\nhalt_qubit 1\n", 2, 12),
        ("proc_qubits x\n", 1, 13),
        ("proc_qubits 1\nhalt_qubit 0\nrule 0 0 -> 0 0 U 1 0\n", 3, 17),
        ("proc_qubits 1\nhalt_qubit 0\nrule 0 0 -> 0 0 R 1\n", 3, 13),
        ("proc_qubits 1\nhalt_qubit 0\nrule 0 0 -> 0 0 R 1 0\nrule 0 0 -> 0 0 R 1 0\n", 4, 1),
        ("proc_qubits 1\nhalt_qubit 0\nrule 0 0 0 0 R 1 0\n", 3, 1),
        ("bogus 1\n", 1, 1),
        ("rule 0 0 -> 0 0 R 1 0\n", 1, 1),
    ],
)
def test_parse_errors_have_positions(text, line, col):
    with pytest.raises(ParseError) as ei:
        parse_machine_file(text)
    assert (ei.value.line, ei.value.col) == (line, col)
    assert f"line {line}, col {col}" in str(ei.value)


def test_ill_formed_table_rejected_unless_skipped():
    text = IDENTITY.replace("rule 0 0 -> 0 0 R 1 0", "rule 0 0 -> 0 0 R 0.5 0")
    with pytest.raises(ParseError, match="well-formed"):
        parse_machine_file(text)
    assert parse_machine_file(text, validate=False).rule(0, 0).successors[0].amp == 0.5


@pytest.mark.parametrize("m", [*library.bundled().values(), library.program_machine(), library.sync_machine(2)], ids=lambda m: m.name)
def test_machine_round_trip(m):
    text = emit_machine(m)
    m2 = parse_machine_file(text)
    assert m2.same_table(m) and m2.name == m.name
    assert emit_machine(m2) == text


@pytest.mark.parametrize("name", ["identity", "hadamard", "myers-2-5"])
def test_bundled_files_match_library(name):
    m = parse_machine_file(builtin_machine_text(name))
    assert m.same_table(library.bundled()[name])


def test_matrix_round_trip_and_errors():
    u = np.array([[0, 1j], [1, 0]]) @ np.diag([1, np.exp(0.3j)])
    assert np.array_equal(parse_matrix_file(emit_matrix(u)), u)
    with pytest.raises(ParseError):
        parse_matrix_file("dim 2\n1,0 0,0\n")
    with pytest.raises(ParseError):
        parse_matrix_file("dim 1\n1\n")
    with pytest.raises(ParseError):
        parse_matrix_file("")


def test_input_specs():
    s, amp = parse_input_spec("head=1 proc=2 tape=0101 offset=-1 amp=0,1")
    (cfg, a), = s.items()
    assert cfg == Config(1, 2, {0, 2}) and amp == 1j
    sup = parse_input(["tape=0", "tape=1 amp=-1"])
    assert len(sup) == 2 and sup.norm() == pytest.approx(1.0)
    for bad in ["tape=012", "head=x", "color=red", "tape=0 tape=1"]:
        with pytest.raises(ParseError):
            parse_input_spec(bad)
    with pytest.raises(ParseError):
        parse_input(["tape=0", "tape=0 amp=-1"])


def _series_row(k, x):
    return {"step": k, "halt_prob": x, "halt_entropy": x / 3, "comp_purity": 1 - x, "norm": 1.0}


def test_empty_series_json_and_csv():
    r = RunReport("empty", {})
    assert json.loads(emit_report(r))["series"] == []
    assert emit_report(r, "csv") == "step,halt_prob,halt_entropy,comp_purity,norm\n"


def test_csv_rows_and_columns(tmp_path):
    r = RunReport("x", {}, [_series_row(k, k / 7) for k in range(1, 4)])
    path = tmp_path / "out.csv"
    text = emit_report(r, "csv", path)
    assert path.read_text() == text
    lines = text.splitlines()
    assert lines[0] == "step,halt_prob,halt_entropy,comp_purity,norm" and len(lines) == 4


def test_report_write_error_has_path(tmp_path):
    bad = tmp_path / "missing" / "r.json"
    with pytest.raises(ReportError, match="missing"):
        emit_report(RunReport("x", {}), "json", bad)


def test_json_floats_and_complex():
    text = to_json({"a": 0.1, "b": 1.0, "c": 1 + 2j, "d": np.float64(3.5), "e": float("nan"), "f": np.array([1, 2])})
    back = json.loads(text)
    assert back == {"a": 0.1, "b": 1.0, "c": [1.0, 2.0], "d": 3.5, "e": None, "f": [1, 2]}
    assert "0.10000000000000001" in text
    assert isinstance(back["b"], float)


finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=100, deadline=None)
@given(st.recursive(st.none() | st.booleans() | st.integers(-10**6, 10**6) | finite | st.text(max_size=8), lambda c: st.lists(c, max_size=4) | st.dictionaries(st.text(max_size=5), c, max_size=4), max_leaves=20))
def test_json_round_trip_lossless(obj):
    assert json.loads(to_json(obj)) == obj


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), max_size=10))
def test_csv_values_round_trip(xs):
    r = RunReport("x", {}, [_series_row(k, x) for k, x in enumerate(xs, 1)])
    rows = emit_report(r, "csv").splitlines()[1:]
    assert [float(row.split(",")[1]) for row in rows] == xs
