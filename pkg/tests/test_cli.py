from __future__ import annotations

import json
import subprocess
import sys

import pytest

from uqtmlab.cli import main
from uqtmlab.fileio import emit_machine, emit_matrix
from uqtmlab import gates, library


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_params_prints_counts(capsys):
    code, out, _ = run_cli(capsys, "params", "--m", "1")
    assert code == 0 and out.strip() == "(3, 4, 12)"
    code, out, _ = run_cli(capsys, "params", "--m", "2", "--format", "json")
    assert json.loads(out)["final"] == {"data_state": 7, "unitary": 16, "program_state": 112}


def test_params_out_of_range(capsys):
    assert run_cli(capsys, "params", "--m", "0")[0] == 2


def test_validate_builtin_and_file(capsys, tmp_path):
    assert run_cli(capsys, "validate", "--builtin", "identity")[0] == 0
    path = tmp_path / "h.qtm"
    path.write_text(emit_machine(library.hadamard_machine()))
    code, out, _ = run_cli(capsys, "validate", "--machine", str(path), "--windows", "3", "4")
    assert code == 0 and json.loads(out)["final"]["pass"] is True


def test_validate_reports_ill_formed(capsys, tmp_path):
    text = emit_machine(library.identity_machine()).replace("rule 0 0 -> 0 0 R 1 0", "rule 0 0 -> 0 0 R 0.5 0")
    path = tmp_path / "bad.qtm"
    path.write_text(text)
    assert run_cli(capsys, "validate", "--machine", str(path))[0] == 1
    # other commands parse with validation and treat it as a parse error
    assert run_cli(capsys, "run", "--machine", str(path))[0] == 2
    assert run_cli(capsys, "run", "--machine", str(path), "--no-validate", "--steps", "1")[0] == 0


def test_parse_error_exit_code(capsys, tmp_path):
    path = tmp_path / "broken.qtm"
    path.write_text("proc_qubits 1\nhalt_qubit 5\n")
    code, _, err = run_cli(capsys, "validate", "--machine", str(path))
    assert code == 2 and "line 2" in err
    assert run_cli(capsys, "validate", "--machine", str(tmp_path / "nope.qtm"))[0] == 2


def test_usage_errors(capsys):
    assert run_cli(capsys)[0] == 2
    assert run_cli(capsys, "bogus")[0] == 2
    assert run_cli(capsys, "run")[0] == 2  # no machine
    assert run_cli(capsys, "run", "--builtin", "nope")[0] == 2
    assert run_cli(capsys, "run", "--builtin", "identity", "--input", "tape=2")[0] == 2


def test_myers_report(capsys):
    code, out, _ = run_cli(capsys, "myers", "--na", "2", "--nb", "5", "--probe", "3")
    rep = json.loads(out)
    assert code == 0 and rep["final"]["halt_entropy"] == pytest.approx(1.0, abs=1e-9)
    code, out, _ = run_cli(capsys, "myers", "--na", "2", "--nb", "5", "--probe", "3", "--format", "csv")
    assert len(out.strip().splitlines()) == 1 + 3


def test_myers_with_monitor(capsys):
    code, out, _ = run_cli(capsys, "myers", "--probe", "3", "--trials", "200")
    assert code == 0 and json.loads(out)["final"]["monitor"]["trace_distance_exact"] <= 1e-10


def test_run_and_monitor(capsys):
    code, out, _ = run_cli(capsys, "run", "--builtin", "myers-2-5", "--superpose", "tape=0", "tape=1", "--steps", "3")
    assert code == 0 and json.loads(out)["final"]["halt_entropy"] == pytest.approx(1.0)
    code, out, _ = run_cli(capsys, "monitor", "--builtin", "myers-2-5", "--superpose", "tape=0", "tape=1", "--steps", "8", "--seed", "1")
    assert code == 0 and json.loads(out)["final"]["steps_used"] in (2, 5)


def test_branch_sync(capsys):
    code, out, _ = run_cli(capsys, "branch-sync", "--preset", "myers")
    fin = json.loads(out)["final"]
    assert code == 0 and (fin["s0"], fin["s1"], fin["synchronized"]) == (2, 5, False)
    code, out, _ = run_cli(capsys, "branch-sync", "--preset", "sync", "--n-data", "2")
    assert code == 0 and json.loads(out)["final"]["superposition_ok"] is True


def test_concat_search(capsys):
    code, out, _ = run_cli(capsys, "concat-search", "--target-program", "01", "--max-len", "3")
    assert code == 0 and json.loads(out)["final"]["program"] == "01"
    assert run_cli(capsys, "concat-search", "--target", "0,1", "--max-len", "2")[0] == 1
    assert run_cli(capsys, "concat-search")[0] == 2


def test_gate_commands(capsys, tmp_path):
    assert run_cli(capsys, "gate-check", "--index", "3")[0] == 0
    assert run_cli(capsys, "gate-check", "--index", "1", "--program", "1,1,0,0")[0] == 1
    assert run_cli(capsys, "gate-orth")[0] == 0
    code, out, _ = run_cli(capsys, "gate-optimize", "--restarts", "3")
    assert code == 0 and json.loads(out)["final"]["converged"] is True
    assert run_cli(capsys, "swap-demo", "--m", "2", "--pairs", "20")[0] == 0
    g = tmp_path / "swap.mat"
    g.write_text(emit_matrix(gates.build_swap_array(1).g.matrix))
    t = tmp_path / "h.mat"
    t.write_text(emit_matrix(gates.named_gate("H").matrix))
    assert run_cli(capsys, "gate-check", "--array-file", str(g), "--m", "1", "--target-file", str(t), "--program", "1,0")[0] == 1
    assert run_cli(capsys, "gate-check", "--array-file", str(g), "--target", "H")[0] == 2


def test_cycle_and_equiv(capsys):
    code, out, _ = run_cli(capsys, "cycle", "--builtin", "myers-2-5", "--input", "tape=1")
    assert code == 0 and json.loads(out)["final"]["iterations"] == 5
    assert run_cli(capsys, "cycle", "--builtin", "identity", "--window", "4", "--max-iters", "1")[0] == 1
    code, out, _ = run_cli(capsys, "equiv", "--builtin", "myers-2-5", "--superpose", "tape=0", "tape=1", "--steps", "5")
    assert code == 0 and json.loads(out)["final"]["distance_sq"] <= 1e-8
    assert run_cli(capsys, "equiv", "--builtin", "identity", "--window", "3", "--steps", "5")[0] == 2


def test_out_path(capsys, tmp_path):
    p = tmp_path / "r.json"
    code, out, _ = run_cli(capsys, "myers", "--out", str(p))
    assert code == 0 and out == "" and json.loads(p.read_text())["experiment"] == "myers"
    assert run_cli(capsys, "myers", "--out", str(tmp_path / "no" / "r.json"))[0] == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["myers", "--probe", "4", "--trials", "100", "--seed", "3"],
        ["monitor", "--builtin", "myers-2-5", "--superpose", "tape=0", "tape=1", "--seed", "5"],
        ["gate-optimize", "--restarts", "2", "--seed", "4"],
        ["cycle", "--builtin", "myers-2-5", "--superpose", "tape=0", "tape=1", "--mode", "sampled", "--seed", "2"],
    ],
)
def test_reports_are_byte_identical(capsys, argv):
    _, a, _ = run_cli(capsys, *argv)
    _, b, _ = run_cli(capsys, *argv)
    assert a == b and a


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "uqtmlab", "params", "--m", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "(7, 16, 112)"
