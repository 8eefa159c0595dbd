"""Text formats: machine files, matrix files, input specs and run reports."""
from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .machine import MachineDef, MachineError, Successor, TransitionRule, validate_local
from .state import SparseState

SERIES_COLUMNS = ("step", "halt_prob", "halt_entropy", "comp_purity", "norm")


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message, self.line, self.col = message, line, col
        where = f"line {line}, col {col}: " if line else ""
        super().__init__(where + message)


class ReportError(OSError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- machine files ------------------------------------------------------------
#
#   proc_qubits N          processor qubits, halt qubit included
#   halt_qubit H
#   rule q s -> q' s' d re im [; q' s' d re im ...]     d is L or R

_TOKEN = re.compile(r"\S+")


def _tokens(line: str) -> list[tuple[str, int]]:
    return [(m.group(), m.start() + 1) for m in _TOKEN.finditer(line)]


def _int(tok: tuple[str, int], lineno: int, what: str, lo: int | None = None, hi: int | None = None) -> int:
    text, col = tok
    try:
        v = int(text)
    except ValueError:
        raise ParseError(f"expected integer {what}, got {text!r}", lineno, col) from None
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ParseError(f"{what} {v} out of range [{lo}, {hi}]", lineno, col)
    return v


def _float(tok: tuple[str, int], lineno: int, what: str) -> float:
    text, col = tok
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"expected decimal {what}, got {text!r}", lineno, col) from None
    if not math.isfinite(v):
        raise ParseError(f"{what} must be finite", lineno, col)
    return v


def parse_machine_file(text: str, validate: bool = True, tol: float = 1e-10, name: str = "") -> MachineDef:
    """Parse the line-oriented machine format.

    With ``validate`` the local well-formedness conditions are checked too.
    """
    n_qubits = halt = None
    rules: dict[tuple[int, int], TransitionRule] = {}
    first_rule_line = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        toks = _tokens(raw.split("#", 1)[0])
        if not toks:
            continue
        key, col = toks[0]
        if key in ("proc_qubits", "halt_qubit", "name"):
            if len(toks) != 2:
                raise ParseError(f"{key} takes exactly one value", lineno, col)
            if key == "name":
                name = toks[1][0]
            elif rules:
                raise ParseError(f"{key} must precede the rules", lineno, col)
            elif key == "proc_qubits":
                if n_qubits is not None:
                    raise ParseError("duplicate proc_qubits header", lineno, col)
                n_qubits = _int(toks[1], lineno, "proc_qubits", 1, 16)
            else:
                if halt is not None:
                    raise ParseError("duplicate halt_qubit header", lineno, col)
                halt = _int(toks[1], lineno, "halt_qubit", 0)
                if n_qubits is None:
                    raise ParseError("halt_qubit before proc_qubits", lineno, col)
                if halt >= n_qubits:
                    raise ParseError(f"halt qubit {halt} out of range for {n_qubits} processor qubits", lineno, toks[1][1])
            continue
        if key != "rule":
            raise ParseError(f"unknown directive {key!r}", lineno, col)
        if n_qubits is None or halt is None:
            raise ParseError("rule before the proc_qubits/halt_qubit headers", lineno, col)
        first_rule_line = first_rule_line or lineno
        n_states = 1 << n_qubits
        if len(toks) < 4 or toks[3][0] != "->":
            raise ParseError("expected 'rule q s -> ...'", lineno, col)
        q = _int(toks[1], lineno, "processor state", 0, n_states - 1)
        s = _int(toks[2], lineno, "scanned bit", 0, 1)
        if (q, s) in rules:
            raise ParseError(f"duplicate rule for (q={q}, s={s})", lineno, col)
        succs, group = [], []
        for tok in toks[4:] + [(";", len(raw) + 1)]:
            if tok[0] != ";":
                group.append(tok)
                continue
            if len(group) != 5:
                c = group[0][1] if group else tok[1]
                raise ParseError("successor needs 5 fields: q' s' L|R re im", lineno, c)
            q2 = _int(group[0], lineno, "successor state", 0, n_states - 1)
            w = _int(group[1], lineno, "written bit", 0, 1)
            if group[2][0] not in ("L", "R"):
                raise ParseError(f"direction must be L or R, got {group[2][0]!r}", lineno, group[2][1])
            d = -1 if group[2][0] == "L" else 1
            amp = complex(_float(group[3], lineno, "real part"), _float(group[4], lineno, "imaginary part"))
            succs.append(Successor(q2, w, d, amp))
            group = []
        try:
            rules[(q, s)] = TransitionRule(q, s, tuple(succs))
        except MachineError as e:
            raise ParseError(str(e), lineno, col) from None
    if n_qubits is None or halt is None:
        raise ParseError("missing proc_qubits or halt_qubit header")
    try:
        m = MachineDef(n_qubits - 1, halt, rules, name)
    except MachineError as e:
        raise ParseError(str(e)) from None
    if validate:
        rep = validate_local(m, tol)
        if not rep.passed:
            raise ParseError(
                "table is not locally well-formed "
                f"(norm {rep.column_norm_max_err:.3g}, orthogonality {rep.column_orthogonality_max_err:.3g}, "
                f"separability {rep.separability_max_err:.3g})",
                first_rule_line,
                1,
            )
    return m


def emit_machine(m: MachineDef) -> str:
    lines = []
    if m.name:
        lines.append(f"name {m.name}")
    lines += [f"proc_qubits {m.n_qubits}", f"halt_qubit {m.halt_index}"]
    for rule in m.sorted_rules():
        parts = [
            f"{s.proc} {s.write} {'L' if s.move < 0 else 'R'} {_fmt(s.amp.real)} {_fmt(s.amp.imag)}"
            for s in sorted(rule.successors, key=lambda s: s.key)
        ]
        lines.append(f"rule {rule.from_proc} {rule.from_bit} -> " + " ; ".join(parts))
    return "\n".join(lines) + "\n"


def load_machine(path: str | Path, validate: bool = True) -> MachineDef:
    p = Path(path)
    return parse_machine_file(p.read_text(), validate=validate, name=p.stem)


# -- matrix files -------------------------------------------------------------


def parse_matrix_file(text: str) -> np.ndarray:
    """``dim D`` then D rows of D ``re,im`` pairs."""
    rows, dim = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        toks = _tokens(raw.split("#", 1)[0])
        if not toks:
            continue
        if dim is None:
            if toks[0][0] != "dim" or len(toks) != 2:
                raise ParseError("expected 'dim D' header", lineno, toks[0][1])
            dim = _int(toks[1], lineno, "dim", 1)
            continue
        if len(toks) != dim:
            raise ParseError(f"row has {len(toks)} entries, expected {dim}", lineno, toks[0][1])
        row = []
        for text_, col in toks:
            parts = text_.split(",")
            if len(parts) != 2:
                raise ParseError(f"entry must be 're,im', got {text_!r}", lineno, col)
            re_, im_ = (_float((p, col), lineno, "matrix entry") for p in parts)
            row.append(complex(re_, im_))
        rows.append(row)
    if dim is None:
        raise ParseError("empty matrix file")
    if len(rows) != dim:
        raise ParseError(f"expected {dim} rows, got {len(rows)}")
    return np.array(rows, dtype=complex)


def emit_matrix(u: np.ndarray) -> str:
    u = np.asarray(u, dtype=complex)
    lines = [f"dim {u.shape[0]}"]
    lines += [" ".join(f"{_fmt(z.real)},{_fmt(z.imag)}" for z in row) for row in u]
    return "\n".join(lines) + "\n"


# -- input specs --------------------------------------------------------------


def parse_input_spec(text: str) -> tuple[SparseState, complex]:
    """``head=0 proc=0 tape=0101 offset=0 amp=re[,im]`` -> (basis state, weight)."""
    vals: dict[str, str] = {}
    for tok, col in _tokens(text):
        k, sep, v = tok.partition("=")
        if not sep or k not in ("head", "proc", "tape", "offset", "amp"):
            raise ParseError(f"bad input field {tok!r}; expected head=, proc=, tape=, offset= or amp=", 1, col)
        if k in vals:
            raise ParseError(f"duplicate field {k!r}", 1, col)
        vals[k] = v
    try:
        head = int(vals.get("head", 0))
        proc = int(vals.get("proc", 0))
        offset = int(vals.get("offset", 0))
        amp = complex(*(float(x) for x in vals.get("amp", "1").split(",")))
    except (ValueError, TypeError):
        raise ParseError(f"bad numeric field in input spec {text!r}") from None
    bits = vals.get("tape", "")
    if any(c not in "01" for c in bits):
        raise ParseError(f"tape must be a 0/1 string, got {bits!r}")
    if proc < 0:
        raise ParseError("proc must be non-negative")
    return SparseState.basis(head=head, proc=proc, bits=bits, offset=offset), amp


def parse_input(specs: list[str]) -> SparseState:
    """One spec gives a basis state; several are summed and normalized."""
    if not specs:
        raise ParseError("no input given")
    terms = []
    for text in specs:
        s, amp = parse_input_spec(text)
        terms += [(c, amp * a) for c, a in s.items()]
    st = SparseState(terms)
    if st.norm_sq() == 0:
        raise ParseError("input superposition cancels to zero")
    return st.normalized()


# -- reports ------------------------------------------------------------------


@dataclass
class RunReport:
    experiment: str
    parameters: dict
    series: list[dict] = field(default_factory=list)
    final: dict = field(default_factory=dict)
    version: str = ""
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "parameters": self.parameters,
            "series": self.series,
            "final": self.final,
            "version": self.version,
            "seed": self.seed,
        }


def _plain(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (float, np.floating)):
        return float(x)
    if hasattr(x, "to_dict"):
        return _plain(x.to_dict())
    return x


def _write_json(x: Any, out: list[str], indent: int) -> None:
    pad = "  " * (indent + 1)
    if isinstance(x, dict):
        if not x:
            out.append("{}")
            return
        out.append("{\n")
        for i, k in enumerate(sorted(x)):
            out.append(f"{pad}{json.dumps(k)}: ")
            _write_json(x[k], out, indent + 1)
            out.append(",\n" if i < len(x) - 1 else "\n")
        out.append("  " * indent + "}")
    elif isinstance(x, list):
        if not x:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(x):
            out.append(pad)
            _write_json(v, out, indent + 1)
            out.append(",\n" if i < len(x) - 1 else "\n")
        out.append("  " * indent + "]")
    elif isinstance(x, float):
        # 17 significant digits; non-finite values have no JSON form
        if not math.isfinite(x):
            out.append("null")
        else:
            t = _fmt(x)
            out.append(t if any(c in t for c in ".en") else t + ".0")
    else:
        out.append(json.dumps(x))


def to_json(obj: Any) -> str:
    out: list[str] = []
    _write_json(_plain(obj), out, 0)
    return "".join(out) + "\n"


def to_csv(series: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_COLUMNS)
    for row in series:
        w.writerow([row["step"]] + [_fmt(row[c]) for c in SERIES_COLUMNS[1:]])
    return buf.getvalue()


def emit_report(report: RunReport, fmt: str = "json", path: str | Path | None = None) -> str:
    """Render a report; JSON holds everything, CSV only the per-step series."""
    if fmt == "json":
        text = to_json(report)
    elif fmt == "csv":
        text = to_csv(report.series)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as e:
            raise ReportError(f"cannot write report to {path}: {e}") from e
    return text
