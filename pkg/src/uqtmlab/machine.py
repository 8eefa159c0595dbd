"""Quantum Turing machines given by local transition tables.

A step reads the scanned cell, writes a bit, updates the processor and moves
the head one cell left or right. Processor basis indices pack all processor
qubits, halt qubit included, with qubit ``i`` at bit ``i``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .state import Config, SparseState, proc_qubit

DEFAULT_MAX_DIM = 1 << 20


class MachineError(ValueError):
    pass


@dataclass(frozen=True)
class Successor:
    proc: int
    write: int
    move: int
    amp: complex

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.proc, self.write, self.move)


@dataclass(frozen=True)
class TransitionRule:
    from_proc: int
    from_bit: int
    successors: tuple[Successor, ...]

    def __post_init__(self):
        if not self.successors:
            raise MachineError(f"rule ({self.from_proc}, {self.from_bit}) has no successors")
        if self.from_bit not in (0, 1):
            raise MachineError(f"scanned bit must be 0 or 1, got {self.from_bit}")
        keys = set()
        for succ in self.successors:
            if succ.move not in (-1, 1):
                raise MachineError(f"rule ({self.from_proc}, {self.from_bit}): move must be -1 or +1, got {succ.move}")
            if succ.write not in (0, 1):
                raise MachineError(f"rule ({self.from_proc}, {self.from_bit}): written bit must be 0 or 1")
            if succ.key in keys:
                raise MachineError(f"rule ({self.from_proc}, {self.from_bit}): duplicate successor {succ.key}")
            keys.add(succ.key)


@dataclass(frozen=True)
class MachineDef:
    """A QTM: ``n_proc`` work qubits plus the halt qubit at ``halt_index``."""

    n_proc: int
    halt_index: int
    rules: Mapping[tuple[int, int], TransitionRule] = field(compare=False)
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.n_proc < 0:
            raise MachineError("n_proc must be non-negative")
        if not 0 <= self.halt_index < self.n_proc + 1:
            raise MachineError(f"halt index {self.halt_index} out of range for {self.n_proc + 1} processor qubits")
        for (q, s), rule in self.rules.items():
            if (rule.from_proc, rule.from_bit) != (q, s):
                raise MachineError(f"rule stored under ({q}, {s}) is labelled ({rule.from_proc}, {rule.from_bit})")
            if not 0 <= q < self.n_states:
                raise MachineError(f"processor index {q} out of range")
            for succ in rule.successors:
                if not 0 <= succ.proc < self.n_states:
                    raise MachineError(f"successor processor index {succ.proc} out of range in rule ({q}, {s})")
        missing = [(q, s) for q in range(self.n_states) for s in (0, 1) if (q, s) not in self.rules]
        if missing:
            q, s = missing[0]
            raise MachineError(f"non-total table: no rule for (q={q}, s={s}) ({len(missing)} missing)")

    @property
    def n_qubits(self) -> int:
        return self.n_proc + 1

    @property
    def n_states(self) -> int:
        return 1 << (self.n_proc + 1)

    @property
    def halt_qubit(self):
        return proc_qubit(self.halt_index)

    def rule(self, q: int, s: int) -> TransitionRule:
        return self.rules[(q, s)]

    def sorted_rules(self) -> list[TransitionRule]:
        return [self.rules[k] for k in sorted(self.rules)]

    def same_table(self, other: MachineDef, tol: float = 0.0) -> bool:
        if (self.n_proc, self.halt_index) != (other.n_proc, other.halt_index):
            return False
        for key, rule in self.rules.items():
            a = {s.key: s.amp for s in rule.successors}
            b = {s.key: s.amp for s in other.rules[key].successors}
            if a.keys() != b.keys() or any(abs(a[k] - b[k]) > tol for k in a):
                return False
        return True


def make_machine(n_proc: int, halt_index: int, table, name: str = "") -> MachineDef:
    """Build a MachineDef from ``{(q, s): [(q', w, d, amp), ...]}``."""
    rules = {}
    for (q, s), succs in table.items():
        rules[(q, s)] = TransitionRule(q, s, tuple(Successor(int(a), int(w), int(d), complex(amp)) for a, w, d, amp in succs))
    return MachineDef(n_proc, halt_index, rules, name)


@dataclass
class WellFormedReport:
    tol: float
    column_norm_max_err: float
    column_orthogonality_max_err: float
    separability_max_err: float
    global_unitarity_err: dict[int, float] = field(default_factory=dict)

    @property
    def norm_ok(self) -> bool:
        return self.column_norm_max_err <= self.tol

    @property
    def orthogonality_ok(self) -> bool:
        return self.column_orthogonality_max_err <= self.tol

    @property
    def separability_ok(self) -> bool:
        return self.separability_max_err <= self.tol

    @property
    def global_ok(self) -> bool | None:
        if not self.global_unitarity_err:
            return None
        return all(err <= self.tol for err in self.global_unitarity_err.values())

    @property
    def passed(self) -> bool:
        return self.norm_ok and self.orthogonality_ok and self.separability_ok and self.global_ok is not False

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "column_norm_max_err": self.column_norm_max_err,
            "column_orthogonality_max_err": self.column_orthogonality_max_err,
            "separability_max_err": self.separability_max_err,
            "global_unitarity_err": {str(k): v for k, v in sorted(self.global_unitarity_err.items())},
            "norm_ok": self.norm_ok,
            "orthogonality_ok": self.orthogonality_ok,
            "separability_ok": self.separability_ok,
            "global_ok": self.global_ok,
            "pass": self.passed,
        }


def _column_matrix(m: MachineDef) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Rows indexed by (q', w, d); one column per (q, s)."""
    cols = sorted(m.rules)
    n = m.n_states
    a = np.zeros((n * 2 * 2, len(cols)), dtype=complex)
    for j, key in enumerate(cols):
        for succ in m.rules[key].successors:
            row = (succ.proc * 2 + succ.write) * 2 + (0 if succ.move < 0 else 1)
            a[row, j] = succ.amp
    return a, cols


def validate_local(m: MachineDef, tol: float = 1e-10) -> WellFormedReport:
    """Necessary local conditions for a unitary step.

    Columns must be unit vectors and mutually orthogonal. Separability: a
    right-moving successor of one column and a left-moving successor of any
    column can land on the same configuration, so their processor parts must
    be orthogonal for every pair of written bits.
    """
    a, _ = _column_matrix(m)
    gram = a.conj().T @ a
    norm_err = float(np.max(np.abs(np.real(np.diag(gram)) - 1.0)))
    off = gram - np.diag(np.diag(gram))
    orth_err = float(np.max(np.abs(off), initial=0.0))
    # a reshaped to (q', w, d, column)
    t = a.reshape(m.n_states, 2, 2, -1)
    left = t[:, :, 0, :]
    right = t[:, :, 1, :]
    sep = np.einsum("qwa,qvb->abwv", right.conj(), left)
    sep_err = float(np.max(np.abs(sep), initial=0.0))
    return WellFormedReport(tol, norm_err, orth_err, sep_err)


@dataclass(frozen=True)
class WindowStep:
    """Step operator on a cyclic tape window of ``window_len`` cells.

    Basis index ``(x * n_states + q) * 2**L + t`` with tape cell ``i`` at bit
    ``i`` of ``t``. Held as a sparse CSR matrix.
    """

    matrix: sp.csr_matrix
    window_len: int
    n_states: int
    halt_index: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def index(self, cfg: Config) -> int:
        lo, hi = cfg.support
        if lo < 0 or hi >= self.window_len:
            raise MachineError(f"configuration {cfg} escapes the window [0, {self.window_len})")
        t = 0
        for x in cfg.ones:
            t |= 1 << x
        return (cfg.head * self.n_states + cfg.proc) * (1 << self.window_len) + t

    def config(self, idx: int) -> Config:
        tdim = 1 << self.window_len
        t = idx % tdim
        rest = idx // tdim
        q = rest % self.n_states
        x = rest // self.n_states
        return Config(x, q, frozenset(i for i in range(self.window_len) if (t >> i) & 1))

    def to_vector(self, s: SparseState) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        for cfg, amp in s.items():
            v[self.index(cfg)] += amp
        return v

    def to_state(self, v: np.ndarray, prune: float = 1e-14) -> SparseState:
        nz = np.flatnonzero(np.abs(v) ** 2 >= prune)
        return SparseState({self.config(int(i)): complex(v[i]) for i in nz})

    def halt_mask(self) -> np.ndarray:
        idx = np.arange(self.dim)
        q = (idx >> self.window_len) % self.n_states
        return ((q >> self.halt_index) & 1).astype(bool)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def build_global_step(m: MachineDef, window_len: int, max_dim: int = DEFAULT_MAX_DIM) -> WindowStep:
    """The step operator with head motion taken modulo ``window_len``."""
    if window_len < 2:
        raise MachineError("window_len must be at least 2")
    tdim = 1 << window_len
    dim = window_len * m.n_states * tdim
    if dim > max_dim:
        raise MachineError(f"window dimension {dim} exceeds cap {max_dim}")
    rows, cols, vals = [], [], []
    t = np.arange(tdim)
    for x in range(window_len):
        bit = (t >> x) & 1
        cleared = t & ~(1 << x)
        for s in (0, 1):
            ts = t[bit == s]
            tc = cleared[bit == s]
            for q in range(m.n_states):
                src = (x * m.n_states + q) * tdim + ts
                for succ in m.rules[(q, s)].successors:
                    nx = (x + succ.move) % window_len
                    dst = (nx * m.n_states + succ.proc) * tdim + (tc | (succ.write << x))
                    rows.append(dst)
                    cols.append(src)
                    vals.append(np.full(len(src), succ.amp, dtype=complex))
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )
    mat.sum_duplicates()
    return WindowStep(mat, window_len, m.n_states, m.halt_index)


def check_global_unitarity(u, tol: float = 1e-10) -> tuple[bool, float]:
    """(||U^dag U - I||_F <= tol, the Frobenius error)."""
    mat = getattr(u, "matrix", u)
    if mat.shape[0] != mat.shape[1]:
        raise MachineError("matrix is not square")
    if sp.issparse(mat):
        diff = (mat.conj().T @ mat - sp.identity(mat.shape[0], dtype=complex, format="csr")).tocsr()
        err = float(np.sqrt(np.sum(np.abs(diff.data) ** 2)))
    else:
        mat = np.asarray(mat)
        err = float(np.linalg.norm(mat.conj().T @ mat - np.eye(mat.shape[0]), "fro"))
    return err <= tol, err


def validate(m: MachineDef, windows: Sequence[int] = (), tol: float = 1e-10, max_dim: int = DEFAULT_MAX_DIM) -> WellFormedReport:
    report = validate_local(m, tol)
    for L in windows:
        _, err = check_global_unitarity(build_global_step(m, L, max_dim), tol)
        report.global_unitarity_err[L] = err
    return report


def step(m: MachineDef, s: SparseState) -> SparseState:
    """One application of U."""
    out: dict[Config, complex] = {}
    for cfg, amp in s.items():
        x = cfg.head
        scanned = cfg.read(x)
        blanked = cfg.ones - {x}
        with_one = blanked | {x}
        for succ in m.rules[(cfg.proc, scanned)].successors:
            nxt = Config(x + succ.move, succ.proc, with_one if succ.write else blanked)
            out[nxt] = out.get(nxt, 0j) + amp * succ.amp
    return SparseState(out)


def run(m: MachineDef, s: SparseState, steps: int) -> SparseState:
    """U**steps applied to ``s``."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    for _ in range(steps):
        s = step(m, s)
    return s


def trajectory(m: MachineDef, s: SparseState, steps: int) -> list[SparseState]:
    """States at steps 0..steps inclusive."""
    out = [s]
    for _ in range(steps):
        s = step(m, s)
        out.append(s)
    return out


def halt_probability(s: SparseState, halt_index: int) -> float:
    return float(sum(abs(a) ** 2 for c, a in s.items() if c.proc_bit(halt_index)))


MIN_BRANCH_PROB = 1e-12


def measure_halt(s: SparseState, halt_index: int, rng=None, force: int | None = None) -> tuple[int, SparseState, float]:
    """Projective measurement of the halt qubit.

    ``rng`` is a seed or ``numpy.random.Generator``. Returns ``(outcome,
    renormalized post-state, probability of that outcome)``.
    """
    p1 = halt_probability(s, halt_index) / s.norm_sq()
    probs = (1.0 - p1, p1)
    if force is not None:
        outcome = int(force)
        if probs[outcome] < MIN_BRANCH_PROB:
            raise ValueError(f"outcome {outcome} has probability {probs[outcome]:.3g}; cannot select a degenerate branch")
    elif p1 < MIN_BRANCH_PROB:
        outcome = 0
    elif probs[0] < MIN_BRANCH_PROB:
        outcome = 1
    else:
        outcome = int(np.random.default_rng(rng).random() < p1)
    post = s.project(proc_qubit(halt_index), outcome).normalized()
    return outcome, post, probs[outcome]


@dataclass
class MonitoredRun:
    trajectory: list[tuple[int, float]]
    final: SparseState
    halted: bool
    steps_used: int
    outcomes: list[int]
    pre_states: list[SparseState] = field(default_factory=list, repr=False)  # just before each measurement


def run_monitored(m: MachineDef, s: SparseState, max_steps: int, rng=None) -> MonitoredRun:
    """Step, then measure the halt qubit; stop at the first outcome 1."""
    gen = np.random.default_rng(rng)
    traj, outcomes, pre = [], [], []
    for k in range(1, max_steps + 1):
        s = step(m, s)
        pre.append(s)
        traj.append((k, halt_probability(s, m.halt_index) / s.norm_sq()))
        outcome, s, _ = measure_halt(s, m.halt_index, gen)
        outcomes.append(outcome)
        if outcome == 1:
            return MonitoredRun(traj, s, True, k, outcomes, pre)
    return MonitoredRun(traj, s, False, max_steps, outcomes, pre)


@dataclass
class HaltStabilityReport:
    tol: float
    max_backflow: float
    backflow: list[list[float]]  # per probe, per step 0..horizon-1

    @property
    def passed(self) -> bool:
        return self.max_backflow <= self.tol


def check_halt_stability(m: MachineDef, probes: Sequence[SparseState], horizon: int, tol: float = 1e-12) -> HaltStabilityReport:
    """Mass that one step moves from the halted subspace back to unhalted.

    For every probe and step ``k < horizon`` the halted part of the state at
    step ``k`` is advanced once and its unhalted mass recorded.
    """
    h = m.halt_qubit
    series = []
    for probe in probes:
        flows = []
        s = probe
        for _ in range(horizon):
            halted = s.project(h, 1)
            flows.append(step(m, halted).project(h, 0).norm_sq() if len(halted) else 0.0)
            s = step(m, s)
        series.append(flows)
    worst = max((f for row in series for f in row), default=0.0)
    return HaltStabilityReport(tol, worst, series)


def reachable_configs(m: MachineDef, inputs: Sequence[SparseState], steps: int) -> set[Config]:
    seen: set[Config] = set()
    for s in inputs:
        for st in trajectory(m, s, steps):
            seen.update(st)
    return seen


def is_permutation_on(m: MachineDef, configs: set[Config]) -> bool:
    """Every config has one successor with amplitude 1 and no two collide."""
    images = set()
    for cfg in configs:
        out = step(m, SparseState({cfg: 1.0}))
        if len(out) != 1:
            return False
        (img, amp), = out.items()
        if abs(amp - 1) > 1e-12 or img in images:
            return False
        images.add(img)
    return True


def all_configs_in_window(m: MachineDef, window_len: int):
    for x, q in itertools.product(range(window_len), range(m.n_states)):
        for t in range(1 << window_len):
            yield Config(x, q, frozenset(i for i in range(window_len) if (t >> i) & 1))
