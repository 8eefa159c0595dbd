"""Halt-qubit scenarios: Myers entanglement, branch synchronization, concatenation."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from . import library
from .machine import MIN_BRANCH_PROB, MachineDef, halt_probability, measure_halt, step
from .state import (
    Config,
    DensityMatrix,
    SparseState,
    complement_density,
    proc_qubit,
    purity,
    reduced_density,
    state_fidelity,
    tape_qubit,
    trace_distance,
    von_neumann_entropy,
)

DEFAULT_HORIZON = 64


def halt_metrics(s: SparseState, halt_index: int) -> dict:
    """halt_prob, halt_entropy, comp_purity and norm of a machine state."""
    h = proc_qubit(halt_index)
    rho_h = reduced_density(s, [h])
    norm_sq = s.norm_sq()
    comp = complement_density([(1.0 / norm_sq if norm_sq else 0.0, s)], [h])
    return {
        "halt_prob": halt_probability(s, halt_index) / norm_sq if norm_sq else 0.0,
        "halt_entropy": von_neumann_entropy(_scaled(rho_h, norm_sq)),
        "comp_purity": purity(comp),
        "norm": math.sqrt(norm_sq),
    }


def _scaled(rho: DensityMatrix, norm_sq: float) -> DensityMatrix:
    if not norm_sq or norm_sq == 1.0:
        return rho
    return DensityMatrix(rho.matrix / norm_sq, rho.labels)


def metric_series(m: MachineDef, s: SparseState, steps: int) -> list[dict]:
    """Metrics after each of steps 1..steps."""
    rows = []
    for k in range(1, steps + 1):
        s = step(m, s)
        rows.append({"step": k, **halt_metrics(s, m.halt_index)})
    return rows


# -- Myers -----------------------------------------------------------------


@dataclass(frozen=True)
class MyersSpec:
    n_a: int
    n_b: int
    horizon: int = DEFAULT_HORIZON

    def __post_init__(self):
        if not 1 <= self.n_a < self.n_b:
            raise ValueError(f"need 1 <= n_a < n_b, got ({self.n_a}, {self.n_b})")
        if self.n_b >= self.horizon:
            raise ValueError(f"n_b={self.n_b} exceeds horizon {self.horizon}")


def build_myers_machine(spec: MyersSpec) -> MachineDef:
    return library.myers_machine(spec.n_a, spec.n_b)


def myers_inputs() -> tuple[SparseState, SparseState]:
    """Basis inputs |A> (cell 0 = 0) and |B> (cell 0 = 1), halt qubit 0."""
    return SparseState.basis(bits="0"), SparseState.basis(bits="1")


def myers_superposition() -> SparseState:
    a, b = myers_inputs()
    r = 1 / math.sqrt(2)
    return SparseState([(c, r * x) for c, x in a.items()] + [(c, r * x) for c, x in b.items()])


@dataclass
class MyersReport:
    n_probe: int
    halt_entropy: float
    comp_purity: float
    halt_prob: float

    def to_dict(self) -> dict:
        return {"n_probe": self.n_probe, "halt_entropy": self.halt_entropy, "comp_purity": self.comp_purity, "halt_prob": self.halt_prob}


def myers_demo(m: MachineDef, spec: MyersSpec, n_probe: int) -> MyersReport:
    """Run (|A>+|B>)/sqrt(2) unmonitored for ``n_probe`` steps."""
    s = myers_superposition()
    for _ in range(n_probe):
        s = step(m, s)
    met = halt_metrics(s, m.halt_index)
    return MyersReport(n_probe, met["halt_entropy"], met["comp_purity"], met["halt_prob"])


@dataclass
class MonitorComparison:
    n_probe: int
    halt_prob: float
    trace_distance_exact: float
    trace_distance_sampled: float
    trials: int
    sampled_halt_freq: float
    sigma3: float
    post_states: dict[int, SparseState] = field(repr=False)

    @property
    def within_3sigma(self) -> bool:
        return abs(self.sampled_halt_freq - self.halt_prob) <= self.sigma3

    def to_dict(self) -> dict:
        return {
            "n_probe": self.n_probe,
            "halt_prob": self.halt_prob,
            "trace_distance_exact": self.trace_distance_exact,
            "trace_distance_sampled": self.trace_distance_sampled,
            "trials": self.trials,
            "sampled_halt_freq": self.sampled_halt_freq,
            "sigma3": self.sigma3,
            "within_3sigma": self.within_3sigma,
        }


def monitored_vs_unmonitored(m: MachineDef, s: SparseState, n_probe: int, trials: int = 1000, seed: int = 0) -> MonitorComparison:
    """Compare the computational marginal with and without a halt measurement.

    The unmonitored marginal is the partial trace over the halt qubit at
    ``n_probe``. The monitored one averages the post-measurement
    computational states, once exactly (Born weights) and once over
    ``trials`` seeded measurements.
    """
    h = proc_qubit(m.halt_index)
    for _ in range(n_probe):
        s = step(m, s)
    rho_u = complement_density([(1.0, s)], [h])
    basis = rho_u.labels
    p1 = halt_probability(s, m.halt_index)
    probs = {0: 1.0 - p1, 1: p1}
    posts = {o: s.project(h, o).normalized() for o in (0, 1) if probs[o] >= MIN_BRANCH_PROB}
    rho_exact = complement_density([(probs[o], post) for o, post in posts.items()], [h], basis)

    rng = np.random.default_rng(seed)
    counts = {0: 0, 1: 0}
    for _ in range(trials):
        outcome, _, _ = measure_halt(s, m.halt_index, rng)
        counts[outcome] += 1
    rho_sampled = complement_density([(counts[o] / trials, posts[o]) for o in posts], [h], basis)
    sigma3 = 3.0 * math.sqrt(p1 * (1.0 - p1) / trials) if trials else math.inf
    return MonitorComparison(
        n_probe=n_probe,
        halt_prob=p1,
        trace_distance_exact=trace_distance(rho_u, rho_exact),
        trace_distance_sampled=trace_distance(rho_u, rho_sampled),
        trials=trials,
        sampled_halt_freq=counts[1] / trials if trials else float("nan"),
        sigma3=sigma3,
        post_states=posts,
    )


# -- branch synchronization --------------------------------------------------


@dataclass(frozen=True)
class RegisterTarget:
    """Pure target state on a list of qubits (first qubit most significant)."""

    qubits: tuple
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex)
        if v.shape != (1 << len(self.qubits),):
            raise ValueError("target vector length does not match the register")
        object.__setattr__(self, "vector", v / np.linalg.norm(v))

    @classmethod
    def basis(cls, qubits: Sequence, bits: str) -> RegisterTarget:
        v = np.zeros(1 << len(qubits), dtype=complex)
        v[int(bits, 2)] = 1.0
        return cls(tuple(qubits), v)

    def fidelity(self, s: SparseState) -> float:
        rho = reduced_density(s, self.qubits, strict=False)
        return state_fidelity(rho, self.vector) / s.norm_sq()


@dataclass
class BranchSyncReport:
    s0: int | None
    s1: int | None
    fidelity0: float
    fidelity1: float
    epsilon: float
    superposed_fidelity: float | None = None
    intermediate_halt_entropy: list[float] = field(default_factory=list)

    @property
    def synchronized(self) -> bool:
        return (
            self.s0 is not None
            and self.s0 == self.s1
            and self.fidelity0 >= 1 - self.epsilon
            and self.fidelity1 >= 1 - self.epsilon
        )

    @property
    def superposition_ok(self) -> bool | None:
        if self.superposed_fidelity is None:
            return None
        return self.superposed_fidelity >= 1 - 2 * self.epsilon

    def to_dict(self) -> dict:
        return {
            "s0": "not reached" if self.s0 is None else self.s0,
            "s1": "not reached" if self.s1 is None else self.s1,
            "fidelity0": self.fidelity0,
            "fidelity1": self.fidelity1,
            "epsilon": self.epsilon,
            "synchronized": self.synchronized,
            "superposed_fidelity": self.superposed_fidelity,
            "superposition_ok": self.superposition_ok,
            "intermediate_halt_entropy": self.intermediate_halt_entropy,
        }


def write_program(s: SparseState, program: str, offset: int) -> SparseState:
    """Overwrite tape cells ``offset..`` with the program bits in every branch."""
    out = []
    for cfg, amp in s.items():
        ones = set(cfg.ones)
        for i, ch in enumerate(program):
            (ones.add if ch == "1" else ones.discard)(offset + i)
        out.append((Config(cfg.head, cfg.proc, frozenset(ones)), amp))
    return SparseState(out)


def _first_hit(m: MachineDef, s: SparseState, target: RegisterTarget, epsilon: float, horizon: int) -> tuple[int | None, float]:
    best = target.fidelity(s)
    if best >= 1 - epsilon:
        return 0, best
    for k in range(1, horizon + 1):
        s = step(m, s)
        f = target.fidelity(s)
        if f >= 1 - epsilon:
            return k, f
        best = max(best, f)
    return None, best


def branch_sync_check(
    m: MachineDef,
    branch0: SparseState,
    branch1: SparseState,
    targets: tuple[RegisterTarget, RegisterTarget],
    epsilon: float = 1e-9,
    horizon: int = DEFAULT_HORIZON,
    coeffs: tuple[complex, complex] = (1 / math.sqrt(2), 1 / math.sqrt(2)),
    program: str | None = None,
    program_offset: int = 0,
) -> BranchSyncReport:
    """Find each branch's first step reaching its target; test the superposition.

    When both branches reach their targets at the same step, the superposed
    input ``c0|branch0> + c1|branch1>`` is run for that many steps and its
    fidelity with the superposed register target recorded. Coherence
    survives only if everything outside the register agrees across the two
    branches. When the steps differ, the halt-qubit entropy of the
    superposed run is recorded at every step strictly between them.
    """
    t0, t1 = targets
    if t0.qubits != t1.qubits:
        raise ValueError("both targets must live on the same register")
    if program is not None:
        branch0 = write_program(branch0, program, program_offset)
        branch1 = write_program(branch1, program, program_offset)
    s0, f0 = _first_hit(m, branch0, t0, epsilon, horizon)
    s1, f1 = _first_hit(m, branch1, t1, epsilon, horizon)
    report = BranchSyncReport(s0, s1, f0, f1, epsilon)
    c0, c1 = coeffs
    sup = SparseState([(c, c0 * a) for c, a in branch0.items()] + [(c, c1 * a) for c, a in branch1.items()]).normalized()
    if report.synchronized:
        for _ in range(s0):
            sup = step(m, sup)
        target = RegisterTarget(t0.qubits, c0 * t0.vector + c1 * t1.vector)
        report.superposed_fidelity = target.fidelity(sup)
    elif s0 is not None and s1 is not None and s0 != s1:
        lo, hi = sorted((s0, s1))
        for k in range(1, hi):
            sup = step(m, sup)
            if k >= lo:
                report.intermediate_halt_entropy.append(halt_metrics(sup, m.halt_index)["halt_entropy"])
    return report


def myers_targets(m: MachineDef) -> tuple[RegisterTarget, RegisterTarget]:
    """Register (cell 0, halt): input bit preserved and halt raised."""
    qubits = (tape_qubit(0), m.halt_qubit)
    return RegisterTarget.basis(qubits, "01"), RegisterTarget.basis(qubits, "11")


def sync_setup(n_data: int):
    """Machine, branch inputs |0>|0..0>, |1>|1..1> and reset targets."""
    m = library.sync_machine(n_data)
    b0 = SparseState.basis(bits="0" * (n_data + 1))
    b1 = SparseState.basis(bits="1" * (n_data + 1))
    qubits = tuple(tape_qubit(i) for i in range(n_data + 1)) + (m.halt_qubit,)
    zeros = "0" * n_data
    return m, b0, b1, (RegisterTarget.basis(qubits, "0" + zeros + "1"), RegisterTarget.basis(qubits, "1" + zeros + "1"))


# -- concatenation -----------------------------------------------------------


@dataclass(frozen=True)
class ProgramMachine:
    """A machine plus the register conventions of its tape programs.

    Symbol ``x`` is written as ``cells_per_symbol`` cells ``1 x 0 ...``
    starting at ``program_offset``; the data register is ``data_qubits``.
    """

    machine: MachineDef
    data_qubits: tuple
    ops: tuple = ()
    alphabet: str = "01"
    cells_per_symbol: int = library.PROGRAM_CELLS
    program_offset: int = 0
    max_len: int = 16

    def encode(self, program: str) -> str:
        if len(program) > self.max_len:
            raise ValueError(f"program longer than {self.max_len} symbols")
        pad = "0" * (self.cells_per_symbol - 2)
        out = []
        for ch in program:
            if ch not in self.alphabet:
                raise ValueError(f"symbol {ch!r} not in alphabet {self.alphabet!r}")
            out.append("1" + str(self.alphabet.index(ch)) + pad)
        return "".join(out)

    def prepare(self, data, program: str) -> SparseState:
        data = np.asarray(data, dtype=complex)
        n = len(self.data_qubits)
        if data.shape != (1 << n,):
            raise ValueError("data vector does not match the data register")
        bits = self.encode(program)
        ones = frozenset(self.program_offset + i for i, b in enumerate(bits) if b == "1")
        terms = []
        for k, amp in enumerate(data):
            cfg = Config(0, 0, ones)
            for pos, q in enumerate(self.data_qubits):
                cfg = cfg.with_bit(q, (k >> (n - 1 - pos)) & 1)
            terms.append((cfg, amp))
        return SparseState(terms)

    def apply_symbols(self, data, program: str) -> np.ndarray:
        """Ideal effect of ``program`` on a data vector (symbols left to right)."""
        v = np.asarray(data, dtype=complex)
        for ch in program:
            v = self.ops[self.alphabet.index(ch)] @ v
        return v


def standard_program_machine() -> ProgramMachine:
    ops = (library.H, library.S)
    return ProgramMachine(library.program_machine(ops), (proc_qubit(0),), ops)


@dataclass
class ConcatResult:
    status: str  # "found", "none", "exhausted"
    program: str | None = None
    steps: int | None = None
    fidelity: float | None = None
    purity: float | None = None
    candidates: int = 0

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "program": self.program,
            "steps": self.steps,
            "fidelity": self.fidelity,
            "purity": self.purity,
            "candidates": self.candidates,
        }


def _candidates(alphabet: str, max_len: int):
    for n in range(max_len + 1):
        for tup in product(alphabet, repeat=n):
            yield "".join(tup)


def _evaluate(pm: ProgramMachine, data, target, program: str, horizon: int, epsilon: float, require_halt: bool):
    m = pm.machine
    s = pm.prepare(data, program)
    for k in range(horizon + 1):
        if k:
            s = step(m, s)
        if require_halt and halt_probability(s, m.halt_index) < 1 - epsilon:
            continue
        rho = reduced_density(s, pm.data_qubits, strict=False)
        fid = state_fidelity(rho, target)
        pur = purity(rho)
        if 2.0 - 2.0 * math.sqrt(max(fid, 0.0)) < epsilon and pur >= 1 - epsilon:
            return k, fid, pur
    return None


def concat_search(
    pm: ProgramMachine,
    data,
    target,
    max_len: int,
    horizon: int,
    epsilon: float = 1e-9,
    require_halt: bool = True,
    max_candidates: int = 1 << 16,
    workers: int | None = None,
) -> ConcatResult:
    """Shortest, then lexicographically first, program reaching ``target``.

    A program succeeds at step ``s`` when its data-register marginal is
    within ``epsilon`` of ``target`` (squared distance up to global phase,
    ``2 - 2 sqrt(F)``), that marginal has purity at least ``1 - epsilon``
    and, with ``require_halt``, the halt qubit reads 1 with probability at
    least ``1 - epsilon``. The smallest such step is reported.
    """
    data = np.asarray(data, dtype=complex)
    target = np.asarray(target, dtype=complex)
    target = target / np.linalg.norm(target)
    if max_len > pm.max_len:
        raise ValueError(f"max_len {max_len} exceeds the machine's program limit {pm.max_len}")
    space = sum(len(pm.alphabet) ** n for n in range(max_len + 1))
    budget = min(space, max_candidates)
    progs = [p for _, p in zip(range(budget), _candidates(pm.alphabet, max_len))]
    if workers is None:
        workers = int(os.environ.get("UQTMLAB_THREADS", "1"))

    def run_one(p):
        return _evaluate(pm, data, target, p, horizon, epsilon, require_halt)

    chunk = max(1, workers) * 8
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for start in range(0, len(progs), chunk):
            batch = progs[start:start + chunk]
            results = list(pool.map(run_one, batch)) if pool else [run_one(p) for p in batch]
            for i, (p, hit) in enumerate(zip(batch, results)):
                if hit is not None:
                    k, fid, pur = hit
                    return ConcatResult("found", p, k, fid, pur, start + i + 1)
    finally:
        if pool:
            pool.shutdown()
    if budget < space:
        return ConcatResult("exhausted", candidates=budget)
    return ConcatResult("none", candidates=budget)
