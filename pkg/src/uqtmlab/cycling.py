"""Repeated application of one fixed step operator with a halt check.

The loop is: apply G, then inspect the halt qubit; stop once it reads 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .machine import (
    DEFAULT_MAX_DIM,
    MIN_BRANCH_PROB,
    MachineDef,
    MachineError,
    WindowStep,
    build_global_step,
    step,
)
from .state import RegisterLayout, SparseState, proc_qubit, tape_qubit

EXACT = "exact"
SAMPLED = "sampled"


@dataclass(frozen=True)
class CycleConfig:
    max_iters: int = 64
    halt_mode: str = EXACT
    seed: int | None = 0
    halt_threshold: float = 1 - 1e-9

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0 < self.halt_threshold <= 1:
            raise ValueError("halt_threshold must lie in (0, 1]")
        if self.halt_mode not in (EXACT, SAMPLED):
            raise ValueError(f"halt_mode must be {EXACT!r} or {SAMPLED!r}")


def embed_qtm_step(
    m: MachineDef,
    window_len: int,
    data: Sequence[int] = (),
    program: Sequence[int] = (),
    max_dim: int = DEFAULT_MAX_DIM,
) -> tuple[WindowStep, RegisterLayout]:
    """Window step operator plus a layout naming its qubit groups.

    ``data`` and ``program`` are tape cells carved out of the tape group.
    The head position is a ``window_len``-dimensional non-qubit factor.
    """
    g = build_global_step(m, window_len, max_dim)
    cells = set(range(window_len))
    for name, sel in (("data", data), ("program", program)):
        bad = [x for x in sel if x not in cells]
        if bad:
            raise MachineError(f"{name} cells {bad} are outside the window or already assigned")
        cells -= set(sel)
    groups = {
        "halt": (proc_qubit(m.halt_index),),
        "processor": tuple(proc_qubit(i) for i in range(m.n_qubits) if i != m.halt_index),
    }
    if data:
        groups["data"] = tuple(tape_qubit(x) for x in data)
    if program:
        groups["program"] = tuple(tape_qubit(x) for x in program)
    groups["tape"] = tuple(tape_qubit(x) for x in sorted(cells))
    return g, RegisterLayout(groups, head_dim=window_len)


@dataclass
class CycleReport:
    output: np.ndarray
    iterations: int
    halted: bool
    per_iter_halt_prob: list[float] = field(default_factory=list)
    mode: str = EXACT
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "halted": self.halted,
            "per_iter_halt_prob": list(self.per_iter_halt_prob),
            "mode": self.mode,
            "seed": self.seed,
            "output_norm": float(np.linalg.norm(self.output)),
        }


def cycle_run(g: WindowStep, psi, cfg: CycleConfig | None = None) -> CycleReport:
    """Apply ``g`` until the halt check succeeds or ``max_iters`` runs out.

    Exact mode stops once the halt probability reaches the threshold and
    leaves the state alone. Sampled mode measures the halt qubit after every
    iteration and collapses the state onto the outcome.
    """
    cfg = cfg or CycleConfig()
    v = g.to_vector(psi) if isinstance(psi, SparseState) else np.asarray(psi, dtype=complex).copy()
    if v.shape != (g.dim,):
        raise ValueError(f"input has dimension {v.shape}, window space has {g.dim}")
    if abs(np.linalg.norm(v) - 1) > 1e-10:
        raise ValueError("input must be normalized")
    mask = g.halt_mask()
    rng = np.random.default_rng(cfg.seed) if cfg.halt_mode == SAMPLED else None
    probs = []
    for i in range(1, cfg.max_iters + 1):
        v = g.matrix @ v
        p = float(np.sum(np.abs(v[mask]) ** 2))
        probs.append(p)
        if cfg.halt_mode == EXACT:
            if p >= cfg.halt_threshold:
                return CycleReport(v, i, True, probs, cfg.halt_mode, cfg.seed)
            continue
        if p < MIN_BRANCH_PROB:
            continue
        if rng.random() < p:
            v = np.where(mask, v, 0) / np.sqrt(p)
            return CycleReport(v, i, True, probs, cfg.halt_mode, cfg.seed)
        if p < 1:
            v = np.where(mask, 0, v) / np.sqrt(1 - p)
    return CycleReport(v, cfg.max_iters, False, probs, cfg.halt_mode, cfg.seed)


def equivalence_check(m: MachineDef, window_len: int, psi: SparseState, steps: int, max_dim: int = DEFAULT_MAX_DIM) -> float:
    """Squared distance between the cycled window state and the sparse run.

    Raises ``MachineError`` when the sparse run leaves the window, since the
    cyclic window would wrap where the infinite tape does not.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    g = build_global_step(m, window_len, max_dim)
    v = g.to_vector(psi)
    s = psi
    w = v
    for _ in range(steps):
        v = g.matrix @ v
        s = step(m, s)
        w = g.to_vector(s)  # raises on escape
    return float(np.sum(np.abs(v - w) ** 2))
