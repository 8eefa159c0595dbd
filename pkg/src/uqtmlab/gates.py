"""Programmable gate arrays: a fixed unitary on data (x) program registers.

Data qubits form the most significant block of the joint index:
``index = data_index * 2**p + program_index``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

UNITARY_TOL = 1e-10


class GateError(ValueError):
    pass


@dataclass(frozen=True)
class DenseUnitary:
    matrix: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        u = np.asarray(self.matrix, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise GateError(f"unitary must be square, got shape {u.shape}")
        n = u.shape[0].bit_length() - 1
        if 1 << n != u.shape[0]:
            raise GateError(f"dimension {u.shape[0]} is not a power of two")
        err = unitarity_error(u)
        if err > UNITARY_TOL:
            raise GateError(f"matrix {self.name!r} is not unitary (||U^dag U - I||_F = {err:.3g})")
        object.__setattr__(self, "matrix", u)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def __matmul__(self, other):
        return self.matrix @ (other.matrix if isinstance(other, DenseUnitary) else other)


def unitarity_error(u: np.ndarray) -> float:
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), "fro"))


def phase_distance(u1: DenseUnitary, u2: DenseUnitary) -> float:
    """min over phi of ||u1 - e^{i phi} u2||_F."""
    a, b = u1.matrix, u2.matrix
    overlap = abs(np.trace(b.conj().T @ a))
    val = np.sum(np.abs(a) ** 2) + np.sum(np.abs(b) ** 2) - 2 * overlap
    return float(math.sqrt(max(val, 0.0)))


def phase_equivalent(u1: DenseUnitary, u2: DenseUnitary, tol: float = 1e-8) -> bool:
    return phase_distance(u1, u2) <= tol


GATES = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
    "H": np.array([[1, 1], [1, -1]]) / math.sqrt(2),
    "S": np.diag([1, 1j]),
    "T": np.diag([1, np.exp(1j * math.pi / 4)]),
    "P": np.diag([1, np.exp(1j * math.pi / 4)]),
}


def named_gate(name: str) -> DenseUnitary:
    try:
        return DenseUnitary(GATES[name.upper()], name.upper())
    except KeyError:
        raise GateError(f"unknown gate {name!r}; known: {', '.join(sorted(GATES))}") from None


def random_unitary(dim: int, rng) -> DenseUnitary:
    """Haar-random unitary (QR of a complex Ginibre matrix, phases fixed)."""
    gen = np.random.default_rng(rng)
    z = (gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return DenseUnitary(q * (d / np.abs(d)))


def random_state(dim: int, rng) -> np.ndarray:
    gen = np.random.default_rng(rng)
    v = gen.standard_normal(dim) + 1j * gen.standard_normal(dim)
    return v / np.linalg.norm(v)


def _unit(v, what: str = "state", tol: float = 1e-12) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise GateError(f"{what} must have unit norm (got {np.linalg.norm(v):.15g})")
    return v


@dataclass(frozen=True)
class GateArrayModel:
    g: DenseUnitary
    m_data: int
    p_program: int

    def __post_init__(self):
        if self.m_data < 1 or self.p_program < 0:
            raise GateError("need at least one data qubit and a non-negative program size")
        if self.m_data + self.p_program != self.g.n_qubits:
            raise GateError(f"{self.m_data} data + {self.p_program} program qubits != {self.g.n_qubits} qubits of G")

    @property
    def data_dim(self) -> int:
        return 1 << self.m_data

    @property
    def program_dim(self) -> int:
        return 1 << self.p_program


def basis_program(k: int, p: int) -> np.ndarray:
    v = np.zeros(1 << p, dtype=complex)
    v[k] = 1.0
    return v


def apply(model: GateArrayModel, data, program) -> np.ndarray:
    """G (data (x) program)."""
    data = np.asarray(data, dtype=complex).ravel()
    program = np.asarray(program, dtype=complex).ravel()
    if data.shape != (model.data_dim,) or program.shape != (model.program_dim,):
        raise GateError(f"dimension mismatch: data {data.shape[0]} vs {model.data_dim}, program {program.shape[0]} vs {model.program_dim}")
    return model.g.matrix @ np.kron(data, program)


def program_overlap(p1, p2) -> complex:
    return complex(np.vdot(np.asarray(p1, dtype=complex), np.asarray(p2, dtype=complex)))


def data_marginal(model: GateArrayModel, out: np.ndarray) -> np.ndarray:
    m = out.reshape(model.data_dim, model.program_dim)
    return m @ m.conj().T


def contract_program(model: GateArrayModel, out: np.ndarray, program) -> np.ndarray:
    """(I (x) <program|) out: the data vector paired with a program state."""
    m = out.reshape(model.data_dim, model.program_dim)
    return m @ np.conj(np.asarray(program, dtype=complex))


@dataclass
class DeterminismReport:
    ok: bool
    min_fidelity: float
    program_out: np.ndarray | None
    epsilon: float
    n_data_states: int

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "min_fidelity": self.min_fidelity,
            "epsilon": self.epsilon,
            "n_data_states": self.n_data_states,
            "program_out": None if self.program_out is None else [[z.real, z.imag] for z in self.program_out],
        }


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.round(np.abs(v), 12)))
    return v * (abs(v[k]) / v[k])


def check_deterministic_program(
    model: GateArrayModel,
    target: DenseUnitary,
    program,
    epsilon: float = 1e-10,
    n_random: int = 8,
    seed: int = 0,
) -> DeterminismReport:
    """Test ``G(|D>|P>) = |U D>|P'>`` with one ``P'`` for all data states.

    Data states: the computational basis plus ``n_random`` seeded random
    states. For each, the output is contracted with ``<U D|`` on the data
    register, leaving the program-register vector ``v``. ``P'`` is the
    dominant direction of the ``v`` and the fidelity of data state ``D`` is
    ``|<P'|v_D>|^2``.
    """
    if target.n_qubits != model.m_data:
        raise GateError("target acts on a different number of qubits than the data register")
    program = _unit(program, "program")
    datas = [basis_program(i, model.m_data) for i in range(model.data_dim)]
    gen = np.random.default_rng(seed)
    datas += [random_state(model.data_dim, gen) for _ in range(n_random)]
    vs = []
    for d in datas:
        out = apply(model, d, program)
        vs.append(contract_program_data(model, out, target.matrix @ d))
    vs = np.array(vs)
    _, u = np.linalg.eigh(vs.T @ vs.conj())
    p_out = _fix_phase(u[:, -1])
    fids = np.abs(vs @ p_out.conj()) ** 2
    fmin = float(np.min(fids))
    return DeterminismReport(fmin >= 1 - epsilon, fmin, p_out, epsilon, len(datas))


def contract_program_data(model: GateArrayModel, out: np.ndarray, data_target: np.ndarray) -> np.ndarray:
    """(<data_target| (x) I) out: the program vector paired with a data state."""
    m = out.reshape(model.data_dim, model.program_dim)
    return np.conj(data_target) @ m


def build_controlled_u_array(units: Sequence[DenseUnitary]) -> GateArrayModel:
    """G = sum_k U_k (x) |k><k|; unused program states act as identity."""
    units = [u if isinstance(u, DenseUnitary) else DenseUnitary(u) for u in units]
    if not units:
        raise GateError("need at least one unitary")
    m = units[0].n_qubits
    for u in units:
        if u.n_qubits != m:
            raise GateError("all units must act on the same number of qubits")
    p = max(0, math.ceil(math.log2(len(units))))
    pd = 1 << p
    blocks = [u.matrix for u in units] + [np.eye(1 << m)] * (pd - len(units))
    g = sum(np.kron(b, np.outer(basis_program(k, p), basis_program(k, p))) for k, b in enumerate(blocks))
    return GateArrayModel(DenseUnitary(g, "controlled-U"), m, p)


def build_swap_array(m: int) -> GateArrayModel:
    """p = m program qubits; G swaps the data and program registers."""
    if m < 1:
        raise GateError("m must be at least 1")
    d = 1 << m
    g = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            g[j * d + i, i * d + j] = 1.0
    return GateArrayModel(DenseUnitary(g, "swap"), m, m)


def nc_overlaps(model: GateArrayModel, units: Sequence[DenseUnitary], programs: Sequence | None = None, epsilon: float = 1e-10):
    """Deterministic-program reports and program overlap matrices.

    Returns ``(reports, input_overlaps, output_overlaps, distinct)`` where
    ``distinct[j][k]`` marks phase-inequivalent target pairs.
    """
    if programs is None:
        programs = [basis_program(k, model.p_program) for k in range(len(units))]
    reports = [check_deterministic_program(model, u, p, epsilon) for u, p in zip(units, programs)]
    n = len(units)
    ins = np.array([[abs(program_overlap(programs[j], programs[k])) for k in range(n)] for j in range(n)])
    outs = np.array(
        [[abs(program_overlap(reports[j].program_out, reports[k].program_out)) for k in range(n)] for j in range(n)]
    )
    distinct = [[not phase_equivalent(units[j], units[k]) for k in range(n)] for j in range(n)]
    return reports, ins, outs, distinct


def program_parameter_count(m: int) -> tuple[int, int, int]:
    """(data-state, unitary, program-state) real parameter counts for m data qubits."""
    if not 1 <= m <= 20:
        raise GateError("m must be between 1 and 20")
    data = 2 ** (m + 1) - 1
    unitary = 2 ** (2 * m)
    return data, unitary, unitary * data


# -- program optimization ----------------------------------------------------


@dataclass
class OptConfig:
    restarts: int = 20
    max_iters: int = 500
    seed: int = 0
    fd_step: float = 1e-6
    workers: int | None = None


@dataclass
class OptResult:
    program: np.ndarray
    fidelity: float
    converged: bool
    purity: float
    restart: int
    history: list[float]  # best-so-far fidelity after each restart/iteration, in order

    def to_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "converged": self.converged,
            "data_purity": self.purity,
            "restart": self.restart,
            "program": [[z.real, z.imag] for z in self.program],
            "iterations": len(self.history),
        }


def program_fidelity(model: GateArrayModel, target_data: np.ndarray, data: np.ndarray, program: np.ndarray) -> float:
    """<U D| rho_D(P) |U D> for a unit program vector."""
    out = apply(model, data, program)
    return float(np.sum(np.abs(contract_program_data(model, out, target_data)) ** 2))


def _to_program(x: np.ndarray) -> np.ndarray:
    n = x.size // 2
    v = x[:n] + 1j * x[n:]
    return v / np.linalg.norm(v)


def _ascend(f, x0: np.ndarray, iters: int, h: float) -> tuple[np.ndarray, float, list[float]]:
    """Finite-difference gradient ascent on the unit sphere with backtracking."""
    x = x0 / np.linalg.norm(x0)
    fx = f(x)
    hist = [fx]
    eta = 1.0
    eye = np.eye(x.size)
    for _ in range(iters):
        grad = np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in eye])
        grad -= np.dot(grad, x) * x
        gnorm = np.linalg.norm(grad)
        if gnorm < 1e-10:
            break
        eta = min(eta * 2.0, 1.0 / gnorm)
        while eta > 1e-14:
            y = x + eta * grad
            y /= np.linalg.norm(y)
            fy = f(y)
            # Armijo: demand a fraction of the predicted gain
            if fy >= fx + 1e-4 * eta * gnorm**2:
                break
            eta *= 0.5
        else:
            break
        gain = fy - fx
        x, fx = y, fy
        hist.append(fx)
        if gain < 1e-15:
            break
    return x, fx, hist


def optimize_program(model: GateArrayModel, target: DenseUnitary, data, epsilon: float = 1e-6, cfg: OptConfig | None = None) -> OptResult:
    """Maximize the data-marginal fidelity with ``U D`` over unit programs.

    Seeded multi-restart local ascent over normalized raw amplitudes
    (real and imaginary parts); restarts are merged by (fidelity, restart
    index) so serial and threaded runs agree.
    """
    cfg = cfg or OptConfig()
    data = _unit(data, "data")
    if target.n_qubits != model.m_data:
        raise GateError("target acts on a different number of qubits than the data register")
    td = target.matrix @ data
    dim = model.program_dim

    def f(x):
        return program_fidelity(model, td, data, _to_program(x))

    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    starts = [np.random.default_rng(s).standard_normal(2 * dim) for s in seeds]

    def one(x0):
        return _ascend(f, x0, cfg.max_iters, cfg.fd_step)

    workers = cfg.workers if cfg.workers is not None else int(os.environ.get("UQTMLAB_THREADS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, starts))
    else:
        runs = [one(x0) for x0 in starts]

    best_i, best_f, history = 0, -math.inf, []
    for i, (_, fx, hist) in enumerate(runs):
        for v in hist:
            history.append(max(history[-1], v) if history else v)
        if fx > best_f:
            best_i, best_f = i, fx
    prog = _to_program(runs[best_i][0])
    rho = data_marginal(model, apply(model, data, prog))
    return OptResult(
        program=prog,
        fidelity=best_f,
        converged=1 - best_f <= epsilon,
        purity=float(np.real(np.trace(rho @ rho))),
        restart=best_i,
        history=history,
    )


def optimal_program_fidelity(model: GateArrayModel, target: DenseUnitary, data) -> tuple[float, np.ndarray]:
    """Exact optimum: largest eigenvalue of K^dag K with K = (<UD| (x) I) G (|D> (x) I)."""
    data = _unit(data, "data")
    td = target.matrix @ data
    g = model.g.matrix.reshape(model.data_dim, model.program_dim, model.data_dim, model.program_dim)
    k = np.einsum("a,abcd,c->bd", td.conj(), g, data)
    w, v = np.linalg.eigh(k.conj().T @ k)
    return float(w[-1]), v[:, -1]
