"""Sparse machine states, reduced density matrices and entanglement measures.

A machine configuration is a classical basis state ``|x>|n>|m>``: head
position, processor basis index (halt qubit included) and the finite set of
tape cells holding a 1. Blank cells are 0 and are never stored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

PRUNE_THRESHOLD = 1e-14

QubitId = tuple  # ("proc", i) or ("tape", x)


def proc_qubit(i: int) -> QubitId:
    return ("proc", int(i))


def tape_qubit(x: int) -> QubitId:
    return ("tape", int(x))


@dataclass(frozen=True)
class Config:
    """One basis configuration. ``ones`` is the set of tape cells equal to 1."""

    head: int
    proc: int
    ones: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.proc < 0:
            raise ValueError(f"processor index must be non-negative, got {self.proc}")
        if not isinstance(self.ones, frozenset):
            object.__setattr__(self, "ones", frozenset(int(x) for x in self.ones))

    @classmethod
    def from_bits(cls, head: int = 0, proc: int = 0, bits: str | Sequence[int] = "", offset: int = 0) -> Config:
        cells = [offset + i for i, b in enumerate(bits) if int(b)]
        return cls(int(head), int(proc), frozenset(cells))

    def read(self, x: int) -> int:
        return 1 if x in self.ones else 0

    def proc_bit(self, i: int) -> int:
        return (self.proc >> i) & 1

    def bit(self, qubit: QubitId) -> int:
        kind, idx = qubit
        if kind == "proc":
            return self.proc_bit(idx)
        if kind == "tape":
            return self.read(idx)
        raise ValueError(f"unknown qubit kind {kind!r}")

    def with_bit(self, qubit: QubitId, value: int) -> Config:
        kind, idx = qubit
        if kind == "proc":
            proc = (self.proc & ~(1 << idx)) | (int(value) << idx)
            return Config(self.head, proc, self.ones)
        if value:
            return Config(self.head, self.proc, self.ones | {idx})
        return Config(self.head, self.proc, self.ones - {idx})

    @property
    def support(self) -> tuple[int, int]:
        """Inclusive cell range of the canonical tape window (1-cells plus head)."""
        cells = self.ones | {self.head}
        return min(cells), max(cells)

    @property
    def tape(self) -> tuple[int, tuple[int, ...]]:
        """Canonical ``(offset, bits)`` form of the tape."""
        lo, hi = self.support
        return lo, tuple(self.read(x) for x in range(lo, hi + 1))

    def sort_key(self):
        return (self.head, self.proc, tuple(sorted(self.ones)))

    def __str__(self):
        off, bits = self.tape
        return f"x={self.head} q={self.proc} tape@{off}={''.join(map(str, bits))}"


class SparseState:
    """Immutable map Config -> complex amplitude.

    Amplitudes with squared magnitude below ``prune`` are dropped on
    construction. The state is not renormalized.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Config, complex] | Iterable[tuple[Config, complex]] = (), prune: float = PRUNE_THRESHOLD):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Config, complex] = {}
        for cfg, amp in items:
            acc[cfg] = acc.get(cfg, 0j) + complex(amp)
        kept = {}
        for cfg, amp in acc.items():
            if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
                raise ValueError(f"non-finite amplitude {amp} at {cfg}")
            if abs(amp) ** 2 >= prune:
                kept[cfg] = amp
        self._terms = kept

    @classmethod
    def basis(cls, head: int = 0, proc: int = 0, bits: str | Sequence[int] = "", offset: int = 0) -> SparseState:
        return cls({Config.from_bits(head, proc, bits, offset): 1.0})

    @property
    def terms(self) -> Mapping[Config, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def configs(self) -> list[Config]:
        return sorted(self._terms, key=Config.sort_key)

    def amplitude(self, cfg: Config) -> complex:
        return self._terms.get(cfg, 0j)

    def __len__(self):
        return len(self._terms)

    def __iter__(self) -> Iterator[Config]:
        return iter(self._terms)

    def __eq__(self, other):
        return isinstance(other, SparseState) and self._terms == other._terms

    def __repr__(self):
        parts = [f"({amp:.6g})|{cfg}>" for cfg, amp in sorted(self._terms.items(), key=lambda kv: kv[0].sort_key())]
        return "SparseState(" + " + ".join(parts) + ")"

    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self._terms.values()))

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def scaled(self, factor: complex) -> SparseState:
        return SparseState({c: a * factor for c, a in self._terms.items()})

    def normalized(self) -> SparseState:
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalize the zero state")
        return self.scaled(1.0 / n)

    def project(self, qubit: QubitId, value: int) -> SparseState:
        """Unnormalized projection onto ``qubit == value``."""
        return SparseState({c: a for c, a in self._terms.items() if c.bit(qubit) == value})

    def is_normalized(self, tol: float = 1e-10) -> bool:
        return abs(self.norm_sq() - 1.0) <= tol


def inner_product(a: SparseState, b: SparseState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if len(a) > len(b):
        return sum((a.amplitude(c).conjugate() * amp for c, amp in b.items()), 0j)
    return sum((amp.conjugate() * b.amplitude(c) for c, amp in a.items()), 0j)


def distance_sq(a: SparseState, b: SparseState) -> float:
    """||a - b||^2 = 2 - 2 Re<a|b> for normalized states."""
    return max(0.0, 2.0 - 2.0 * inner_product(a, b).real)


def fidelity_pure(s: SparseState, target: SparseState) -> float:
    return min(1.0, abs(inner_product(target, s)) ** 2)


def superpose(c0: complex, a: SparseState, c1: complex, b: SparseState) -> SparseState:
    terms = [(cfg, c0 * amp) for cfg, amp in a.items()]
    terms += [(cfg, c1 * amp) for cfg, amp in b.items()]
    return SparseState(terms)


@dataclass(frozen=True)
class RegisterLayout:
    """Named, disjoint groups of qubit identifiers.

    ``head_dim`` records the non-qubit head-position factor for window
    embeddings (0 when unused).
    """

    groups: Mapping[str, tuple]
    head_dim: int = 0

    def __post_init__(self):
        seen: dict = {}
        for name, qubits in self.groups.items():
            for q in qubits:
                if q in seen:
                    raise ValueError(f"qubit {q} appears in both {seen[q]!r} and {name!r}")
                seen[q] = name

    def __getitem__(self, name: str) -> tuple:
        return tuple(self.groups[name])

    def names(self) -> list[str]:
        return list(self.groups)


@dataclass(frozen=True)
class DensityMatrix:
    """Density matrix with optional basis labels (bit strings or configs)."""

    matrix: np.ndarray
    labels: tuple | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def hermitian_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def trace_error(self) -> float:
        return abs(complex(np.trace(self.matrix)) - 1.0)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def is_valid(self, tol: float = 1e-10) -> bool:
        if self.hermitian_error() > tol or self.trace_error() > tol:
            return False
        return bool(np.all(self.eigenvalues() >= -tol))


def _split(s: SparseState, qubits: Sequence[QubitId]) -> dict[Config, dict[int, complex]]:
    """Group amplitudes by the rest of the configuration.

    Returns rest-config -> {kept index: amplitude}; the first qubit in
    ``qubits`` is the most significant bit of the kept index.
    """
    groups: dict[Config, dict[int, complex]] = {}
    n = len(qubits)
    for cfg, amp in s.items():
        k = 0
        rest = cfg
        for pos, q in enumerate(qubits):
            bit = cfg.bit(q)
            k |= bit << (n - 1 - pos)
            if bit:
                rest = rest.with_bit(q, 0)
        groups.setdefault(rest, {})[k] = amp
    return groups


def _tape_union(s: SparseState) -> list[tuple[int, int]]:
    return [cfg.support for cfg in s]


def reduced_density(s: SparseState, keep: Sequence[QubitId], strict: bool = True) -> DensityMatrix:
    """Partial trace of |s><s| onto ``keep``.

    With ``strict`` a kept tape cell outside every configuration's support
    is rejected; otherwise such a cell is read as blank.
    """
    keep = [tuple(q) for q in keep]
    if len(set(keep)) != len(keep):
        raise ValueError("duplicate qubits in keep")
    if strict:
        ranges = _tape_union(s)
        for kind, idx in keep:
            if kind == "tape" and not any(lo <= idx <= hi for lo, hi in ranges):
                raise ValueError(f"tape cell {idx} lies outside the support of every configuration")
    dim = 1 << len(keep)
    rho = np.zeros((dim, dim), dtype=complex)
    for branch in _split(s, keep).values():
        v = np.zeros(dim, dtype=complex)
        for k, amp in branch.items():
            v[k] = amp
        rho += np.outer(v, v.conj())
    labels = tuple(format(k, f"0{len(keep)}b") if keep else "" for k in range(dim))
    return DensityMatrix(rho, labels)


def complement_density(
    states: Sequence[tuple[float, SparseState]],
    traced: Sequence[QubitId],
    basis: Sequence[Config] | None = None,
) -> DensityMatrix:
    """Mixture ``sum_i w_i Tr_traced |s_i><s_i|`` on the remaining degrees of freedom.

    The result is expressed in a basis of rest-configurations (traced qubits
    zeroed), sorted deterministically unless ``basis`` is given.
    """
    split = [(w, _split(s, traced)) for w, s in states]
    if basis is None:
        rests = set()
        for _, groups in split:
            rests.update(groups)
        basis = sorted(rests, key=Config.sort_key)
    index = {c: i for i, c in enumerate(basis)}
    dim = len(basis)
    rho = np.zeros((dim, dim), dtype=complex)
    for w, groups in split:
        cols: dict[int, np.ndarray] = {}
        for rest, branch in groups.items():
            if rest not in index:
                raise ValueError(f"configuration {rest} missing from the supplied basis")
            i = index[rest]
            for k, amp in branch.items():
                cols.setdefault(k, np.zeros(dim, dtype=complex))[i] = amp
        for v in cols.values():
            rho += w * np.outer(v, v.conj())
    return DensityMatrix(rho, tuple(basis))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Entropy in bits; eigenvalues below 1e-15 contribute 0."""
    lam = rho.eigenvalues()
    lam = lam[lam > 1e-15]
    return float(max(0.0, -np.sum(lam * np.log2(lam))))


def purity(rho: DensityMatrix) -> float:
    m = rho.matrix
    return float(np.real(np.sum(m * m.T)))


def trace_distance(r1: DensityMatrix, r2: DensityMatrix) -> float:
    """||r1 - r2||_1 / 2, aligning labelled bases when they differ."""
    a, b = r1.matrix, r2.matrix
    if r1.labels is not None and r2.labels is not None and r1.labels != r2.labels:
        labels = list(dict.fromkeys(list(r1.labels) + list(r2.labels)))
        pos = {lab: i for i, lab in enumerate(labels)}
        a = _embed(a, [pos[x] for x in r1.labels], len(labels))
        b = _embed(b, [pos[x] for x in r2.labels], len(labels))
    diff = a - b
    ev = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.sum(np.abs(ev)))


def _embed(m: np.ndarray, idx: list[int], dim: int) -> np.ndarray:
    out = np.zeros((dim, dim), dtype=complex)
    out[np.ix_(idx, idx)] = m
    return out


def state_fidelity(rho: DensityMatrix, target: np.ndarray) -> float:
    """<t|rho|t> for a pure target vector in the labelled qubit basis."""
    t = np.asarray(target, dtype=complex)
    return float(np.real(t.conj() @ rho.matrix @ t))
