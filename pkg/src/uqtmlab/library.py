"""Bundled example machines.

Every machine here except ``identity`` and ``hadamard_split`` is a *toggle
machine*: the non-halt processor bits and the scanned cell are updated by a
unitary (``work`` while unhalted, ``halted`` afterwards), the halt bit is
XOR-ed with a predicate of the new processor bits, and the head direction
is a function of the new processor state alone. Each piece is unitary and
every processor state is entered from one side only, so the global step is
unitary on the infinite tape and on every cyclic window.
"""
from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .machine import MachineDef, make_machine

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.array([[1, 0], [0, 1j]], dtype=complex)

LocalMap = Callable[[int, int], Iterable[tuple[int, int, complex]]]


def identity_machine() -> MachineDef:
    """Writes back what it reads and moves right; only the halt qubit."""
    table = {(q, s): [(q, s, +1, 1.0)] for q in range(2) for s in (0, 1)}
    return make_machine(0, 0, table, "identity")


def hadamard_machine() -> MachineDef:
    """Hadamard on work qubit 0 every step; halt qubit 1 untouched."""
    table = {}
    for q in range(4):
        p, h = q & 1, q >> 1
        for s in (0, 1):
            table[(q, s)] = [(p2 | (h << 1), s, +1, H[p2, p]) for p2 in (0, 1)]
    return make_machine(1, 1, table, "hadamard-split")


def toggle_machine(
    n_rest: int,
    work: LocalMap,
    halted: LocalMap,
    halt_pred: Callable[[int], bool],
    direction: Callable[[int, int], int],
    name: str = "",
) -> MachineDef:
    """Assemble a machine with the halt qubit at index ``n_rest``."""
    table = {}
    for q in range(1 << (n_rest + 1)):
        h, rest = q >> n_rest, q & ((1 << n_rest) - 1)
        local = work if h == 0 else halted
        for s in (0, 1):
            succs = []
            for rest2, w, amp in local(rest, s):
                h2 = h ^ int(bool(halt_pred(rest2)))
                succs.append((rest2 | (h2 << n_rest), w, direction(h2, rest2), amp))
            table[(q, s)] = succs
    return make_machine(n_rest, n_rest, table, name)


def counter_machine(
    halt_at: tuple[int, int],
    load: Iterable[int] = (),
    cnot: Iterable[int] = (),
    left: Iterable[int] = (),
    halted_move: int = +1,
    name: str = "",
) -> MachineDef:
    """Reversible counter machine.

    Work bits: flag ``f`` (bit 0) and a counter ``c`` (bits 1..k). Each
    unhalted step increments ``c``; at counter values in ``load`` the
    scanned bit is XOR-ed into ``f``; at values in ``cnot`` the written bit
    is ``s XOR f``; values in ``left`` move the head left. The halt bit
    flips when the new counter equals ``halt_at[f]``.

    After halting the machine parks: the counter jumps to 0 leaving a 1 on
    the tape, then idles. Halted states reading a 1 flow back to unhalted;
    a halted head that only meets blank cells never reaches them.
    """
    top = max(halt_at)
    if min(halt_at) < 1:
        raise ValueError("halting steps must be at least 1")
    k = max(1, top.bit_length())
    cmod = 1 << k
    load, cnot, left = frozenset(load), frozenset(cnot), frozenset(left)
    if load & cnot:
        # (f, s) -> (f ^ s, s ^ f) is not a bijection
        raise ValueError(f"load and cnot overlap at counter values {sorted(load & cnot)}")

    def work(rest, s):
        f, c = rest & 1, rest >> 1
        c2 = (c + 1) % cmod
        f2 = f ^ s if c2 in load else f
        w = s ^ f if c2 in cnot else s
        return [(f2 | (c2 << 1), w, 1.0)]

    def halted(rest, s):
        f, c = rest & 1, rest >> 1
        t = halt_at[f]
        if c == t:
            c2, w = (0, 1) if s == 0 else (t, 0)
        elif c == 0:
            c2, w = (0, 0) if s == 0 else (t, 1)
        else:
            c2, w = c, s
        return [(f | (c2 << 1), w, 1.0)]

    def pred(rest):
        return (rest >> 1) == halt_at[rest & 1]

    def direction(h, rest):
        if h:
            return halted_move
        return -1 if (rest >> 1) in left else +1

    return toggle_machine(k + 1, work, halted, pred, direction, name)


def halting_machine(n: int) -> MachineDef:
    """Halts after exactly ``n`` steps on any input, leaving the tape alone."""
    return counter_machine((n, n), name=f"halt-at-{n}")


def myers_machine(n_a: int, n_b: int) -> MachineDef:
    """Input bit at cell 0: 0 halts after ``n_a`` steps, 1 after ``n_b``."""
    if not 1 <= n_a < n_b:
        raise ValueError(f"need 1 <= n_a < n_b, got ({n_a}, {n_b})")
    return counter_machine((n_a, n_b), load={1}, name=f"myers-{n_a}-{n_b}")


def sync_machine(n_data: int) -> MachineDef:
    """Controlled reset with synchronized branches.

    Cell 0 is the control qubit and cells 1..n_data the data. The machine
    loads the control, XORs it into every data cell, walks back to cell 0,
    XORs the control out of the processor again and halts at step
    ``2 * n_data + 3`` whatever the control value. Inputs ``|b>|b...b>``
    therefore all end with zeroed data and identical processor states.
    """
    if n_data < 1:
        raise ValueError("n_data must be at least 1")
    t = 2 * n_data + 3
    return counter_machine(
        (t, t),
        load={1, t},
        cnot=range(2, n_data + 2),
        left=range(n_data + 2, 2 * n_data + 3),
        halted_move=-1,
        name=f"sync-{n_data}",
    )


def sync_halt_step(n_data: int) -> int:
    return 2 * n_data + 3


PROGRAM_CELLS = 3


def program_machine(ops=(H, S)) -> MachineDef:
    """Machine whose tape program drives a one-qubit data register.

    Processor bits: data ``d`` (0), latch ``l`` (1), phase (2-3), halt (4).
    A program symbol ``x`` occupies three cells ``[1][x][0]``:

    * phase 0: swap the presence cell into the latch;
    * phase 1: if the latch is set apply ``ops[x]`` to ``d``;
    * phase 2: swap the latch out onto the padding cell.

    Reading an empty presence cell halts the machine.
    """
    ops = [np.asarray(u, dtype=complex) for u in ops]
    if len(ops) != 2 or any(u.shape != (2, 2) for u in ops):
        raise ValueError("program machine needs exactly two one-qubit unitaries")

    def pack(d, latch, phase):
        return d | (latch << 1) | (phase << 2)

    def work(rest, s):
        d, latch, phase = rest & 1, (rest >> 1) & 1, rest >> 2
        if phase in (0, 2):
            return [(pack(d, s, (phase + 1) % 3), latch, 1.0)]
        if phase == 1:
            if not latch:
                return [(pack(d, latch, 2), s, 1.0)]
            u = ops[s]
            return [(pack(d2, latch, 2), s, u[d2, d]) for d2 in (0, 1) if u[d2, d] != 0]
        return [(rest, s, 1.0)]

    park = {(1, 0): (3, 1), (3, 0): (3, 0), (3, 1): (1, 1), (1, 1): (1, 0)}

    def halted(rest, s):
        d, latch, phase = rest & 1, (rest >> 1) & 1, rest >> 2
        if latch == 0 and (phase, s) in park:
            phase2, w = park[(phase, s)]
            return [(pack(d, 0, phase2), w, 1.0)]
        return [(rest, s, 1.0)]

    def pred(rest):
        return (rest >> 2) == 1 and ((rest >> 1) & 1) == 0

    return toggle_machine(4, work, halted, pred, lambda h, r: +1, "program-driven")


def bundled() -> dict[str, MachineDef]:
    return {
        "identity": identity_machine(),
        "hadamard": hadamard_machine(),
        "myers-2-5": myers_machine(2, 5),
    }
