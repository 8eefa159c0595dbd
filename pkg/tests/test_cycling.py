from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uqtmlab import library
from uqtmlab.cycling import CycleConfig, cycle_run, embed_qtm_step, equivalence_check
from uqtmlab.halting import metric_series, myers_inputs, myers_superposition
from uqtmlab.machine import MachineError, check_global_unitarity
from uqtmlab.state import SparseState, proc_qubit, tape_qubit


def test_embed_identity_is_permutation():
    g, layout = embed_qtm_step(library.identity_machine(), 2)
    dense = g.toarray()
    assert set(np.unique(dense)) <= {0, 1}
    assert np.all(dense.sum(axis=0) == 1) and np.all(dense.sum(axis=1) == 1)
    assert layout["halt"] == (proc_qubit(0),)
    assert layout.head_dim == 2


def test_embed_layout_groups():
    g, layout = embed_qtm_step(library.myers_machine(2, 5), 4, data=(0,), program=(1, 2))
    assert layout["data"] == (tape_qubit(0),)
    assert layout["program"] == (tape_qubit(1), tape_qubit(2))
    assert layout["tape"] == (tape_qubit(3),)
    assert len(layout["processor"]) == 4
    assert check_global_unitarity(g)[0]
    with pytest.raises(MachineError):
        embed_qtm_step(library.identity_machine(), 3, data=(0,), program=(0,))


def test_cycle_config_validation():
    with pytest.raises(ValueError):
        CycleConfig(max_iters=0)
    with pytest.raises(ValueError):
        CycleConfig(halt_threshold=0)
    with pytest.raises(ValueError):
        CycleConfig(halt_mode="maybe")


def test_exact_mode_halting_steps():
    g3, _ = embed_qtm_step(library.halting_machine(3), 6)
    assert cycle_run(g3, SparseState.basis()).iterations == 3
    g, _ = embed_qtm_step(library.myers_machine(2, 5), 8)
    a, b = myers_inputs()
    ra, rb = cycle_run(g, a), cycle_run(g, b)
    assert (ra.iterations, rb.iterations) == (2, 5) and ra.halted and rb.halted


def test_max_iters_on_non_halting_machine():
    g, _ = embed_qtm_step(library.identity_machine(), 4)
    rep = cycle_run(g, SparseState.basis(), CycleConfig(max_iters=1))
    assert not rep.halted and rep.iterations == 1


def test_cycle_rejects_unnormalized_input():
    g, _ = embed_qtm_step(library.identity_machine(), 3)
    with pytest.raises(ValueError):
        cycle_run(g, SparseState.basis().scaled(2))


def test_sampled_mode_statistics():
    g, _ = embed_qtm_step(library.myers_machine(2, 5), 8)
    n = 600
    hits = sum(cycle_run(g, myers_superposition(), CycleConfig(halt_mode="sampled", seed=k)).iterations == 2 for k in range(n))
    assert abs(hits / n - 0.5) <= 3 * math.sqrt(0.25 / n)


def test_sampled_per_iter_probs_match_series():
    m = library.myers_machine(2, 5)
    g, _ = embed_qtm_step(m, 8)
    rep = cycle_run(g, myers_superposition(), CycleConfig(halt_mode="sampled", seed=0, max_iters=2))
    series = [r["halt_prob"] for r in metric_series(m, myers_superposition(), 2)]
    assert np.allclose(rep.per_iter_halt_prob, series, atol=1e-12)


def test_equivalence_check_myers():
    m = library.myers_machine(2, 5)
    assert equivalence_check(m, 8, myers_superposition(), 0) == 0
    assert equivalence_check(m, 8, myers_superposition(), 5) <= 1e-8


def test_equivalence_check_rejects_escape():
    with pytest.raises(MachineError, match="escapes"):
        equivalence_check(library.identity_machine(), 3, SparseState.basis(), 3)


@settings(max_examples=20, deadline=None)
@given(st.text("01", min_size=1, max_size=4), st.integers(0, 5))
def test_identity_equivalence_within_window(bits, steps):
    d = equivalence_check(library.identity_machine(), 6, SparseState.basis(bits=bits), steps)
    assert d <= 1e-12
