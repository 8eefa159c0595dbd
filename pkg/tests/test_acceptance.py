"""Acceptance criteria. Each test records one PASS/FAIL line for the summary."""
from __future__ import annotations

import math
import time

import numpy as np

from conftest import record
from uqtmlab import library
from uqtmlab.cycling import cycle_run, embed_qtm_step, equivalence_check
from uqtmlab.gates import (
    OptConfig,
    apply,
    build_controlled_u_array,
    build_swap_array,
    data_marginal,
    named_gate,
    nc_overlaps,
    optimal_program_fidelity,
    optimize_program,
    phase_equivalent,
    program_overlap,
    program_parameter_count,
    random_state,
    random_unitary,
)
from uqtmlab.halting import (
    branch_sync_check,
    concat_search,
    halt_metrics,
    metric_series,
    monitored_vs_unmonitored,
    myers_inputs,
    myers_superposition,
    myers_targets,
    standard_program_machine,
    sync_setup,
)
from uqtmlab.machine import build_global_step, check_global_unitarity, run, validate_local
from uqtmlab.state import SparseState


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_01_parameter_counting():
    with Timer() as t:
        c1, c2 = program_parameter_count(1), program_parameter_count(2)
    ok = c1 == (3, 4, 12) and c2 == (7, 16, 112) and t.elapsed < 1
    assert record(1, "parameter counting", ok, f"m=1 {c1}, m=2 {c2}")


def test_02_well_formedness():
    worst, local_ok = 0.0, True
    with Timer() as t:
        for m in library.bundled().values():
            local_ok &= validate_local(m, 1e-10).passed
            for L in range(3, 9):
                worst = max(worst, check_global_unitarity(build_global_step(m, L))[1])
    ok = local_ok and worst <= 1e-10 and t.elapsed < 5
    assert record(2, "well-formedness of bundled machines, windows 3..8", ok, f"max ||U^dag U - I||_F = {worst:.2e}, {t.elapsed:.2f}s")


def test_03_myers_entanglement():
    m = library.myers_machine(2, 5)
    with Timer() as t:
        s = myers_superposition()
        rows = [halt_metrics(s, m.halt_index)] + metric_series(m, s, 10)
    ent = [r["halt_entropy"] for r in rows]
    prob = [r["halt_prob"] for r in rows]
    ok = (
        all(abs(ent[k]) <= 1e-9 for k in (0, 1))
        and all(abs(ent[k] - 1) <= 1e-9 for k in (2, 3, 4))
        and all(abs(ent[k]) <= 1e-9 for k in range(5, 11))
        and all(abs(prob[k] - 0.5) <= 1e-12 for k in (2, 3, 4))
        and t.elapsed < 1
    )
    assert record(3, "Myers halt-qubit entanglement", ok, f"entropy by step {[round(e, 12) for e in ent[:7]]}")


def test_04_monitored_vs_unmonitored():
    m = library.myers_machine(2, 5)
    with Timer() as t:
        res = [monitored_vs_unmonitored(m, myers_superposition(), k, trials=1000, seed=k) for k in range(0, 7)]
    exact = max(r.trace_distance_exact for r in res)
    ok = exact <= 1e-10 and all(r.within_3sigma for r in res) and t.elapsed < 30
    probe3 = res[3]
    detail = f"max exact trace distance {exact:.1e}; step 3 sampled freq {probe3.sampled_halt_freq:.3f} vs 0.5 +/- {probe3.sigma3:.3f}"
    assert record(4, "monitored vs unmonitored marginal", ok, detail)


def test_05_branch_sync():
    with Timer() as t:
        m, b0, b1, targets = sync_setup(2)
        sync = branch_sync_check(m, b0, b1, targets, epsilon=1e-9)
        my = library.myers_machine(2, 5)
        a, b = myers_inputs()
        rep = branch_sync_check(my, a, b, myers_targets(my), epsilon=1e-9)
    ok = (
        sync.synchronized
        and sync.superposed_fidelity >= 1 - 1e-9
        and (rep.s0, rep.s1) == (2, 5)
        and not rep.synchronized
        and t.elapsed < 1
    )
    assert record(5, "linearity / branch sync", ok, f"sync fidelity {sync.superposed_fidelity:.12f}; Myers s0={rep.s0}, s1={rep.s1}")


def test_06_concatenation():
    pm = standard_program_machine()
    zero = np.array([1, 0], dtype=complex)
    plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
    with Timer() as t:
        results = []
        for data, prog in [(zero, "01"), (plus, "10"), (zero, "011")]:
            target = pm.apply_symbols(data, prog)
            runs = [concat_search(pm, data, target, 6, 40, 1e-9, workers=w) for w in (1, 1, 4)]
            results.append((prog, runs))
    ok = t.elapsed < 60
    for prog, runs in results:
        first = runs[0]
        ok &= first.status == "found" and first.fidelity >= 1 - 1e-9
        ok &= all(r == first for r in runs)
    detail = ", ".join(f"{p}->{r[0].program}@{r[0].steps}" for p, r in results) + f", {t.elapsed:.1f}s"
    assert record(6, "concatenated program search", ok, detail)


def test_07_nc_orthogonality():
    units = [named_gate(n) for n in "IXPH"]
    with Timer() as t:
        model = build_controlled_u_array(units)
        reports, _, outs, distinct = nc_overlaps(model, units)
    worst = max(outs[j][k] for j in range(4) for k in range(4) if j != k and distinct[j][k])
    ok = all(r.ok for r in reports) and worst <= 1e-10 and t.elapsed < 1
    assert record(7, "NC orthogonality on controlled-U array", ok, f"max overlap {worst:.1e}")


def test_08_data_dependent_programs():
    with Timer() as t:
        worst, best_overlap = 0.0, 0.0
        for m in (1, 2):
            model = build_swap_array(m)
            rng = np.random.default_rng(100 + m)
            progs, units = [], []
            for _ in range(100):
                u = random_unitary(model.data_dim, rng)
                d = random_state(model.data_dim, rng)
                prog = u.matrix @ d
                rho = data_marginal(model, apply(model, d, prog))
                ud = u.matrix @ d
                fid = float(np.real(ud.conj() @ rho @ ud))
                worst = max(worst, 2 - 2 * math.sqrt(min(1.0, fid)))
                progs.append(prog)
                units.append(u)
            for j in range(len(progs)):
                for k in range(j + 1, len(progs)):
                    if not phase_equivalent(units[j], units[k]):
                        best_overlap = max(best_overlap, abs(program_overlap(progs[j], progs[k])))
    ok = worst <= 1e-12 and best_overlap > 0.5 and t.elapsed < 5
    assert record(8, "data-dependent programs on swap array", ok, f"max distance_sq {worst:.1e}, max program overlap {best_overlap:.3f}")


def test_09_optimizer():
    cfg = OptConfig(restarts=20, max_iters=500, seed=0)
    cases = []
    with Timer() as t:
        rng = np.random.default_rng(7)
        for m in (1, 2):
            model = build_swap_array(m)
            cases.append((model, random_unitary(model.data_dim, rng), random_state(model.data_dim, rng)))
        units = [named_gate(n) for n in "IXPH"]
        cu = build_controlled_u_array(units)
        for u in units:
            cases.append((cu, u, random_state(2, rng)))
        fids = []
        for model, target, data in cases:
            res = optimize_program(model, target, data, 1e-6, cfg)
            best, _ = optimal_program_fidelity(model, target, data)
            fids.append((res.fidelity, best))
    ok = all(f >= 1 - 1e-6 and b >= 1 - 1e-12 for f, b in fids) and t.elapsed < 60
    assert record(9, "program optimizer", ok, f"min fidelity {min(f for f, _ in fids):.12f}, {t.elapsed:.1f}s")


def test_10_fig1_faithfulness():
    m = library.myers_machine(2, 5)
    a, b = myers_inputs()
    with Timer() as t:
        d = equivalence_check(m, 8, myers_superposition(), 5)
        g, _ = embed_qtm_step(m, 8)
        ia, ib = cycle_run(g, a).iterations, cycle_run(g, b).iterations
    ok = d <= 1e-8 and (ia, ib) == (2, 5) and t.elapsed < 5
    assert record(10, "cycled gate array matches QTM run", ok, f"distance_sq {d:.1e}, halts at {ia} and {ib}")


def test_11_norm_conservation():
    drift = 0.0
    with Timer() as t:
        for m in library.bundled().values():
            for s in (SparseState.basis(bits="0"), SparseState.basis(bits="1"), myers_superposition()):
                drift = max(drift, abs(run(m, s, 100).norm() - 1))
    ok = drift <= 1e-10 and t.elapsed < 5
    assert record(11, "norm conservation over 100 steps", ok, f"max drift {drift:.1e}")

