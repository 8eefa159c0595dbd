"""Command-line driver: ``uqtmlab <subcommand> ...``.

Exit codes: 0 success, 1 a check failed, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources

import numpy as np

from . import __version__, gates, halting, library
from .cycling import CycleConfig, cycle_run, embed_qtm_step, equivalence_check
from .fileio import ParseError, ReportError, RunReport, emit_machine, emit_report, load_machine, parse_input, parse_machine_file, parse_matrix_file
from .halting import metric_series
from .machine import DEFAULT_MAX_DIM, MachineError, run, run_monitored, validate

OK, FAILED, USAGE = 0, 1, 2
BUILTINS = ("identity", "hadamard", "myers-2-5")


class UsageError(Exception):
    pass


def builtin_machine_text(name: str) -> str:
    if name not in BUILTINS:
        raise UsageError(f"unknown builtin machine {name!r}; choose from {', '.join(BUILTINS)}")
    return resources.files("uqtmlab").joinpath("machines", f"{name}.qtm").read_text()


def _machine(args):
    check = not args.no_validate
    if args.machine and args.builtin:
        raise UsageError("give either --machine or --builtin, not both")
    if args.machine:
        try:
            return load_machine(args.machine, validate=check)
        except OSError as e:
            raise UsageError(f"cannot read machine file {args.machine}: {e}") from None
    if args.builtin:
        return parse_machine_file(builtin_machine_text(args.builtin), validate=check, name=args.builtin)
    raise UsageError("a machine is required (--machine FILE or --builtin NAME)")


def _input(args):
    specs = list(args.superpose or []) or list(args.input or [])
    if args.superpose and args.input:
        raise UsageError("give either --input or --superpose")
    return parse_input(specs or ["head=0 proc=0"])


def _vector(text: str, what: str) -> np.ndarray:
    try:
        v = np.array([complex(t.replace(" ", "")) for t in text.split(",")])
    except ValueError:
        raise UsageError(f"bad {what} vector {text!r}; use comma-separated complex numbers like 1,0 or 0.6,0.8j") from None
    n = np.linalg.norm(v)
    if n == 0:
        raise UsageError(f"{what} vector is zero")
    return v / n


def _units(text: str) -> list[gates.DenseUnitary]:
    try:
        return [gates.named_gate(t.strip()) for t in text.split(",")]
    except gates.GateError as e:
        raise UsageError(str(e)) from None


def _unitary_file(path: str) -> gates.DenseUnitary:
    try:
        text = open(path).read()
    except OSError as e:
        raise UsageError(f"cannot read matrix file {path}: {e}") from None
    return gates.DenseUnitary(parse_matrix_file(text), path)


def _report(args, experiment, parameters, series=(), final=None) -> RunReport:
    params = dict(parameters)
    return RunReport(experiment, params, list(series), final or {}, __version__, args.seed)


def _emit(args, report: RunReport):
    fmt = args.format or "json"
    text = emit_report(report, fmt, args.out)
    if args.out is None:
        sys.stdout.write(text)


def _machine_params(args, m):
    return {"machine": emit_machine(m), "machine_name": m.name, "input": args.superpose or args.input or ["head=0 proc=0"]}


# -- subcommands --------------------------------------------------------------


def cmd_validate(args) -> int:
    args.no_validate = True
    m = _machine(args)
    windows = args.windows or [3, 4, 5]
    rep = validate(m, windows, args.tol, args.max_dim)
    _emit(args, _report(args, "validate", {"machine": emit_machine(m), "windows": windows, "tol": args.tol}, final=rep.to_dict()))
    return OK if rep.passed else FAILED


def cmd_run(args) -> int:
    m, s = _machine(args), _input(args)
    series = metric_series(m, s, args.steps)
    final = run(m, s, args.steps)
    _emit(args, _report(args, "run", {**_machine_params(args, m), "steps": args.steps}, series, {"n_terms": len(final), **halting.halt_metrics(final, m.halt_index)}))
    return OK


def cmd_monitor(args) -> int:
    m, s = _machine(args), _input(args)
    res = run_monitored(m, s, args.steps, args.seed)
    series = [{"step": k, **halting.halt_metrics(st, m.halt_index)} for k, st in enumerate(res.pre_states, 1)]
    final = {"halted": res.halted, "steps_used": res.steps_used, "outcomes": res.outcomes}
    _emit(args, _report(args, "monitor", {**_machine_params(args, m), "steps": args.steps}, series, final))
    return OK


def cmd_myers(args) -> int:
    spec = halting.MyersSpec(args.na, args.nb, max(halting.DEFAULT_HORIZON, args.nb + 1))
    m = halting.build_myers_machine(spec)
    demo = halting.myers_demo(m, spec, args.probe)
    series = metric_series(m, halting.myers_superposition(), args.probe)
    final = demo.to_dict()
    if args.trials:
        final["monitor"] = halting.monitored_vs_unmonitored(m, halting.myers_superposition(), args.probe, args.trials, args.seed).to_dict()
    _emit(args, _report(args, "myers", {"n_a": args.na, "n_b": args.nb, "n_probe": args.probe, "trials": args.trials}, series, final))
    return OK


def cmd_branch_sync(args) -> int:
    if args.preset == "myers":
        m = library.myers_machine(args.na, args.nb)
        b0, b1 = halting.myers_inputs()
        targets = halting.myers_targets(m)
    else:
        m, b0, b1, targets = halting.sync_setup(args.n_data)
    rep = halting.branch_sync_check(m, b0, b1, targets, args.epsilon, args.horizon)
    params = {"preset": args.preset, "epsilon": args.epsilon, "horizon": args.horizon, "machine": emit_machine(m)}
    _emit(args, _report(args, "branch-sync", params, final=rep.to_dict()))
    return FAILED if rep.superposition_ok is False else OK


def cmd_concat_search(args) -> int:
    pm = halting.standard_program_machine()
    data = _vector(args.data, "data")
    if args.target and args.target_program is not None:
        raise UsageError("give either --target or --target-program")
    if args.target:
        target = _vector(args.target, "target")
    elif args.target_program is not None:
        try:
            target = pm.apply_symbols(data, args.target_program)
        except ValueError as e:
            raise UsageError(str(e)) from None
    else:
        raise UsageError("a target is required (--target VEC or --target-program STRING)")
    res = halting.concat_search(pm, data, target, args.max_len, args.horizon, args.epsilon, not args.no_require_halt, workers=args.workers)
    params = {
        "data": data,
        "target": target,
        "max_len": args.max_len,
        "horizon": args.horizon,
        "epsilon": args.epsilon,
        "require_halt": not args.no_require_halt,
    }
    _emit(args, _report(args, "concat-search", params, final=res.to_dict()))
    return OK if res.status == "found" else FAILED


def _gate_model(args):
    if args.array_file:
        g = _unitary_file(args.array_file)
        if args.m is None:
            raise UsageError("--m is required with --array-file")
        return gates.GateArrayModel(g, args.m, g.n_qubits - args.m), None
    units = _units(args.units)
    return gates.build_controlled_u_array(units), units


def cmd_gate_check(args) -> int:
    model, units = _gate_model(args)
    if args.target_file:
        target = _unitary_file(args.target_file)
    elif args.target:
        target = gates.named_gate(args.target)
    elif units is not None:
        target = units[args.index]
    else:
        raise UsageError("a target is required (--target NAME or --target-file FILE)")
    program = _vector(args.program, "program") if args.program else gates.basis_program(args.index, model.p_program)
    rep = gates.check_deterministic_program(model, target, program, args.epsilon, seed=args.seed)
    params = {"units": args.units, "target": target.matrix, "program": program, "epsilon": args.epsilon}
    _emit(args, _report(args, "gate-check", params, final=rep.to_dict()))
    return OK if rep.ok else FAILED


def cmd_gate_orth(args) -> int:
    units = _units(args.units)
    model = gates.build_controlled_u_array(units)
    reports, ins, outs, distinct = gates.nc_overlaps(model, units, epsilon=args.epsilon)
    worst = max((outs[j][k] for j in range(len(units)) for k in range(len(units)) if j != k and distinct[j][k]), default=0.0)
    final = {
        "reports": [r.to_dict() for r in reports],
        "input_overlaps": ins,
        "output_overlaps": outs,
        "distinct": distinct,
        "max_distinct_overlap": worst,
        "orthogonal": worst <= args.tol,
    }
    _emit(args, _report(args, "gate-orth", {"units": args.units, "tol": args.tol}, final=final))
    return OK if worst <= args.tol and all(r.ok for r in reports) else FAILED


def cmd_gate_optimize(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.array == "swap":
        model = gates.build_swap_array(args.m)
    else:
        model = gates.build_controlled_u_array(_units(args.units))
    target = gates.named_gate(args.target) if args.target else gates.random_unitary(model.data_dim, rng)
    data = _vector(args.data, "data") if args.data else gates.random_state(model.data_dim, rng)
    cfg = gates.OptConfig(restarts=args.restarts, max_iters=args.iters, seed=args.seed)
    res = gates.optimize_program(model, target, data, args.epsilon, cfg)
    best, _ = gates.optimal_program_fidelity(model, target, data)
    final = {**res.to_dict(), "exact_optimum": best}
    params = {"array": args.array, "m": model.m_data, "units": args.units, "target": target.matrix, "data": data, "epsilon": args.epsilon, "restarts": args.restarts, "iters": args.iters}
    _emit(args, _report(args, "gate-optimize", params, final=final))
    return OK if res.converged else FAILED


def cmd_swap_demo(args) -> int:
    model = gates.build_swap_array(args.m)
    rng = np.random.default_rng(args.seed)
    dists, progs = [], []
    for _ in range(args.pairs):
        u = gates.random_unitary(model.data_dim, rng)
        d = gates.random_state(model.data_dim, rng)
        prog = u.matrix @ d
        out = gates.apply(model, d, prog)
        rho = gates.data_marginal(model, out)
        ud = u.matrix @ d
        fid = float(np.real(np.vdot(ud, rho @ ud)))
        dists.append(max(0.0, 2 - 2 * np.sqrt(max(fid, 0.0))))
        progs.append(prog)
    n = len(progs)
    max_overlap = max((abs(gates.program_overlap(progs[j], progs[k])) for j in range(n) for k in range(j + 1, n)), default=0.0)
    final = {"max_distance_sq": max(dists, default=0.0), "max_program_overlap": max_overlap, "pairs": n}
    ok = final["max_distance_sq"] <= args.tol
    _emit(args, _report(args, "swap-demo", {"m": args.m, "pairs": args.pairs, "tol": args.tol}, final=final))
    return OK if ok else FAILED


def cmd_cycle(args) -> int:
    m, s = _machine(args), _input(args)
    g, layout = embed_qtm_step(m, args.window, max_dim=args.max_dim)
    cfg = CycleConfig(args.max_iters, args.mode, args.seed)
    rep = cycle_run(g, s, cfg)
    params = {**_machine_params(args, m), "window": args.window, "mode": args.mode, "max_iters": args.max_iters}
    final = {**rep.to_dict(), "layout": {k: [list(q) for q in v] for k, v in layout.groups.items()}, "head_dim": layout.head_dim}
    _emit(args, _report(args, "cycle", params, final=final))
    return OK if rep.halted else FAILED


def cmd_equiv(args) -> int:
    m, s = _machine(args), _input(args)
    d = equivalence_check(m, args.window, s, args.steps, args.max_dim)
    params = {**_machine_params(args, m), "window": args.window, "steps": args.steps, "tol": args.tol}
    _emit(args, _report(args, "equiv", params, final={"distance_sq": d, "faithful": d <= args.tol}))
    return OK if d <= args.tol else FAILED


def cmd_params(args) -> int:
    counts = gates.program_parameter_count(args.m)
    if args.format is None:
        print(counts)
    else:
        keys = ("data_state", "unitary", "program_state")
        _emit(args, _report(args, "params", {"m": args.m}, final=dict(zip(keys, counts))))
    return OK


# -- parser -------------------------------------------------------------------


def _common(p, machine=False, tol=1e-10):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.add_argument("--tol", type=float, default=tol)
    if machine:
        p.add_argument("--machine", help="machine file")
        p.add_argument("--builtin", help=f"bundled machine: {', '.join(BUILTINS)}")
        p.add_argument("--input", action="append", help='input spec, e.g. "head=0 proc=0 tape=0101"')
        p.add_argument("--superpose", nargs=2, metavar="SPEC", help="two weighted specs (amp=re[,im])")
        p.add_argument("--steps", type=int, default=10)
        p.add_argument("--window", type=int, default=8)
        p.add_argument("--max-dim", type=int, default=DEFAULT_MAX_DIM)
        p.add_argument("--no-validate", action="store_true", help="skip well-formedness checks when parsing")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uqtmlab", description="Quantum Turing machine and programmable gate array testbed.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="local and window well-formedness")
    _common(p, machine=True)
    p.add_argument("--windows", type=int, nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="unmonitored evolution")
    _common(p, machine=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("monitor", help="evolution with a halt measurement every step")
    _common(p, machine=True)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("myers", help="halt-qubit entanglement demo")
    _common(p)
    p.add_argument("--na", type=int, default=2)
    p.add_argument("--nb", type=int, default=5)
    p.add_argument("--probe", type=int, default=3)
    p.add_argument("--trials", type=int, default=0, help="also compare monitored and unmonitored marginals")
    p.set_defaults(func=cmd_myers)

    p = sub.add_parser("branch-sync", help="halting-step synchronization of two branches")
    _common(p)
    p.add_argument("--preset", choices=("myers", "sync"), default="sync")
    p.add_argument("--na", type=int, default=2)
    p.add_argument("--nb", type=int, default=5)
    p.add_argument("--n-data", type=int, default=2)
    p.add_argument("--epsilon", type=float, default=1e-9)
    p.add_argument("--horizon", type=int, default=halting.DEFAULT_HORIZON)
    p.set_defaults(func=cmd_branch_sync)

    p = sub.add_parser("concat-search", help="shortest tape program reaching a target")
    _common(p)
    p.add_argument("--data", default="1,0")
    p.add_argument("--target", help="target data vector")
    p.add_argument("--target-program", help="target = ideal effect of this symbol string")
    p.add_argument("--max-len", type=int, default=4)
    p.add_argument("--horizon", type=int, default=32)
    p.add_argument("--epsilon", type=float, default=1e-9)
    p.add_argument("--no-require-halt", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_concat_search)

    p = sub.add_parser("gate-check", help="deterministic-program check")
    _common(p)
    p.add_argument("--units", default="I,X,P,H", help="gates of a controlled-U array")
    p.add_argument("--array-file", help="gate array matrix file instead of --units")
    p.add_argument("--m", type=int, help="data qubits (with --array-file)")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--target")
    p.add_argument("--target-file")
    p.add_argument("--program", help="program vector (default |index>)")
    p.add_argument("--epsilon", type=float, default=1e-10)
    p.set_defaults(func=cmd_gate_check)

    p = sub.add_parser("gate-orth", help="program overlap matrix of a controlled-U array")
    _common(p)
    p.add_argument("--units", default="I,X,P,H")
    p.add_argument("--epsilon", type=float, default=1e-10)
    p.set_defaults(func=cmd_gate_orth)

    p = sub.add_parser("gate-optimize", help="optimize a data-dependent program")
    _common(p)
    p.add_argument("--array", choices=("swap", "controlled"), default="swap")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--units", default="I,X,P,H")
    p.add_argument("--target", help="named target gate (default: seeded random)")
    p.add_argument("--data", help="data vector (default: seeded random)")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--iters", type=int, default=500)
    p.set_defaults(func=cmd_gate_optimize)

    p = sub.add_parser("swap-demo", help="data-dependent programs on the swap array")
    _common(p, tol=1e-12)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--pairs", type=int, default=100)
    p.set_defaults(func=cmd_swap_demo)

    p = sub.add_parser("cycle", help="repeat the window step with a halt check")
    _common(p, machine=True)
    p.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    p.add_argument("--max-iters", type=int, default=64)
    p.set_defaults(func=cmd_cycle)

    p = sub.add_parser("equiv", help="window cycling vs sparse evolution")
    _common(p, machine=True, tol=1e-8)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("params", help="parameter counts for m data qubits")
    _common(p)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=cmd_params)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (UsageError, ParseError, MachineError, gates.GateError, ReportError, ValueError) as e:
        print(f"uqtmlab {args.command}: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
