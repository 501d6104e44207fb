"""Command-line interface: compile, simulate, experiment, bounds.

Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.
Diagnostics go to stderr as one JSON object per error; stdout stays
machine-readable (schedule JSON, CSV paths, bound values).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from . import compiler as _compiler
from .analysis import kappa_tau_budget, trotter_alpha_constant, trotter_bound
from .compiler import (
    CutoffConfig,
    PulseSchedule,
    ResourceHamiltonian,
    RobustnessPolicy,
    TargetSpec,
    TwoQubitGate,
    execution_tau,
    gate_layer_to_target,
    pulse_count,
    robustify,
)
from .experiments import EXPERIMENTS, default_workers, write_csv
from .sim import ErrorModel, PauliStringOperator, run_schedule, zero_state

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class InputError(Exception):
    pass


def _fail(kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")


def _load_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _load_resource(data):
    if "alpha" in data:
        return ResourceHamiltonian.power_law(
            int(data["n_qubits"]),
            float(data["alpha"]),
            float(data.get("j", 1.0)),
            positions=data.get("positions"),
            fields=data.get("fields"),
        )
    return ResourceHamiltonian(
        int(data["n_qubits"]),
        np.asarray(data["jx"], dtype=float),
        np.asarray(data["jy"], dtype=float),
        None if data.get("fields") is None else np.asarray(data["fields"], dtype=float),
    )


def _load_target(data):
    """Either a two-body Hamiltonian spec or a parallel two-qubit gate layer."""
    n = int(data["n_qubits"])
    if "gates" in data:
        gates = []
        for entry in data["gates"]:
            kind, i, j = entry[0], int(entry[1]), int(entry[2])
            theta = float(entry[3]) if len(entry) > 3 else math.pi / 2
            gates.append(TwoQubitGate(kind, i, j, theta))
        target, t_evo, prelude = gate_layer_to_target(tuple(gates), n, float(data.get("j", 1.0)))
        return target, t_evo, prelude
    terms = [(int(i), int(j), str(a), str(b), float(s)) for i, j, a, b, s in data["terms"]]
    return TargetSpec(n, terms), None, None


def _parse_scalar(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _parse_list(text):
    return [_parse_scalar(tok) for tok in text.split(",") if tok != ""]


def cmd_compile(args):
    target, t_evo, prelude = _load_target(_load_json(args.target))
    resource = _load_resource(_load_json(args.resource))
    cutoff = None
    if args.cutoff is not None:
        cutoff = CutoffConfig(int(args.cutoff), args.cutoff_mode)
    schedule = _compiler.compile(
        target,
        resource,
        trotter_order=args.p,
        cutoff=cutoff,
        decouple=args.decouple,
        decomposition=args.decomposition,
        prelude=prelude,
    )
    if args.robust_e or args.tp:
        policy = RobustnessPolicy(
            e_indices=tuple(int(e) for e in _parse_list(args.robust_e)) if args.robust_e else None,
            t_p=float(args.tp or 0.0),
            tau=args.tau,
        )
        schedule = robustify(schedule, policy)
    text = schedule.dumps()
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    if args.stats:
        stats = {
            "q_blocks": len(schedule.blocks),
            "n_per_block": [b.n_intervals for b in schedule.blocks],
            "c_per_block": [b.c for b in schedule.blocks],
            "pulse_count": pulse_count(schedule),
            "trotter_order": schedule.trotter_order,
        }
        if t_evo is not None:
            stats["evolution_time"] = t_evo
        sys.stderr.write(json.dumps(stats) + "\n")
    return EXIT_OK


def cmd_simulate(args):
    schedule = PulseSchedule.loads(open(args.schedule).read())
    resource = _load_resource(_load_json(args.resource))
    if args.state:
        psi = np.load(args.state)
    else:
        psi = zero_state(schedule.n_qubits)
    error = None
    if args.delta or args.tp:
        delta = None
        if args.delta:
            vals = [float(v) for v in _parse_list(args.delta)]
            delta = tuple(vals * schedule.n_qubits) if len(vals) == 1 else tuple(vals)
            if len(delta) != schedule.n_qubits:
                raise InputError("--delta needs 1 or n_qubits values")
        error = ErrorModel(delta=delta, t_p=float(args.tp or 0.0))
    tau = args.tau
    if args.execution_tau:
        tau = execution_tau(schedule, tau)
    psi = run_schedule(schedule, resource, tau, args.cycles, psi, error=error)
    if args.out:
        np.save(args.out, psi)
    for label in args.expect or []:
        op = PauliStringOperator(schedule.n_qubits, [(1.0, label)])
        sys.stdout.write(f"{label} {op.expectation(psi)!r}\n")
    if args.fidelity_against:
        ref = np.load(args.fidelity_against)
        sys.stdout.write(f"fidelity {float(abs(np.vdot(ref, psi)))!r}\n")
    return EXIT_OK


def _load_config(path, name):
    if path is None:
        return {}
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except Exception as exc:
        raise InputError(f"{path} is not valid TOML: {exc}") from exc
    params = {k: v for k, v in data.items() if not isinstance(v, dict)}
    params.update(data.get(name, {}))
    return params


_FLAG_PARAMS = (
    ("N", "N", _parse_list),
    ("alpha", "alpha", _parse_list),
    ("p", "p", _parse_list),
    ("cycles", "cycles", _parse_list),
    ("K", "K", _parse_list),
    ("tau_over_n", "tau_over_n", _parse_list),
    ("seeds", "seeds", _parse_scalar),
    ("trajectories", "trajectories", _parse_scalar),
    ("j", "j", _parse_scalar),
    ("graph", "graph", str),
    ("lambda_w", "lambda_w", _parse_scalar),
    ("k_tau", "k_tau", _parse_scalar),
    ("eps_ra", "eps_ra", _parse_scalar),
    ("eps_fp", "eps_fp", _parse_scalar),
    ("epsilon", "epsilon", _parse_scalar),
    ("kappa", "kappa", _parse_scalar),
)


def cmd_experiment(args):
    if args.name not in EXPERIMENTS:
        raise InputError(f"unknown experiment {args.name!r}; known: {', '.join(sorted(EXPERIMENTS))}")
    params = _load_config(args.config, args.name)
    for flag, key, parse in _FLAG_PARAMS:
        value = getattr(args, flag.replace("-", "_"), None)
        if value is not None:
            params[key] = parse(value)
    if args.full:
        params["full"] = True
    if not params.get("N", True) or not params.get("cycles", True):
        raise InputError("empty parameter grid")
    records, manifest = EXPERIMENTS[args.name](params, workers=args.workers)
    if not records:
        raise InputError("experiment produced no rows (empty grid?)")
    manifest["tool_version"] = __version__
    manifest["workers"] = args.workers if args.workers is not None else default_workers()
    out = args.out or f"{args.name}.csv"
    write_csv(records, out)
    manifest_path = args.manifest or out + ".manifest.json"
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    sys.stdout.write(f"{out}\n{manifest_path}\n")
    if manifest.get("failures"):
        sys.stderr.write(json.dumps({"warning": "partial failures", "count": len(manifest["failures"])}) + "\n")
    return EXIT_OK


def cmd_bounds(args):
    alpha = float(args.alpha)
    n = int(args.N)
    j = float(args.j)
    t_total = float(args.T) if args.T is not None else math.pi / (4.0 * j)
    const = trotter_alpha_constant(alpha)
    name = "a_alpha" if alpha > 1 else "b_alpha"
    lines = [f"{name} {const!r}"]
    if args.taus:
        taus = [float(v) for v in _parse_list(args.taus)]
        rep = trotter_bound(alpha, n, j, taus, t_total)
        lines.append(f"trotter_bound {rep.bound!r}")
    if args.epsilon is not None or args.kappa is not None:
        budget = kappa_tau_budget(
            alpha, n, j, t_total,
            epsilon=None if args.epsilon is None else float(args.epsilon),
            kappa=None if args.kappa is None else float(args.kappa),
        )
        lines.append(f"j_tau_budget {budget!r}")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="walshpulse", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_c = sub.add_parser("compile", help="compile a target into a pulse schedule")
    p_c.add_argument("target", help="target JSON (two-body terms or a gate layer)")
    p_c.add_argument("resource", help="resource Hamiltonian JSON")
    p_c.add_argument("--p", type=int, default=1, choices=(1, 2), help="Trotter order")
    p_c.add_argument("--cutoff", type=int, help="Walsh index cutoff lambda")
    p_c.add_argument("--cutoff-mode", default="mod", choices=("window", "mod"))
    p_c.add_argument("--decouple", action="store_true", help="guard indices against external fields")
    p_c.add_argument("--decomposition", default="greedy", choices=("greedy", "hamilton"))
    p_c.add_argument("--robust-e", help="comma-separated second-averaging indices")
    p_c.add_argument("--tp", type=float, help="finite pulse width for deformations")
    p_c.add_argument("--tau", type=float, help="cycle target time (needed with --tp)")
    p_c.add_argument("--out", help="write schedule JSON here instead of stdout")
    p_c.add_argument("--stats", action="store_true", help="print Q, n per block, pulse count")
    p_c.set_defaults(func=cmd_compile)

    p_s = sub.add_parser("simulate", help="run a schedule on a state vector")
    p_s.add_argument("schedule", help="schedule JSON file")
    p_s.add_argument("resource", help="resource Hamiltonian JSON")
    p_s.add_argument("--tau", type=float, required=True)
    p_s.add_argument("--cycles", type=int, required=True)
    p_s.add_argument("--execution-tau", action="store_true",
                     help="stretch tau by the schedule's finite-pulse rescale")
    p_s.add_argument("--state", help=".npy initial state (default |0...0>)")
    p_s.add_argument("--out", help=".npy output state path")
    p_s.add_argument("--delta", help="over-rotation angle(s), 1 or n_qubits values")
    p_s.add_argument("--tp", type=float, help="square pulse width")
    p_s.add_argument("--expect", action="append", help="Pauli string expectation to print")
    p_s.add_argument("--fidelity-against", help=".npy reference state")
    p_s.set_defaults(func=cmd_simulate)

    p_e = sub.add_parser("experiment", help="run a named experiment sweep")
    p_e.add_argument("name")
    p_e.add_argument("--config", help="TOML parameter file (flags override)")
    p_e.add_argument("--out", help="CSV output path (default <name>.csv)")
    p_e.add_argument("--manifest", help="manifest path (default <out>.manifest.json)")
    p_e.add_argument("--workers", type=int, help="worker processes (default WALSHPULSE_WORKERS)")
    p_e.add_argument("--full", action="store_true", help="include the large-N points")
    p_e.add_argument("--N")
    p_e.add_argument("--alpha")
    p_e.add_argument("--p")
    p_e.add_argument("--cycles")
    p_e.add_argument("--K")
    p_e.add_argument("--tau-over-n", dest="tau_over_n")
    p_e.add_argument("--seeds")
    p_e.add_argument("--trajectories")
    p_e.add_argument("--j")
    p_e.add_argument("--graph")
    p_e.add_argument("--lambda-w", dest="lambda_w")
    p_e.add_argument("--k-tau", dest="k_tau")
    p_e.add_argument("--eps-ra", dest="eps_ra")
    p_e.add_argument("--eps-fp", dest="eps_fp")
    p_e.add_argument("--epsilon")
    p_e.add_argument("--kappa")
    p_e.set_defaults(func=cmd_experiment)

    p_b = sub.add_parser("bounds", help="Trotter bound constants and budgets")
    p_b.add_argument("--alpha", required=True)
    p_b.add_argument("--N", required=True)
    p_b.add_argument("--j", default="1.0")
    p_b.add_argument("--T", help="total evolution time (default pi/(4 j))")
    p_b.add_argument("--taus", help="comma-separated per-block cycle times")
    p_b.add_argument("--epsilon", help="target Trotter error for the budget")
    p_b.add_argument("--kappa", help="override kappa_eps directly")
    p_b.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage problems; map usage to 1
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except InputError as exc:
        _fail("input", exc)
        return EXIT_INPUT
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        _fail(type(exc).__name__, exc)
        return EXIT_INPUT
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        _fail("numerical", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
