"""Named experiment sweeps producing deterministic CSV rows and manifests.

Each experiment is a pure function from a parameter dictionary to a list of
ExperimentRecord rows plus a manifest describing every schedule involved.
Sweep units fan out over a process pool (WALSHPULSE_WORKERS sets the default
width); assembly is single-threaded and rows are sorted, so output bytes do
not depend on the worker count.
"""

from __future__ import annotations

import hashlib
import math
import multiprocessing
import os
from dataclasses import dataclass

import numpy as np

from . import compiler as _compiler
from .analysis import (
    cluster_reference,
    dqa_run,
    fidelity,
    kappa_tau_budget,
    maxcut_config_energies,
    maxcut_energy_gap,
    surface7_batch,
    surface7_compile,
    trotter_alpha_constant,
    trotter_bound,
    x_basis_probabilities,
)
from .compiler import (
    CutoffConfig,
    ResourceHamiltonian,
    RobustnessPolicy,
    TargetSpec,
    concat_schedules,
    execution_tau,
    robustify,
)
from .graphs import named_graph
from .sim import ErrorModel, run_schedule, zero_state

RESULT_HEADER = "experiment,N,alpha,p,tau_over_n,seed,metric,value"


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    n_qubits: int
    alpha: float
    p: int
    tau_over_n: float | None
    seed: int | None
    metric: str
    value: float

    def csv_row(self):
        return ",".join(
            (
                self.experiment,
                str(self.n_qubits),
                _fmt(self.alpha),
                str(self.p),
                "" if self.tau_over_n is None else _fmt(self.tau_over_n),
                "" if self.seed is None else str(self.seed),
                self.metric,
                _fmt(self.value),
            )
        )

    def sort_key(self):
        return (
            self.experiment,
            self.n_qubits,
            self.alpha,
            self.p,
            -1.0 if self.tau_over_n is None else self.tau_over_n,
            -1 if self.seed is None else self.seed,
            self.metric,
        )


def _fmt(x):
    """Shortest round-trip decimal for a float."""
    return repr(float(x))


def write_csv(records, path):
    lines = [RESULT_HEADER]
    lines += [r.csv_row() for r in sorted(records, key=ExperimentRecord.sort_key)]
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_csv(path):
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != RESULT_HEADER:
        raise ValueError("missing or wrong results header")
    out = []
    for line in lines[1:]:
        e, n, a, p, t, s, m, v = line.split(",")
        out.append(
            ExperimentRecord(
                e,
                int(n),
                float(a),
                int(p),
                None if t == "" else float(t),
                None if s == "" else int(s),
                m,
                float(v),
            )
        )
    return out


def schedule_hash(schedule):
    return hashlib.sha256(schedule.dumps().encode()).hexdigest()


def default_workers():
    env = os.environ.get("WALSHPULSE_WORKERS")
    if env:
        return max(1, int(env))
    return min(os.cpu_count() or 1, 8)


def _pool_map(fn, items, workers):
    items = list(items)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    # spawn, not fork: forking after BLAS threads have started can deadlock
    ctx = multiprocessing.get_context("spawn")
    with ctx.Pool(min(workers, len(items))) as pool:
        return pool.map(fn, items)


def _guard(fn, item):
    """Run one sweep unit; failures become rows, the sweep continues."""
    try:
        return True, fn(item)
    except Exception as exc:  # noqa: BLE001 - per-row failure capture is the contract
        return False, f"{type(exc).__name__}: {exc}"


def _as_list(value):
    if isinstance(value, (list, tuple, np.ndarray)):
        return list(value)
    return [value]


# --- shared Ising/cluster harness -------------------------------------------

def ising_resource(n_qubits, alpha, j=1.0):
    return ResourceHamiltonian.power_law(n_qubits, alpha, j)


def ising_schedule(n_qubits, alpha, j=1.0, p=1, cutoff=None, decouple=False):
    """Nearest-neighbour -J XX chain compiled as odd- and even-bond layers."""
    resource = ising_resource(n_qubits, alpha, j)
    parts = []
    for start in (0, 1):
        terms = [(i, i + 1, "X", "X", -j) for i in range(start, n_qubits - 1, 2)]
        if terms:
            parts.append(
                _compiler.compile(
                    TargetSpec(n_qubits, terms),
                    resource,
                    trotter_order=p,
                    cutoff=cutoff,
                    decouple=decouple,
                )
            )
    return resource, concat_schedules(parts)


def _sequence_n(schedule):
    return max(b.n_intervals for b in schedule.blocks)


def _ising_point(args):
    """One (1 - F) measurement of the cluster-state preparation."""
    (n_qubits, alpha, j, p, cutoff_lambda, cycles, error_args) = args
    cutoff = None if cutoff_lambda is None else CutoffConfig(cutoff_lambda, "mod")
    resource, sched = ising_schedule(n_qubits, alpha, j, p, cutoff=cutoff)
    t_total = math.pi / (4.0 * j)
    tau = t_total / cycles
    error = ErrorModel(**error_args) if error_args else None
    psi = run_schedule(sched, resource, tau, cycles, zero_state(n_qubits), error=error)
    return 1.0 - fidelity(psi, cluster_reference(n_qubits))


def _guarded_ising_point(args):
    return _guard(_ising_point, args)


ISING_CYCLES = (10, 13, 16, 20, 25, 32, 40, 50, 63, 79, 100)


def run_ising(params=None, workers=None):
    """Cluster-state preparation error vs tau for Trotter orders 1 and 2."""
    params = dict(params or {})
    n_list = [int(v) for v in _as_list(params.get("N", [8]))]
    alpha = float(params.get("alpha", 3.0))
    j = float(params.get("j", 1.0))
    p_list = [int(v) for v in _as_list(params.get("p", [1, 2]))]
    cycles_list = [int(v) for v in _as_list(params.get("cycles", list(ISING_CYCLES)))]
    if params.get("full"):
        n_list = n_list + [14]
    records = []
    manifest = {"experiment": "ising", "params": {"N": n_list, "alpha": alpha, "j": j,
                                                  "p": p_list, "cycles": cycles_list},
                "schedules": {}, "failures": []}
    t_total = math.pi / (4.0 * j)
    jobs = []
    for n in n_list:
        for p in p_list:
            _, sched = ising_schedule(n, alpha, j, p)
            manifest["schedules"][f"N{n}_p{p}"] = schedule_hash(sched)
            n_seq = _sequence_n(sched)
            for cycles in cycles_list:
                jobs.append(((n, alpha, j, p, None, cycles, None), n, p, (t_total / cycles) / n_seq))
    results = _pool_map(_guarded_ising_point, [job[0] for job in jobs], workers)
    for (args, n, p, tau_over_n), (ok, val) in zip(jobs, results):
        if ok:
            records.append(ExperimentRecord("ising", n, alpha, p, tau_over_n, None, "infidelity", val))
        else:
            records.append(ExperimentRecord("ising", n, alpha, p, tau_over_n, None, "infidelity", float("nan")))
            manifest["failures"].append({"args": repr(args), "error": val})
    return records, manifest


CUTOFF_CYCLES = (5, 10, 20, 35, 49)


def run_cutoff(params=None, workers=None):
    """Full compilation vs index-reuse cutoff at N = 12 for two power laws."""
    params = dict(params or {})
    n = int(_as_list(params.get("N", 12))[0])
    alphas = [float(v) for v in _as_list(params.get("alpha", [3.0, 0.2]))]
    j = float(params.get("j", 1.0))
    lam = int(params.get("lambda_w", 8))
    cycles_list = [int(v) for v in _as_list(params.get("cycles", list(CUTOFF_CYCLES)))]
    if params.get("full"):
        n = 14
    records = []
    manifest = {"experiment": "cutoff", "params": {"N": n, "alpha": alphas, "j": j,
                                                   "lambda_w": lam, "cycles": cycles_list},
                "schedules": {}, "failures": []}
    t_total = math.pi / (4.0 * j)
    jobs = []
    for alpha in alphas:
        for arm, cl in (("full", None), ("cutoff", lam)):
            cutoff = None if cl is None else CutoffConfig(cl, "mod")
            _, sched = ising_schedule(n, alpha, j, 1, cutoff=cutoff)
            manifest["schedules"][f"alpha{alpha}_{arm}"] = schedule_hash(sched)
            n_seq = _sequence_n(sched)
            for cycles in cycles_list:
                jobs.append(((n, alpha, j, 1, cl, cycles, None), alpha, arm, (t_total / cycles) / n_seq))
    results = _pool_map(_guarded_ising_point, [job[0] for job in jobs], workers)
    for (args, alpha, arm, tau_over_n), (ok, val) in zip(jobs, results):
        metric = f"infidelity_{arm}"
        if ok:
            records.append(ExperimentRecord("cutoff", n, alpha, 1, tau_over_n, None, metric, val))
        else:
            records.append(ExperimentRecord("cutoff", n, alpha, 1, tau_over_n, None, metric, float("nan")))
            manifest["failures"].append({"args": repr(args), "error": val})
    return records, manifest


ROBUST_CYCLES = (8, 16, 24, 40, 56)


def _robust_ra_point(args):
    """Single- vs double-averaged infidelity for one delta trajectory."""
    (n_qubits, alpha, j, eps_ra, seed, cycles_list) = args
    resource, base = ising_schedule(n_qubits, alpha, j, 1, decouple=True)
    doubled = robustify(base, RobustnessPolicy(e_indices=tuple(range(1, n_qubits + 1))))
    rng_seed = 1000 + seed
    delta = np.random.default_rng(rng_seed).uniform(-2 * eps_ra * j, 2 * eps_ra * j, n_qubits)
    error = ErrorModel(delta=tuple(delta), rng_seed=rng_seed)
    t_total = math.pi / (4.0 * j)
    ref = cluster_reference(n_qubits)
    out = []
    for cycles in cycles_list:
        tau = t_total / cycles
        for arm, sched in (("single", base), ("double", doubled)):
            psi = run_schedule(sched, resource, tau, cycles, zero_state(n_qubits), error=error)
            out.append((cycles, arm, 1.0 - fidelity(psi, ref)))
    return out


def _robust_fp_point(args):
    """Finite-pulse (deformed) vs perfect-pulse infidelity at one tau."""
    (n_qubits, alpha, j, eps_fp, cycles) = args
    resource, base = ising_schedule(n_qubits, alpha, j, 1, decouple=True)
    n_seq = _sequence_n(base)
    t_total = math.pi / (4.0 * j)
    tau = t_total / cycles
    t_p = eps_fp * tau / (2.0 * n_seq)
    policy = RobustnessPolicy(e_indices=tuple(range(1, n_qubits + 1)), t_p=t_p, tau=tau)
    deformed = robustify(base, policy)
    ref = cluster_reference(n_qubits)
    psi_fp = run_schedule(
        deformed, resource, execution_tau(deformed, tau), cycles,
        zero_state(n_qubits), error=ErrorModel(t_p=t_p),
    )
    psi_ideal = run_schedule(base, resource, tau, cycles, zero_state(n_qubits))
    return 1.0 - fidelity(psi_fp, ref), 1.0 - fidelity(psi_ideal, ref)


def _guarded_ra_point(args):
    return _guard(_robust_ra_point, args)


def _guarded_fp_point(args):
    return _guard(_robust_fp_point, args)


def run_robust(params=None, workers=None):
    """Rotation-angle (single vs double averaging) and finite-pulse arms."""
    params = dict(params or {})
    n = int(_as_list(params.get("N", 6))[0])
    alpha = float(params.get("alpha", 1.2))
    j = float(params.get("j", 1.0))
    eps_ra = float(params.get("eps_ra", 1e-2))
    eps_fp = float(params.get("eps_fp", 1e-2))
    n_traj = int(params.get("trajectories", 64))
    cycles_list = [int(v) for v in _as_list(params.get("cycles", ROBUST_CYCLES))]
    records = []
    _, base = ising_schedule(n, alpha, j, 1, decouple=True)
    doubled = robustify(base, RobustnessPolicy(e_indices=tuple(range(1, n + 1))))
    manifest = {
        "experiment": "robust",
        "params": {"N": n, "alpha": alpha, "j": j, "eps_ra": eps_ra, "eps_fp": eps_fp,
                   "trajectories": n_traj, "cycles": cycles_list,
                   "delta_distribution": "uniform[-2·eps_ra·J, 2·eps_ra·J], seed 1000+s"},
        "schedules": {"single": schedule_hash(base), "double": schedule_hash(doubled)},
        "delta_on_set_pulses": True,
        "failures": [],
    }
    n_seq = _sequence_n(base)
    t_total = math.pi / (4.0 * j)
    ra_jobs = [((n, alpha, j, eps_ra, s, tuple(cycles_list)), s) for s in range(n_traj)]
    ra_results = _pool_map(_guarded_ra_point, [job[0] for job in ra_jobs], workers)
    for (args, seed), (ok, rows) in zip(ra_jobs, ra_results):
        if not ok:
            manifest["failures"].append({"args": repr(args), "error": rows})
            continue
        for cycles, arm, val in rows:
            tau_over_n = (t_total / cycles) / n_seq
            records.append(
                ExperimentRecord("robust", n, alpha, 1, tau_over_n, seed, f"infidelity_{arm}", val)
            )
    fp_jobs = [((n, alpha, j, eps_fp, cycles), cycles) for cycles in cycles_list]
    fp_results = _pool_map(_guarded_fp_point, [job[0] for job in fp_jobs], workers)
    for (args, cycles), (ok, vals) in zip(fp_jobs, fp_results):
        tau_over_n = (t_total / cycles) / n_seq
        if not ok:
            manifest["failures"].append({"args": repr(args), "error": vals})
            continue
        v_fp, v_ideal = vals
        records.append(ExperimentRecord("robust", n, alpha, 1, tau_over_n, None, "infidelity_fp", v_fp))
        records.append(ExperimentRecord("robust", n, alpha, 1, tau_over_n, None, "infidelity_ideal", v_ideal))
    return records, manifest


SURFACE7_GEOMETRIES = (("grid_2d", 3.0), ("chain_1d", 0.2))

# requested tau/n grid: one point at 1e-2 plus a log grid wide enough that the
# achieved values (after rounding cycles to integers) still span a full decade
SURFACE7_TAU_GRID = tuple(float(t) for t in np.geomspace(9e-4, 1.08e-2, 7)) + (1e-2,)


def _surface7_point(args):
    (geometry, alpha, tau_over_n, seeds, j) = args
    achieved, per_seed = surface7_batch(geometry, alpha, tau_over_n, seeds, j)
    return achieved, [float(np.mean([1.0 - abs(v) for v in vals])) for vals in per_seed]


def _guarded_surface7_point(args):
    return _guard(_surface7_point, args)


def run_surface7(params=None, workers=None):
    """Stabilizer readout error of the 4-layer code cycle vs tau/n."""
    params = dict(params or {})
    j = float(params.get("j", 1.0))
    n_seeds = int(params.get("seeds", 64))
    tau_grid = [float(t) for t in _as_list(params.get("tau_over_n", SURFACE7_TAU_GRID))]
    geometries = params.get("geometries", SURFACE7_GEOMETRIES)
    records = []
    manifest = {"experiment": "surface7",
                "params": {"j": j, "seeds": n_seeds, "tau_over_n": tau_grid,
                           "geometries": [list(g) for g in geometries], "trotter_order": 2},
                "schedules": {}, "failures": []}
    jobs = []
    for geometry, alpha in geometries:
        _, compiled = surface7_compile(geometry, alpha, j)
        q_blocks = sum(len(s.blocks) for s, _ in compiled)
        for li, (s, _) in enumerate(compiled):
            manifest["schedules"][f"{geometry}_layer{li + 1}"] = schedule_hash(s)
        records.append(ExperimentRecord("surface7", 7, alpha, 2, None, None,
                                        f"{geometry}_q_blocks", float(q_blocks)))
        for t in tau_grid:
            jobs.append(((geometry, alpha, t, list(range(n_seeds)), j), geometry, alpha))
    results = _pool_map(_guarded_surface7_point, [job[0] for job in jobs], workers)
    for (args, geometry, alpha), (ok, val) in zip(jobs, results):
        if not ok:
            records.append(ExperimentRecord("surface7", 7, alpha, 2, args[2], None,
                                            f"{geometry}_one_minus_abs_o", float("nan")))
            manifest["failures"].append({"args": repr(args), "error": val})
            continue
        achieved, per_seed = val
        for seed, v in enumerate(per_seed):
            records.append(ExperimentRecord("surface7", 7, alpha, 2, achieved, seed,
                                            f"{geometry}_one_minus_abs_o", v))
    return records, manifest


MAXCUT_K = (4, 8, 16, 32, 64)


def _maxcut_point(args):
    (graph_name, k_steps, k_tau, j) = args
    graph = named_graph(graph_name)
    resource = ResourceHamiltonian.power_law(graph.n_vertices, 0.0, j)
    tau = k_tau / k_steps
    psi = dqa_run(graph, resource, k_steps, tau)
    energy, gap = maxcut_energy_gap(psi, graph, j)
    energies = maxcut_config_energies(graph, j)
    probs = x_basis_probabilities(psi)
    ground = energies <= energies.min() + 1e-9
    off = float(probs[~ground].max())
    return energy, gap, off


def _guarded_maxcut_point(args):
    return _guard(_maxcut_point, args)


def run_maxcut(params=None, workers=None):
    """Digitized-annealing energy gap on the registry graph at fixed K*tau."""
    params = dict(params or {})
    graph_name = str(params.get("graph", "prism6"))
    k_list = [int(v) for v in _as_list(params.get("K", MAXCUT_K))]
    k_tau = float(params.get("k_tau", 0.5))
    j = float(params.get("j", 1.0))
    graph = named_graph(graph_name)
    n = graph.n_vertices
    resource = ResourceHamiltonian.power_law(n, 0.0, j)
    target = TargetSpec(n, [(i, k, "X", "X", j * w) for (i, k), w in graph.weights.items()])
    sched = _compiler.compile(target, resource)
    n_seq = _sequence_n(sched)
    records = []
    manifest = {"experiment": "maxcut",
                "params": {"graph": graph_name, "K": k_list, "k_tau": k_tau, "j": j},
                "schedules": {"slice": schedule_hash(sched)}, "failures": []}
    jobs = [((graph_name, k, k_tau, j), k) for k in k_list]
    results = _pool_map(_guarded_maxcut_point, [job[0] for job in jobs], workers)
    for (args, k), (ok, val) in zip(jobs, results):
        tau_over_n = (k_tau / k) / n_seq
        if not ok:
            manifest["failures"].append({"args": repr(args), "error": val})
            records.append(ExperimentRecord("maxcut", n, 0.0, 1, tau_over_n, None, "energy_gap", float("nan")))
            continue
        energy, gap, off = val
        records.append(ExperimentRecord("maxcut", n, 0.0, 1, tau_over_n, None, "k_steps", float(k)))
        records.append(ExperimentRecord("maxcut", n, 0.0, 1, tau_over_n, None, "energy", energy))
        records.append(ExperimentRecord("maxcut", n, 0.0, 1, tau_over_n, None, "energy_gap", gap))
        records.append(ExperimentRecord("maxcut", n, 0.0, 1, tau_over_n, None, "max_offground_prob", off))
    return records, manifest


def run_bounds(params=None, workers=None):
    """Trotter-bound constants, per-tau bound values, and cycle budgets."""
    del workers
    params = dict(params or {})
    n = int(_as_list(params.get("N", 8))[0])
    alphas = [float(v) for v in _as_list(params.get("alpha", [3.0, 0.2]))]
    j = float(params.get("j", 1.0))
    cycles_list = [int(v) for v in _as_list(params.get("cycles", ISING_CYCLES))]
    epsilon = float(params.get("epsilon", 1e-2))
    kappa = params.get("kappa")
    t_total = math.pi / (4.0 * j)
    records = []
    manifest = {"experiment": "bounds",
                "params": {"N": n, "alpha": list(alphas), "j": j, "cycles": cycles_list,
                           "epsilon": epsilon, "kappa": kappa, "T": t_total},
                "schedules": {}, "failures": []}
    for alpha in alphas:
        _, sched = ising_schedule(n, alpha, j, 1)
        n_seq = _sequence_n(sched)
        const = trotter_alpha_constant(alpha)
        const_name = "a_alpha" if alpha > 1 else "b_alpha"
        records.append(ExperimentRecord("bounds", n, alpha, 1, None, None, const_name, const))
        budget = kappa_tau_budget(alpha, n, j, t_total, epsilon=epsilon,
                                  kappa=None if kappa is None else float(kappa))
        records.append(ExperimentRecord("bounds", n, alpha, 1, None, None, "j_tau_budget", budget))
        for cycles in cycles_list:
            tau = t_total / cycles
            taus = [b.c * tau for b in sched.blocks]
            rep = trotter_bound(alpha, n, j, taus, t_total)
            records.append(
                ExperimentRecord("bounds", n, alpha, 1, tau / n_seq, None, "trotter_bound", rep.bound)
            )
    return records, manifest


EXPERIMENTS = {
    "ising": run_ising,
    "cutoff": run_cutoff,
    "robust": run_robust,
    "surface7": run_surface7,
    "maxcut": run_maxcut,
    "bounds": run_bounds,
}
