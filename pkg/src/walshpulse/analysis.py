"""Metrics, analytical bounds, and brute-force oracles for compiled schedules.

Everything here is either a pure metric, an independent reference computed
without the schedule machinery (cluster state, MaxCut ground energies), or a
dense first-order operator check against which the compiler is validated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import compiler as _compiler
from .compiler import ResourceHamiltonian, TargetSpec, TwoQubitGate, gate_layer_to_target
from .sim import (
    GATES,
    PauliStringOperator,
    _signs_for_cycle,
    apply_prelude,
    dense_cycle_unitaries,
    haar_random_state,
    measure_qubit,
    resource_operator,
    run_cycles,
    run_schedule,
    two_body_operator,
)
from .walsh import CONJ_SIGN, hadamard_matrix


def fidelity(psi, phi):
    """|<phi|psi>| (global phases irrelevant)."""
    psi = np.asarray(psi)
    phi = np.asarray(phi)
    if psi.shape != phi.shape:
        raise ValueError("state dimensions differ")
    return float(abs(np.vdot(phi, psi)))


def cluster_reference(n_qubits, j=1.0):
    """exp(-i H T)|0...0> for H = -j sum_i X_i X_{i+1} at T = pi/(4 j),
    built as a product of commuting two-qubit exponentials on raw bit
    arithmetic (independent of the schedule machinery).  The state does not
    depend on j since T compensates the scale."""
    del j
    dim = 1 << n_qubits
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    idx = np.arange(dim)
    for i in range(n_qubits - 1):
        mask = (1 << (n_qubits - 1 - i)) | (1 << (n_qubits - 2 - i))
        # exp(i (pi/4) X_i X_{i+1}) = (1 + i X X)/sqrt(2); XX only flips bits
        psi = (psi + 1j * psi[idx ^ mask]) / math.sqrt(2.0)
    return psi


@dataclass(frozen=True)
class TrotterBoundReport:
    alpha: float
    n_qubits: int
    j: float
    total_tau: float
    total_time: float
    bound: float
    regime: str


def trotter_alpha_constant(alpha):
    """a_alpha (alpha > 1) or b_alpha (alpha < 1) prefactor."""
    if alpha == 1:
        raise ValueError("the bound is singular at alpha = 1")
    if alpha > 1:
        return 2.0 * (alpha / (alpha - 1.0)) ** 2
    return 2.0 / ((1.0 - alpha) ** 2 * (2.0 - alpha))


def trotter_bound(alpha, n_qubits, j, taus, total_time):
    """First-order Trotter error bound for one cycle of blocks lasting
    sum(taus), repeated for total_time; upper-bounds sqrt(1 - F)."""
    c = trotter_alpha_constant(alpha)
    total_tau = float(sum(taus))
    if alpha > 1:
        bound = c * n_qubits * (j * total_time) * (j * total_tau)
        regime = "alpha_gt_1"
    else:
        bound = c * n_qubits ** (3.0 - 2.0 * alpha) * (j * total_time) * (j * total_tau)
        regime = "alpha_lt_1"
    return TrotterBoundReport(alpha, n_qubits, j, total_tau, total_time, bound, regime)


def kappa_tau_budget(alpha, n_qubits, j, total_time, epsilon=None, kappa=None):
    """Invert the bound: the J*sum(tau_q) cycle budget achieving Trotter
    error <= epsilon (kappa overrides the derived kappa_eps = eps/const)."""
    if kappa is None:
        if epsilon is None:
            raise ValueError("give epsilon or kappa")
        kappa = epsilon / trotter_alpha_constant(alpha)
    if alpha > 1:
        return kappa / (n_qubits * j * total_time)
    return kappa * n_qubits ** (2.0 * alpha - 3.0) / (j * total_time)


def stabilizer_expectations(psi, stabilizers):
    """<psi|O|psi> for single-Pauli-string operators with coefficient 1."""
    out = []
    for op in stabilizers:
        if len(op.terms) != 1 or op.terms[0][0] != 1.0:
            raise ValueError("stabilizers must be single Pauli strings with coefficient 1")
        out.append(op.expectation(psi))
    return out


def maxcut_config_energies(graph, j=1.0):
    """Classical energies of H = j sum G_ij X_i X_j over all X-basis
    configurations (index bit 0 = eigenvalue +1, qubit 0 = MSB)."""
    n = graph.n_vertices
    bits = (np.arange(1 << n)[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    signs = 1.0 - 2.0 * bits
    e = np.zeros(1 << n)
    for (i, k), w in graph.weights.items():
        e += j * w * signs[:, i] * signs[:, k]
    return e


def maxcut_energy_gap(psi, graph, j=1.0):
    """(<H>, <H> - E_gs) with E_gs brute-forced over the 2^N classical
    X-basis configurations."""
    op = two_body_operator(graph.n_vertices, [(i, k, "X", "X", j * w) for (i, k), w in graph.weights.items()])
    energy = op.expectation(psi)
    e_gs = float(maxcut_config_energies(graph, j).min())
    return energy, energy - e_gs


def x_basis_probabilities(psi):
    """Probabilities of X-basis configurations (same indexing as
    maxcut_config_energies)."""
    psi = np.asarray(psi, dtype=complex)
    hx = hadamard_matrix(psi.size) / math.sqrt(psi.size)
    amp = hx @ psi
    return np.abs(amp) ** 2


def dqa_run(graph, resource, k_steps, tau, tol=1e-12):
    """Digitized annealing toward H = j sum G_ij X_i X_j on an all-to-all
    (alpha = 0) resource: steps k = 1..K apply the compiled H-slice for
    time k*tau (k cycle repetitions) followed by the driver slice
    exp(-i (K-k) tau H_0), H_0 = -sum Z_i applied as an exact diagonal."""
    n = graph.n_vertices
    if resource.n_qubits != n:
        raise ValueError("resource size mismatch")
    off = ~np.eye(n, dtype=bool)
    jx = resource.jx[off]
    j = -jx[0]
    if j <= 0 or not np.allclose(resource.jx[off], -j) or not np.allclose(resource.jy[off], -j):
        raise ValueError("dqa needs a uniform all-to-all (alpha = 0) resource")
    target = TargetSpec(n, [(i, k, "X", "X", j * w) for (i, k), w in graph.weights.items()])
    schedule = _compiler.compile(target, resource)
    dim = 1 << n
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    ones = np.bitwise_count(np.arange(dim, dtype=np.uint64)).astype(np.int64)
    h0_diag = -(n - 2 * ones).astype(float)
    use_dense = dim <= 512
    unitaries = dense_cycle_unitaries(schedule, resource, tau) if use_dense else None
    for k in range(1, k_steps + 1):
        if use_dense:
            psi = run_cycles(unitaries, k, psi)
        else:
            psi = run_schedule(schedule, resource, tau, k, psi, tol=tol)
        psi = np.exp(-1j * (k_steps - k) * tau * h0_diag) * psi
    return psi


# --- dense first-order operator checks -------------------------------------

def _layer_unitary_dense(layer):
    u = np.ones((1, 1), dtype=complex)
    for ch in layer:
        u = np.kron(u, GATES[ch])
    return u


def _set_unitary_dense(per_qubit_labels):
    u = np.ones((1, 1), dtype=complex)
    for labels in per_qubit_labels:
        g = GATES["I"].copy()
        for lbl in labels:
            g = GATES[lbl] @ g
        u = np.kron(u, g)
    return u


def _single_site_dense(n, qubit, op):
    m = np.ones((1, 1), dtype=complex)
    for q in range(n):
        m = np.kron(m, GATES[op] if q == qubit else GATES["I"])
    return m


def average_hamiltonian(schedule, resource):
    """Cycle-averaged toggled Hamiltonian of one cycle, set frames included:
    sum_q c_q S_q [sum_k f_k P_k^dag H_R P_k] S_q^dag.  Equals the dense
    target exactly when the compilation is correct."""
    h = resource_operator(resource).to_dense()
    total = np.zeros_like(h)
    for qi, block in enumerate(schedule.blocks):
        avg = np.zeros_like(h)
        for lay, f in zip(schedule.layers(qi), block.interval_durations):
            p = _layer_unitary_dense(lay)
            avg += f * (p.conj().T @ h @ p)
        s = _set_unitary_dense(block.set_post)
        total += block.c * (s @ avg @ s.conj().T)
    return total


def _set_axis_map(labels):
    """Where a per-qubit set gate sends each Pauli axis: {axis: (axis', sign)}.

    Set gates are single-qubit Cliffords, so the conjugated axis operator is
    again a signed axis operator; the sign is snapped to an exact integer.
    """
    g = GATES["I"].copy()
    for lbl in labels:
        g = GATES[lbl] @ g
    out = {}
    for a in "XYZ":
        m = g @ GATES[a] @ g.conj().T
        for b in "XYZ":
            c = float(np.trace(GATES[b] @ m).real) / 2.0
            s = int(round(c))
            if s in (1, -1) and abs(c - s) < 1e-9:
                out[a] = (b, s)
                break
        else:
            raise ValueError(f"set gate {labels} does not permute the Pauli axes")
    return out


def external_field_average(schedule, fields):
    """Cycle average of the toggled per-qubit field Hamiltonian.

    Toggling signs are accumulated as integers over the pulse intervals
    (whose durations are exact multiples of 1/n), so when the schedule was
    compiled with the decoupling guard the result is the exact zero matrix,
    not a rounding residue.
    """
    n = schedule.n_qubits
    fields = np.asarray(fields, dtype=float).reshape(n, 3)
    terms = []
    for qi, block in enumerate(schedule.blocks):
        layers = schedule.layers(qi)
        # durations are dyadic fractions of the cycle (already mirrored for
        # trotter_order 2), so scaling by the fine grid gives exact integers
        denom = block.n_intervals * (2 if schedule.trotter_order == 2 else 1)
        units = [int(round(f * denom)) for f in block.interval_durations]
        axis_maps = [_set_axis_map(g) for g in block.set_post]
        for q in range(n):
            for a, axis in enumerate("XYZ"):
                if fields[q][a] == 0.0:
                    continue
                weight = sum(m * CONJ_SIGN[lay[q]][axis] for lay, m in zip(layers, units))
                if weight == 0:
                    continue
                out_axis, sgn = axis_maps[q][axis]
                labels = ["I"] * n
                labels[q] = out_axis
                terms.append((block.c * sgn * fields[q][a] * (weight / denom), "".join(labels)))
    if not terms:
        return np.zeros((2**n, 2**n), dtype=complex)
    return PauliStringOperator(n, terms).to_dense() / schedule.cycle_tau_fractions


def ra_error_operator(schedule, resource, delta, cycle_index):
    """First-order rotation-angle error Hamiltonian of cycle `cycle_index`:
    each pulsed interval contributes (i/2) s_i delta_i [O_i, H^(k)] from the
    residual rotation left by the imperfect conjugation.  Linear in the
    cycle signs, so the sum over a full sign period vanishes identically."""
    n = schedule.n_qubits
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (n,))
    h = resource_operator(resource).to_dense()
    signs = _signs_for_cycle(schedule, cycle_index)
    total = np.zeros_like(h)
    singles = {}
    for qi, block in enumerate(schedule.blocks):
        acc = np.zeros_like(h)
        for lay, f in zip(schedule.layers(qi), block.interval_durations):
            p = _layer_unitary_dense(lay)
            hk = p.conj().T @ h @ p
            for i, ch in enumerate(lay):
                if ch == "I" or delta[i] == 0.0:
                    continue
                key = (i, ch)
                if key not in singles:
                    singles[key] = _single_site_dense(n, i, ch)
                o = singles[key]
                acc += f * (0.5j * signs[i] * delta[i]) * (o @ hk - hk @ o)
        s = _set_unitary_dense(block.set_post)
        total += block.c * (s @ acc @ s.conj().T)
    return total


def fit_loglog_slope(xs, ys, floor=0.0):
    """Least-squares slope of log(y) vs log(x), excluding points within 10x
    of the floor; requires >= 5 surviving points spanning a decade."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = (ys > 10.0 * floor) & (ys > 0.0) & (xs > 0.0)
    xs, ys = xs[keep], ys[keep]
    if xs.size < 5:
        raise ValueError("need at least 5 points clear of the floor")
    if xs.max() / xs.min() < 10.0 * (1.0 - 1e-9):
        raise ValueError("points must span at least one decade")
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)


# --- 7-qubit surface code ----------------------------------------------------
#
# Roles on qubits 0..6: q0=D1, q1=D0, q2=AX1, q3=AY, q4=D3, q5=D2, q6=AX2.
# Stabilizers: S_X1 = X_D0 X_D1, S_X2 = X_D2 X_D3, S_Y = Y_D0 Y_D1 Y_D2 Y_D3,
# read out through ancillas AX1, AX2, AY prepared in |0> and measured in Z.
# The layer order is chosen so every ancilla's two "hook" factors cancel,
# making the three measured operators exactly (stabilizer) x Z_ancilla.

SURFACE7_QUBITS = {"D1": 0, "D0": 1, "AX1": 2, "AY": 3, "D3": 4, "D2": 5, "AX2": 6}

SURFACE7_LAYERS = (
    (TwoQubitGate("CXX", 6, 5), TwoQubitGate("CYY", 3, 0)),  # (AX2,D2), (AY,D1)
    (TwoQubitGate("CXX", 6, 4), TwoQubitGate("CYY", 3, 1)),  # (AX2,D3), (AY,D0)
    (TwoQubitGate("CXX", 2, 0), TwoQubitGate("CYY", 3, 5)),  # (AX1,D1), (AY,D2)
    (TwoQubitGate("CXX", 2, 1), TwoQubitGate("CYY", 3, 4)),  # (AX1,D0), (AY,D3)
)

SURFACE7_DATA = (0, 1, 4, 5)
SURFACE7_ANCILLAS = (2, 3, 6)


def surface7_stabilizers():
    sx1 = ["I"] * 7
    sx1[SURFACE7_QUBITS["D0"]] = "X"
    sx1[SURFACE7_QUBITS["D1"]] = "X"
    sx2 = ["I"] * 7
    sx2[SURFACE7_QUBITS["D2"]] = "X"
    sx2[SURFACE7_QUBITS["D3"]] = "X"
    sy = ["I"] * 7
    for d in ("D0", "D1", "D2", "D3"):
        sy[SURFACE7_QUBITS[d]] = "Y"
    return [PauliStringOperator(7, [(1.0, "".join(s))]) for s in (sx1, sx2, sy)]


def surface7_positions(geometry):
    if geometry == "chain_1d":
        return np.arange(7, dtype=float)
    if geometry == "grid_2d":
        r = math.sqrt(2.0)
        pos = {
            "D0": (0.0, 0.0),
            "D1": (r, 0.0),
            "D2": (0.0, r),
            "D3": (r, r),
            "AY": (r / 2, r / 2),
            "AX1": (r / 2, -r / 2),
            "AX2": (r / 2, 3 * r / 2),
        }
        out = np.zeros((7, 2))
        for name, q in SURFACE7_QUBITS.items():
            out[q] = pos[name]
        return out
    raise ValueError(f"unknown geometry {geometry!r}")


def surface7_compile(geometry, alpha, j=1.0, trotter_order=2):
    """Resource plus (schedule, evolution_time) per layer of the code cycle."""
    resource = ResourceHamiltonian.power_law(7, alpha, j, surface7_positions(geometry))
    compiled = []
    for layer in SURFACE7_LAYERS:
        target, t_evo, prelude = gate_layer_to_target(layer, 7, j)
        schedule = _compiler.compile(
            target, resource, trotter_order=trotter_order, prelude=prelude
        )
        compiled.append((schedule, t_evo))
    return resource, compiled


def surface7_data_state(seed):
    """Seeded Haar state on the four data qubits, ancillas in |0>."""
    rng = np.random.default_rng(seed)
    data = haar_random_state(4, rng)
    psi = np.zeros(1 << 7, dtype=complex)
    for cfg in range(16):
        bits = [(cfg >> (3 - t)) & 1 for t in range(4)]
        idx = 0
        for q, b in zip(SURFACE7_DATA, bits):
            idx |= b << (6 - q)
        psi[idx] = data[cfg]
    return psi, rng


def surface7_batch(geometry, alpha, tau_over_n, seeds, j=1.0, trotter_order=2, compiled=None):
    """Run the full 4-layer code cycle for many seeds at one tau/n.

    Returns (achieved_tau_over_n, per-seed lists of 3 stabilizer
    expectations).  Cycle unitaries are built once and shared across seeds.
    """
    if compiled is None:
        resource, layers = surface7_compile(geometry, alpha, j, trotter_order)
    else:
        resource, layers = compiled
    n_seq = {b.n_intervals for s, _ in layers for b in s.blocks}
    if len(n_seq) != 1:
        raise ValueError("blocks disagree on sequence length")
    n = n_seq.pop()
    tau = tau_over_n * n
    t_evo = layers[0][1]
    cycles = max(1, round(t_evo / tau))
    tau = t_evo / cycles
    stabilizers = surface7_stabilizers()
    built = [(s, dense_cycle_unitaries(s, resource, tau)) for s, _ in layers]
    results = []
    for seed in seeds:
        psi, rng = surface7_data_state(seed)
        for s, us in built:
            psi = apply_prelude(s, psi)
            psi = run_cycles(us, cycles, psi)
        for anc in SURFACE7_ANCILLAS:
            _, psi = measure_qubit(psi, anc, "Z", rng)
        results.append(stabilizer_expectations(psi, stabilizers))
    return tau / n, results


def surface7_run(geometry, alpha, tau_over_n, seed, j=1.0, trotter_order=2):
    """Post-measurement stabilizer expectations for one seeded Haar state."""
    _, results = surface7_batch(geometry, alpha, tau_over_n, [seed], j, trotter_order)
    return results[0]
