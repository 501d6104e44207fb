"""Exact state-vector execution of Walsh pulse schedules.

Two engines share one entry point, `run_schedule`:

* dense (dim <= 512): builds explicit cycle unitaries, supports coherent
  pulse errors — per-qubit over-rotations delta_i on every pi pulse and
  square finite-width pulses of duration t_p;
* matrix-free (dim > 512): ideal instantaneous pulses only, evolving under
  layer-conjugated Pauli-string operators with a Lanczos propagator.

Qubit 0 is the most significant bit of the state index.  Global phases and
norms are never adjusted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .walsh import CONJ_SIGN, hadamard_row

DENSE_DIM_MAX = 512

_SQ2 = 1.0 / math.sqrt(2.0)

# single-qubit gate matrices for pulse and set-pulse labels
GATES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": _SQ2 * np.array([[1, 1], [1, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "Sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
    # RX90 = exp(-i pi/4 X), RY90 = exp(-i pi/4 Y)
    "RX90": _SQ2 * np.array([[1, -1j], [-1j, 1]], dtype=complex),
    "RX90dg": _SQ2 * np.array([[1, 1j], [1j, 1]], dtype=complex),
    "RY90": _SQ2 * np.array([[1, -1], [1, 1]], dtype=complex),
    "RY90dg": _SQ2 * np.array([[1, 1], [-1, 1]], dtype=complex),
}
for _m in GATES.values():
    _m.setflags(write=False)


class PauliStringOperator:
    """Real linear combination of Pauli strings with a matrix-free apply.

    Each string is stored as a length-n label string over IXYZ; a term acts on
    a basis state |b> as phase(b) |b ^ flip> with flip the X|Y support mask and
    phase(b) = i^(#Y) * (-1)^popcount(b & (Y|Z mask)).
    """

    def __init__(self, n_qubits, terms):
        self.n_qubits = int(n_qubits)
        out = []
        for c, s in terms:
            c = float(c)
            if not np.isfinite(c):
                raise ValueError("non-finite coefficient")
            if len(s) != self.n_qubits or any(ch not in "IXYZ" for ch in s):
                raise ValueError(f"bad Pauli string {s!r}")
            if c != 0.0:
                out.append((c, str(s)))
        self.terms = tuple(out)
        self._applied = None
        self._dense = None
        self._eigh_cache = None

    @property
    def dim(self):
        return 1 << self.n_qubits

    def __add__(self, other):
        if not isinstance(other, PauliStringOperator):
            return NotImplemented
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit counts differ")
        return PauliStringOperator(self.n_qubits, self.terms + other.terms)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        s = float(scalar)
        return PauliStringOperator(self.n_qubits, [(c * s, t) for c, t in self.terms])

    __rmul__ = __mul__

    def conjugated_by_layer(self, layer):
        """P^dag O P for an instantaneous Pauli layer P = prod_i layer[i]_i.
        Pauli conjugation only flips term signs."""
        if len(layer) != self.n_qubits:
            raise ValueError("layer length mismatch")
        new = []
        for c, s in self.terms:
            sign = 1
            for p, o in zip(layer, s):
                sign *= CONJ_SIGN[p][o]
            new.append((sign * c, s))
        return PauliStringOperator(self.n_qubits, new)

    def _build_applied(self):
        n = self.n_qubits
        dim = self.dim
        idx = np.arange(dim, dtype=np.uint64)
        built = []
        for c, s in self.terms:
            flip = 0
            yz = 0
            n_y = 0
            for q, ch in enumerate(s):
                bit = 1 << (n - 1 - q)
                if ch in "XY":
                    flip |= bit
                if ch in "YZ":
                    yz |= bit
                if ch == "Y":
                    n_y += 1
            perm = (idx ^ np.uint64(flip)).astype(np.intp)
            par = np.bitwise_count(idx & np.uint64(yz)).astype(np.int64)
            phase = c * (1j**n_y) * np.where(par & 1, -1.0, 1.0)
            built.append((perm, phase.astype(complex)))
        self._applied = built

    def apply(self, psi):
        if self._applied is None:
            self._build_applied()
        out = np.zeros(self.dim, dtype=complex)
        for perm, phase in self._applied:
            out[perm] += phase * psi
        return out

    def expectation(self, psi):
        return float(np.vdot(psi, self.apply(psi)).real)

    def to_dense(self):
        if self._dense is None:
            h = np.zeros((self.dim, self.dim), dtype=complex)
            for c, s in self.terms:
                m = np.ones((1, 1), dtype=complex)
                for ch in s:
                    m = np.kron(m, GATES[ch])
                h += c * m
            self._dense = h
        return self._dense

    def _eigh(self):
        if self._eigh_cache is None:
            self._eigh_cache = np.linalg.eigh(self.to_dense())
        return self._eigh_cache


def two_body_operator(n_qubits, terms):
    """PauliStringOperator from (i, j, op_i, op_j, strength) terms."""
    out = []
    for i, j, oi, oj, s in terms:
        labels = ["I"] * n_qubits
        labels[i] = oi
        labels[j] = oj
        out.append((s, "".join(labels)))
    return PauliStringOperator(n_qubits, out)


def resource_operator(resource, extra_fields=None):
    """PauliStringOperator for a ResourceHamiltonian, fields included.
    `extra_fields` (per-qubit (h_x, h_y, h_z) rows) add onto any fields the
    resource already declares."""
    n = resource.n_qubits
    terms = []
    for mat, op in ((resource.jx, "X"), (resource.jy, "Y")):
        for i in range(n):
            for j in range(i + 1, n):
                if mat[i, j] != 0.0:
                    labels = ["I"] * n
                    labels[i] = op
                    labels[j] = op
                    terms.append((mat[i, j], "".join(labels)))
    fields = None
    if resource.fields is not None:
        fields = np.array(resource.fields, dtype=float)
    if extra_fields is not None:
        extra = np.asarray(extra_fields, dtype=float).reshape(n, 3)
        fields = extra if fields is None else fields + extra
    if fields is not None:
        for q in range(n):
            for a, op in enumerate("XYZ"):
                if fields[q, a] != 0.0:
                    labels = ["I"] * n
                    labels[q] = op
                    terms.append((fields[q, a], "".join(labels)))
    return PauliStringOperator(n, terms)


def zero_state(n_qubits):
    psi = np.zeros(1 << n_qubits, dtype=complex)
    psi[0] = 1.0
    return psi


def haar_random_state(n_qubits, rng):
    dim = 1 << n_qubits
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _apply_1q(psi, n_qubits, qubit, u2):
    shaped = psi.reshape(1 << qubit, 2, -1)
    out = np.einsum("ab,ibj->iaj", u2, shaped)
    return out.reshape(-1)


def apply_instant_layer(layer, signs, delta, state):
    """Apply a physical instantaneous pulse layer: every non-identity label
    O_i acts as exp(-i s_i (pi + delta_i) O_i / 2).  With delta = 0 this is
    the ideal pi pulse, i.e. the literal Pauli up to a -i s_i phase."""
    psi = np.asarray(state, dtype=complex)
    n = psi.size.bit_length() - 1
    if len(layer) != n:
        raise ValueError("layer length does not match the state")
    signs = np.broadcast_to(np.asarray(signs, dtype=float), (n,))
    if delta is None:
        delta = np.zeros(n)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (n,))
    for q, ch in enumerate(layer):
        if ch != "I":
            psi = _apply_1q(psi, n, q, _pi_pulse_2x2(ch, signs[q], delta[q]))
    return psi


def apply_gate_labels(state, qubit, labels):
    """Apply a sequence of named single-qubit gates (time order) exactly."""
    psi = np.asarray(state, dtype=complex)
    n = psi.size.bit_length() - 1
    for lbl in labels:
        psi = _apply_1q(psi, n, qubit, GATES[lbl])
    return psi


def _lanczos_expm(apply_h, t, psi, tol, m_max=40, depth=0):
    nrm = np.linalg.norm(psi)
    if nrm == 0.0:
        return psi.copy()
    v = psi / nrm
    basis = [v]
    alphas, betas = [], []
    w = apply_h(v)
    a = np.vdot(v, w).real
    w = w - a * v
    alphas.append(a)
    for _ in range(m_max):
        b = float(np.linalg.norm(w))
        ew, evec = eigh_tridiagonal(alphas, betas) if betas else (np.array(alphas), np.ones((1, 1)))
        coeff = evec @ (np.exp(-1j * t * ew) * evec[0, :])
        err = abs(b * coeff[-1])
        if err <= tol or b <= 1e-14:
            return nrm * (np.stack(basis, axis=1) @ coeff)
        v = w / b
        basis.append(v)
        betas.append(b)
        w = apply_h(v) - b * basis[-2]
        a = np.vdot(v, w).real
        w = w - a * v
        for u in basis:  # full reorthogonalization keeps the recursion stable
            w = w - np.vdot(u, w) * u
        alphas.append(a)
    if depth >= 40:
        raise RuntimeError("Krylov propagator failed to converge")
    half = _lanczos_expm(apply_h, t / 2, psi, tol / 2, m_max, depth + 1)
    return _lanczos_expm(apply_h, t / 2, half, tol / 2, m_max, depth + 1)


def evolve(hamiltonian, t, state, tol=1e-12):
    """exp(-i t H) |state>.  Dense eigendecomposition (cached on Pauli-string
    operators) up to dim 512, Lanczos with full reorthogonalization above."""
    psi = np.asarray(state, dtype=complex)
    if t == 0.0:
        return psi.copy()
    if isinstance(hamiltonian, np.ndarray):
        w, v = np.linalg.eigh(hamiltonian)
        return (v * np.exp(-1j * w * t)) @ (v.conj().T @ psi)
    if psi.size <= DENSE_DIM_MAX:
        w, v = hamiltonian._eigh()
        return (v * np.exp(-1j * w * t)) @ (v.conj().T @ psi)
    return _lanczos_expm(hamiltonian.apply, t, psi, tol)


def run_interval_finite(h_r, h_p, interval, t_p, state, tol=1e-12):
    """One square-pulse interval: ramp in under H_R + H_p for t_p, free
    evolution for interval - 2 t_p, ramp out under H_R - H_p for t_p.
    t_p = 0 degenerates to free evolution for the whole interval (the
    instantaneous pulses then live outside this function)."""
    if t_p == 0.0:
        return evolve(h_r, interval, state, tol)
    if interval <= 2 * t_p:
        raise ValueError("interval must exceed 2 t_p")
    psi = evolve(h_r + h_p, t_p, state, tol)
    psi = evolve(h_r, interval - 2 * t_p, psi, tol)
    return evolve(h_r - h_p, t_p, psi, tol)


def measure_qubit(state, qubit, axis="Z", rng=None):
    """Projective single-qubit measurement; returns (outcome, post_state).
    Probabilities within 1e-12 of 0 or 1 branch deterministically."""
    psi = np.asarray(state, dtype=complex)
    n = psi.size.bit_length() - 1
    o_psi = _apply_1q(psi, n, qubit, GATES[axis])
    plus = 0.5 * (psi + o_psi)
    minus = 0.5 * (psi - o_psi)
    p_plus = float(np.vdot(plus, plus).real)
    if p_plus >= 1.0 - 1e-12:
        outcome, branch = 1, plus
    elif p_plus <= 1e-12:
        outcome, branch = -1, minus
    else:
        u = (rng if rng is not None else np.random.default_rng()).random()
        outcome, branch = (1, plus) if u < p_plus else (-1, minus)
    return outcome, branch / np.linalg.norm(branch)


@dataclass(frozen=True)
class ErrorModel:
    """Coherent pulse errors and always-on disorder.

    delta: per-qubit over-rotation angles applied to every pi pulse;
    t_p: square-pulse width (0 = instantaneous);
    fields: per-qubit (h_x, h_y, h_z) rows added to the resource Hamiltonian
        while the schedule runs;
    rng_seed: provenance of sampled delta values (metadata only).
    """

    delta: tuple | None = None
    t_p: float = 0.0
    fields: tuple | None = None
    rng_seed: int | None = None


def _signs_for_cycle(schedule, l):
    if schedule.sign_e is None:
        return np.ones(schedule.n_qubits)
    L = schedule.period
    return np.array([hadamard_row(e, L)[l] for e in schedule.sign_e], dtype=float)


def _pi_pulse_2x2(op, sign, delta, dagger=False):
    """exp(-i sign (pi + delta) O / 2), or its inverse for dagger=True."""
    half = 0.5 * (math.pi + delta)
    s = -sign if dagger else sign
    return math.cos(half) * GATES["I"] - 1j * s * math.sin(half) * GATES[op]


def _layer_pulse_dense(n, layer, signs, delta):
    u = np.ones((1, 1), dtype=complex)
    for q, ch in enumerate(layer):
        g = GATES["I"] if ch == "I" else _pi_pulse_2x2(ch, signs[q], delta[q])
        u = np.kron(u, g)
    return u


def _layer_generator_dense(n, layer, signs, delta, t_p):
    """H_p with exp(-i t_p H_p) equal to the instantaneous pulse layer."""
    dim = 1 << n
    h = np.zeros((dim, dim), dtype=complex)
    for q, ch in enumerate(layer):
        if ch == "I":
            continue
        coeff = signs[q] * (math.pi + delta[q]) / (2.0 * t_p)
        m = np.ones((1, 1), dtype=complex)
        for r in range(n):
            m = np.kron(m, GATES[ch] if r == q else GATES["I"])
        h += coeff * m
    return h


def _set_gate_dense(n, per_qubit_labels, signs, delta, pre):
    """Set-pulse layer as a dense unitary.  Pauli labels are physical pi
    pulses carrying the over-rotation delta (closing twins of the opening
    pulses, hence the sign flip for pre); other labels are exact gates."""
    u = np.ones((1, 1), dtype=complex)
    for q, labels in enumerate(per_qubit_labels):
        g = GATES["I"].copy()
        for lbl in labels:
            if lbl in ("X", "Y", "Z"):
                m = _pi_pulse_2x2(lbl, signs[q], delta[q], dagger=pre)
            else:
                m = GATES[lbl]
            g = m @ g
        u = np.kron(u, g)
    return u


def _expm_dense(h, t):
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def _block_durations(schedule, block_index, tau, finite):
    b = schedule.blocks[block_index]
    durs = [f * b.c * tau for f in b.interval_durations]
    if finite and schedule.fp is not None:
        durs[0] -= schedule.fp.shrink[block_index]
        if durs[0] < 0:
            raise ValueError("finite-pulse shrink exceeds the first interval")
    return durs


def dense_cycle_unitaries(schedule, resource, tau, error=None):
    """Explicit cycle unitaries U_l for l = 0..L-1 (L the sign period).

    Pulses are physical: interval k of a block opens with
    prod_i exp(-i s_i (pi + delta_i) O_i / 2) and closes with the exact
    inverse; with t_p > 0 the two become square ramps under H_R +- H_p and
    the schedule's recorded first-interval shrink is applied.
    """
    if error is None:
        error = ErrorModel()
    n = schedule.n_qubits
    dim = 1 << n
    if dim > DENSE_DIM_MAX:
        raise ValueError(f"dense engine handles dim <= {DENSE_DIM_MAX}")
    if resource.n_qubits != n:
        raise ValueError("resource qubit count mismatch")
    delta = np.zeros(n) if error.delta is None else np.broadcast_to(
        np.asarray(error.delta, dtype=float), (n,)
    )
    t_p = float(error.t_p)
    if t_p < 0:
        raise ValueError("t_p must be >= 0")
    if t_p > 0 and schedule.fp is not None and not math.isclose(t_p, schedule.fp.t_p):
        raise ValueError("error t_p differs from the schedule's finite-pulse deformation")
    h_r = resource_operator(resource, error.fields).to_dense()
    w_r, v_r = np.linalg.eigh(h_r)
    free_cache = {}

    def free_prop(d):
        u = free_cache.get(d)
        if u is None:
            u = free_cache[d] = (v_r * np.exp(-1j * w_r * d)) @ v_r.conj().T
        return u

    unitaries = []
    for l in range(schedule.period):
        signs = _signs_for_cycle(schedule, l)
        u = np.eye(dim, dtype=complex)
        for qi, block in enumerate(schedule.blocks):
            u = _set_gate_dense(n, block.set_pre, signs, delta, pre=True) @ u
            layers = schedule.layers(qi)
            durs = _block_durations(schedule, qi, tau, finite=t_p > 0)
            for lay, d in zip(layers, durs):
                if all(ch == "I" for ch in lay):
                    u = free_prop(d) @ u
                elif t_p == 0.0:
                    p = _layer_pulse_dense(n, lay, signs, delta)
                    u = p.conj().T @ free_prop(d) @ p @ u
                else:
                    if d <= 2 * t_p:
                        raise ValueError("interval shorter than 2 t_p")
                    hp = _layer_generator_dense(n, lay, signs, delta, t_p)
                    u = (
                        _expm_dense(h_r - hp, t_p)
                        @ free_prop(d - 2 * t_p)
                        @ _expm_dense(h_r + hp, t_p)
                        @ u
                    )
            u = _set_gate_dense(n, block.set_post, signs, delta, pre=False) @ u
        unitaries.append(u)
    return unitaries


def apply_prelude(schedule, state):
    psi = np.asarray(state, dtype=complex)
    if schedule.prelude is not None:
        for q, labels in enumerate(schedule.prelude):
            if labels:
                psi = apply_gate_labels(psi, q, labels)
    return psi


def run_cycles(unitaries, cycles, state):
    """Apply precomputed cycle unitaries for the given number of cycles."""
    psi = np.asarray(state, dtype=complex)
    L = len(unitaries)
    for c in range(cycles):
        psi = unitaries[c % L] @ psi
    return psi


def run_schedule(schedule, resource, tau, cycles, state, error=None, tol=1e-12):
    """Evolve `state` through `cycles` repetitions of the schedule at base
    time tau (already stretched by any finite-pulse rescale).  The prelude,
    when present, is applied once before the first cycle."""
    if error is None:
        error = ErrorModel()
    n = schedule.n_qubits
    dim = 1 << n
    psi = np.asarray(state, dtype=complex)
    if psi.size != dim:
        raise ValueError("state dimension mismatch")
    cycles = int(cycles)
    if cycles < 0:
        raise ValueError("cycles must be >= 0")
    if schedule.sign_e is not None and cycles % schedule.period:
        raise ValueError(f"cycles must be a multiple of the sign period {schedule.period}")
    noisy = error.t_p > 0 or (
        error.delta is not None and np.any(np.asarray(error.delta, dtype=float) != 0)
    )
    psi = apply_prelude(schedule, psi)
    if dim <= DENSE_DIM_MAX:
        us = dense_cycle_unitaries(schedule, resource, tau, error)
        return run_cycles(us, cycles, psi)
    if noisy:
        raise ValueError(f"coherent pulse errors need the dense engine (dim <= {DENSE_DIM_MAX})")
    # ideal matrix-free engine: instantaneous Pauli conjugation is exact, so
    # each interval evolves under the layer-conjugated resource operator
    # (external fields, if any, conjugate right along with it)
    h_r = resource_operator(resource, error.fields)
    conj = {}
    for c in range(cycles):
        for qi, block in enumerate(schedule.blocks):
            for q, labels in enumerate(block.set_pre):
                if labels:
                    psi = apply_gate_labels(psi, q, labels)
            durs = _block_durations(schedule, qi, tau, finite=False)
            for lay, d in zip(schedule.layers(qi), durs):
                op = conj.get(lay)
                if op is None:
                    op = conj[lay] = h_r.conjugated_by_layer(lay)
                psi = evolve(op, d, psi, tol)
            for q, labels in enumerate(block.set_post):
                if labels:
                    psi = apply_gate_labels(psi, q, labels)
    return psi
