"""Dense brute-force constructions used as independent oracles in tests.

Everything here builds explicit 2^N x 2^N matrices straight from textbook
definitions (Kronecker products and scipy.linalg.expm), deliberately not
reusing the package's operator or execution code paths.
"""

import numpy as np
from scipy.linalg import expm

I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
GATE = {
    **PAULI,
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0),
    "S": np.diag([1.0, 1j]),
    "Sdg": np.diag([1.0, -1j]),
    "RX90": expm(-1j * np.pi / 4 * PAULI["X"]),
    "RX90dg": expm(1j * np.pi / 4 * PAULI["X"]),
    "RY90": expm(-1j * np.pi / 4 * PAULI["Y"]),
    "RY90dg": expm(1j * np.pi / 4 * PAULI["Y"]),
}


def kron_string(label):
    m = np.ones((1, 1), dtype=complex)
    for ch in label:
        m = np.kron(m, PAULI[ch])
    return m


def dense_operator(n, terms):
    h = np.zeros((2**n, 2**n), dtype=complex)
    for coeff, label in terms:
        h += coeff * kron_string(label)
    return h


def dense_resource(resource):
    """Sum of jx XX + jy YY pair couplings plus per-qubit fields."""
    n = resource.n_qubits
    terms = []
    for i in range(n):
        for j in range(i + 1, n):
            for mat, ch in ((resource.jx, "X"), (resource.jy, "Y")):
                if mat[i, j] != 0.0:
                    lab = ["I"] * n
                    lab[i] = lab[j] = ch
                    terms.append((mat[i, j], "".join(lab)))
    if resource.fields is not None:
        for q in range(n):
            for a, ch in enumerate("XYZ"):
                if resource.fields[q][a] != 0.0:
                    lab = ["I"] * n
                    lab[q] = ch
                    terms.append((resource.fields[q][a], "".join(lab)))
    return dense_operator(n, terms)


def dense_target(target):
    n = target.n_qubits
    terms = []
    for i, j, oi, oj, s in target.terms:
        lab = ["I"] * n
        lab[i], lab[j] = oi, oj
        terms.append((s, "".join(lab)))
    return dense_operator(n, terms)


def pulse_layer_matrix(layer, signs, delta, dagger=False):
    """prod_i exp(-i s_i (pi + delta_i) O_i / 2) as one Kronecker factor."""
    u = np.ones((1, 1), dtype=complex)
    for q, ch in enumerate(layer):
        if ch == "I":
            g = I2
        else:
            s = -signs[q] if dagger else signs[q]
            g = expm(-1j * s * (np.pi + delta[q]) / 2.0 * PAULI[ch])
        u = np.kron(u, g)
    return u


def set_layer_matrix(per_qubit_labels, signs, delta, pre):
    u = np.ones((1, 1), dtype=complex)
    for q, labels in enumerate(per_qubit_labels):
        g = I2.copy()
        for lbl in labels:
            if lbl in ("X", "Y", "Z"):
                s = -signs[q] if pre else signs[q]
                m = expm(-1j * s * (np.pi + delta[q]) / 2.0 * PAULI[lbl])
            else:
                m = GATE[lbl]
            g = m @ g
        u = np.kron(u, g)
    return u


def schedule_cycle_matrix(schedule, h_r, tau, signs=None, delta=None, t_p=0.0):
    """One pulse-program cycle as an explicitly multiplied matrix product:
    per block, set_pre, then per interval open-pulse / free evolution /
    close-pulse (three square-ramp factors when t_p > 0), then set_post."""
    n = schedule.n_qubits
    dim = h_r.shape[0]
    signs = np.ones(n) if signs is None else np.asarray(signs, dtype=float)
    delta = np.zeros(n) if delta is None else np.broadcast_to(np.asarray(delta, dtype=float), (n,))
    u = np.eye(dim, dtype=complex)
    for qi, block in enumerate(schedule.blocks):
        u = set_layer_matrix(block.set_pre, signs, delta, pre=True) @ u
        durs = [f * block.c * tau for f in block.interval_durations]
        if t_p > 0.0 and schedule.fp is not None:
            durs[0] -= schedule.fp.shrink[qi]
        for lay, d in zip(schedule.layers(qi), durs):
            if all(ch == "I" for ch in lay):
                u = expm(-1j * h_r * d) @ u
            elif t_p == 0.0:
                p = pulse_layer_matrix(lay, signs, delta)
                pd = pulse_layer_matrix(lay, signs, delta, dagger=True)
                u = pd @ expm(-1j * h_r * d) @ p @ u
            else:
                hp = np.zeros((dim, dim), dtype=complex)
                for q, ch in enumerate(lay):
                    if ch != "I":
                        lab = ["I"] * n
                        lab[q] = ch
                        hp += signs[q] * (np.pi + delta[q]) / (2.0 * t_p) * kron_string("".join(lab))
                u = (
                    expm(-1j * (h_r - hp) * t_p)
                    @ expm(-1j * h_r * (d - 2.0 * t_p))
                    @ expm(-1j * (h_r + hp) * t_p)
                ) @ u
        u = set_layer_matrix(block.set_post, signs, delta, pre=False) @ u
    return u


def basis_state(n, index):
    psi = np.zeros(2**n, dtype=complex)
    psi[index] = 1.0
    return psi
