"""Walsh sign functions from Hadamard matrices and their mapping to pulse layers.

Walsh functions are the rows of generalized Hadamard matrices built by the
Kronecker recursion H_q = H_1 (x) H_{q-1}.  A pair of Walsh indices (x_i, y_i)
per qubit fixes the sign pattern picked up by X_i and Y_i during a pulse
sequence, and each column of signs maps to a layer of Pauli pi-pulses.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

H1 = np.array([[1, 1], [1, -1]], dtype=np.int64)

# symbol S applied as a pi-pulse conjugates the axis operator O to CONJ_SIGN[S][O]*O
CONJ_SIGN = {
    "I": {"I": 1, "X": 1, "Y": 1, "Z": 1},
    "X": {"I": 1, "X": 1, "Y": -1, "Z": -1},
    "Y": {"I": 1, "X": -1, "Y": 1, "Z": -1},
    "Z": {"I": 1, "X": -1, "Y": -1, "Z": 1},
}

_SYMBOL_FROM_SIGNS = {(1, 1): "I", (1, -1): "X", (-1, 1): "Y", (-1, -1): "Z"}


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def hadamard_matrix(size: int) -> np.ndarray:
    """Generalized Hadamard matrix of a power-of-two size (entries +-1)."""
    if not _is_pow2(size):
        raise ValueError(f"size must be a power of two, got {size}")
    if size == 1:
        out = np.ones((1, 1), dtype=np.int64)
    else:
        out = np.kron(H1, hadamard_matrix(size // 2))
    out.setflags(write=False)
    return out


def hadamard_row(index: int, size: int) -> np.ndarray:
    """Walsh function w_index over one period of `size` intervals.

    Parameters
    ----------
    index : int
        Walsh index, 0 <= index < size.
    size : int
        Power-of-two sequence length.

    Returns
    -------
    ndarray of shape (size,) with entries in {+1, -1}; row `index` of the
    Hadamard matrix built by H_q = H_1 (x) H_{q-1}.
    """
    if not _is_pow2(size):
        raise ValueError(f"size must be a power of two, got {size}")
    if not 0 <= index < size:
        raise ValueError(f"index {index} out of range for size {size}")
    return hadamard_matrix(size)[index]


def walsh_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized inner product (1/n) sum_k a[k] b[k]; delta_ab on Walsh rows."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a, b)) / a.shape[0]


def _next_pow2(v: int) -> int:
    return 1 if v <= 1 else 1 << (v - 1).bit_length()


@dataclass(frozen=True)
class WalshAssignment:
    """Per-qubit Walsh indices for the X and Y channels."""

    x: tuple
    y: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(int(v) for v in self.x))
        object.__setattr__(self, "y", tuple(int(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have the same length")
        if any(v < 0 for v in self.x + self.y):
            raise ValueError("Walsh indices must be non-negative")

    @property
    def n_qubits(self) -> int:
        return len(self.x)


def sequence_length(assignment: WalshAssignment) -> int:
    """Number of intervals n = 2^ceil(log2(max_i(x_i, y_i) + 1))."""
    m = max(max(assignment.x), max(assignment.y))
    return _next_pow2(m + 1)


def pulse_from_signs(sx: int, sy: int) -> str:
    """Pauli pulse symbol realizing the sign pair (sx, sy) on (X, Y)."""
    try:
        return _SYMBOL_FROM_SIGNS[(sx, sy)]
    except KeyError:
        raise ValueError(f"signs must be +-1, got ({sx}, {sy})") from None


def pulse_layers(assignment: WalshAssignment) -> list:
    """Pulse layers of one Walsh sequence.

    Returns a list of n strings of length N; layer k, character i is the
    pulse symbol for qubit i during interval k, chosen so that conjugation
    yields the signs w_{x_i}^(k) on X_i and w_{y_i}^(k) on Y_i.
    """
    n = sequence_length(assignment)
    h = hadamard_matrix(n)
    layers = []
    for k in range(n):
        layers.append(
            "".join(
                pulse_from_signs(int(h[xi, k]), int(h[yi, k]))
                for xi, yi in zip(assignment.x, assignment.y)
            )
        )
    return layers
