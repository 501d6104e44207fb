"""Compilation of two-body targets into Walsh pulse schedules.

The pipeline: rescale target couplings by the resource couplings, cover each
channel's rescaling graph with matchings, merge X/Y matchings into degree-1
blocks, peel the weighted blocks into equal-coefficient Walsh sequences,
assign Walsh indices (optionally cutoff-compressed and/or guarded for field
decoupling), attach set pulses for sign flips and axis rotations, and apply
Trotter symmetrization and robustness passes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .graphs import WeightedGraph, check_matching, greedy_degree1, hamilton_path_decompose, peel_weights
from .walsh import WalshAssignment, _next_pow2, pulse_from_signs, pulse_layers, sequence_length

SCHEDULE_VERSION = 1

# single-qubit set-pulse gate labels and their inverses
GATE_INVERSE = {
    "X": "X", "Y": "Y", "Z": "Z", "H": "H",
    "S": "Sdg", "Sdg": "S",
    "RX90": "RX90dg", "RX90dg": "RX90",
    "RY90": "RY90dg", "RY90dg": "RY90",
}

# rotation mapping the X axis onto the requested operator label
_ROT_FOR_AXIS = {"X": None, "Y": "S", "Z": "H"}

# product of two Pauli symbols up to phase, used for pulse-count peepholing
_PAULI_PRODUCT = {}
for _a in "IXYZ":
    for _b in "IXYZ":
        if _a == "I":
            _PAULI_PRODUCT[(_a, _b)] = _b
        elif _b == "I":
            _PAULI_PRODUCT[(_a, _b)] = _a
        elif _a == _b:
            _PAULI_PRODUCT[(_a, _b)] = "I"
        else:
            _PAULI_PRODUCT[(_a, _b)] = ({"X", "Y", "Z"} - {_a, _b}).pop()


class DivisionByZeroCoupling(ValueError):
    """A target term sits on a pair with no resource coupling on its channel."""

    def __init__(self, i, j, channel):
        self.i, self.j, self.channel = i, j, channel
        super().__init__(f"target term on ({i}, {j}) has zero resource coupling on channel {channel}")


@dataclass(eq=False)
class ResourceHamiltonian:
    """Always-on two-body interaction: sum_(i<j) jx[i,j] X_iX_j + jy[i,j] Y_iY_j,
    plus optional per-qubit background fields (h^x_i, h^y_i, h^z_i)."""

    n_qubits: int
    jx: np.ndarray
    jy: np.ndarray
    fields: np.ndarray | None = None

    def __post_init__(self):
        n = self.n_qubits
        for name in ("jx", "jy"):
            m = np.array(getattr(self, name), dtype=float)
            if m.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
            if not np.allclose(m, m.T, atol=0):
                raise ValueError(f"{name} must be symmetric")
            if np.any(np.diag(m) != 0):
                raise ValueError(f"{name} must have zero diagonal")
            m.setflags(write=False)
            setattr(self, name, m)
        if self.fields is not None:
            f = np.array(self.fields, dtype=float)
            if f.shape != (n, 3):
                raise ValueError(f"fields must be {n}x3")
            f.setflags(write=False)
            self.fields = f

    @classmethod
    def power_law(cls, n_qubits, alpha, j=1.0, positions=None, fields=None):
        """XY resource with couplings -j / r_ij^alpha; positions default to a
        unit-spaced chain, or pass an (n,) / (n, d) coordinate array."""
        if positions is None:
            positions = np.arange(n_qubits, dtype=float)
        pos = np.atleast_2d(np.asarray(positions, dtype=float))
        if pos.shape[0] == 1 and n_qubits > 1:
            pos = pos.T
        if pos.shape[0] != n_qubits:
            raise ValueError("positions must provide one coordinate per qubit")
        diff = pos[:, None, :] - pos[None, :, :]
        r = np.sqrt((diff**2).sum(axis=-1))
        if np.any(r[~np.eye(n_qubits, dtype=bool)] == 0):
            raise ValueError("qubit positions must be distinct")
        with np.errstate(divide="ignore"):
            jmat = np.where(np.eye(n_qubits, dtype=bool), 0.0, -j / r**alpha)
        return cls(n_qubits, jmat, jmat.copy(), fields)


class TargetSpec:
    """Desired two-body terms: list of (i, j, op_i, op_j, strength)."""

    def __init__(self, n_qubits, terms):
        self.n_qubits = int(n_qubits)
        out = []
        for i, j, oi, oj, s in terms:
            if not 0 <= i < j < self.n_qubits:
                raise ValueError(f"term ({i}, {j}) needs 0 <= i < j < {self.n_qubits}")
            if oi not in "XYZ" or oj not in "XYZ":
                raise ValueError(f"operator labels must be X, Y or Z, got ({oi}, {oj})")
            s = float(s)
            if not np.isfinite(s):
                raise ValueError(f"non-finite strength on ({i}, {j})")
            if s != 0.0:
                out.append((int(i), int(j), oi, oj, s))
        self.terms = tuple(out)


@dataclass(frozen=True)
class CutoffConfig:
    """Walsh-index compression for 1-D chains.

    mode "window": indices are kept distinct only within distance lambda_r
    (region-style assignment, max index < 2*lambda_r).  mode "mod": indices
    are reduced modulo lambda_r + 1, so the max index Lambda_w equals lambda_r
    and reuse happens at distance lambda_r + 1.
    """

    lambda_r: int
    mode: str = "window"

    def __post_init__(self):
        if self.lambda_r < 1:
            raise ValueError("lambda_r must be >= 1")
        if self.mode not in ("window", "mod"):
            raise ValueError(f"unknown cutoff mode {self.mode!r}")


@dataclass(frozen=True)
class WalshSequenceBlock:
    c: float                      # tau_q / tau
    x: tuple
    y: tuple
    interval_durations: tuple     # fractions of the block duration, sum to 1
    set_pre: tuple                # per qubit: gate labels applied before the block
    set_post: tuple               # per qubit: gate labels applied after the block

    @property
    def assignment(self):
        return WalshAssignment(self.x, self.y)

    @property
    def n_intervals(self):
        return sequence_length(self.assignment)


@dataclass(frozen=True)
class FPDeformation:
    """Finite-pulse deformation record: per-block shrink of the first
    (identity) interval and the global time rescale the caller must apply."""

    t_p: float
    tau: float
    shrink: tuple
    rescale: tuple


@dataclass(frozen=True)
class PulseSchedule:
    n_qubits: int
    trotter_order: int
    blocks: tuple
    sign_e: tuple | None = None
    fp: FPDeformation | None = None
    prelude: tuple | None = None  # one-time single-qubit gates before cycle 1

    def layers(self, block_index):
        """Pulse layers of one block, mirrored for trotter_order 2."""
        base = pulse_layers(self.blocks[block_index].assignment)
        if self.trotter_order == 2:
            return base + base[::-1]
        return base

    @property
    def period(self):
        """Sign-schedule period L (1 when second averaging is off)."""
        if self.sign_e is None:
            return 1
        return _next_pow2(max(self.sign_e) + 1)

    @property
    def cycle_tau_fractions(self):
        return sum(b.c for b in self.blocks)

    def to_dict(self):
        d = {
            "version": SCHEDULE_VERSION,
            "n_qubits": self.n_qubits,
            "trotter_order": self.trotter_order,
            "blocks": [
                {
                    "c_q": b.c,
                    "x": list(b.x),
                    "y": list(b.y),
                    "interval_durations": list(b.interval_durations),
                    "set_pre": [list(g) for g in b.set_pre],
                    "set_post": [list(g) for g in b.set_post],
                }
                for b in self.blocks
            ],
            "sign_e": list(self.sign_e) if self.sign_e is not None else None,
            "fp_deformation": (
                {
                    "t_p": self.fp.t_p,
                    "tau": self.fp.tau,
                    "shrink": list(self.fp.shrink),
                    "rescale": list(self.fp.rescale),
                }
                if self.fp is not None
                else None
            ),
        }
        if self.prelude is not None:
            d["prelude"] = [list(g) for g in self.prelude]
        return d

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != SCHEDULE_VERSION:
            raise ValueError(f"unsupported schedule version {d.get('version')!r}")
        blocks = tuple(
            WalshSequenceBlock(
                c=float(b["c_q"]),
                x=tuple(b["x"]),
                y=tuple(b["y"]),
                interval_durations=tuple(b["interval_durations"]),
                set_pre=tuple(tuple(g) for g in b["set_pre"]),
                set_post=tuple(tuple(g) for g in b["set_post"]),
            )
            for b in d["blocks"]
        )
        fp = d.get("fp_deformation")
        prelude = d.get("prelude")
        return cls(
            n_qubits=int(d["n_qubits"]),
            trotter_order=int(d["trotter_order"]),
            blocks=blocks,
            sign_e=tuple(d["sign_e"]) if d.get("sign_e") is not None else None,
            fp=FPDeformation(float(fp["t_p"]), float(fp["tau"]), tuple(fp["shrink"]), tuple(fp["rescale"]))
            if fp is not None
            else None,
            prelude=tuple(tuple(g) for g in prelude) if prelude is not None else None,
        )

    @classmethod
    def loads(cls, s):
        return cls.from_dict(json.loads(s))


def rescaling_graph(target: TargetSpec, resource: ResourceHamiltonian):
    """Per-channel rescaling weights g^O_ij = strength / J^O_ij.

    XX terms land on the X channel, YY terms on the Y channel; any other
    operator pair is routed through the X channel (set pulses rotate the axes
    later).  Raises DivisionByZeroCoupling where the resource lacks the pair.
    """
    gx, gy = {}, {}
    for i, j, oi, oj, s in target.terms:
        if (oi, oj) == ("Y", "Y"):
            channel, bucket, jmat = "Y", gy, resource.jy
        else:
            channel, bucket, jmat = "X", gx, resource.jx
        if jmat[i, j] == 0.0:
            raise DivisionByZeroCoupling(i, j, channel)
        if (i, j) in bucket:
            raise ValueError(f"two target terms use the {channel} channel on ({i}, {j})")
        bucket[(i, j)] = s / jmat[i, j]
    n = target.n_qubits
    return (
        WeightedGraph(n, [(i, j, w) for (i, j), w in gx.items()]),
        WeightedGraph(n, [(i, j, w) for (i, j), w in gy.items()]),
    )


def _mex_assign(matching, n_qubits, window=None):
    """Smallest-free-index assignment walking qubits left to right.

    Matched pairs share one index; an index is excluded if it already appears
    within `window` of the vertex (or its partner).  window=None means every
    assigned index is excluded, i.e. globally distinct indices.
    """
    partner = {}
    for i, j in matching:
        partner[i] = j
        partner[j] = i
    idx = [None] * n_qubits
    for v in range(n_qubits):
        if idx[v] is not None:
            continue
        u = partner.get(v)
        used = set()
        for w in range(n_qubits):
            if idx[w] is None:
                continue
            if window is None or abs(w - v) <= window or (u is not None and abs(w - u) <= window):
                used.add(idx[w])
        c = 0
        while c in used:
            c += 1
        idx[v] = c
        if u is not None:
            idx[u] = c
    return tuple(idx)


def assign_indices(x_matching, y_matching, n_qubits) -> WalshAssignment:
    """Walsh indices with x_i = x_j exactly on x_matching pairs (same for y);
    all other indices within a channel are pairwise distinct."""
    xm = check_matching(x_matching)
    ym = check_matching(y_matching)
    for m in (xm, ym):
        if any(j >= n_qubits for _, j in m):
            raise ValueError("matching vertex out of range")
    return WalshAssignment(_mex_assign(xm, n_qubits), _mex_assign(ym, n_qubits))


def assign_indices_with_cutoff(x_matching, y_matching, n_qubits, cutoff: CutoffConfig) -> WalshAssignment:
    """Cutoff-compressed index assignment for a 1-D chain.

    Indices are distinct only among qubits at most lambda_r apart; matched
    pairs longer than lambda_r are rejected.  The "mod" mode instead reduces
    the plain assignment modulo lambda_r + 1.
    """
    xm = check_matching(x_matching)
    ym = check_matching(y_matching)
    lam = cutoff.lambda_r
    for m in (xm, ym):
        for i, j in m:
            if j - i > lam:
                raise ValueError(f"matched pair ({i}, {j}) is longer than lambda_r={lam}")
    if cutoff.mode == "mod":
        plain = assign_indices(xm, ym, n_qubits)
        return mod_compress(plain, lam + 1, matchings=(xm, ym), lambda_r=lam)
    a = WalshAssignment(_mex_assign(xm, n_qubits, window=lam), _mex_assign(ym, n_qubits, window=lam))
    assert max(max(a.x), max(a.y)) < 2 * lam
    return a


def mod_compress(assignment: WalshAssignment, modulus: int, matchings=None, lambda_r=None) -> WalshAssignment:
    """Reduce all Walsh indices modulo `modulus` (index reuse at that distance).

    When the source matchings and lambda_r are supplied, the result is checked
    for accidental index collisions closer than lambda_r outside the matchings.
    """
    x = tuple(v % modulus for v in assignment.x)
    y = tuple(v % modulus for v in assignment.y)
    if lambda_r is not None:
        allowed = tuple(m if m is not None else frozenset() for m in (matchings or ((), ())))
        for vals, matched in zip((x, y), allowed):
            for i in range(len(vals)):
                for j in range(i + 1, min(i + lambda_r + 1, len(vals))):
                    if vals[i] == vals[j] and (i, j) not in matched:
                        raise ValueError(
                            f"mod compression aliases qubits ({i}, {j}) within lambda_r={lambda_r}"
                        )
    return WalshAssignment(x, y)


def dd_guard(assignment: WalshAssignment) -> WalshAssignment:
    """Enforce x_i != 0, y_i != 0 and x_i != y_i without touching the coupling
    pattern: shift x by one, renumber y above the largest x."""
    x, y = assignment.x, assignment.y
    if all(xi != 0 and yi != 0 and xi != yi for xi, yi in zip(x, y)):
        return assignment
    x2 = tuple(v + 1 for v in x)
    base = max(x2) + 1
    relabel = {}
    y2 = []
    for v in y:
        if v not in relabel:
            relabel[v] = base + len(relabel)
        y2.append(relabel[v])
    return WalshAssignment(x2, tuple(y2))


def _clique_components(graph: WeightedGraph):
    """Connected components if every component is a clique, else None."""
    n = graph.n_vertices
    comp = list(range(n))

    def find(v):
        while comp[v] != v:
            comp[v] = comp[comp[v]]
            v = comp[v]
        return v

    for i, j in graph.weights:
        comp[find(i)] = find(j)
    groups = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    for members in groups.values():
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                if (members[a], members[b]) not in graph.weights:
                    return None
    labels = [None] * n
    for lbl, root in enumerate(sorted(groups, key=lambda r: min(groups[r]))):
        for v in groups[root]:
            labels[v] = lbl
    return tuple(labels)


def _uniform_clique_fast_path(gx, gy, rotations):
    """Single-sequence case: both channels are disjoint unions of cliques
    carrying one common positive weight (e.g. target proportional to resource)."""
    if rotations:
        return None
    ws = list(gx.weights.values()) + list(gy.weights.values())
    if not ws:
        return None
    c = ws[0]
    if c <= 0 or any(abs(w - c) > 1e-12 for w in ws):
        return None
    lx = _clique_components(gx)
    ly = _clique_components(gy)
    if lx is None or ly is None:
        return None
    return float(c), WalshAssignment(lx, ly)


def _channel_matchings(graph: WeightedGraph, decomposition):
    if not graph.weights:
        return []
    if decomposition == "greedy":
        return greedy_degree1(graph)
    if decomposition == "hamilton":
        n = graph.n_vertices + (graph.n_vertices % 2)
        out = []
        for m in hamilton_path_decompose(n):
            kept = frozenset(p for p in m if p in graph.weights)
            if kept:
                out.append(kept)
        return out
    raise ValueError(f"unknown decomposition {decomposition!r}")


def _union_is_matching(mx, my):
    partner = {}
    for i, j in mx:
        partner[i] = j
        partner[j] = i
    for i, j in my:
        if partner.get(i, j) != j or partner.get(j, i) != i:
            return False
    return True


def _rotation_clash(mx, my, rotations):
    rotated = set()
    for p in mx:
        if p in rotations:
            rotated.update(p)
    return any(v in rotated for pair in my for v in pair)


def _plan_blocks(gx, gy, rotations, decomposition):
    """Merge per-channel matchings into degree-1 blocks and peel weights.

    Returns (c, x_pairs, y_pairs, negate_x, negate_y) tuples in execution order.
    """
    mx_list = _channel_matchings(gx, decomposition)
    my_list = _channel_matchings(gy, decomposition)
    used = [False] * len(my_list)
    merged = []
    for mx in mx_list:
        mate = None
        for t, my in enumerate(my_list):
            if used[t] or not _union_is_matching(mx, my) or _rotation_clash(mx, my, rotations):
                continue
            mate = t
            break
        if mate is None:
            merged.append((mx, frozenset()))
        else:
            used[mate] = True
            merged.append((mx, my_list[mate]))
    merged.extend((frozenset(), my) for t, my in enumerate(my_list) if not used[t])

    plans = []
    for mx, my in merged:
        entries = {("X", p): gx.weights[p] for p in sorted(mx)}
        entries.update({("Y", p): gy.weights[p] for p in sorted(my)})
        for c, support, neg in peel_weights(entries):
            xp = frozenset(p for ch, p in support if ch == "X")
            yp = frozenset(p for ch, p in support if ch == "Y")
            plans.append(
                (
                    float(c),
                    xp,
                    yp,
                    frozenset(p for ch, p in neg if ch == "X"),
                    frozenset(p for ch, p in neg if ch == "Y"),
                )
            )
    return plans


def _set_pulses(n_qubits, x_pairs, negate_x, negate_y, rotations):
    """Per-qubit set-pulse labels (time order) closing the block symmetrically.

    Sign flips act on the lower endpoint of each negated pair; axis rotations
    map the X channel onto general operator labels on both endpoints.
    """
    fx = [1] * n_qubits
    fy = [1] * n_qubits
    for i, _ in negate_x:
        fx[i] = -fx[i]
    for i, _ in negate_y:
        fy[i] = -fy[i]
    post = [[] for _ in range(n_qubits)]
    for v in range(n_qubits):
        p = pulse_from_signs(fx[v], fy[v])
        if p != "I":
            post[v].append(p)
    for pair in sorted(x_pairs):
        if pair not in rotations:
            continue
        for v, axis in zip(pair, rotations[pair]):
            rot = _ROT_FOR_AXIS[axis]
            if rot is not None:
                post[v].append(rot)
    set_post = tuple(tuple(g) for g in post)
    set_pre = tuple(tuple(GATE_INVERSE[l] for l in reversed(g)) for g in post)
    return set_pre, set_post


@dataclass(frozen=True)
class RobustnessPolicy:
    """Second-averaging sign indices and optional finite-pulse deformation."""

    e_indices: tuple | None = None
    t_p: float = 0.0
    tau: float | None = None


def compile(target: TargetSpec, resource: ResourceHamiltonian, *, trotter_order=1,
            cutoff=None, robust=None, decouple=False, decomposition="greedy",
            prelude=None) -> PulseSchedule:
    """Compile a two-body target into a Walsh pulse schedule.

    Parameters
    ----------
    target, resource : the desired two-body terms and the available coupling.
    trotter_order : 1, or 2 for palindromic (second-order) blocks.
    cutoff : optional CutoffConfig compressing Walsh indices on a chain.
    robust : optional RobustnessPolicy (applied through `robustify`).
    decouple : apply the background-field guard to every block.
    decomposition : "greedy" or "hamilton" matching cover.
    prelude : optional per-qubit one-time gate labels run before the first cycle.
    """
    if trotter_order not in (1, 2):
        raise ValueError(f"trotter_order must be 1 or 2, got {trotter_order}")
    if target.n_qubits != resource.n_qubits:
        raise ValueError("target and resource qubit counts differ")
    n = target.n_qubits
    gx, gy = rescaling_graph(target, resource)
    rotations = {
        (i, j): (oi, oj)
        for i, j, oi, oj, _ in target.terms
        if (oi, oj) not in (("X", "X"), ("Y", "Y"))
    }

    fast = None if cutoff is not None else _uniform_clique_fast_path(gx, gy, rotations)
    if fast is not None:
        plans = None
        c, assignment = fast
        assignments = [(c, dd_guard(assignment) if decouple else assignment,
                        frozenset(), frozenset(), frozenset())]
    else:
        plans = _plan_blocks(gx, gy, rotations, decomposition)
        if not plans:
            plans = [(1.0, frozenset(), frozenset(), frozenset(), frozenset())]
        assignments = []
        for c, xp, yp, negx, negy in plans:
            if cutoff is not None:
                a = assign_indices_with_cutoff(xp, yp, n, cutoff)
            else:
                a = assign_indices(xp, yp, n)
            if decouple:
                a = dd_guard(a)
            assignments.append((c, a, xp, negx, negy))

    blocks = []
    for c, a, xp, negx, negy in assignments:
        set_pre, set_post = _set_pulses(n, xp, negx, negy, rotations)
        nlay = sequence_length(a) * (2 if trotter_order == 2 else 1)
        blocks.append(
            WalshSequenceBlock(
                c=c,
                x=a.x,
                y=a.y,
                interval_durations=(1.0 / nlay,) * nlay,
                set_pre=set_pre,
                set_post=set_post,
            )
        )

    schedule = PulseSchedule(
        n_qubits=n,
        trotter_order=trotter_order,
        blocks=tuple(blocks),
        prelude=tuple(tuple(g) for g in prelude) if prelude is not None else None,
    )
    if robust is not None:
        schedule = robustify(schedule, robust)
    return schedule


def concat_schedules(schedules) -> PulseSchedule:
    """Concatenate the blocks of several schedules into one cycle.

    All inputs must share n_qubits and trotter_order and carry no robustness
    metadata yet (apply robustify to the result instead); preludes must not
    overlap on any qubit.
    """
    schedules = list(schedules)
    if not schedules:
        raise ValueError("nothing to concatenate")
    first = schedules[0]
    blocks = []
    prelude = [() for _ in range(first.n_qubits)]
    any_prelude = False
    for s in schedules:
        if s.n_qubits != first.n_qubits or s.trotter_order != first.trotter_order:
            raise ValueError("schedules differ in qubit count or trotter order")
        if s.sign_e is not None or s.fp is not None:
            raise ValueError("robustify after concatenation, not before")
        blocks.extend(s.blocks)
        if s.prelude is not None:
            any_prelude = True
            for q, labels in enumerate(s.prelude):
                if labels and prelude[q]:
                    raise ValueError(f"prelude collision on qubit {q}")
                if labels:
                    prelude[q] = tuple(labels)
    return PulseSchedule(
        n_qubits=first.n_qubits,
        trotter_order=first.trotter_order,
        blocks=tuple(blocks),
        prelude=tuple(prelude) if any_prelude else None,
    )


def robustify(schedule: PulseSchedule, policy: RobustnessPolicy) -> PulseSchedule:
    """Attach the second-averaging sign schedule and finite-pulse deformation.

    Finite pulses additionally require pairwise-distinct e indices and nonzero
    Walsh indices on every block, and record the per-block first-interval
    shrink 3 n t_p / 4 plus the global rescale (1 - 5 eps/8)^-1 for the caller.
    """
    e = policy.e_indices
    if e is None:
        if policy.t_p:
            raise ValueError("finite-pulse robustness requires e_indices")
        return schedule
    e = tuple(int(v) for v in e)
    if len(e) != schedule.n_qubits:
        raise ValueError("e_indices must give one index per qubit")
    if any(v <= 0 for v in e):
        raise ValueError("e_indices must be positive")
    fp = None
    if policy.t_p:
        t_p = float(policy.t_p)
        if t_p < 0:
            raise ValueError("t_p must be >= 0")
        if policy.tau is None:
            raise ValueError("finite-pulse robustness requires the target tau")
        if len(set(e)) != len(e):
            raise ValueError("finite-pulse robustness requires distinct e_indices")
        if schedule.trotter_order != 1:
            raise ValueError("finite-pulse deformation is defined for trotter_order 1")
        tau = float(policy.tau)
        shrink, rescale = [], []
        for b in schedule.blocks:
            if any(v == 0 for v in b.x) or any(v == 0 for v in b.y):
                raise ValueError("finite-pulse robustness requires nonzero Walsh indices (use decouple)")
            n_q = b.n_intervals
            tau_q = b.c * tau
            interval = tau_q / n_q
            if interval <= 2 * t_p:
                raise ValueError(f"interval {interval} is not longer than 2 t_p = {2 * t_p}")
            eps = 2 * n_q * t_p / tau_q
            s = 3 * n_q * t_p / 4
            if interval - s <= 0:
                raise ValueError("identity interval vanishes under the deformation")
            shrink.append(s)
            rescale.append(1.0 / (1.0 - 5 * eps / 8))
        fp = FPDeformation(t_p, tau, tuple(shrink), tuple(rescale))
    return replace(schedule, sign_e=e, fp=fp)


def execution_tau(schedule: PulseSchedule, tau: float) -> float:
    """Tau to pass to the executor: nominal tau stretched by the finite-pulse
    rescale (which must be block-uniform)."""
    if schedule.fp is None:
        return tau
    rs = set(schedule.fp.rescale)
    if len(rs) != 1:
        raise ValueError("blocks have different finite-pulse rescales; no single tau works")
    return tau * rs.pop()


@dataclass(frozen=True)
class TwoQubitGate:
    """Parallel-layer gate: R_XX/R_YY rotations, or their C variants which
    add the single-qubit pi/2 pre-rotations."""

    kind: str
    i: int
    j: int
    theta: float = math.pi / 2

    def __post_init__(self):
        if self.kind not in ("RXX", "RYY", "CXX", "CYY"):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.i == self.j:
            raise ValueError("gate needs two distinct qubits")
        if self.kind.startswith("C") and not math.isclose(self.theta, math.pi / 2):
            raise ValueError("C gates are defined at theta = pi/2")


def gate_layer_to_target(layer, n_qubits, j=1.0):
    """Convert one layer of parallel two-qubit gates into a two-body target.

    Returns (TargetSpec, evolution_time, prelude) where evolving the target
    for evolution_time realizes every rotation R_OO^theta = exp(i O O theta/2)
    simultaneously, and prelude holds the per-qubit one-time rotations of the
    C variants.
    """
    seen = set()
    terms = []
    prelude = [[] for _ in range(n_qubits)]
    thetas = set()
    for g in layer:
        a, b = (g.i, g.j) if g.i < g.j else (g.j, g.i)
        if a in seen or b in seen:
            raise ValueError(f"gate on ({g.i}, {g.j}) overlaps another gate in the layer")
        seen.update((a, b))
        axis = "X" if g.kind.endswith("XX") else "Y"
        terms.append((a, b, axis, axis, -j))
        thetas.add(g.theta)
        if g.kind.startswith("C"):
            rot = "RX90" if axis == "X" else "RY90"
            prelude[g.i].append(rot)
            prelude[g.j].append(rot)
    if not terms:
        return TargetSpec(n_qubits, []), 0.0, tuple(tuple(p) for p in prelude)
    if len(thetas) != 1:
        raise ValueError("all gates in a layer must share one rotation angle")
    theta = thetas.pop()
    return TargetSpec(n_qubits, terms), theta / (2 * j), tuple(tuple(p) for p in prelude)


def pulse_count(schedule: PulseSchedule, merged=True):
    """Physical pulses in one cycle; merged=True fuses the back-to-back
    closing/opening pulses between consecutive intervals."""
    total = 0
    for qi, b in enumerate(schedule.blocks):
        layers = schedule.layers(qi)
        total += sum(len(g) for g in b.set_pre) + sum(len(g) for g in b.set_post)
        if not merged:
            total += sum(2 * sum(s != "I" for s in lay) for lay in layers)
            continue
        total += sum(s != "I" for s in layers[0])
        for prev, nxt in zip(layers, layers[1:]):
            total += sum(
                _PAULI_PRODUCT[(a, c)] != "I" for a, c in zip(prev, nxt)
            )
        total += sum(s != "I" for s in layers[-1])
    return total
