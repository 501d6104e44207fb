"""Decomposition of weighted interaction graphs into weighted matchings.

A single Walsh sequence can realize any degree-1 interaction graph (a
matching) with one common coupling strength.  Arbitrary weighted graphs are
therefore split in two stages: an unweighted cover by matchings (greedy or
Hamilton-path based), followed by peeling each weighted matching into
equal-weight slices.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

WEIGHT_TOL = 1e-12


class WeightedGraph:
    """Undirected weighted graph on vertices 0..n_vertices-1, no zero weights."""

    def __init__(self, n_vertices, edges):
        self.n_vertices = int(n_vertices)
        weights = {}
        for i, j, w in edges:
            if not 0 <= i < j < self.n_vertices:
                raise ValueError(f"edge ({i}, {j}) needs 0 <= i < j < {self.n_vertices}")
            if (i, j) in weights:
                raise ValueError(f"duplicate edge ({i}, {j})")
            w = float(w)
            if w == 0.0 or not np.isfinite(w):
                raise ValueError(f"edge ({i}, {j}) has invalid weight {w}")
            weights[(i, j)] = w
        self.weights = weights

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_vertices, self.n_vertices))
        for (i, j), w in self.weights.items():
            a[i, j] = a[j, i] = w
        return a

    def max_degree(self) -> int:
        deg = Counter()
        for i, j in self.weights:
            deg[i] += 1
            deg[j] += 1
        return max(deg.values(), default=0)

    def __repr__(self):
        return f"WeightedGraph(n_vertices={self.n_vertices}, edges={len(self.weights)})"


def check_matching(pairs) -> frozenset:
    """Validate that pairs form a degree-1 graph; returns them as a frozenset."""
    seen = set()
    out = set()
    for i, j in pairs:
        if i == j:
            raise ValueError(f"self-pair ({i}, {j})")
        a, b = (i, j) if i < j else (j, i)
        if a in seen or b in seen:
            raise ValueError(f"vertex repeated in matching at pair ({i}, {j})")
        seen.update((a, b))
        out.add((a, b))
    return frozenset(out)


def greedy_degree1(graph: WeightedGraph) -> list:
    """Cover the edge set by matchings, peeling one maximal matching per round.

    Each round repeatedly picks the vertex of maximum degree in the remaining
    working graph, then its maximum-degree neighbour (ties broken by lowest
    vertex index), pairs them, and removes both.  The emitted matchings are
    edge-disjoint and their union is the input edge set.
    """
    remaining = set(graph.weights)
    matchings = []
    while remaining:
        work = set(remaining)
        matching = set()
        while work:
            deg = Counter()
            for i, j in work:
                deg[i] += 1
                deg[j] += 1
            i = max(deg, key=lambda v: (deg[v], -v))
            nbrs = [j for j in (set(e[0] for e in work if e[1] == i)
                                | set(e[1] for e in work if e[0] == i))]
            j = max(nbrs, key=lambda v: (deg[v], -v))
            matching.add((min(i, j), max(i, j)))
            work = {e for e in work if i not in e and j not in e}
        matchings.append(frozenset(matching))
        remaining -= matching
    return matchings


def hamilton_path_decompose(n: int) -> list:
    """Split K_n (n even) into n/2 zig-zag Hamilton paths, then each path into
    its odd-link and even-link matchings.  Empty matchings are dropped (n=2)."""
    if n < 2 or n % 2:
        raise ValueError(f"n must be even and >= 2, got {n}")
    matchings = []
    for q in range(n // 2):
        path = [q]
        for j in range(1, n):
            step = (j + 1) // 2 * (1 if j % 2 else -1)
            path.append((q + step) % n)
        links = list(zip(path, path[1:]))
        for part in (links[0::2], links[1::2]):
            pairs = frozenset((min(a, b), max(a, b)) for a, b in part)
            if pairs:
                matchings.append(pairs)
    return matchings


@dataclass(frozen=True)
class DecompositionTerm:
    """One equal-weight slice: coefficient * (matching with some pairs negated)."""

    coefficient: float
    pairs: frozenset
    negate: frozenset


def peel_weights(entries: dict, tol: float = WEIGHT_TOL) -> list:
    """Peel a keyed weight map into (coefficient, support, negated) slices.

    Repeatedly subtracts the smallest remaining |weight| from every key still
    alive; keys whose original weight was negative are flagged.  Weights equal
    within `tol` land in the same slice.
    """
    remaining = {k: abs(w) for k, w in entries.items()}
    negative = {k for k, w in entries.items() if w < 0}
    slices = []
    while remaining:
        c = min(remaining.values())
        support = frozenset(remaining)
        slices.append((c, support, frozenset(support & negative)))
        remaining = {k: m - c for k, m in remaining.items() if m - c > tol}
    return slices


def weighted_decompose(graph: WeightedGraph, base: list) -> list:
    """Refine an unweighted matching cover of `graph` into weighted slices.

    `base` must partition the edge set of `graph` (e.g. greedy_degree1 output).
    Returns DecompositionTerm slices, in base order then peel order, whose
    signed weighted sum reconstructs the input weights exactly.
    """
    covered = Counter()
    for m in base:
        check_matching(m)
        covered.update(m)
    if set(covered) != set(graph.weights) or any(v != 1 for v in covered.values()):
        raise ValueError("base matchings must cover each graph edge exactly once")
    terms = []
    for matching in base:
        entries = {p: graph.weights[p] for p in sorted(matching)}
        for c, support, neg in peel_weights(entries):
            terms.append(DecompositionTerm(float(c), support, neg))
    return terms


def reconstruct(terms: list, n_vertices: int) -> np.ndarray:
    """Signed weighted adjacency implied by decomposition terms."""
    a = np.zeros((n_vertices, n_vertices))
    for t in terms:
        for i, j in t.pairs:
            s = -1.0 if (i, j) in t.negate else 1.0
            a[i, j] += s * t.coefficient
            a[j, i] += s * t.coefficient
    return a


def named_graph(name: str) -> WeightedGraph:
    """Fixed registry of unit-weight test graphs (degree <= 3)."""
    if name == "prism6":
        # two triangles joined by rungs
        edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)]
        return WeightedGraph(6, [(i, j, 1.0) for i, j in edges])
    if name == "petersen10":
        outer = [(i, (i + 1) % 5) for i in range(5)]
        inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
        spokes = [(i, 5 + i) for i in range(5)]
        edges = [tuple(sorted(e)) for e in outer + inner + spokes]
        return WeightedGraph(10, [(i, j, 1.0) for i, j in sorted(edges)])
    raise ValueError(f"unknown graph {name!r}; known: prism6, petersen10")
