"""Matching covers of interaction graphs and weight peeling."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from walshpulse.graphs import (
    DecompositionTerm,
    WeightedGraph,
    check_matching,
    greedy_degree1,
    hamilton_path_decompose,
    named_graph,
    peel_weights,
    reconstruct,
    weighted_decompose,
)


def random_graph(rng, n, density=0.4, signed=True):
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                w = rng.uniform(0.2, 3.0) * (rng.choice([-1.0, 1.0]) if signed else 1.0)
                edges.append((i, j, w))
    return WeightedGraph(n, edges)


class TestWeightedGraph:
    def test_validation(self):
        with pytest.raises(ValueError):
            WeightedGraph(3, [(1, 0, 1.0)])  # needs i < j
        with pytest.raises(ValueError):
            WeightedGraph(3, [(0, 1, 1.0), (0, 1, 2.0)])  # duplicate
        with pytest.raises(ValueError):
            WeightedGraph(3, [(0, 1, 0.0)])  # zero weight
        with pytest.raises(ValueError):
            WeightedGraph(2, [(0, 2, 1.0)])  # out of range

    def test_adjacency_and_degree(self):
        g = WeightedGraph(3, [(0, 1, 2.0), (1, 2, -1.0)])
        a = g.adjacency()
        assert a[0, 1] == a[1, 0] == 2.0 and a[1, 2] == -1.0
        assert g.max_degree() == 2

    def test_check_matching(self):
        assert check_matching([(1, 0), (2, 3)]) == frozenset({(0, 1), (2, 3)})
        with pytest.raises(ValueError):
            check_matching([(0, 1), (1, 2)])
        with pytest.raises(ValueError):
            check_matching([(2, 2)])


class TestGreedyCover:
    def test_empty_graph(self):
        assert greedy_degree1(WeightedGraph(4, [])) == []

    def test_path_example(self):
        m = greedy_degree1(WeightedGraph(3, [(0, 1, 1.0), (1, 2, 1.0)]))
        assert m == [frozenset({(0, 1)}), frozenset({(1, 2)})]

    def test_k4_three_perfect_matchings(self):
        k4 = WeightedGraph(4, [(i, j, 1.0) for i in range(4) for j in range(i + 1, 4)])
        ms = greedy_degree1(k4)
        assert len(ms) == 3
        assert all(len(m) == 2 for m in ms)
        assert set(itertools.chain.from_iterable(ms)) == set(k4.weights)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=2**40), st.integers(min_value=2, max_value=12))
    def test_cover_is_an_edge_partition_of_matchings(self, seed, n):
        g = random_graph(np.random.default_rng(seed), n)
        ms = greedy_degree1(g)
        for m in ms:
            check_matching(m)  # degree <= 1 each
        flat = list(itertools.chain.from_iterable(ms))
        assert len(flat) == len(set(flat))
        assert set(flat) == set(g.weights)

    def test_deterministic(self):
        g = random_graph(np.random.default_rng(3), 9)
        assert greedy_degree1(g) == greedy_degree1(g)


class TestHamiltonPaths:
    def test_smallest(self):
        assert hamilton_path_decompose(2) == [frozenset({(0, 1)})]

    def test_n4_covers_k4(self):
        ms = hamilton_path_decompose(4)
        assert len(ms) == 4 and all(ms)
        assert set(itertools.chain.from_iterable(ms)) == {
            (i, j) for i in range(4) for j in range(i + 1, 4)
        }

    @pytest.mark.parametrize("n", (2, 4, 6, 8))
    def test_each_edge_exactly_once(self, n):
        ms = hamilton_path_decompose(n)
        flat = list(itertools.chain.from_iterable(ms))
        assert len(flat) == n * (n - 1) // 2
        assert set(flat) == {(i, j) for i in range(n) for j in range(i + 1, n)}
        for m in ms:
            check_matching(m)

    def test_rejects_odd(self):
        with pytest.raises(ValueError):
            hamilton_path_decompose(5)


class TestWeightPeeling:
    def test_single_pair(self):
        g = WeightedGraph(2, [(0, 1, 1.0)])
        terms = weighted_decompose(g, greedy_degree1(g))
        assert terms == [DecompositionTerm(1.0, frozenset({(0, 1)}), frozenset())]

    def test_two_weights_peel_smallest_first(self):
        g = WeightedGraph(4, [(0, 1, 1.0), (2, 3, 3.0)])
        terms = weighted_decompose(g, greedy_degree1(g))
        assert [(t.coefficient, set(t.pairs)) for t in terms] == [
            (1.0, {(0, 1), (2, 3)}),
            (2.0, {(2, 3)}),
        ]
        assert all(not t.negate for t in terms)

    def test_negative_weight_sets_flag(self):
        g = WeightedGraph(2, [(0, 1, -1.0)])
        terms = weighted_decompose(g, greedy_degree1(g))
        assert terms == [DecompositionTerm(1.0, frozenset({(0, 1)}), frozenset({(0, 1)}))]

    def test_equal_weights_share_a_slice(self):
        slices = peel_weights({"a": 2.0, "b": 2.0 + 1e-13, "c": 5.0})
        assert len(slices) == 2
        assert slices[0][1] == frozenset({"a", "b", "c"})

    def test_base_must_cover_exactly(self):
        g = WeightedGraph(3, [(0, 1, 1.0), (1, 2, 1.0)])
        with pytest.raises(ValueError):
            weighted_decompose(g, [frozenset({(0, 1)})])
        with pytest.raises(ValueError):
            weighted_decompose(g, [frozenset({(0, 1)}), frozenset({(1, 2)}), frozenset({(0, 1)})])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=2**40), st.integers(min_value=2, max_value=12))
    def test_reconstruction_exact(self, seed, n):
        g = random_graph(np.random.default_rng(seed), n)
        terms = weighted_decompose(g, greedy_degree1(g))
        assert all(t.coefficient > 0 for t in terms)
        assert np.max(np.abs(reconstruct(terms, n) - g.adjacency()), initial=0.0) <= 1e-12


class TestNamedGraphs:
    def test_prism(self):
        g = named_graph("prism6")
        assert g.n_vertices == 6 and len(g.weights) == 9
        assert g.max_degree() == 3
        assert all(w == 1.0 for w in g.weights.values())

    def test_petersen(self):
        g = named_graph("petersen10")
        assert g.n_vertices == 10 and len(g.weights) == 15
        deg = np.count_nonzero(g.adjacency(), axis=0)
        assert np.array_equal(deg, np.full(10, 3))

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            named_graph("cube8")
