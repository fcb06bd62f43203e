"""Graph construction, girth and walk-distance laws against brute-force oracles."""

import itertools
import math
from collections import deque
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from expander_fp.graphs import (GraphError, UndirectedGraph, check_short_distance_bound, complete_graph,
                                cycle_graph, distance_distribution, distances, gen_random_regular, girth,
                                path_graph, petersen_graph, short_distance_mass)


def girth_by_edge_deletion(g):
    """Shortest cycle = min over edges (u, v) of 1 + dist(u, v) in g minus that edge."""
    best = math.inf
    for u, v in g.edges:
        seen = {u: 0}
        queue = deque([u])
        while queue:
            x = queue.popleft()
            for y in g.adjacency[x]:
                if {x, y} == {u, v} or y in seen:
                    continue
                seen[y] = seen[x] + 1
                queue.append(y)
        if v in seen:
            best = min(best, seen[v] + 1)
    return best


def walk_law_by_paths(g, q):
    """Distance law of q stationary steps by enumerating every path."""
    dist = distances(g).matrix
    two_m = 2 * g.edge_count
    out = {}
    for u in range(g.n):
        stack = [(u, Fraction(len(g.adjacency[u]), two_m), 0)]
        while stack:
            x, w, step = stack.pop()
            if step == q:
                out[int(dist[u, x])] = out.get(int(dist[u, x]), 0) + w
                continue
            for y in g.adjacency[x]:
                stack.append((y, w / len(g.adjacency[x]), step + 1))
    return dict(sorted(out.items()))


class TestConstruction:
    def test_cycle_edges(self):
        g = cycle_graph(5)
        assert g.edge_count == 5
        assert all(len(a) == 2 for a in g.adjacency)

    def test_rejects_loops_and_multi_edges(self):
        with pytest.raises(GraphError):
            UndirectedGraph(3, [(0, 0)])
        with pytest.raises(GraphError):
            UndirectedGraph(3, [(0, 1), (1, 0)])

    def test_edge_list_round_trip(self, tmp_path):
        g = petersen_graph()
        path = tmp_path / "p.txt"
        g.write(path)
        assert UndirectedGraph.read(path) == g

    def test_edge_list_header_mismatch(self):
        with pytest.raises(GraphError, match="header"):
            UndirectedGraph.from_edge_list("3 2\n0 1\n")

    def test_random_regular_is_deterministic(self):
        assert gen_random_regular(30, 3, seed=7) == gen_random_regular(30, 3, seed=7)

    def test_random_regular_odd_stub_count(self):
        with pytest.raises(GraphError):
            gen_random_regular(7, 3, seed=0)

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(4, 40), d=st.integers(2, 4), seed=st.integers(0, 10_000))
    def test_random_regular_degrees(self, n, d, seed):
        if (n * d) % 2 or d >= n:
            return
        g = gen_random_regular(n, d, seed)
        assert np.all(g.degrees == d)
        assert g.is_connected


class TestGirth:
    @pytest.mark.parametrize("n", [3, 4, 7, 12])
    def test_cycle(self, n):
        assert girth(cycle_graph(n)) == n

    def test_small_families(self):
        assert girth(complete_graph(6)) == 3
        assert girth(petersen_graph()) == 5
        assert girth(path_graph(6)) == math.inf

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_edge_deletion_oracle(self, seed):
        g = gen_random_regular(40, 3, seed)
        assert girth(g) == girth_by_edge_deletion(g)


class TestDistanceLaw:
    def test_c5_two_steps(self):
        # back with prob 1/2, two steps onward otherwise
        assert distance_distribution(cycle_graph(5), 2, exact=True) == {0: Fraction(1, 2), 2: Fraction(1, 2)}

    @pytest.mark.parametrize("g,q", [(cycle_graph(7), 3), (petersen_graph(), 4), (complete_graph(4), 3)])
    def test_matches_path_enumeration(self, g, q):
        exact = distance_distribution(g, q, exact=True)
        assert exact == walk_law_by_paths(g, q)
        approx = distance_distribution(g, q)
        for k, v in exact.items():
            assert approx[k] == pytest.approx(float(v), abs=1e-12)

    def test_parity_on_bipartite_graph(self):
        law = distance_distribution(cycle_graph(10), 3)
        assert set(law) <= {1, 3}

    def test_short_distance_mass_counts_small_buckets(self):
        g = petersen_graph()
        law = distance_distribution(g, 12)
        assert short_distance_mass(g, 12) == pytest.approx(law.get(0, 0) + law.get(1, 0) + law.get(2, 0))

    def test_short_distance_record_has_bound(self):
        rec = check_short_distance_bound(gen_random_regular(60, 3, 1), 2)
        assert rec["bound"] == pytest.approx(math.exp(-2 / 18))
