"""Free-group words, random labelings and the labeled walks on the Cayley tree."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from expander_fp.graphs import (UndirectedGraph, complete_graph, cycle_graph, distance_distribution,
                                gen_random_regular, path_graph, petersen_graph)
from expander_fp.random_group import (GirthError, Labeling, TreeDistribution, WordError, alpha_path,
                                      azuma_failure_bound, beta_map, constant_labeling, effective_simulation_check,
                                      eps_dkj, inverse, is_reduced, mean_walk, min_mass_report, multiply,
                                      reduce, reduced_length_law, reduced_words, relators, sample_labeling,
                                      simulate_walk, sphere_size, tau, tree_walk, tree_walk_convolution,
                                      word_from_str, word_to_str)

letters = st.lists(st.sampled_from([1, -1, 2, -2, 3, -3]), max_size=12)


def brute_force_tree_walk(k, m):
    """Enumerate all (2k)^m letter strings and reduce each one."""
    gens = [s for i in range(1, k + 1) for s in (i, -i)]
    out = {}
    for string in itertools.product(gens, repeat=m):
        w = reduce(string)
        out[w] = out.get(w, 0) + Fraction(1, (2 * k) ** m)
    return out


class TestWords:
    def test_reduce_cancels(self):
        assert reduce([1, 2, -2]) == (1,)

    def test_product_with_inverse(self):
        w = word_from_str("abA")
        assert multiply(w, inverse(w)) == ()

    def test_inverse_reverses(self):
        assert inverse((1, 2)) == (-2, -1)

    def test_unknown_letter(self):
        with pytest.raises(WordError):
            reduce([0])
        with pytest.raises(WordError):
            word_from_str("a1")

    def test_text_round_trip(self):
        assert word_to_str(word_from_str("aBcA")) == "aBcA"
        assert word_from_str("aB") == (1, -2)

    @given(letters, letters, letters)
    def test_multiply_associative(self, a, b, c):
        assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))

    @given(letters)
    def test_reduce_is_reduced_and_idempotent(self, w):
        r = reduce(w)
        assert is_reduced(r) and reduce(r) == r

    @given(letters)
    def test_inverse_involutive(self, w):
        assert inverse(inverse(w)) == tuple(w)

    def test_sphere_sizes(self):
        for k in (1, 2, 3):
            for r in range(5):
                assert len(reduced_words(k, r)) == sphere_size(k, r)


class TestTreeWalk:
    def test_one_step_uniform(self):
        w = tree_walk(2, 1)
        assert set(w) == {(1,), (-1,), (2,), (-2,)}
        assert all(m == pytest.approx(0.25) for m in w.values())

    def test_return_probability(self):
        assert tree_walk(2, 2)[()] == pytest.approx(0.25)

    @pytest.mark.parametrize("k,m", [(1, 4), (2, 3), (2, 5), (3, 3)])
    def test_matches_enumeration(self, k, m):
        exact = brute_force_tree_walk(k, m)
        got = tree_walk(k, m)
        assert set(got) == set(exact)
        for w, mass in exact.items():
            assert got[w] == pytest.approx(float(mass), abs=1e-14)

    def test_matches_convolution(self):
        assert tree_walk(2, 6).tv(tree_walk_convolution(2, 6)) < 1e-14

    def test_radial(self):
        w = tree_walk(2, 4)
        by_len = {}
        for word, m in w.items():
            by_len.setdefault(len(word), set()).add(round(m, 15))
        assert all(len(v) == 1 for v in by_len.values())
        assert w.total() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            tree_walk(2, -1)


class TestLabeling:
    def test_single_edge(self):
        g = UndirectedGraph(2, [(0, 1)])
        a = sample_labeling(g, 1, 1, seed=3)
        assert a(0, 1) in {(1,), (-1,)}
        assert a(1, 0) == inverse(a(0, 1))

    def test_symmetry_and_determinism(self):
        g = petersen_graph()
        a, b = sample_labeling(g, 2, 3, 7), sample_labeling(g, 2, 3, 7)
        assert a.labels == b.labels
        for u, v in g.edges:
            assert multiply(a(u, v), a(v, u)) == ()
            assert len(a(u, v)) == 3

    def test_marginals_are_uniform(self):
        g = UndirectedGraph(2, [(0, 1)])
        counts = {}
        seeds = 4000
        for s in range(seeds):
            w = sample_labeling(g, 2, 1, s)(0, 1)
            counts[w] = counts.get(w, 0) + 1
        p = 1 / 4
        se = math.sqrt(p * (1 - p) / seeds)
        assert len(counts) == 4
        assert all(abs(c / seeds - p) <= 4 * se for c in counts.values())

    def test_broken_symmetry_rejected(self):
        g = UndirectedGraph(2, [(0, 1)])
        with pytest.raises(WordError):
            Labeling(g, 1, 1, {(0, 1): (1,), (1, 0): (1,)})

    def test_json_round_trip(self):
        a = sample_labeling(cycle_graph(5), 2, 2, 1)
        b = Labeling.from_json(a.graph, a.to_json())
        assert a.labels == b.labels

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            sample_labeling(cycle_graph(5), 0, 1, 0)


class TestPathsAndRelators:
    def test_alpha_path_cases(self):
        a = sample_labeling(cycle_graph(5), 2, 2, 4)
        assert alpha_path(a, [0]) == ()
        assert alpha_path(a, [0, 1, 0]) == ()
        w = alpha_path(a, [0, 1, 2])
        assert w == reduce(a(0, 1) + a(1, 2)) and len(w) <= 4

    def test_non_adjacent_step(self):
        with pytest.raises(WordError):
            alpha_path(sample_labeling(cycle_graph(5), 2, 1, 0), [0, 2])

    def test_tree_has_no_relators(self):
        assert relators(sample_labeling(path_graph(6), 2, 1, 0)) == []

    def test_triangle(self):
        rel = relators(sample_labeling(complete_graph(3), 2, 1, 5))
        assert len(rel) == 1 and len(rel[0]) <= 3

    @pytest.mark.parametrize("g", [petersen_graph(), complete_graph(5), cycle_graph(7)])
    def test_basis_size(self, g):
        assert len(relators(sample_labeling(g, 2, 1, 0))) == g.edge_count - g.vertex_count + 1

    def test_relators_of_cycle_read_the_cycle(self):
        g = cycle_graph(5)
        a = sample_labeling(g, 2, 1, 9)
        (r,) = relators(a)
        around = alpha_path(a, [0, 1, 2, 3, 4, 0])
        # the basis cycle is a rotation or reversal of the cycle, so the words are conjugate
        assert len(reduce(r)) % 2 == len(around) % 2

    def test_beta_equivariance(self):
        a = sample_labeling(petersen_graph(), 2, 2, 3)
        gamma = word_from_str("aBB")
        plain, moved = beta_map(a, 0, 2), beta_map(a, 0, 2, basepoint=gamma)
        assert all(moved[v] == multiply(gamma, plain[v]) for v in plain)


class TestSimulation:
    def test_q_zero_is_point_mass(self):
        a = sample_labeling(cycle_graph(5), 2, 1, 0)
        assert simulate_walk(a, 0) == {(): 1.0}

    def test_single_edge(self):
        g = UndirectedGraph(2, [(0, 1)])
        a = sample_labeling(g, 2, 1, 2)
        w = a(0, 1)
        assert simulate_walk(a, 1) == pytest.approx({w: 0.5, inverse(w): 0.5})

    def test_c5_support_and_mass(self):
        a = sample_labeling(cycle_graph(5), 2, 1, 11)
        d = simulate_walk(a, 2)
        assert d.total() == pytest.approx(1.0, abs=1e-12)
        assert d.radius() <= 2

    @pytest.mark.parametrize("seed", range(5))
    def test_ball_and_path_methods_agree(self, seed):
        a = sample_labeling(petersen_graph(), 2, 2, seed)
        assert simulate_walk(a, 2).tv(simulate_walk(a, 2, method="paths")) < 1e-14

    def test_girth_guard(self):
        a = sample_labeling(cycle_graph(5), 2, 1, 0)
        with pytest.raises(GirthError):
            simulate_walk(a, 3)

    def test_basepoint_translates(self):
        a = sample_labeling(cycle_graph(7), 2, 2, 1)
        x = word_from_str("ab")
        assert simulate_walk(a, 2, basepoint=x).tv(simulate_walk(a, 2).translate(x)) < 1e-14


class TestMeanWalk:
    def test_q1_is_tree_walk(self):
        assert mean_walk(cycle_graph(5), 1, 2, 2).tv(tree_walk(2, 2)) < 1e-14

    def test_c5_weights(self):
        mw = mean_walk(cycle_graph(5), 2, 1, 2, exact=True)
        assert mw.weights == {0: Fraction(1, 2), 2: Fraction(1, 2)}
        expected = TreeDistribution({(): 0.5})
        for w, m in tree_walk(2, 2).items():
            expected[w] = expected.get(w, 0.0) + 0.5 * m
        assert mw.tv(expected) < 1e-14

    def test_weights_match_distance_law_and_reduced_length(self):
        g = petersen_graph()
        mw = mean_walk(g, 2, 1, 2, exact=True)
        assert mw.weights == distance_distribution(g, 2, exact=True)
        assert mw.weights == reduced_length_law(g, 2, exact=True)

    def test_parity(self):
        mw = mean_walk(cycle_graph(7), 3, 1, 2)
        assert all(len(w) % 2 == 1 for w in mw)
        assert mw.radius() <= 3

    def test_monte_carlo_mean(self):
        g = cycle_graph(5)
        acc = {}
        m = 2000
        for s in range(m):
            for w, p in simulate_walk(sample_labeling(g, 2, 1, s), 2).items():
                acc[w] = acc.get(w, 0.0) + p / m
        assert TreeDistribution(acc).tv(mean_walk(g, 2, 1, 2)) < 0.05

    def test_minimum_mass(self):
        rep = min_mass_report(cycle_graph(5), 2, 1, 2)
        assert rep["ok"] and rep["floor"] == pytest.approx(eps_dkj(2, 2, 1) ** 2)

    def test_girth_guard(self):
        with pytest.raises(GirthError):
            mean_walk(complete_graph(4), 2, 1, 2)


class TestEffectiveSimulation:
    def test_adversarial_constant_labeling_fails(self):
        a = constant_labeling(cycle_graph(5), 2, word_from_str("ab"))
        rep = effective_simulation_check(a, 0)
        assert not rep.ok and rep.worst_ratio_high > 2

    def test_q0_zero_only_checks_upper(self):
        rep = effective_simulation_check(sample_labeling(cycle_graph(5), 2, 2, 0), 0)
        assert rep.per_q == {} and rep.worst_ratio_low == math.inf

    def test_some_seed_passes_on_c5(self):
        g = cycle_graph(5)
        reports = [effective_simulation_check(sample_labeling(g, 2, 2, s), 0) for s in range(30)]
        assert any(r.ok for r in reports)
        assert all(r.worst_ratio_high >= 1.0 for r in reports)

    def test_ratios_recorded_for_q1(self):
        g = gen_random_regular(20, 3, seed=2)
        rep = effective_simulation_check(sample_labeling(g, 2, 2, 0), 1)
        assert set(rep.per_q) == {1} and rep.worst_ratio_low >= 0

    def test_girth_guard(self):
        with pytest.raises(GirthError):
            effective_simulation_check(sample_labeling(cycle_graph(5), 2, 2, 0), 3)


class TestAzuma:
    def test_eps(self):
        assert eps_dkj(3, 2, 1) == pytest.approx(1 / 12)

    def test_tau(self):
        assert tau(2, 3, 10) == pytest.approx(4 / 15)

    def test_substitution(self):
        rep = azuma_failure_bound(3, 2, 1, 2, 10, 15)
        e = 1 / 12
        for q in (1, 2):
            t = 4 * q / 30 * (3 / 3) ** q
            assert rep["tail"][q] == pytest.approx(math.exp(-e ** (2 * q) / (8 * 15 * t * t)), rel=1e-15)
            assert rep["terms"][q] == pytest.approx(4**q * rep["tail"][q], rel=1e-15)

    @settings(max_examples=30)
    @given(st.integers(10, 10_000))
    def test_decreasing_in_n(self, n):
        a = azuma_failure_bound(3, 2, 2, 2, n, 3 * n // 2)["total"]
        b = azuma_failure_bound(3, 2, 2, 2, 2 * n, 3 * n)["total"]
        assert b <= a

    def test_rejects_bad(self):
        with pytest.raises(ValueError):
            azuma_failure_bound(3, 2, 1, 0, 10, 15)
