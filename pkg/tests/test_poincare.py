"""Rayleigh ratios, modulus estimates and the extrapolation bound."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from expander_fp.graphs import complete_graph, cycle_graph, gen_random_regular
from expander_fp.markov import MarkovChain, random_reversible_chain, spectral_gap, standard_walk
from expander_fp.poincare import (chain_energy, embed_real_map, finite_form_check, local_modulus, matousek_bound,
                                  modulus_estimate, rayleigh_ratio, real_modulus_upper_bound)
from expander_fp.spaces import Euclidean, HyperbolicPlane, WeightedMetricTree

C5 = standard_walk(cycle_graph(5))
SIGMA_C5 = 1 - math.cos(2 * math.pi / 5)


def brute_ratio(chain, values, p):
    """Both sides of the inequality by explicit double loops over states."""
    n = chain.state_count
    nu, k = chain.stationary, chain.kernel
    lhs = sum(nu[u] * nu[v] * abs(values[u] - values[v]) ** p for u in range(n) for v in range(n))
    rhs = sum(nu[u] * k[u, v] * abs(values[u] - values[v]) ** p for u in range(n) for v in range(n))
    return lhs / rhs


class TestRayleigh:
    def test_constant_map_is_degenerate(self):
        rr = rayleigh_ratio(C5, Euclidean(1), 2, [[1.0]] * 5)
        assert rr.degenerate and rr.value == 0.0

    def test_two_state_swap(self):
        swap = MarkovChain(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.5, 0.5]))
        rr = rayleigh_ratio(swap, Euclidean(1), 2, [[0.0], [1.0]])
        assert (rr.lhs, rr.rhs, rr.value) == pytest.approx((0.5, 1.0, 0.5))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from([2.0, 3.0, 4.0]))
    def test_matches_double_loop(self, seed, p):
        c = random_reversible_chain(5, seed)
        vals = np.random.default_rng(seed).normal(size=5)
        assert rayleigh_ratio(c, Euclidean(1), p, [[v] for v in vals]).value == pytest.approx(brute_ratio(c, vals, p))

    def test_energy_is_half_the_rhs(self):
        f = [[float(i)] for i in range(5)]
        assert chain_energy(C5, Euclidean(1), 2, f) == pytest.approx(rayleigh_ratio(C5, Euclidean(1), 2, f).rhs / 2)


class TestModulus:
    def test_c5_exact(self):
        est = modulus_estimate(C5, Euclidean(1), 2)
        assert est.exact
        assert est.lam == pytest.approx(1 / math.sqrt(SIGMA_C5), abs=1e-9)
        assert est.lam == pytest.approx(1.20300, abs=1e-5)

    def test_k4_exact(self):
        assert modulus_estimate(standard_walk(complete_graph(4)), Euclidean(1), 2).lam == pytest.approx(
            math.sqrt(3) / 2, abs=1e-9)

    def test_witness_attains_estimate(self):
        est = modulus_estimate(C5, Euclidean(1), 4, restarts=4)
        rr = rayleigh_ratio(C5, Euclidean(1), 4, est.witness)
        assert rr.value == pytest.approx(est.lam**4, rel=1e-9)

    def test_optimizer_recovers_exact_value(self):
        c = standard_walk(gen_random_regular(40, 3, seed=5))
        est = modulus_estimate(c, Euclidean(1), 2, restarts=2, method="optimize")
        assert not est.exact
        assert est.lam == pytest.approx(1 / math.sqrt(spectral_gap(c).gap), abs=1e-6)

    def test_quartic_below_extrapolated_bound(self):
        est = modulus_estimate(C5, Euclidean(1), 4, restarts=8)
        assert est.lam <= 8 / math.sqrt(SIGMA_C5) + 1e-6
        # the p=2 witness already gives a positive lower bound
        assert est.lam > 1.0

    def test_enlarging_the_target_never_lowers_the_estimate(self):
        line = modulus_estimate(C5, Euclidean(1), 2)
        plane = modulus_estimate(C5, Euclidean(2), 2)
        tree = modulus_estimate(C5, WeightedMetricTree.path(4), 2, restarts=2)
        assert plane.lam >= line.lam - 1e-9
        assert tree.lam >= line.lam - 1e-6

    def test_hyperbolic_estimate_contains_a_line(self):
        est = modulus_estimate(C5, HyperbolicPlane(), 2, restarts=2)
        assert est.lam >= 1 / math.sqrt(SIGMA_C5) - 1e-6

    def test_report_keys(self):
        d = modulus_estimate(C5, Euclidean(1), 2).to_dict()
        assert set(d) == {"chain", "space", "p", "lambda", "exact", "witness", "sigma"}


class TestLocal:
    def test_single_point_image(self):
        assert local_modulus(C5, Euclidean(1), 2, 1).lam == 0.0

    def test_unconstrained_when_n_is_large(self):
        assert local_modulus(C5, Euclidean(1), 2, 5).lam == pytest.approx(modulus_estimate(C5, Euclidean(1), 2).lam)

    def test_tree_target_beats_three_points_on_the_line(self):
        t = WeightedMetricTree(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
        two = local_modulus(C5, Euclidean(1), 2, 2, restarts=8)
        three = local_modulus(C5, t, 2, 3, restarts=8)
        assert 0 < two.lam <= three.lam + 1e-9
        assert three.lam <= 1 / math.sqrt(SIGMA_C5) + 1e-9


class TestExtrapolation:
    def test_seam_values(self):
        assert matousek_bound(1.0, 2, 2) == 4.0
        assert matousek_bound(1.0, 2, 2, branch="lower") == 1.0

    def test_sigma_one(self):
        # A = 1/2 so the 2-modulus is 1; at q = 2 the upper branch gives 4
        assert matousek_bound(1.0, 2, 2) == pytest.approx(4 * 0.5 * 2)

    @pytest.mark.parametrize("sigma", [0.1, 0.5, 1.0])
    def test_quartic_from_hilbert(self, sigma):
        assert matousek_bound(1 / math.sqrt(sigma), 2, 4) == pytest.approx(8 / math.sqrt(sigma))
        assert real_modulus_upper_bound(sigma, 4) == pytest.approx(8 / math.sqrt(sigma))

    def test_rejects_bad_branch(self):
        with pytest.raises(ValueError):
            matousek_bound(1.0, 2, 3, branch="lower")
        with pytest.raises(ValueError):
            matousek_bound(1.0, 2, 1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_finite_form_from_infinite_form(seed, m):
    c = random_reversible_chain(6, seed, laziness=0.2)
    f = list(np.random.default_rng(seed).normal(size=(6, 2)))
    rep = finite_form_check(c, Euclidean(2), 2, f, m, range(m + 1, m + 8))
    assert rep.ok


def test_embed_real_map_preserves_ratios():
    vals = [0.0, 1.0, 3.0]
    pts = embed_real_map(HyperbolicPlane(), vals)
    h = HyperbolicPlane()
    assert h.dist(pts[0], pts[1]) * 3 == pytest.approx(h.dist(pts[0], pts[2]))
