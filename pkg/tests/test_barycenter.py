"""p-centers, circumcenters and the growth inequality."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import newton

from expander_fp.barycenter import (FiniteMeasure, circumcenter, growth_check, moment, p_center,
                                    variance_sandwich)
from expander_fp.markov import random_reversible_chain
from expander_fp.spaces import Euclidean, HyperbolicPlane, LpSpace, WeightedMetricTree, mobius_add


def newton_center_1d(points, weights, p):
    """Root of the derivative of sum w |t - x|^p, by Newton from the weighted mean."""
    x = np.asarray(points, float)
    w = np.asarray(weights, float)
    g = lambda t: np.sum(w * p * np.abs(t - x) ** (p - 1) * np.sign(t - x))
    h = lambda t: np.sum(w * p * (p - 1) * np.abs(t - x) ** (p - 2))
    return newton(g, float(w @ x), fprime=h, tol=1e-15, maxiter=200)


def ten_edge_tree():
    edges = [(0, 1, 1.0), (0, 2, 0.5), (0, 3, 2.0), (1, 4, 1.0), (1, 5, 0.7), (2, 6, 1.3), (3, 7, 0.4),
             (3, 8, 1.1), (4, 9, 0.9), (6, 10, 0.6)]
    return WeightedMetricTree(11, edges)


class TestMeasure:
    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            FiniteMeasure([0.0, 1.0], [0.5, 0.6])
        with pytest.raises(ValueError):
            FiniteMeasure([], [])

    def test_normalized_drops_zero_weights(self):
        m = FiniteMeasure.normalized([1, 2, 3], [0, 1, 3])
        assert m.support == [2, 3]
        np.testing.assert_allclose(m.weights, [0.25, 0.75])


class TestPCenter:
    def test_two_point_average(self):
        assert p_center(Euclidean(1), FiniteMeasure.uniform([[0.0], [1.0]])).center[0] == pytest.approx(0.5)

    def test_asymmetric_quartic(self):
        sigma = FiniteMeasure([[0.0], [1.0]], [2 / 3, 1 / 3])
        c = p_center(Euclidean(1), sigma, 4).center[0]
        assert c == pytest.approx(1 / (1 + 2 ** (1 / 3)), abs=1e-8)
        assert c == pytest.approx(newton_center_1d([0, 1], [2 / 3, 1 / 3], 4), abs=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 8))
    def test_hilbert_center_is_linear_mean(self, seed, m):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(m, 3))
        w = rng.random(m) + 0.01
        sigma = FiniteMeasure.normalized(list(pts), w)
        c = p_center(Euclidean(3), sigma).center
        np.testing.assert_allclose(c, sigma.weights @ pts, atol=1e-8)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from([3.0, 4.0]))
    def test_one_dimensional_p_matches_newton(self, seed, p):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=5)
        w = rng.random(5) + 0.05
        sigma = FiniteMeasure.normalized([[x] for x in pts], w)
        c = p_center(Euclidean(1), sigma, p).center[0]
        assert c == pytest.approx(newton_center_1d(pts, sigma.weights, p), abs=1e-7)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_hyperbolic_center_is_equivariant(self, seed):
        h = HyperbolicPlane()
        rng = np.random.default_rng(seed)
        pts = h.random_points(rng, 4)
        a = 0.5 * h.random_point(rng)
        sigma = FiniteMeasure.uniform(pts)
        c = p_center(h, sigma).center
        moved = p_center(h, FiniteMeasure.uniform([mobius_add(a, x) for x in pts])).center
        assert h.dist(mobius_add(a, c), moved) < 1e-6

    def test_center_never_worse_than_support(self):
        h = HyperbolicPlane()
        rng = np.random.default_rng(4)
        sigma = FiniteMeasure.uniform(h.random_points(rng, 6))
        res = p_center(h, sigma, 4)
        assert all(res.moment <= moment(h, sigma, x, 4) + 1e-9 for x in sigma.support)

    def test_tree_center_on_a_path(self):
        t = WeightedMetricTree.path(5)
        sigma = FiniteMeasure.normalized([t.vertex_point(0), t.vertex_point(4)], [3, 1])
        c = p_center(t, sigma).center
        assert t.dist(c, t.vertex_point(0)) == pytest.approx(1.0, abs=1e-3)

    def test_tree_center_sits_at_branch_point(self):
        t = WeightedMetricTree(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
        c = p_center(t, FiniteMeasure.uniform([t.vertex_point(i) for i in (1, 2, 3)])).center
        assert t.dist(c, t.vertex_point(0)) < 1e-3

    def test_lp_space_center_is_separable(self):
        sigma = FiniteMeasure([[0.0, 0.0], [1.0, 2.0]], [2 / 3, 1 / 3])
        c = p_center(LpSpace(2, 4), sigma, 4).center
        np.testing.assert_allclose(c, np.array([1, 2]) / (1 + 2 ** (1 / 3)), atol=1e-8)

    def test_sublevel_diameter(self):
        # moments within eps of the minimum stay within (4 eps / c)^(1/p) of the center
        h = HyperbolicPlane()
        rng = np.random.default_rng(0)
        sigma = FiniteMeasure.uniform(h.random_points(rng, 5))
        res = p_center(h, sigma)
        for _ in range(200):
            y = h.geodesic(res.center, h.random_point(rng), rng.random() * 0.2)
            eps = moment(h, sigma, y, 2) - res.moment
            assert h.dist(y, res.center) <= math.sqrt(4 * max(eps, 0)) + 1e-7

    def test_invalid_tol(self):
        with pytest.raises(ValueError):
            p_center(Euclidean(1), FiniteMeasure.uniform([[0.0], [1.0]]), tol=0)


class TestCircumcenter:
    def test_equilateral_triangle(self):
        pts = [np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.5, math.sqrt(3) / 2])]
        res = circumcenter(Euclidean(2), pts, full=True)
        assert res.radius == pytest.approx(1 / math.sqrt(3), abs=1e-7)
        np.testing.assert_allclose(res.center, [0.5, math.sqrt(3) / 6], atol=1e-6)

    def test_interval(self):
        assert circumcenter(Euclidean(1), [[0.0], [1.0]])[0] == pytest.approx(0.5, abs=1e-7)

    def test_single_point(self):
        np.testing.assert_array_equal(circumcenter(Euclidean(2), [[0.3, 0.4]]), [0.3, 0.4])

    def test_obtuse_triangle_uses_longest_side(self):
        pts = [[0.0, 0.0], [4.0, 0.0], [2.0, 0.5]]
        np.testing.assert_allclose(circumcenter(Euclidean(2), pts), [2.0, 0.0], atol=1e-6)

    def test_hyperbolic_certificate(self):
        h = HyperbolicPlane()
        res = circumcenter(h, h.random_points(np.random.default_rng(1), 5), full=True)
        assert res.position_bound <= 1e-7


class TestGrowth:
    def test_hilbert_slack_is_zero(self):
        rng = np.random.default_rng(0)
        sigma = FiniteMeasure.uniform(list(rng.normal(size=(5, 2))))
        rep = growth_check(Euclidean(2), sigma, 2, 2000, seed=0)
        assert rep.min_slack == pytest.approx(0.0, abs=1e-9)

    def test_dirac_slack_is_zero(self):
        rep = growth_check(Euclidean(1), FiniteMeasure([[0.0]], [1.0]), 2, 500, seed=0)
        assert abs(rep.min_slack) < 1e-12

    @pytest.mark.parametrize("space", [HyperbolicPlane(), ten_edge_tree()], ids=["hyperbolic", "tree"])
    def test_cat0_growth(self, space):
        sigma = FiniteMeasure.uniform(space.random_points(np.random.default_rng(3), 5))
        assert growth_check(space, sigma, 2, 10_000, seed=3).min_slack >= -1e-9

    def test_default_constant_is_pth_root(self):
        sigma = FiniteMeasure.uniform([[0.0], [1.0], [3.0]])
        rep = growth_check(Euclidean(1), sigma, 4, 5000, seed=0)
        assert rep.c_y == pytest.approx(0.25 ** 0.25)
        assert rep.min_slack >= -1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([2.0, 3.0, 4.0]))
def test_variance_sandwich(seed, p):
    c = random_reversible_chain(6, seed)
    rng = np.random.default_rng(seed)
    values = list(rng.normal(size=(6, 2)))
    rep = variance_sandwich(Euclidean(2), values, c.stationary, p)
    assert rep.holds
