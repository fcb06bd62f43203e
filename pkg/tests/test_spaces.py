"""Distance and geodesic oracles, and empirical p-convexity certificates."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from expander_fp.spaces import (Euclidean, HyperbolicPlane, InvalidPointError, LpProduct, LpSpace, TreePoint,
                                WeightedMetricTree, certify_convexity_constant, clarkson_constant, encode_point,
                                mobius_add, space_from_descriptor, verify_p_convexity)

coord = st.floats(-0.6, 0.6, allow_nan=False)
disk_point = st.tuples(coord, coord).filter(lambda v: v[0] ** 2 + v[1] ** 2 < 0.8)


def hyperbolic_oracle(x, y):
    x, y = np.asarray(x), np.asarray(y)
    return math.acosh(1 + 2 * np.sum((x - y) ** 2) / ((1 - x @ x) * (1 - y @ y)))


def star_tree():
    return WeightedMetricTree(4, [(0, 1, 1.0), (0, 2, 2.0), (0, 3, 0.5)])


class TestHyperbolic:
    @settings(max_examples=50, deadline=None)
    @given(disk_point, disk_point)
    def test_distance_matches_arccosh_formula(self, x, y):
        h = HyperbolicPlane()
        assert h.dist(x, y) == pytest.approx(hyperbolic_oracle(x, y), rel=1e-9, abs=1e-7)

    def test_distance_from_origin(self):
        # d(0, r e_1) = 2 artanh(r)
        assert HyperbolicPlane().dist([0, 0], [0.5, 0]) == pytest.approx(2 * math.atanh(0.5))

    @settings(max_examples=50, deadline=None)
    @given(disk_point, disk_point, st.floats(0, 1))
    def test_geodesic_splits_distance(self, y, z, t):
        h = HyperbolicPlane()
        m = h.geodesic(y, z, t)
        d = h.dist(y, z)
        assert h.dist(y, m) == pytest.approx(t * d, abs=1e-9)
        assert h.dist(m, z) == pytest.approx((1 - t) * d, abs=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(disk_point, disk_point, disk_point)
    def test_mobius_translation_is_isometry(self, a, x, y):
        h = HyperbolicPlane()
        assert h.dist(mobius_add(a, x), mobius_add(a, y)) == pytest.approx(h.dist(x, y), abs=1e-8)

    @settings(max_examples=30, deadline=None)
    @given(disk_point, disk_point)
    def test_log_exp_inverse(self, y, x):
        h = HyperbolicPlane()
        v = h.log(y, x)
        np.testing.assert_allclose(h.exp(y, v), x, atol=1e-10)
        assert h.norm_at(y, v) == pytest.approx(h.dist(y, x), abs=1e-9)

    def test_rejects_points_outside_disk(self):
        with pytest.raises(InvalidPointError):
            HyperbolicPlane().validate([0.8, 0.7])


class TestTree:
    def test_path_tree_is_an_interval(self):
        t = WeightedMetricTree.path(5, 1.0)
        for i in range(5):
            for j in range(5):
                assert t.dist(t.vertex_point(i), t.vertex_point(j)) == pytest.approx(abs(i - j))

    def test_star_distances(self):
        t = star_tree()
        assert t.dist(t.vertex_point(2), t.vertex_point(3)) == pytest.approx(2.5)
        assert t.dist(TreePoint(1, 1.0), TreePoint(0, 0.5)) == pytest.approx(1.5)

    def test_geodesic_passes_through_center(self):
        t = star_tree()
        m = t.geodesic(t.vertex_point(1), t.vertex_point(2), 1 / 3)
        assert t.dist(m, t.vertex_point(0)) == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0, 1))
    def test_random_geodesics(self, seed, s):
        t = star_tree()
        rng = np.random.default_rng(seed)
        y, z = t.random_point(rng), t.random_point(rng)
        m = t.geodesic(y, z, s)
        assert t.dist(y, m) + t.dist(m, z) == pytest.approx(t.dist(y, z), abs=1e-9)
        assert t.dist(y, m) == pytest.approx(s * t.dist(y, z), abs=1e-9)

    def test_vertex_has_one_representation(self):
        t = star_tree()
        assert t.validate(TreePoint(1, 2.0)) == t.vertex_point(2)
        assert t.validate(TreePoint(2, 0.0)) == t.vertex_point(0)

    def test_automorphism_check(self):
        t = WeightedMetricTree(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
        assert t.is_automorphism([0, 2, 3, 1])
        assert not t.is_automorphism([1, 0, 2, 3])

    def test_rejects_cycle(self):
        with pytest.raises(ValueError):
            WeightedMetricTree(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)])


class TestVectorSpaces:
    def test_lp_distance(self):
        assert LpSpace(2, 4).dist([0, 0], [1, 1]) == pytest.approx(2 ** 0.25)

    def test_product_distance(self):
        prod = LpProduct([Euclidean(1), Euclidean(1)], 2)
        assert prod.dist(([0.0], [0.0]), ([3.0], [4.0])) == pytest.approx(5.0)

    @pytest.mark.parametrize("desc", [{"kind": "euclidean", "dim": 3}, {"kind": "lp", "dim": 2, "p": 3.0},
                                      {"kind": "hyperbolic", "dim": 2},
                                      {"kind": "tree", "vertices": 3, "edges": [[0, 1, 1.0], [1, 2, 2.0]]},
                                      {"kind": "product", "p": 2.0, "factors": [{"kind": "euclidean", "dim": 1}]}])
    def test_descriptor_round_trip(self, desc):
        space = space_from_descriptor(desc)
        assert space_from_descriptor(space.descriptor()).descriptor() == space.descriptor()

    def test_encode_tree_point(self):
        assert encode_point(TreePoint(1, 0.5)) == [1, 0.5]


class TestConvexity:
    def test_hilbert_identity_has_zero_slack(self):
        rep = verify_p_convexity(Euclidean(3), 2, 1.0, 5000, seed=0)
        assert rep.holds
        assert rep.min_slack == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("space", [HyperbolicPlane(), star_tree()], ids=["hyperbolic", "tree"])
    def test_cat0_spaces_at_p2(self, space):
        assert verify_p_convexity(space, 2, 1.0, 5000, seed=1).holds

    def test_constant_above_one_is_refuted_in_the_plane(self):
        rep = verify_p_convexity(Euclidean(2), 2, 1.5, 5000, seed=2)
        assert not rep.holds
        assert rep.witness is not None

    def test_clarkson_constant_on_the_line(self):
        assert clarkson_constant(4) == 0.25
        assert verify_p_convexity(Euclidean(1), 4, 0.25, 20_000, seed=3).holds

    def test_certified_lp_constant(self):
        c = certify_convexity_constant(LpSpace(2, 3), 3, sample_count=5000, seed=0)
        assert 0 < c <= clarkson_constant(3)
