import numpy as np
import pytest

from alefsi.elements import (
    ElementPair,
    cell_rule,
    facet_ref_points,
    facet_rule,
    gauss_1d,
    pressure_eval,
    shape_eval,
)
from alefsi.errors import ConfigError


class TestShapeFunctions:
    def test_q1_nodal_at_origin(self):
        vals, _ = shape_eval(1, 2, np.array([[0.0, 0.0]]))
        assert np.allclose(vals[:, 0], [1.0, 0.0, 0.0, 0.0])

    @pytest.mark.parametrize("order", [1, 2])
    @pytest.mark.parametrize("dim", [2, 3])
    def test_nodal_property(self, order, dim):
        ep = ElementPair(order, dim)
        nodes = np.array(ep.lattice(), dtype=float) / order
        vals, _ = shape_eval(order, dim, nodes)
        assert np.allclose(vals, np.eye(ep.n_loc), atol=1e-12)

    def test_q2_edge_midpoint(self):
        # on the bottom edge the midpoint basis function is 1, others 0
        vals, _ = shape_eval(2, 2, np.array([[0.5, 0.0]]))
        assert vals[1, 0] == pytest.approx(1.0, abs=1e-12)
        others = np.delete(vals[:, 0], 1)
        assert np.allclose(others, 0.0, atol=1e-12)

    @pytest.mark.parametrize("order", [1, 2])
    @pytest.mark.parametrize("dim", [2, 3])
    def test_partition_of_unity(self, order, dim):
        rng = np.random.default_rng(3)
        pts = rng.random((20, dim))
        vals, grads = shape_eval(order, dim, pts)
        assert np.allclose(vals.sum(axis=0), 1.0, atol=1e-12)
        assert np.allclose(grads.sum(axis=0), 0.0, atol=1e-12)

    def test_point_outside_cell_rejected(self):
        with pytest.raises(ConfigError):
            shape_eval(1, 2, np.array([[1.5, 0.0]]))


class TestQuadrature:
    def test_gauss_1d_interval(self):
        x, w = gauss_1d(3)
        assert np.all((x > 0) & (x < 1))
        assert w.sum() == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("dim", [1, 2, 3])
    @pytest.mark.parametrize("degree", [3, 5])
    def test_exactness(self, dim, degree):
        rule = cell_rule(dim, degree)
        assert rule.weights.sum() == pytest.approx(1.0, abs=1e-13)
        # integrate x_0^degree exactly: 1/(degree+1)
        approx = (rule.weights * rule.points[:, 0] ** degree).sum()
        assert approx == pytest.approx(1.0 / (degree + 1), rel=1e-12)

    def test_exactness_degree_matches_element(self):
        for order in (1, 2):
            ep = ElementPair(order, 2)
            rule = cell_rule(2, ep.quad_degree)
            assert rule.degree >= 2 * order + 1


class TestPressureBasis:
    def test_p0_constant(self):
        vals = pressure_eval(1, 2, np.random.default_rng(0).random((5, 2)))
        assert np.allclose(vals, 1.0)

    def test_p1_disc_basis(self):
        pts = np.array([[0.5, 0.5], [1.0, 0.0]])
        vals = pressure_eval(2, 2, pts)
        assert vals.shape == (3, 2)
        assert np.allclose(vals[:, 0], [1.0, 0.0, 0.0])
        assert np.allclose(vals[:, 1], [1.0, 0.5, -0.5])

    def test_counts(self):
        assert ElementPair(1, 2).n_p == 1
        assert ElementPair(2, 2).n_p == 3
        assert ElementPair(2, 3).n_p == 4


class TestFacets:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_facet_points_on_boundary(self, dim):
        rule = facet_rule(dim, 3)
        n_facets = 4 if dim == 2 else 6
        for f in range(n_facets):
            pts = facet_ref_points(dim, f, rule.points)
            # each facet fixes exactly one coordinate at 0 or 1
            fixed = [
                a
                for a in range(dim)
                if np.allclose(pts[:, a], 0.0) or np.allclose(pts[:, a], 1.0)
            ]
            assert len(fixed) == 1
