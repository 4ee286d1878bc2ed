import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from penlangevin.geometry import PolygonDomain, contains, penalty, penalty_jacobian, project

from conftest import points, star_polygons


class TestConstruction:
    def test_rejects_too_few_vertices(self):
        with pytest.raises(ValueError):
            PolygonDomain([(0, 0), (1, 0)])

    def test_rejects_repeated_consecutive_vertex(self):
        with pytest.raises(ValueError):
            PolygonDomain([(0, 0), (1, 0), (1, 0), (0, 1)])

    def test_rejects_self_intersection(self):
        with pytest.raises(ValueError):
            PolygonDomain([(0, 0), (1, 1), (1, 0), (0, 1)])

    def test_area_and_edges(self, square):
        assert square.area == pytest.approx(1.0)
        np.testing.assert_allclose(square.sq_lengths, 1.0)
        with pytest.raises(ValueError):
            square.vertices[0, 0] = 3.0

    def test_file_roundtrip(self, tmp_path, domain):
        p = tmp_path / "poly.csv"
        domain.to_file(p)
        again = PolygonDomain.from_file(p)
        np.testing.assert_array_equal(again.vertices, domain.vertices)
        assert p.read_text().splitlines()[0] == "x,y"

    def test_file_rejects_closed_ring(self, tmp_path):
        p = tmp_path / "ring.csv"
        p.write_text("x,y\n0,0\n1,0\n1,1\n0,0\n")
        with pytest.raises(ValueError):
            PolygonDomain.from_file(p)

    def test_default_domain(self, domain):
        assert len(domain) == 19
        assert contains(np.array([25.0, 5.0]), domain)
        assert contains(np.array([35.0, 15.0]), domain)
        lo, hi = domain.vertices.min(0), domain.vertices.max(0)
        assert lo[0] >= 0 and hi[0] <= 55 and lo[1] >= -8 and hi[1] <= 28


class TestSquareExamples:
    def test_contains(self, square):
        assert contains(np.array([0.5, 0.5]), square)
        assert not contains(np.array([2.0, 0.5]), square)
        assert contains(np.array([1.0, 1.0]), square)
        assert contains(np.array([0.5, 0.0]), square)

    def test_project_inside(self, square):
        pr = project(np.array([0.5, 0.5]), square)
        assert pr.inside and pr.edge_index == -1
        np.testing.assert_array_equal(pr.point, [0.5, 0.5])

    def test_project_edge(self, square):
        pr = project(np.array([2.0, 0.5]), square)
        np.testing.assert_allclose(pr.point, [1.0, 0.5])
        assert pr.edge_index == 1 and pr.gamma == pytest.approx(0.5) and not pr.clamped

    def test_project_corner_tie_goes_to_lowest_edge(self, square):
        pr = project(np.array([2.0, 2.0]), square)
        np.testing.assert_allclose(pr.point, [1.0, 1.0])
        assert pr.clamped and pr.edge_index == 1

    def test_penalty(self, square):
        np.testing.assert_array_equal(penalty(np.array([0.5, 0.5]), square, 0.5), [0, 0])
        np.testing.assert_allclose(penalty(np.array([2.0, 0.5]), square, 0.5), [2.0, 0.0])
        np.testing.assert_allclose(penalty(np.array([2.0, 2.0]), square, 1.0), [1.0, 1.0])
        np.testing.assert_array_equal(penalty(np.array([2.0, 2.0]), square, np.inf), [0, 0])

    def test_penalty_jacobian(self, square):
        np.testing.assert_array_equal(penalty_jacobian(np.array([0.5, 0.5]), square, 1.0), np.zeros((2, 2)))
        np.testing.assert_allclose(penalty_jacobian(np.array([2.0, 0.5]), square, 1.0), [[1, 0], [0, 0]])
        np.testing.assert_allclose(penalty_jacobian(np.array([2.0, 2.0]), square, 2.0), 0.5 * np.eye(2))

    def test_nonpositive_lambda(self, square):
        with pytest.raises(ValueError):
            penalty(np.array([2.0, 0.5]), square, 0.0)

    def test_batched_matches_pointwise(self, domain):
        rng = np.random.default_rng(0)
        x = rng.uniform([-5, -10], [60, 30], size=(200, 2))
        batch = penalty(x, domain, 0.3)
        single = np.array([penalty(xi, domain, 0.3) for xi in x])
        np.testing.assert_array_equal(batch, single)
        jb = penalty_jacobian(x.reshape(10, 20, 2), domain, 0.3)
        assert jb.shape == (10, 20, 2, 2)


def _dense_boundary(domain, per_edge=60):
    t = np.linspace(0, 1, per_edge)[:, None, None]
    return (domain._starts + t * domain.edges).reshape(-1, 2)


@given(star_polygons(), points)
def test_projection_is_nearest_boundary_point(poly, x):
    pr = project(x, poly)
    if pr.inside:
        np.testing.assert_array_equal(pr.point, x)
        return
    d = np.linalg.norm(x - pr.point)
    cand = np.vstack([poly.vertices, _dense_boundary(poly)])
    assert d <= np.linalg.norm(cand - x, axis=1).min() + 1e-12


@given(star_polygons(), points)
def test_penalty_zero_iff_inside(poly, x):
    zero = np.all(penalty(x, poly, 0.7) == 0)
    assert zero == bool(contains(x, poly))


@given(star_polygons(), points, st.floats(1e-4, 10))
def test_penalty_homogeneous_in_inverse_lambda(poly, x, lam):
    np.testing.assert_allclose(penalty(x, poly, lam / 2), 2 * penalty(x, poly, lam), rtol=1e-13)


@given(star_polygons(), points)
def test_projection_idempotent(poly, x):
    p1 = project(x, poly).point
    p2 = project(p1, poly).point
    np.testing.assert_allclose(p2, p1, atol=1e-12)


@given(star_polygons(), points)
def test_penalty_jacobian_psd_symmetric(poly, x):
    j = penalty_jacobian(x, poly, 0.5)
    np.testing.assert_allclose(j, j.T)
    assert np.linalg.eigvalsh(j).min() >= -1e-12


def test_penalty_jacobian_matches_finite_differences(domain):
    rng = np.random.default_rng(1)
    lam, eps = 0.7, 1e-5
    checked = 0
    while checked < 50:
        k = rng.integers(len(domain))
        g = rng.uniform(0.1, 0.9)
        base = domain._starts[k] + g * domain.edges[k]
        normal = np.array([domain.edges[k, 1], -domain.edges[k, 0]]) / np.sqrt(domain.sq_lengths[k])
        x = base + rng.choice([-1, 1]) * rng.uniform(0.05, 0.5) * normal
        pr = project(x, domain)
        if pr.inside or pr.clamped:
            continue
        fd = np.empty((2, 2))
        for i in range(2):
            e = np.zeros(2)
            e[i] = eps
            fd[:, i] = (penalty(x + e, domain, lam) - penalty(x - e, domain, lam)) / (2 * eps)
        np.testing.assert_allclose(penalty_jacobian(x, domain, lam), fd, atol=1e-6)
        checked += 1
