import logging

import numpy as np
import pytest

from manifold_imputation._datasets import fibonacci_sphere
from manifold_imputation._grid import UniformGrid
from manifold_imputation._mmls import (
    MMLSConfig,
    PointCloud,
    TangentFrame,
    component_functions,
    fit_local_frame,
    mmls_project,
    monomial_exponents,
    project_many,
    vandermonde,
)
from manifold_imputation.exceptions import DegenerateFit, SamplingDeficiency


def _flat_grid(spacing=0.05, extent=1.0):
    axis = np.arange(-extent, extent + spacing / 2, spacing)
    xy = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    return PointCloud(np.column_stack([xy, np.zeros(len(xy))]), 2)


def _on_plane(x, y):
    return np.array([x, y, 0.3 * x - 0.2 * y])


class TestPointCloud:
    @pytest.mark.parametrize(
        "points, dim",
        [
            (np.zeros((0, 3)), 2),
            (np.zeros(3), 1),
            (np.zeros((4, 3)), 3),
            (np.array([[0.0, 0.0, np.nan]]), 2),
        ],
    )
    def test_invalid(self, points, dim):
        with pytest.raises(ValueError):
            PointCloud(points, dim)

    def test_neighbors_and_spacing(self):
        cloud = _flat_grid(spacing=0.1)
        idx = cloud.neighbors([0.0, 0.0, 0.0], 0.105)
        assert idx.size == 5
        assert np.all(np.diff(idx) > 0)
        assert cloud.median_spacing() == pytest.approx(0.1)
        assert cloud.ambient_dim == 3

    def test_without(self):
        cloud = _flat_grid(spacing=0.5)
        drop = np.zeros(len(cloud), dtype=bool)
        drop[:3] = True
        assert len(cloud.without(drop)) == len(cloud) - 3


class TestConfig:
    def test_default_scale(self):
        cfg = MMLSConfig(neighborhood_radius=0.4)
        assert cfg.sigma == pytest.approx(0.2)
        assert MMLSConfig(weight_scale=0.05).sigma == 0.05

    def test_weights_are_truncated(self):
        cfg = MMLSConfig(neighborhood_radius=0.3)
        weights = cfg.weights(np.array([0.0, 0.15, 0.31]))
        np.testing.assert_allclose(weights, [1.0, np.exp(-1.0), 0.0])

    @pytest.mark.parametrize(
        "kwargs", [{"degree": 0}, {"neighborhood_radius": 0.0}, {"weight_scale": -1.0}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            MMLSConfig(**kwargs)


class TestTangentFrame:
    def test_coordinates_and_lift(self):
        basis = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        frame = TangentFrame(origin=np.array([1.0, 2.0, 3.0]), basis=basis)
        np.testing.assert_allclose(frame.coordinates([2.0, 4.0, 9.0]), [[1.0, 2.0]])
        np.testing.assert_allclose(frame.lift([[1.0, 2.0]]), [[2.0, 4.0, 3.0]])
        np.testing.assert_allclose(frame.project([2.0, 4.0, 9.0]), [[2.0, 4.0, 3.0]])
        np.testing.assert_allclose(np.abs(frame.normal_basis), [[0.0, 0.0, 1.0]], atol=1e-12)


class TestLocalFrame:
    def test_flat_cloud(self):
        cloud = _flat_grid()
        frame = fit_local_frame(cloud, np.array([0.12, -0.31, 0.05]), MMLSConfig())
        np.testing.assert_allclose(frame.origin, [0.12, -0.31, 0.0], atol=1e-10)
        np.testing.assert_allclose(np.abs(frame.normal_basis), [[0.0, 0.0, 1.0]], atol=1e-10)
        assert not frame.ill_defined
        assert frame.iterations >= 1

    def test_far_query(self):
        with pytest.raises(SamplingDeficiency, match="samples within radius"):
            fit_local_frame(_flat_grid(), np.array([5.0, 5.0, 5.0]), MMLSConfig())

    def test_collinear_samples(self):
        line = np.column_stack([np.linspace(-1, 1, 41), np.zeros(41), np.zeros(41)])
        with pytest.raises(SamplingDeficiency, match="fewer than 2"):
            fit_local_frame(PointCloud(line, 2), np.zeros(3), MMLSConfig())

    def test_isotropic_neighbourhood_is_flagged(self, caplog):
        # a full 3D lattice has no preferred plane
        axis = np.linspace(-0.2, 0.2, 9)
        cube = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
        with caplog.at_level(logging.WARNING):
            frame = fit_local_frame(PointCloud(cube, 2), np.zeros(3), MMLSConfig())
        assert frame.ill_defined
        assert "ill defined" in caplog.text


class TestPolynomial:
    def test_monomial_exponents(self):
        exponents = monomial_exponents(2, 2)
        assert exponents.shape == (6, 2)
        np.testing.assert_array_equal(exponents[0], [0, 0])
        assert sorted(map(tuple, exponents[1:3])) == [(0, 1), (1, 0)]
        assert monomial_exponents(3, 3).shape[0] == 20

    def test_vandermonde(self):
        matrix = vandermonde(np.array([[2.0, 3.0]]), np.array([[0, 0], [1, 0], [1, 1]]))
        np.testing.assert_allclose(matrix, [[1.0, 2.0, 6.0]])

    def test_projects_onto_plane(self, plane_dataset):
        target = _on_plane(0.5, 0.45)
        projected = mmls_project(plane_dataset.cloud, target + [0.0, 0.0, 0.02], MMLSConfig())
        assert plane_dataset.surface.distance(projected)[0] < 1e-10

    def test_projects_onto_sphere(self):
        cloud = PointCloud(fibonacci_sphere(4000), 2)
        query = 1.03 * np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
        projected = mmls_project(cloud, query, MMLSConfig(degree=2, neighborhood_radius=0.3))
        assert abs(np.linalg.norm(projected) - 1.0) < 2e-3

    def test_degenerate_fit(self):
        axis = np.array([-0.1, 0.0, 0.1])
        xy = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
        cloud = PointCloud(np.column_stack([xy, np.zeros(9)]), 2)
        with pytest.raises(DegenerateFit) as excinfo:
            mmls_project(
                cloud, np.array([0.0, 0.0, 0.01]), MMLSConfig(degree=3, neighborhood_radius=0.5)
            )
        assert excinfo.value.monomials == 10
        assert excinfo.value.neighbors == 9


class TestBatch:
    def test_failures_are_collected(self, plane_dataset, caplog):
        queries = np.array([_on_plane(0.5, 0.5), [9.0, 9.0, 9.0], _on_plane(-0.5, 0.6)])
        with caplog.at_level(logging.WARNING):
            batch = project_many(plane_dataset.cloud, queries, MMLSConfig(), workers=2)
        np.testing.assert_array_equal(batch.succeeded, [True, False, True])
        assert list(batch.failures) == [1]
        assert batch.failures[1].startswith("SamplingDeficiency")
        assert "1 of 3 MMLS projections failed" in caplog.text

    def test_component_functions(self, plane_dataset):
        u = np.array([1.0, 0.0, 0.3]) / np.sqrt(1.09)
        v = np.array([0.0, 1.0, -0.2])
        v = v - (v @ u) * u
        basis = np.array([u, v / np.linalg.norm(v)])
        frame = TangentFrame(origin=_on_plane(0.5, 0.5), basis=basis)
        mesh = UniformGrid(2, 5, (-0.1, -0.1), 0.25)
        admissible = np.ones(mesh.shape, dtype=bool)
        admissible[2, 2] = False

        components, batch = component_functions(
            frame, mesh, plane_dataset.cloud, MMLSConfig(), admissible, workers=1
        )

        assert len(components) == 3
        assert not batch.failures
        mask = components[0].mask
        assert mask.n_unknown == 1 and not mask.known[2, 2]
        points = np.column_stack([c.known_values() for c in components])
        assert plane_dataset.surface.distance(points).max() < 1e-10


def _rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    return q * np.sign(np.diag(r))


def _sphere_error(count, degree, rng):
    spacing = np.sqrt(4 * np.pi / count)
    cloud = PointCloud(fibonacci_sphere(count), 2)
    cfg = MMLSConfig(degree=degree, neighborhood_radius=4 * spacing)
    directions = rng.normal(size=(20, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    queries = directions * (1.0 + 0.3 * spacing)
    errors = [abs(np.linalg.norm(mmls_project(cloud, q, cfg)) - 1.0) for q in queries]
    return spacing, max(errors)


@pytest.mark.slow
class TestProjectionProperties:
    def test_rigid_motion_equivariance(self, rng):
        cloud = PointCloud(fibonacci_sphere(2000), 2)
        cfg = MMLSConfig(degree=2, neighborhood_radius=0.35)
        for _ in range(20):
            rotation, shift = _rotation(rng), rng.normal(size=3)
            direction = rng.normal(size=3)
            query = 1.02 * direction / np.linalg.norm(direction)
            moved = mmls_project(cloud.transformed(rotation, shift), rotation @ query + shift, cfg)
            expected = rotation @ mmls_project(cloud, query, cfg) + shift
            assert np.linalg.norm(moved - expected) <= 1e-8

    @pytest.mark.parametrize("degree", [2, 3])
    def test_sphere_convergence_order(self, degree, rng):
        rows = [_sphere_error(count, degree, rng) for count in (1000, 4000, 16000)]
        spacings, errors = np.array(rows).T
        slope = np.polyfit(np.log(spacings), np.log(errors), 1)[0]
        assert slope >= degree - 0.5

    def test_frame_normal_on_sphere(self, rng):
        cloud = PointCloud(fibonacci_sphere(4000), 2)
        for _ in range(10):
            direction = rng.normal(size=3)
            query = 1.01 * direction / np.linalg.norm(direction)
            frame = fit_local_frame(cloud, query, MMLSConfig(neighborhood_radius=0.3))
            radial = frame.origin / np.linalg.norm(frame.origin)
            cosine = min(abs(float(frame.normal_basis[0] @ radial)), 1.0)
            assert np.degrees(np.arccos(cosine)) < 2.0

    @pytest.mark.parametrize(
        "degree, height",
        [
            (2, lambda x, y: 0.8 * x**2 - 0.5 * x * y + 0.3 * y**2),
            (3, lambda x, y: 0.8 * x**2 - 0.5 * x * y + 0.3 * y**2),
            (4, lambda x, y: 0.6 * x**2 + 0.4 * x**2 * y**2 - 0.2 * x**4 + 0.1 * y**4),
        ],
    )
    def test_polynomial_surface_is_reproduced(self, degree, height):
        # even surfaces on a centred lattice keep the frame horizontal at the origin
        axis = np.linspace(-0.5, 0.5, 41)
        x, y = (c.ravel() for c in np.meshgrid(axis, axis, indexing="ij"))
        cloud = PointCloud(np.column_stack([x, y, height(x, y)]), 2)
        cfg = MMLSConfig(degree=degree, neighborhood_radius=0.3)
        for offset in (0.03, -0.05):
            projected = mmls_project(cloud, np.array([0.0, 0.0, offset]), cfg)
            np.testing.assert_allclose(projected, [0.0, 0.0, 0.0], atol=1e-10)
