"""Seeded dataset generators and analytic ground-truth surfaces.

Grid datasets (``annulus-grid``, ``disk-grid``) sample the smooth periodic
test function 1 / (2.5 + sin(x + 1.2) + cos(y)) on [0, 2*pi]^2. Point cloud
datasets (``plane``, ``sphere``, ``torus``, ``cone4d``) sample a surface
with a localized region of missing data.

Every generator is deterministic for a given seed and returns a truth record
(JSON-serializable) from which the exact data can be rebuilt with
:func:`grid_truth_function` or :func:`surface_from_truth`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from ._grid import GridFunction, GridMask, UniformGrid
from ._mmls import PointCloud
from ._types import FloatArray, Shape
from ._variational import scaling_test_function
from .exceptions import ConfigurationError

LOGGER = logging.getLogger(__name__)


def reciprocal_trig(x: FloatArray, y: FloatArray) -> FloatArray:
    """f(x, y) = 1 / (2.5 + sin(x + 1.2) + cos(y)); smooth, periodic, bounded below by 2."""
    return 1.0 / (2.5 + np.sin(x + 1.2) + np.cos(y))


GRID_FUNCTIONS: dict[str, Callable[..., FloatArray]] = {
    "reciprocal-trig": reciprocal_trig,
    "scaling": scaling_test_function,
}


def grid_truth_function(name: str) -> Callable[..., FloatArray]:
    try:
        return GRID_FUNCTIONS[name]
    except KeyError:
        raise ConfigurationError(
            f"Unknown test function '{name}'. Available: {', '.join(sorted(GRID_FUNCTIONS))}"
        ) from None


def add_uniform_noise(
    gf: GridFunction, amplitude: float, rng: np.random.Generator
) -> GridFunction:
    """Add independent uniform noise in [-amplitude, amplitude] to the known values."""
    if amplitude < 0:
        raise ConfigurationError(f"Noise amplitude must be >= 0, got {amplitude}")
    if amplitude == 0:
        return gf
    noise = rng.uniform(-amplitude, amplitude, size=gf.values.shape)
    return gf.with_values(np.where(gf.mask.known, gf.values + noise, np.nan))


# ---------------------------------------------------------------------------
# Analytic surfaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlaneSurface:
    """Affine d-plane in R^n given by a point and an orthonormal normal basis."""

    point: tuple[float, ...]
    normals: tuple[tuple[float, ...], ...]
    name: str = "plane"

    def distance(self, points: FloatArray) -> FloatArray:
        offsets = np.atleast_2d(points) - np.asarray(self.point)
        return np.linalg.norm(offsets @ np.asarray(self.normals).T, axis=1)

    def to_dict(self) -> dict:
        return {
            "surface": self.name,
            "point": list(self.point),
            "normals": [list(n) for n in self.normals],
        }


@dataclass(frozen=True)
class SphereSurface:
    center: tuple[float, ...] = (0.0, 0.0, 0.0)
    radius: float = 1.0
    name: str = "sphere"

    def distance(self, points: FloatArray) -> FloatArray:
        offsets = np.atleast_2d(points) - np.asarray(self.center)
        return np.abs(np.linalg.norm(offsets, axis=1) - self.radius)

    def to_dict(self) -> dict:
        return {"surface": self.name, "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class VariableTorus:
    """Torus whose tube radius varies around the core circle.

    X(u, v) = ((R + r(u) cos v) cos u, (R + r(u) cos v) sin u, r(u) sin v)
    with r(u) = r0 + amplitude * cos(lobes * u).
    """

    major_radius: float = 1.0
    tube_radius: float = 0.6
    amplitude: float = 0.05
    lobes: int = 3
    name: str = "torus"
    _lookup: tuple[cKDTree, FloatArray] | None = field(
        default=None, init=False, repr=False, compare=False
    )

    def tube(self, u: FloatArray) -> FloatArray:
        return self.tube_radius + self.amplitude * np.cos(self.lobes * u)

    def point(self, u: FloatArray, v: FloatArray) -> FloatArray:
        u, v = np.asarray(u, float), np.asarray(v, float)
        r = self.tube(u)
        ring = self.major_radius + r * np.cos(v)
        return np.stack([ring * np.cos(u), ring * np.sin(u), r * np.sin(v)], axis=-1)

    def _squared_distance(self, uv: FloatArray, target: FloatArray) -> tuple[float, FloatArray]:
        u, v = uv
        r = self.tube(u)
        dr = -self.amplitude * self.lobes * np.sin(self.lobes * u)
        ring = self.major_radius + r * np.cos(v)
        residual = self.point(u, v) - target
        d_u = np.array(
            [
                dr * np.cos(v) * np.cos(u) - ring * np.sin(u),
                dr * np.cos(v) * np.sin(u) + ring * np.cos(u),
                dr * np.sin(v),
            ]
        )
        d_v = np.array([-r * np.sin(v) * np.cos(u), -r * np.sin(v) * np.sin(u), r * np.cos(v)])
        return float(residual @ residual), 2.0 * np.array([residual @ d_u, residual @ d_v])

    def _seed_lookup(self) -> tuple[cKDTree, FloatArray]:
        if self._lookup is None:
            u, v = np.meshgrid(
                np.linspace(0, 2 * np.pi, 240, endpoint=False),
                np.linspace(0, 2 * np.pi, 120, endpoint=False),
                indexing="ij",
            )
            params = np.stack([u.ravel(), v.ravel()], axis=1)
            object.__setattr__(self, "_lookup", (cKDTree(self.point(u, v).reshape(-1, 3)), params))
        return self._lookup

    def distance(self, points: FloatArray) -> FloatArray:
        """Euclidean distance to the surface by local minimization over (u, v)."""
        points = np.atleast_2d(points)
        tree, params = self._seed_lookup()
        _, nearest = tree.query(points)
        distances = np.empty(len(points))
        for i, (target, start) in enumerate(zip(points, params[nearest])):
            result = minimize(
                self._squared_distance,
                start,
                args=(target,),
                jac=True,
                method="BFGS",
                options={"gtol": 1e-14},
            )
            distances[i] = np.sqrt(max(result.fun, 0.0))
        return distances

    def to_dict(self) -> dict:
        return {
            "surface": self.name,
            "major_radius": self.major_radius,
            "tube_radius": self.tube_radius,
            "amplitude": self.amplitude,
            "lobes": self.lobes,
        }


@dataclass(frozen=True)
class ConeSurface:
    """Double cone x1^2 + x2^2 + x3^2 = x4^2 in R^4."""

    name: str = "cone4d"

    def distance(self, points: FloatArray) -> FloatArray:
        points = np.atleast_2d(points)
        radial = np.linalg.norm(points[:, :3], axis=1)
        height = points[:, 3]
        # nearest point on each nappe's generating ray (radial, +/-radial), clamped at the apex
        to_upper = np.where(
            radial + height >= 0, np.abs(radial - height) / np.sqrt(2), np.hypot(radial, height)
        )
        to_lower = np.where(
            radial - height >= 0, np.abs(radial + height) / np.sqrt(2), np.hypot(radial, height)
        )
        return np.minimum(to_upper, to_lower)

    def to_dict(self) -> dict:
        return {"surface": self.name}


SURFACES: dict[str, Callable[..., Any]] = {
    "plane": PlaneSurface,
    "sphere": SphereSurface,
    "torus": VariableTorus,
    "cone4d": ConeSurface,
}


def surface_from_truth(truth: dict) -> PlaneSurface | SphereSurface | VariableTorus | ConeSurface:
    """Rebuild an analytic surface from a truth record's ``surface`` entry."""
    fields = dict(truth.get("surface", truth))
    name = fields.pop("surface", None)
    if name not in SURFACES:
        raise ConfigurationError(f"Truth record names no known surface (got {name!r})")
    if name == "plane":
        fields = {"point": tuple(fields["point"]), "normals": tuple(map(tuple, fields["normals"]))}
    if name == "sphere":
        fields["center"] = tuple(fields.get("center", (0.0, 0.0, 0.0)))
    return SURFACES[name](**fields)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridDataset:
    """Noisy grid data plus its exact counterpart."""

    name: str
    data: GridFunction
    exact: GridFunction
    truth: dict


@dataclass(frozen=True)
class CloudDataset:
    name: str
    cloud: PointCloud
    surface: PlaneSurface | SphereSurface | VariableTorus | ConeSurface
    truth: dict


def _centered_distance(grid: UniformGrid, center: tuple[float, ...]) -> FloatArray:
    return np.sqrt(sum((axis - c) ** 2 for axis, c in zip(grid.mesh(), center)))


def annulus_grid(
    points_per_axis: int = 50,
    outer_radius: float = np.pi / 2,
    hole_radius: float = 0.8,
    noise: float = 0.1,
    seed: int = 0,
) -> GridDataset:
    """Data on an annulus around (pi, pi); the hole and the exterior are unknown."""
    if not 0 < hole_radius < outer_radius:
        raise ConfigurationError("Annulus needs 0 < hole_radius < outer_radius")
    grid = UniformGrid(2, points_per_axis)
    radius = _centered_distance(grid, (np.pi, np.pi))
    mask = GridMask((radius >= hole_radius) & (radius <= outer_radius))
    return _grid_dataset(
        Shape.ANNULUS_GRID,
        grid,
        mask,
        noise,
        seed,
        {"outer_radius": outer_radius, "hole_radius": hole_radius},
    )


def disk_grid(
    points_per_axis: int = 40,
    hole_radius: float = 0.5,
    hole_center: tuple[float, float] = (np.pi, np.pi),
    noise: float = 0.01,
    seed: int = 0,
) -> GridDataset:
    """Data everywhere except a disk-shaped hole."""
    if hole_radius <= 0:
        raise ConfigurationError("Disk hole radius must be positive")
    grid = UniformGrid(2, points_per_axis)
    mask = GridMask(_centered_distance(grid, tuple(hole_center)) > hole_radius)
    return _grid_dataset(
        Shape.DISK_GRID,
        grid,
        mask,
        noise,
        seed,
        {"hole_radius": hole_radius, "hole_center": list(hole_center)},
    )


def _grid_dataset(
    shape: Shape, grid: UniformGrid, mask: GridMask, noise: float, seed: int, params: dict
) -> GridDataset:
    exact = GridFunction.from_function(grid, reciprocal_trig, GridMask.all_known(grid))
    clean = GridFunction(grid, np.where(mask.known, exact.values, np.nan), mask)
    data = add_uniform_noise(clean, noise, np.random.default_rng(seed))
    LOGGER.info(
        "Generated %s: %d known, %d unknown (noise %.3g, seed %d)",
        shape.value,
        mask.n_known,
        mask.n_unknown,
        noise,
        seed,
    )
    truth = {
        "shape": shape.value,
        "test_function": "reciprocal-trig",
        "points_per_axis": grid.points_per_axis,
        "box_origin": list(grid.box_origin),
        "box_edge": grid.box_edge,
        "noise": noise,
        "seed": seed,
        "known_points": mask.n_known,
        "unknown_points": mask.n_unknown,
        **params,
    }
    return GridDataset(name=shape.value, data=data, exact=exact, truth=truth)


def fibonacci_sphere(count: int) -> FloatArray:
    """Quasi-uniform points on the unit sphere (golden-angle spiral)."""
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    azimuth = np.pi * (1.0 + np.sqrt(5.0)) * i
    ring = np.sqrt(1.0 - z**2)
    return np.stack([ring * np.cos(azimuth), ring * np.sin(azimuth), z], axis=1)


def _cloud_noise(points: FloatArray, amplitude: float, rng: np.random.Generator) -> FloatArray:
    if amplitude <= 0:
        return points
    return points + rng.uniform(-amplitude, amplitude, size=points.shape)


def plane_cloud(
    spacing: float = 0.05,
    extent: float = 1.0,
    hole_radius: float = 0.2,
    slopes: tuple[float, float] = (0.3, -0.2),
    jitter: float = 0.2,
    noise: float = 0.0,
    seed: int = 0,
) -> CloudDataset:
    """Jittered samples of z = a x + b y over [-extent, extent]^2, central disk removed."""
    rng = np.random.default_rng(seed)
    axis = np.arange(-extent, extent + spacing / 2, spacing)
    xy = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    xy = xy + rng.uniform(-jitter * spacing, jitter * spacing, size=xy.shape)
    xy = xy[np.linalg.norm(xy, axis=1) > hole_radius]
    a, b = slopes
    points = np.column_stack([xy, a * xy[:, 0] + b * xy[:, 1]])
    normal = np.array([a, b, -1.0]) / np.sqrt(a * a + b * b + 1.0)
    surface = PlaneSurface(point=(0.0, 0.0, 0.0), normals=(tuple(normal),))
    params = {
        "spacing": spacing,
        "extent": extent,
        "hole_radius": hole_radius,
        "slopes": list(slopes),
        "jitter": jitter,
    }
    points = _cloud_noise(points, noise, rng)
    return _cloud_dataset(Shape.PLANE, points, 2, surface, noise, seed, params)


def sphere_cloud(
    count: int = 2000,
    cap_angle_deg: float = 20.0,
    noise: float = 0.0,
    seed: int = 0,
) -> CloudDataset:
    """Fibonacci samples of the unit sphere with a polar cap removed."""
    points = fibonacci_sphere(count)
    points = points[points[:, 2] < np.cos(np.deg2rad(cap_angle_deg))]
    points = _cloud_noise(points, noise, np.random.default_rng(seed))
    params = {"count": count, "cap_angle_deg": cap_angle_deg}
    return _cloud_dataset(Shape.SPHERE, points, 2, SphereSurface(), noise, seed, params)


def torus_cloud(
    spacing: float = 0.092,
    hole_radius: float = 0.25,
    jitter: float = 0.15,
    surface: VariableTorus | None = None,
    noise: float = 0.0,
    seed: int = 0,
) -> CloudDataset:
    """Quasi-uniform samples of a variable-radius torus with a ball around X(0, 0) removed.

    Rings of constant v are staggered; each ring holds a number of points
    proportional to its length so the spacing is roughly ``spacing``.
    """
    surface = surface or VariableTorus()
    rng = np.random.default_rng(seed)
    r0, big_r = surface.tube_radius, surface.major_radius
    rings = max(3, int(round(2 * np.pi * r0 / spacing)))
    params_u, params_v = [], []
    for j in range(rings):
        v = 2 * np.pi * j / rings
        ring_length = 2 * np.pi * (big_r + r0 * np.cos(v))
        count = max(3, int(round(ring_length / spacing)))
        u = 2 * np.pi * (np.arange(count) + 0.5 * (j % 2)) / count
        du = rng.uniform(-jitter, jitter, count) * spacing / (big_r + r0 * np.cos(v))
        dv = rng.uniform(-jitter, jitter, count) * spacing / r0
        params_u.append(u + du)
        params_v.append(v + dv)
    points = surface.point(np.concatenate(params_u), np.concatenate(params_v))
    hole_center = surface.point(0.0, 0.0)
    points = points[np.linalg.norm(points - hole_center, axis=1) > hole_radius]
    points = _cloud_noise(points, noise, rng)
    params = {
        "spacing": spacing,
        "hole_radius": hole_radius,
        "hole_center": hole_center.tolist(),
        "jitter": jitter,
    }
    return _cloud_dataset(Shape.TORUS, points, 2, surface, noise, seed, params)


def cone4d_cloud(
    levels: int = 16,
    height_range: tuple[float, float] = (0.5, 2.0),
    points_per_unit_level: int = 120,
    hole_radius: float = 0.3,
    noise: float = 0.0,
    seed: int = 0,
) -> CloudDataset:
    """Samples of the upper nappe of x1^2 + x2^2 + x3^2 = x4^2 (a 3-manifold in R^4).

    Each level x4 = c carries a Fibonacci sphere of radius c; a ball around
    the cone point above (c_mid, 0, 0) is removed.
    """
    low, high = height_range
    if not 0 < low < high:
        raise ConfigurationError("Cone height range must satisfy 0 < low < high")
    blocks = []
    for c in np.linspace(low, high, levels):
        count = max(8, int(round(points_per_unit_level * c * c)))
        blocks.append(np.column_stack([c * fibonacci_sphere(count), np.full(count, c)]))
    points = np.vstack(blocks)
    middle = (low + high) / 2
    hole_center = np.array([middle, 0.0, 0.0, middle])
    points = points[np.linalg.norm(points - hole_center, axis=1) > hole_radius]
    points = _cloud_noise(points, noise, np.random.default_rng(seed))
    params = {
        "levels": levels,
        "height_range": list(height_range),
        "points_per_unit_level": points_per_unit_level,
        "hole_radius": hole_radius,
        "hole_center": hole_center.tolist(),
    }
    return _cloud_dataset(Shape.CONE4D, points, 3, ConeSurface(), noise, seed, params)


def _cloud_dataset(
    shape: Shape,
    points: FloatArray,
    intrinsic_dim: int,
    surface: PlaneSurface | SphereSurface | VariableTorus | ConeSurface,
    noise: float,
    seed: int,
    params: dict,
) -> CloudDataset:
    cloud = PointCloud(points, intrinsic_dim)
    LOGGER.info(
        "Generated %s: %d samples in R^%d (noise %.3g, seed %d)",
        shape.value,
        len(cloud),
        cloud.ambient_dim,
        noise,
        seed,
    )
    truth = {
        "shape": shape.value,
        "intrinsic_dim": intrinsic_dim,
        "samples": len(cloud),
        "noise": noise,
        "seed": seed,
        "surface": surface.to_dict(),
        **params,
    }
    return CloudDataset(name=shape.value, cloud=cloud, surface=surface, truth=truth)


GENERATORS: dict[Shape, Callable[..., GridDataset | CloudDataset]] = {
    Shape.PLANE: plane_cloud,
    Shape.SPHERE: sphere_cloud,
    Shape.TORUS: torus_cloud,
    Shape.CONE4D: cone4d_cloud,
    Shape.ANNULUS_GRID: annulus_grid,
    Shape.DISK_GRID: disk_grid,
}


def generate_dataset(
    shape: Shape | str, params: dict | None = None, noise: float = 0.0, seed: int = 0
) -> GridDataset | CloudDataset:
    """Build a dataset by shape name.

    Args:
        shape: One of the Shape values
        params: Generator keyword arguments (hole placement included)
        noise: Uniform noise amplitude
        seed: Random seed

    Raises:
        ConfigurationError: On an unknown shape or parameter.
    """
    try:
        shape = Shape(shape)
    except ValueError:
        raise ConfigurationError(
            f"Unknown shape '{shape}'. Available: {', '.join(s.value for s in Shape)}"
        ) from None
    params = dict(params or {})
    for key in ("slopes", "height_range", "hole_center"):
        if key in params:
            params[key] = tuple(params[key])
    try:
        return GENERATORS[shape](noise=noise, seed=seed, **params)
    except TypeError as exc:
        raise ConfigurationError(f"Invalid parameters for {shape.value}: {exc}") from exc
