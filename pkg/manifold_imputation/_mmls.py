"""Manifold moving least-squares (MMLS) projection.

A query x is projected in two stages:

1. Local frame: a d-dimensional affine subspace H fitted to the neighbours
   of x by weighted PCA, iterated until x projects onto the frame origin q.
2. Local polynomial: the ambient offsets of the neighbours from q are fitted
   by a weighted polynomial of total degree m in the frame coordinates; the
   projection of x is q plus the polynomial's value at the origin.

Weights are Gaussian, theta(r) = exp(-r^2 / sigma^2), truncated to 0 beyond
the neighbourhood radius rho. Frame coordinates are divided by rho before
building the Vandermonde matrix.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import comb

from ._grid import GridFunction, GridMask, UniformGrid
from ._linalg import LeastSquaresProblem, lsq_solve
from ._types import BoolArray, FloatArray, IntArray
from ._utils import parallel_map
from .exceptions import DegenerateFit, ImputationError, SamplingDeficiency

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class PointCloud:
    """Samples of a d-dimensional manifold in R^n, with a KD-tree for neighbour queries."""

    points: FloatArray = field(repr=False)
    intrinsic_dim: int = 2
    tree: cKDTree = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float, copy=True)
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError(f"Point cloud must be a non-empty (m, n) array, got {points.shape}")
        if not 1 <= self.intrinsic_dim < points.shape[1]:
            raise ValueError(
                f"Intrinsic dimension {self.intrinsic_dim} must be in [1, {points.shape[1] - 1}]"
            )
        if not np.all(np.isfinite(points)):
            raise ValueError("Point cloud contains non-finite coordinates")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "tree", cKDTree(points))

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def neighbors(self, x: FloatArray, radius: float) -> IntArray:
        """Indices of points within ``radius`` of x, sorted."""
        return np.sort(np.asarray(self.tree.query_ball_point(np.asarray(x, float), radius), int))

    def nearest_distances(self, queries: FloatArray) -> FloatArray:
        """Distance from each query to its nearest sample."""
        return self.tree.query(np.atleast_2d(queries), k=1)[0]

    def median_spacing(self) -> float:
        """Median nearest-neighbour distance between samples."""
        distances, _ = self.tree.query(self.points, k=2)
        return float(np.median(distances[:, 1]))

    def without(self, drop: BoolArray) -> "PointCloud":
        return PointCloud(self.points[~np.asarray(drop, bool)], self.intrinsic_dim)

    def transformed(self, rotation: FloatArray, translation: FloatArray) -> "PointCloud":
        return PointCloud(self.points @ np.asarray(rotation).T + translation, self.intrinsic_dim)


@dataclass(frozen=True)
class MMLSConfig:
    """Polynomial degree, Gaussian scale sigma, radius rho and frame iteration controls."""

    degree: int = 2
    neighborhood_radius: float = 0.3
    weight_scale: float | None = None
    max_iterations: int = 50
    frame_tolerance: float = 1e-10
    eigengap_tolerance: float = 1e-2

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise ValueError(f"Polynomial degree must be >= 1, got {self.degree}")
        if not self.neighborhood_radius > 0:
            raise ValueError(
                f"Neighbourhood radius must be positive, got {self.neighborhood_radius}"
            )
        if self.weight_scale is not None and not self.weight_scale > 0:
            raise ValueError(f"Weight scale must be positive, got {self.weight_scale}")

    @property
    def sigma(self) -> float:
        return self.weight_scale if self.weight_scale is not None else self.neighborhood_radius / 2

    def weights(self, distances: FloatArray) -> FloatArray:
        distances = np.asarray(distances, dtype=float)
        return np.where(
            distances <= self.neighborhood_radius, np.exp(-((distances / self.sigma) ** 2)), 0.0
        )


@dataclass(frozen=True)
class TangentFrame:
    """Origin plus orthonormal basis (rows) of a local affine subspace."""

    origin: FloatArray
    basis: FloatArray
    eigenvalues: FloatArray = field(default_factory=lambda: np.zeros(0), repr=False)
    iterations: int = 0
    ill_defined: bool = False

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def normal_basis(self) -> FloatArray:
        """Orthonormal rows spanning the complement of the basis."""
        _, _, vt = np.linalg.svd(self.basis, full_matrices=True)
        return vt[self.dim :]

    def coordinates(self, points: FloatArray) -> FloatArray:
        """Frame coordinates of ambient points."""
        return (np.atleast_2d(points) - self.origin) @ self.basis.T

    def lift(self, coordinates: FloatArray) -> FloatArray:
        """Ambient points of frame coordinates."""
        return self.origin + np.atleast_2d(coordinates) @ self.basis

    def project(self, points: FloatArray) -> FloatArray:
        """Orthogonal projection onto the affine subspace."""
        return self.lift(self.coordinates(points))


def _weighted_pca(
    points: FloatArray, weights: FloatArray, d: int
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Weighted mean, top-d eigenvectors (rows) and all eigenvalues (descending)."""
    total = weights.sum()
    mean = weights @ points / total
    centered = points - mean
    covariance = (centered * weights[:, None]).T @ centered / total
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1]
    return mean, eigenvectors[:, order[:d]].T, eigenvalues[order]


def fit_local_frame(cloud: PointCloud, x: FloatArray, cfg: MMLSConfig) -> TangentFrame:
    """Weighted affine frame H_x whose origin is the projection of x onto it.

    Raises:
        SamplingDeficiency: If fewer than d+1 affinely independent samples lie within rho.
    """
    x = np.asarray(x, dtype=float)
    d = cloud.intrinsic_dim
    origin = x
    basis = eigenvalues = None
    iteration = 0
    for iteration in range(1, cfg.max_iterations + 1):
        idx = cloud.neighbors(origin, cfg.neighborhood_radius)
        if idx.size < d + 1:
            raise SamplingDeficiency(
                f"Only {idx.size} samples within radius {cfg.neighborhood_radius} of the query; "
                f"need at least {d + 1}"
            )
        neighbors = cloud.points[idx]
        weights = cfg.weights(np.linalg.norm(neighbors - origin, axis=1))
        mean, basis, eigenvalues = _weighted_pca(neighbors, weights, d)
        if eigenvalues[d - 1] <= 1e-14 * max(eigenvalues[0], 1e-300):
            raise SamplingDeficiency(
                f"Neighbours of the query span fewer than {d} dimensions"
            )

        new_origin = mean + (x - mean) @ basis.T @ basis
        moved = float(np.linalg.norm(new_origin - origin))
        origin = new_origin
        if moved < cfg.frame_tolerance:
            break
    else:
        LOGGER.debug("Frame iteration stopped after %d steps", cfg.max_iterations)

    gap = 1.0
    if eigenvalues.size > d:
        gap = (eigenvalues[d - 1] - eigenvalues[d]) / eigenvalues[d - 1]
    ill_defined = bool(gap < cfg.eigengap_tolerance)
    if ill_defined:
        LOGGER.warning("Tangent space ill defined near %s: relative eigen-gap %.2e", origin, gap)

    return TangentFrame(
        origin=origin,
        basis=basis,
        eigenvalues=eigenvalues,
        iterations=iteration,
        ill_defined=ill_defined,
    )


def monomial_exponents(dim: int, degree: int) -> IntArray:
    """Exponents of all monomials of total degree <= ``degree``, constant first."""
    exponents = [
        e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) <= degree
    ]
    exponents.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
    return np.array(exponents, dtype=int)


def vandermonde(coordinates: FloatArray, exponents: IntArray) -> FloatArray:
    return np.prod(coordinates[:, None, :] ** exponents[None, :, :], axis=2)


def mmls_project(cloud: PointCloud, x: FloatArray, cfg: MMLSConfig) -> FloatArray:
    """Project x onto the MMLS approximation of the sampled manifold.

    Raises:
        SamplingDeficiency: From the frame stage.
        DegenerateFit: If the weighted Vandermonde matrix is rank deficient.
    """
    frame = fit_local_frame(cloud, x, cfg)
    return _polynomial_value(cloud, frame, cfg)


def _polynomial_value(cloud: PointCloud, frame: TangentFrame, cfg: MMLSConfig) -> FloatArray:
    idx = cloud.neighbors(frame.origin, cfg.neighborhood_radius)
    offsets = cloud.points[idx] - frame.origin
    weights = cfg.weights(np.linalg.norm(offsets, axis=1))
    positive = weights > 0
    exponents = monomial_exponents(frame.dim, cfg.degree)
    monomials = int(comb(cfg.degree + frame.dim, frame.dim, exact=True))
    if positive.sum() < monomials:
        raise DegenerateFit(
            f"{int(positive.sum())} weighted neighbours cannot determine {monomials} monomials "
            f"of degree {cfg.degree}",
            monomials=monomials,
            neighbors=int(positive.sum()),
        )

    coords = offsets[positive] @ frame.basis.T / cfg.neighborhood_radius
    root_w = np.sqrt(weights[positive])
    design = vandermonde(coords, exponents) * root_w[:, None]
    result = lsq_solve(LeastSquaresProblem(design, offsets[positive] * root_w[:, None], 1e-13))
    if result.rank < monomials:
        raise DegenerateFit(
            f"Local Vandermonde matrix has rank {result.rank} < {monomials} monomials "
            f"({int(positive.sum())} neighbours)",
            monomials=monomials,
            neighbors=int(positive.sum()),
        )
    return frame.origin + result.solution[0]


@dataclass(frozen=True)
class BatchProjection:
    """Projected points (NaN rows for failures) and the failure messages by query index."""

    points: FloatArray
    failures: dict[int, str]

    @property
    def succeeded(self) -> BoolArray:
        return ~np.isnan(self.points).any(axis=1)


def project_many(
    cloud: PointCloud, queries: FloatArray, cfg: MMLSConfig, workers: int | None = None
) -> BatchProjection:
    """Project a batch of queries concurrently; per-query errors are collected, not raised."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))

    def project_one(x: FloatArray) -> FloatArray | str:
        try:
            return mmls_project(cloud, x, cfg)
        except ImputationError as exc:
            return f"{type(exc).__name__}: {exc}"

    outcomes = parallel_map(project_one, list(queries), workers)
    points = np.full(queries.shape[:1] + (cloud.ambient_dim,), np.nan)
    failures: dict[int, str] = {}
    for i, outcome in enumerate(outcomes):
        if isinstance(outcome, str):
            failures[i] = outcome
        else:
            points[i] = outcome
    if failures:
        LOGGER.warning("%d of %d MMLS projections failed", len(failures), len(queries))
    return BatchProjection(points=points, failures=failures)


def component_functions(
    frame: TangentFrame,
    mesh: UniformGrid,
    cloud: PointCloud,
    cfg: MMLSConfig,
    admissible: BoolArray | None = None,
    workers: int | None = None,
) -> tuple[list[GridFunction], BatchProjection]:
    """n grid functions over a mesh in frame coordinates, one per ambient coordinate.

    Mesh nodes outside ``admissible`` or whose projection fails are unknown
    in every component.
    """
    admissible = (
        np.ones(mesh.shape, dtype=bool) if admissible is None else np.asarray(admissible, bool)
    )
    nodes = frame.lift(mesh.coordinates())
    flat_admissible = admissible.ravel()
    batch = project_many(cloud, nodes[flat_admissible], cfg, workers)

    values = np.full((mesh.size, cloud.ambient_dim), np.nan)
    values[flat_admissible] = batch.points
    known = ~np.isnan(values).any(axis=1)
    if not known.any():
        LOGGER.warning("No mesh node is admissible; every component is fully unknown")

    mask = GridMask(known.reshape(mesh.shape))
    components = [
        GridFunction(mesh, values[:, j].reshape(mesh.shape), mask)
        for j in range(cloud.ambient_dim)
    ]
    return components, batch
