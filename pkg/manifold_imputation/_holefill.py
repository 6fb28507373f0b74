"""End-to-end hole filling for scattered samples of a manifold.

Pipeline:

1. detect_hole: flag samples lacking neighbours in some tangent direction,
   group them into rims and keep the largest rim that encloses a gap.
2. build_reference_plane: average the tangent frames of the rim samples into
   one plane through the projected hole centre and lay a uniform mesh over
   the cube R of edge 2 diam(B).
3. fill_manifold_hole: MMLS-project the admissible mesh nodes, impute each
   ambient coordinate over the mesh with a grid back-end and lift the result.

Mesh nodes are tagged ``known`` (projected from data) or ``imputed``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Protocol, Sequence

import numpy as np
from scipy import ndimage, sparse
from scipy.optimize import linprog
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist, squareform

from ._grid import GridFunction, GridMask, UniformGrid
from ._mmls import (
    MMLSConfig,
    PointCloud,
    TangentFrame,
    component_functions,
    fit_local_frame,
    project_many,
)
from ._spectral import DecayParams, impute_spectral
from ._types import Backend, BoolArray, FloatArray, IntArray, PointTag, WeightScheme
from ._utils import parallel_map, timed
from ._variational import VariationalConfig, impute_variational, summarize_patches
from .exceptions import (
    ComponentImputationError,
    ImputationError,
    MarginViolation,
    UnstablePlane,
)

LOGGER = logging.getLogger(__name__)


class Surface(Protocol):
    """Analytic surface used as ground truth."""

    name: str

    def distance(self, points: FloatArray) -> FloatArray: ...


@dataclass(frozen=True)
class HoleFillConfig:
    """Parameters of the hole-filling pipeline.

    Attributes:
        mmls: Projection parameters
        k: Half-order of the variational back-end
        backend: Grid back-end for the component functions
        gap_angle_deg: Angular gap (d = 2) that makes a sample a boundary point
        boundary_radius_factor: Boundary neighbourhood radius in units of h_est
        min_boundary_points: Smallest rim kept as a hole
        rim_link_factor: Rim samples (or their gap targets) closer than this many boundary
            radii belong to the same rim
        graph_neighbors: k of the k-nearest-neighbour graph for geodesic estimates
        admissibility_multiplier: Nodes within diam/2 + this * h_PA of the centre are unknown
        mesh_multiplier: Largest mesh spacing in units of h_PA
        min_mesh_factor: Smallest mesh spacing in units of h_PA
        max_plane_angle_deg: Largest angle between a rim frame and the averaged plane
        min_projector_gap: Smallest d-th / (d+1)-th eigenvalue gap of the averaged projector
        spectral: Decay parameters for the spectral back-end
    """

    mmls: MMLSConfig = field(default_factory=MMLSConfig)
    k: int = 3
    backend: Backend = Backend.VARIATIONAL
    gap_angle_deg: float = 90.0
    boundary_radius_factor: float = 2.0
    min_boundary_points: int = 5
    rim_link_factor: float = 2.0
    graph_neighbors: int = 8
    admissibility_multiplier: float = 1.0
    mesh_multiplier: float = 2.0
    min_mesh_factor: float = 0.5
    max_plane_angle_deg: float = 35.0
    min_projector_gap: float = 0.5
    spectral: DecayParams = field(default_factory=lambda: DecayParams(M=8, C_bound=1e-3))

    def __post_init__(self) -> None:
        object.__setattr__(self, "backend", Backend(self.backend))


@dataclass(frozen=True)
class HoleDescriptor:
    """Rim samples q_j, centre q~, diam(B) and the restricted filling distance h_PA."""

    boundary_indices: IntArray = field(repr=False)
    boundary_points: FloatArray = field(repr=False)
    center: FloatArray
    diameter: float
    restricted_filling_distance: float
    spacing: float = 0.0
    other_gaps: list[dict] = field(default_factory=list, repr=False)

    @classmethod
    def empty(cls, ambient_dim: int, spacing: float = 0.0) -> "HoleDescriptor":
        return cls(
            boundary_indices=np.zeros(0, dtype=int),
            boundary_points=np.zeros((0, ambient_dim)),
            center=np.full(ambient_dim, np.nan),
            diameter=0.0,
            restricted_filling_distance=0.0,
            spacing=spacing,
        )

    @property
    def found(self) -> bool:
        return self.boundary_indices.size > 0

    def to_dict(self) -> dict:
        h_pa = self.restricted_filling_distance
        return {
            "found": self.found,
            "boundary_points": int(self.boundary_indices.size),
            "center": self.center.tolist(),
            "diameter": self.diameter,
            "restricted_filling_distance": h_pa,
            "median_spacing": self.spacing,
            "diameter_over_h_PA": self.diameter / h_pa if h_pa > 0 else None,
            "other_gaps": self.other_gaps,
        }


@dataclass(frozen=True)
class ReferencePlane:
    """Averaged tangent plane through the projected hole centre, with its mesh over R."""

    frame: TangentFrame
    mesh: UniformGrid
    cube_edge: float
    max_frame_angle_deg: float
    projector_gap: float

    @property
    def spacing(self) -> float:
        return self.mesh.h

    def to_dict(self) -> dict:
        return {
            "origin": self.frame.origin.tolist(),
            "basis": self.frame.basis.tolist(),
            "cube_edge": self.cube_edge,
            "mesh_points_per_axis": self.mesh.points_per_axis,
            "mesh_spacing": self.spacing,
            "max_frame_angle_deg": self.max_frame_angle_deg,
            "projector_gap": self.projector_gap,
        }


@dataclass(frozen=True)
class HoleFillResult:
    """Completed mesh points (row-major over the mesh, dropped nodes omitted) with tags."""

    points: FloatArray = field(repr=False)
    tags: list[PointTag] = field(repr=False)
    hole: HoleDescriptor
    plane: ReferencePlane | None
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def filled(self) -> bool:
        return self.plane is not None

    def tagged(self, tag: PointTag) -> FloatArray:
        selected = np.array([t is tag for t in self.tags], dtype=bool)
        return self.points[selected] if selected.size else self.points[:0]


def knn_graph(cloud: PointCloud, neighbors: int = 8) -> sparse.csr_matrix:
    """Symmetric k-nearest-neighbour graph weighted by Euclidean distance."""
    k = min(neighbors, len(cloud) - 1)
    distances, indices = cloud.tree.query(cloud.points, k=k + 1)
    rows = np.repeat(np.arange(len(cloud)), k)
    graph = sparse.coo_matrix(
        (distances[:, 1:].ravel(), (rows, indices[:, 1:].ravel())),
        shape=(len(cloud), len(cloud)),
    ).tocsr()
    return graph.maximum(graph.T)


def knn_graph_geodesic(
    cloud: PointCloud, sources: Sequence[int], neighbors: int = 8
) -> FloatArray:
    """Graph shortest-path distances from ``sources`` to every sample (inf if disconnected)."""
    return dijkstra(knn_graph(cloud, neighbors), directed=False, indices=list(sources))


def _local_tangent(points: FloatArray, d: int) -> FloatArray:
    centered = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return vt[:d]


def _gap_direction(directions: FloatArray, gap_angle: float) -> FloatArray | None:
    """Unit tangent-coordinate direction of an empty sector, or None if surrounded."""
    d = directions.shape[1]
    if d == 1:
        signs = np.sign(directions[:, 0])
        if np.all(signs > 0):
            return np.array([-1.0])
        if np.all(signs < 0):
            return np.array([1.0])
        return None
    if d == 2:
        angles = np.sort(np.arctan2(directions[:, 1], directions[:, 0]))
        gaps = np.diff(np.concatenate([angles, angles[:1] + 2 * np.pi]))
        widest = int(np.argmax(gaps))
        if gaps[widest] <= gap_angle:
            return None
        bisector = angles[widest] + gaps[widest] / 2
        return np.array([np.cos(bisector), np.sin(bisector)])

    # empty half-space: maximise t subject to v.u_i + t <= 0, |v_j| <= 1
    units = directions / np.linalg.norm(directions, axis=1, keepdims=True)
    objective = np.zeros(d + 1)
    objective[-1] = -1.0
    constraints = np.hstack([units, np.ones((units.shape[0], 1))])
    bounds = [(-1.0, 1.0)] * d + [(None, 1.0)]
    solution = linprog(objective, A_ub=constraints, b_ub=np.zeros(len(units)), bounds=bounds)
    if not solution.success or solution.x[-1] <= 1e-9:
        return None
    v = solution.x[:d]
    return v / np.linalg.norm(v)


def boundary_candidates(
    cloud: PointCloud, radius: float, gap_angle_deg: float, workers: int | None = None
) -> tuple[IntArray, FloatArray]:
    """Samples with a directional gap among their neighbours, and the ambient gap directions."""
    d = cloud.intrinsic_dim
    gap_angle = np.deg2rad(gap_angle_deg)

    def inspect(i: int) -> FloatArray | None:
        idx = cloud.neighbors(cloud.points[i], radius)
        idx = idx[idx != i]
        if idx.size < d + 1:
            return None
        neighbors = cloud.points[idx]
        basis = _local_tangent(np.vstack([neighbors, cloud.points[i]]), d)
        direction = _gap_direction((neighbors - cloud.points[i]) @ basis.T, gap_angle)
        return None if direction is None else direction @ basis

    outcomes = parallel_map(inspect, range(len(cloud)), workers)
    flagged = np.array([i for i, o in enumerate(outcomes) if o is not None], dtype=int)
    directions = np.array([outcomes[i] for i in flagged]).reshape(-1, cloud.ambient_dim)
    return flagged, directions


def confirm_gaps(
    cloud: PointCloud, flagged: IntArray, directions: FloatArray, reach: float, clearance: float
) -> BoolArray:
    """Keep candidates whose gap is really empty.

    The point ``reach`` along the gap direction must have no sample within
    ``clearance``. A sector that only looks empty because a neighbour sits
    just outside the search radius fails this test.
    """
    if flagged.size == 0:
        return np.zeros(0, dtype=bool)
    targets = cloud.points[flagged] + reach * directions
    return cloud.nearest_distances(targets) > clearance


def restricted_filling_distance(cloud: PointCloud, region_sample: FloatArray) -> float:
    """max over region points of the distance to the nearest sample.

    Distances are measured on the k-nearest-neighbour graph of the samples with
    the region point added. Its shortest path to the nearest sample is the
    direct edge, so the graph distance is the ambient Euclidean nearest-sample
    distance and is computed through the KD-tree.
    """
    region_sample = np.atleast_2d(np.asarray(region_sample, dtype=float))
    if region_sample.size == 0:
        raise ValueError("Region sample must not be empty")
    return float(cloud.nearest_distances(region_sample).max())


def _rim_diameter(cloud: PointCloud, rim: IntArray, neighbors: int) -> float:
    """Chord diameter of a rim, raised to the graph estimate 2 * path / pi when larger."""
    points = cloud.points[rim]
    if rim.size < 2:
        return 0.0
    chords = squareform(pdist(points))
    i, j = np.unravel_index(np.argmax(chords), chords.shape)
    chord = float(chords[i, j])
    path = float(knn_graph_geodesic(cloud, [int(rim[i])], neighbors)[0, int(rim[j])])
    if not np.isfinite(path):
        return chord
    return max(chord, 2.0 * path / np.pi)


def _annulus_sample(
    cloud: PointCloud,
    center: FloatArray,
    rim_points: FloatArray,
    inner: float,
    outer: float,
    step: float,
    mmls: MMLSConfig,
) -> FloatArray:
    """Surface points over the annulus inner <= |t| <= outer around the hole centre."""
    d = cloud.intrinsic_dim
    basis = _local_tangent(rim_points, d)
    axis = np.arange(-outer, outer + step / 2, step)
    coords = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    radius = np.linalg.norm(coords, axis=1)
    coords = coords[(radius >= inner) & (radius <= outer)]
    batch = project_many(cloud, center + coords @ basis, mmls)
    return batch.points[batch.succeeded]


def _link_rims(
    points: FloatArray, directions: FloatArray, reach: float, link_radius: float
) -> tuple[int, IntArray]:
    """Connected components of boundary samples.

    Two samples are linked when they, or the points ``reach`` inside their
    gaps, lie within ``link_radius``. The inner points of one hole crowd
    together, so arcs of a sparsely flagged rim still join up.
    """
    adjacency = sparse.lil_matrix((len(points), len(points)))
    for cloud_points in (points, points + reach * directions):
        pairs = cKDTree(cloud_points).query_pairs(link_radius, output_type="ndarray")
        if len(pairs):
            adjacency[pairs[:, 0], pairs[:, 1]] = 1.0
    return connected_components(adjacency.tocsr(), directed=False)


def detect_hole(cloud: PointCloud, cfg: HoleFillConfig) -> HoleDescriptor:
    """Locate the largest gap in the sampling.

    Returns an empty descriptor when no rim of at least ``min_boundary_points``
    samples encloses a gap. Smaller or secondary gaps are listed in
    ``other_gaps``.
    """
    spacing = cloud.median_spacing()
    radius = cfg.boundary_radius_factor * spacing
    flagged, directions = boundary_candidates(cloud, radius, cfg.gap_angle_deg)
    confirmed = confirm_gaps(cloud, flagged, directions, radius, spacing)
    LOGGER.info(
        "Hole detection: %d boundary candidates, %d with an empty gap (h_est=%.4g)",
        flagged.size,
        int(confirmed.sum()),
        spacing,
    )
    flagged, directions = flagged[confirmed], directions[confirmed]
    if flagged.size == 0:
        return HoleDescriptor.empty(cloud.ambient_dim, spacing)

    count, labels = _link_rims(
        cloud.points[flagged], directions, radius, cfg.rim_link_factor * radius
    )

    rims = []
    for label in range(count):
        members = np.flatnonzero(labels == label)
        points = cloud.points[flagged[members]]
        centroid = points.mean(axis=0)
        # gaps of a hole rim face the rim's own centroid; an outer border faces away
        facing = np.einsum("ij,ij->i", directions[members], centroid - points)
        empty_centre = bool(cloud.nearest_distances(centroid[None, :])[0] > spacing)
        rims.append(
            {
                "members": flagged[members],
                "encloses": bool(np.mean(facing) > 0) and empty_centre,
                "center": centroid,
            }
        )

    holes = [
        r for r in rims if r["encloses"] and r["members"].size >= cfg.min_boundary_points
    ]
    holes.sort(key=lambda r: r["members"].size, reverse=True)
    if not holes:
        LOGGER.info("No enclosed gap with at least %d rim samples", cfg.min_boundary_points)
        return HoleDescriptor.empty(cloud.ambient_dim, spacing)

    main = holes[0]
    rim = np.sort(main["members"])
    rim_points = cloud.points[rim]
    center = rim_points.mean(axis=0)
    diameter = _rim_diameter(cloud, rim, cfg.graph_neighbors)

    region = _annulus_sample(
        cloud,
        center,
        rim_points,
        inner=diameter / 2 + spacing,
        outer=max(diameter, diameter / 2 + 2 * spacing),
        step=spacing / 3,
        mmls=cfg.mmls,
    )
    h_pa = restricted_filling_distance(cloud, region) if region.size else spacing

    other_gaps = [
        {
            "boundary_points": int(r["members"].size),
            "center": r["center"].tolist(),
            "diameter": _rim_diameter(cloud, np.sort(r["members"]), cfg.graph_neighbors),
        }
        for r in holes[1:]
    ]
    if other_gaps:
        LOGGER.info("Found %d further gaps; only the largest is filled", len(other_gaps))

    LOGGER.info(
        "Hole: %d rim samples, diam=%.4g, h_PA=%.4g", rim.size, diameter, h_pa
    )
    return HoleDescriptor(
        boundary_indices=rim,
        boundary_points=rim_points,
        center=center,
        diameter=diameter,
        restricted_filling_distance=h_pa,
        spacing=spacing,
        other_gaps=other_gaps,
    )


def _canonical_basis(plane_basis: FloatArray, center: FloatArray, rim: FloatArray) -> FloatArray:
    """Orthonormal in-plane basis fixed by the rim samples farthest from the centre."""
    order = np.argsort(-np.linalg.norm(rim - center, axis=1), kind="stable")
    projector = plane_basis.T @ plane_basis
    basis: list[FloatArray] = []
    for i in order:
        v = projector @ (rim[i] - center)
        for b in basis:
            v = v - (v @ b) * b
        norm = np.linalg.norm(v)
        if norm > 1e-8 * np.linalg.norm(rim[i] - center):
            basis.append(v / norm)
        if len(basis) == plane_basis.shape[0]:
            return np.array(basis)
    return plane_basis


def _choose_mesh(
    d: int, edge: float, footprint: float, h_pa: float, k: int, cfg: HoleFillConfig
) -> UniformGrid:
    """Coarsest centred mesh over R keeping k+1 node layers outside the footprint."""
    n_min = max(2, int(np.ceil(edge / (cfg.mesh_multiplier * h_pa))))
    n_max = int(np.floor(edge / (cfg.min_mesh_factor * h_pa)))
    for n in range(n_min, n_max + 1):
        step = edge / n
        axis = -edge / 2 + step / 2 + step * np.arange(n)
        inside = np.flatnonzero(np.abs(axis) <= footprint)
        if inside.size == 0:
            continue
        if inside.min() >= k + 1 and inside.max() <= n - k - 2:
            return UniformGrid(d, n, (-edge / 2 + step / 2,) * d, edge)
    raise MarginViolation(
        f"No mesh spacing in [{cfg.min_mesh_factor}, {cfg.mesh_multiplier}] x h_PA leaves "
        f"{k + 1} layers between the hole and the cube of edge {edge:.4g}; enlarge R",
        axis=0,
    )


def build_reference_plane(
    cloud: PointCloud, hole: HoleDescriptor, cfg: HoleFillConfig
) -> ReferencePlane:
    """Average the rim tangent frames and lay the imputation mesh.

    Raises:
        UnstablePlane: If the rim frames disagree beyond the configured tolerances.
        MarginViolation: If no admissible mesh spacing exists.
    """
    d = cloud.intrinsic_dim
    frames = parallel_map(lambda q: fit_local_frame(cloud, q, cfg.mmls), list(hole.boundary_points))
    projectors = np.mean([f.basis.T @ f.basis for f in frames], axis=0)
    eigenvalues, eigenvectors = np.linalg.eigh(projectors)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    plane_basis = eigenvectors[:, order[:d]].T
    gap = float(eigenvalues[d - 1] - (eigenvalues[d] if eigenvalues.size > d else 0.0))

    cosines = [np.linalg.svd(f.basis @ plane_basis.T, compute_uv=False).min() for f in frames]
    max_angle = float(np.rad2deg(np.arccos(np.clip(min(cosines), -1.0, 1.0))))
    if gap < cfg.min_projector_gap or max_angle > cfg.max_plane_angle_deg:
        raise UnstablePlane(
            f"Rim tangent planes disagree (max angle {max_angle:.1f} deg, projector gap "
            f"{gap:.3f}); the hole likely spans a region of high curvature"
        )

    anchor = np.mean([f.origin for f in frames], axis=0)
    center = anchor + (hole.center - anchor) @ plane_basis.T @ plane_basis
    basis = _canonical_basis(plane_basis, center, hole.boundary_points)
    frame = TangentFrame(origin=center, basis=basis)

    edge = 2.0 * hole.diameter
    footprint = hole.diameter / 2 + cfg.admissibility_multiplier * hole.restricted_filling_distance
    mesh = _choose_mesh(d, edge, footprint, hole.restricted_filling_distance, cfg.k, cfg)
    LOGGER.info(
        "Reference plane: max frame angle %.2f deg, mesh %d^%d with spacing %.4g (h_PA=%.4g)",
        max_angle,
        mesh.points_per_axis,
        d,
        mesh.h,
        hole.restricted_filling_distance,
    )
    return ReferencePlane(
        frame=frame,
        mesh=mesh,
        cube_edge=edge,
        max_frame_angle_deg=max_angle,
        projector_gap=gap,
    )


def admissible_nodes(mesh: UniformGrid, hole_radius: float) -> BoolArray:
    """Mesh nodes farther than ``hole_radius`` from the plane origin."""
    return np.linalg.norm(mesh.coordinates(), axis=1).reshape(mesh.shape) > hole_radius


def _axis_cross(dim: int, reach: int) -> BoolArray:
    """Structuring element: offsets along a single axis up to ``reach``."""
    cross = np.zeros((2 * reach + 1,) * dim, dtype=bool)
    for axis in range(dim):
        index = [reach] * dim
        index[axis] = slice(None)
        cross[tuple(index)] = True
    return cross


def detach_projection_failures(
    components: Sequence[GridFunction], admissible: BoolArray, frame: TangentFrame, k: int
) -> tuple[list[GridFunction], BoolArray]:
    """Take admissible nodes whose MMLS projection failed out of the variational solve.

    Such nodes sit far out in R, where the surface bends away from the plane.
    The variational functional only reads nodes on an axis line through an
    unknown node, at most 2k steps from it. Failed nodes outside that reach
    get their plane lift as a placeholder value and are dropped from the output.

    Returns:
        Components whose only unknowns are the inadmissible nodes, and the
        mask of dropped nodes.

    Raises:
        MarginViolation: If a failed node lies within reach of the hole stencils.
    """
    known = components[0].mask.known
    failed = admissible & ~known
    if not failed.any():
        return list(components), failed

    mesh = components[0].grid
    reach = ndimage.binary_dilation(~admissible, structure=_axis_cross(mesh.dim, 2 * k))
    blocking = failed & reach
    if blocking.any():
        raise MarginViolation(
            f"MMLS projection failed at {int(blocking.sum())} mesh nodes read by the hole "
            f"stencils; increase the neighbourhood radius",
            axis=0,
        )

    LOGGER.info(
        "Dropping %d mesh nodes whose projection failed away from the hole", int(failed.sum())
    )
    placeholder = frame.lift(mesh.coordinates())
    mask = GridMask(admissible)
    detached = [
        GridFunction(
            mesh, np.where(failed, placeholder[:, j].reshape(mesh.shape), gf.values), mask
        )
        for j, gf in enumerate(components)
    ]
    return detached, failed


def _impute_component(
    j: int, gf: GridFunction, cfg: HoleFillConfig
) -> tuple[GridFunction, dict]:
    try:
        if cfg.backend is Backend.SPECTRAL:
            completed, report = impute_spectral(gf, cfg.spectral, WeightScheme.HYPERBOLIC_CORNER)
            return completed, report.to_dict()
        completed, reports = impute_variational(gf, VariationalConfig(k=cfg.k), workers=1)
        return completed, summarize_patches(reports)
    except MarginViolation as exc:
        raise ComponentImputationError(
            f"Component {j}: {exc}; enlarge the reference cube R or refine the mesh", component=j
        ) from exc
    except ImputationError as exc:
        raise ComponentImputationError(f"Component {j}: {exc}", component=j) from exc


def fill_manifold_hole(
    cloud: PointCloud, cfg: HoleFillConfig, truth: Surface | None = None
) -> HoleFillResult:
    """Detect, project and fill the largest hole of a point cloud.

    When no hole is found the result carries no points and ``filled`` is False.

    Raises:
        UnstablePlane: From build_reference_plane.
        MarginViolation: If no mesh spacing fits the hole inside R.
        ComponentImputationError: If a component grid cannot be imputed.
    """
    timings: dict[str, float] = {}
    with timed("detect_hole", timings):
        hole = detect_hole(cloud, cfg)
    if not hole.found:
        LOGGER.info("No hole detected; nothing to fill")
        return HoleFillResult(
            points=np.zeros((0, cloud.ambient_dim)),
            tags=[],
            hole=hole,
            plane=None,
            diagnostics={"hole": hole.to_dict(), "notice": "no hole detected", "timings": timings},
        )

    with timed("reference_plane", timings):
        plane = build_reference_plane(cloud, hole, cfg)

    h_pa = hole.restricted_filling_distance
    hole_radius = hole.diameter / 2 + cfg.admissibility_multiplier * h_pa
    admissible = admissible_nodes(plane.mesh, hole_radius)
    with timed("projection", timings):
        components, batch = component_functions(
            plane.frame, plane.mesh, cloud, cfg.mmls, admissible
        )
    known = components[0].mask.known
    dropped = np.zeros(known.shape, dtype=bool)
    if cfg.backend is Backend.VARIATIONAL:
        components, dropped = detach_projection_failures(
            components, admissible, plane.frame, cfg.k
        )
        known = known | dropped

    with timed("imputation", timings):
        outcomes = parallel_map(
            lambda item: _impute_component(item[0], item[1], cfg), list(enumerate(components))
        )

    kept = ~dropped.ravel()
    points = np.stack([completed.array().ravel()[kept] for completed, _ in outcomes], axis=1)
    tags = [PointTag.KNOWN if flag else PointTag.IMPUTED for flag in known.ravel()[kept]]
    known = known.ravel()[kept]
    diagnostics: dict = {
        "hole": hole.to_dict(),
        "plane": plane.to_dict(),
        "backend": cfg.backend.value,
        "k": cfg.k,
        "admissible_nodes": int(admissible.sum()),
        "inadmissible_nodes": int(admissible.size - admissible.sum()),
        "projection_failures": len(batch.failures),
        "dropped_nodes": int(dropped.sum()),
        "known_points": int(known.sum()),
        "imputed_points": int(known.size - known.sum()),
        "components": [report for _, report in outcomes],
        "timings": timings,
    }
    if truth is not None:
        distances = truth.distance(points)
        flat_known = known.ravel()
        diagnostics["truth"] = {
            "surface": truth.name,
            "metric": "euclidean point-to-surface",
            "max_known_distance": float(distances[flat_known].max(initial=0.0)),
            "max_imputed_distance": float(distances[~flat_known].max(initial=0.0)),
        }
        LOGGER.info(
            "Distance to %s: known %.3e, imputed %.3e",
            truth.name,
            diagnostics["truth"]["max_known_distance"],
            diagnostics["truth"]["max_imputed_distance"],
        )
    return HoleFillResult(points=points, tags=tags, hole=hole, plane=plane, diagnostics=diagnostics)


@dataclass(frozen=True)
class CrossSection:
    level: float
    points: FloatArray = field(repr=False)
    tags: list[PointTag] = field(repr=False)
    max_error: float = 0.0
    max_constraint_residual: float = 0.0
    solver: list[dict] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload.pop("points")
        payload.pop("tags")
        payload["imputed_points"] = sum(t is PointTag.IMPUTED for t in self.tags)
        return payload


def cross_section_demo(
    levels: Sequence[float] = (0.5, 1.0, 1.5, 2.0),
    points_per_axis: int = 41,
    hole_radius: float = 6.0,
    k: int = 2,
) -> list[CrossSection]:
    """Fill a shared central hole on sections of the cone x1^2 + x2^2 + x3^2 = x4^2.

    Each section x4 = c is the sphere of radius |c|, sampled on a polar/azimuth
    grid patch away from the poles. The hole is a disk of ``hole_radius``
    grid steps around the patch centre. Level 0 degenerates to a point and is
    skipped.
    """
    grid = UniformGrid(2, points_per_axis, (np.pi / 4, 0.0), np.pi / 2)
    offsets = np.indices(grid.shape) - points_per_axis // 2
    known = np.sqrt(np.sum(offsets**2, axis=0)) > hole_radius
    mask = GridMask(known)
    theta, phi = grid.mesh()
    unit = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))

    sections = []
    for level in levels:
        if abs(level) < 1e-12:
            LOGGER.warning("Skipping cross-section x4 = 0: the section degenerates to a point")
            continue
        radius = abs(level)
        exact = [radius * u for u in unit]
        completed = []
        reports = []
        for component in exact:
            filled, diags = impute_variational(
                GridFunction(grid, np.where(known, component, np.nan), mask),
                VariationalConfig(k=k),
                workers=1,
            )
            completed.append(filled.array())
            reports.append(summarize_patches(diags))

        stacked = np.stack([c.ravel() for c in completed] + [np.full(grid.size, level)], axis=1)
        hole = ~known.ravel()
        errors = np.abs(np.stack([c.ravel() for c in completed], axis=1) - np.stack(
            [e.ravel() for e in exact], axis=1
        ))[hole]
        residual = np.abs(np.sum(stacked[hole, :3] ** 2, axis=1) - level**2)
        sections.append(
            CrossSection(
                level=float(level),
                points=stacked,
                tags=[PointTag.IMPUTED if h else PointTag.KNOWN for h in hole],
                max_error=float(errors.max(initial=0.0)),
                max_constraint_residual=float(residual.max(initial=0.0)),
                solver=reports,
            )
        )
        LOGGER.info(
            "Cross-section x4=%.3g: max error %.3e, constraint residual %.3e",
            level,
            sections[-1].max_error,
            sections[-1].max_constraint_residual,
        )
    return sections
