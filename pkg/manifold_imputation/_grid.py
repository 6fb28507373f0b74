"""Uniform grids, masks, grid functions and difference stencils.

Everything here is shared by the spectral and the variational back-ends:

- UniformGrid: N^d points on the box ``origin + [0, edge)^d``
- GridMask: known/unknown partition of the grid points
- GridFunction: values on a grid together with a mask
- IndexRectangle: an axis-aligned block of grid indices (inclusive bounds)
- Central and forward difference stencils

Values are stored as numpy arrays of shape ``(N,) * d`` in row-major order,
so the last index varies fastest. Unknown values are tracked by the mask; the
stored value at an unknown point is NaN and is never read by the library.

Usage:
    grid = UniformGrid(dim=2, points_per_axis=40)
    mask = GridMask(np.hypot(*grid.mesh()) > 0.5)
    gf = GridFunction.from_function(grid, lambda x, y: np.sin(x) * y, mask)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import ndimage
from scipy.special import comb

from ._types import DEFAULT_BOX_EDGE, BoolArray, FloatArray, IntArray
from .exceptions import (
    EmptyHoleError,
    GridShapeError,
    MarginViolation,
    StencilSupportError,
    UnknownValueError,
)

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class UniformGrid:
    """N^d equispaced points on ``box_origin + [0, box_edge)^d``.

    Grid point at multi-index n is ``box_origin + h * n`` with
    ``h = box_edge / N``. The same N is used on every axis.
    """

    dim: int
    points_per_axis: int
    box_origin: tuple[float, ...] = ()
    box_edge: float = DEFAULT_BOX_EDGE

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise GridShapeError(f"Grid dimension must be >= 1, got {self.dim}")
        if self.points_per_axis < 2:
            raise GridShapeError(f"Need at least 2 points per axis, got {self.points_per_axis}")
        if not self.box_edge > 0:
            raise GridShapeError(f"Box edge must be positive, got {self.box_edge}")
        origin = tuple(float(v) for v in self.box_origin) or (0.0,) * self.dim
        if len(origin) != self.dim:
            raise GridShapeError(
                f"Box origin has {len(origin)} components for a {self.dim}-dimensional grid"
            )
        object.__setattr__(self, "box_origin", origin)

    @classmethod
    def from_shape(
        cls,
        shape: Sequence[int],
        box_origin: Sequence[float] = (),
        box_edge: float = DEFAULT_BOX_EDGE,
    ) -> "UniformGrid":
        """Build a grid from an array shape, rejecting anisotropic shapes."""
        shape = tuple(int(s) for s in shape)
        if not shape or len(set(shape)) != 1:
            raise GridShapeError(f"Grids must have the same number of points per axis, got {shape}")
        return cls(len(shape), shape[0], tuple(box_origin), box_edge)

    @property
    def h(self) -> float:
        """Mesh size."""
        return self.box_edge / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    def point(self, index: Sequence[int]) -> FloatArray:
        """Coordinates of the grid point at a multi-index."""
        return np.asarray(self.box_origin) + self.h * np.asarray(index, dtype=float)

    def axis(self, j: int) -> FloatArray:
        """1D coordinates along axis j."""
        return self.box_origin[j] + self.h * np.arange(self.points_per_axis)

    def mesh(self) -> tuple[FloatArray, ...]:
        """Coordinate arrays of shape ``self.shape``, one per axis (ij indexing)."""
        return tuple(np.meshgrid(*(self.axis(j) for j in range(self.dim)), indexing="ij"))

    def coordinates(self) -> FloatArray:
        """All grid points as an (N^d, d) array in row-major order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def indices(self) -> IntArray:
        """All multi-indices as an (N^d, d) array in row-major order."""
        return np.indices(self.shape).reshape(self.dim, -1).T


@dataclass(frozen=True)
class GridMask:
    """Known/unknown partition of a grid. ``known[n]`` is True where a value is prescribed."""

    known: BoolArray

    def __post_init__(self) -> None:
        known = np.array(self.known, dtype=bool, copy=True)
        known.setflags(write=False)
        object.__setattr__(self, "known", known)

    @classmethod
    def all_known(cls, grid: UniformGrid) -> "GridMask":
        return cls(np.ones(grid.shape, dtype=bool))

    @property
    def unknown(self) -> BoolArray:
        return ~self.known

    @property
    def n_known(self) -> int:
        return int(self.known.sum())

    @property
    def n_unknown(self) -> int:
        return int(self.known.size - self.known.sum())

    def unknown_indices(self) -> IntArray:
        """Multi-indices of unknown points, (|Y|, d), row-major order."""
        return np.argwhere(~self.known)

    def known_indices(self) -> IntArray:
        return np.argwhere(self.known)

    def check_grid(self, grid: UniformGrid) -> None:
        if self.known.shape != grid.shape:
            raise GridShapeError(f"Mask shape {self.known.shape} does not match grid {grid.shape}")


@dataclass(frozen=True)
class IndexRectangle:
    """Axis-aligned block of grid indices with inclusive bounds."""

    lower: tuple[int, ...]
    upper: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lower, self.upper))

    @property
    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(a, b + 1) for a, b in zip(self.lower, self.upper))

    def inset(self, k: int) -> "IndexRectangle":
        """Points at least k steps from every face (may be empty)."""
        return IndexRectangle(
            tuple(a + k for a in self.lower), tuple(b - k for b in self.upper)
        )

    def is_empty(self) -> bool:
        return any(b < a for a, b in zip(self.lower, self.upper))

    def contains(self, index: Sequence[int]) -> bool:
        return all(a <= i <= b for i, a, b in zip(index, self.lower, self.upper))

    def intersects(self, other: "IndexRectangle") -> bool:
        return all(
            a1 <= b2 and a2 <= b1
            for a1, b1, a2, b2 in zip(self.lower, self.upper, other.lower, other.upper)
        )

    def shifted(self, offset: Sequence[int]) -> "IndexRectangle":
        return IndexRectangle(
            tuple(a + o for a, o in zip(self.lower, offset)),
            tuple(b + o for b, o in zip(self.upper, offset)),
        )

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        if self.is_empty():
            return iter(())
        ranges = np.indices(self.shape).reshape(self.dim, -1).T + np.asarray(self.lower)
        return (tuple(int(v) for v in row) for row in ranges)


@dataclass(frozen=True)
class GridFunction:
    """Values on a uniform grid with a known/unknown mask.

    Reading an unknown value raises UnknownValueError. Instances are
    immutable; use :meth:`completed` or :meth:`with_values` to derive new ones.
    """

    grid: UniformGrid
    values: FloatArray = field(repr=False)
    mask: GridMask = field(repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float, copy=True)
        if values.shape != self.grid.shape:
            raise GridShapeError(
                f"Values shape {values.shape} does not match grid {self.grid.shape}"
            )
        self.mask.check_grid(self.grid)
        values[self.mask.unknown] = np.nan
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(
        cls,
        grid: UniformGrid,
        func: Callable[..., FloatArray],
        mask: GridMask | None = None,
    ) -> "GridFunction":
        """Sample ``func(x_0, ..., x_{d-1})`` (vectorized) on the grid."""
        values = np.broadcast_to(np.asarray(func(*grid.mesh()), dtype=float), grid.shape)
        return cls(grid, values, mask if mask is not None else GridMask.all_known(grid))

    @property
    def is_complete(self) -> bool:
        return self.mask.n_unknown == 0

    def value(self, index: Sequence[int]) -> float:
        """Value at a multi-index; unknown points raise."""
        index = tuple(int(i) for i in index)
        if not self.mask.known[index]:
            raise UnknownValueError(f"Value at {index} is unknown")
        return float(self.values[index])

    def array(self) -> FloatArray:
        """Full value array; only defined once every point is known."""
        if not self.is_complete:
            raise UnknownValueError(
                f"{self.mask.n_unknown} grid values are still unknown; impute them first"
            )
        return self.values

    def known_values(self) -> FloatArray:
        """Values on X in row-major order."""
        return self.values[self.mask.known]

    def with_values(self, values: FloatArray, mask: GridMask | None = None) -> "GridFunction":
        return GridFunction(self.grid, values, mask if mask is not None else self.mask)

    def completed(self, values_on_unknown: FloatArray) -> "GridFunction":
        """Fill the unknown points (row-major order) and return a fully known function.

        Values on X are copied unchanged.
        """
        return self.filled(self.mask.unknown_indices(), values_on_unknown)

    def filled(self, indices: IntArray, new_values: FloatArray) -> "GridFunction":
        """Mark the given unknown multi-indices known with the given values."""
        indices = np.asarray(indices, dtype=int).reshape(-1, self.grid.dim)
        new_values = np.asarray(new_values, dtype=float).ravel()
        if new_values.size != indices.shape[0]:
            raise GridShapeError(
                f"Expected {indices.shape[0]} imputed values, got {new_values.size}"
            )
        if not np.all(np.isfinite(new_values)):
            raise GridShapeError("Imputed values must be finite")
        target = tuple(indices.T)
        if np.any(self.mask.known[target]):
            raise GridShapeError("Only unknown grid points can be filled")
        values = np.array(self.values)
        known = np.array(self.mask.known)
        values[target] = new_values
        known[target] = True
        return GridFunction(self.grid, values, GridMask(known))

    def restrict(self, rectangle: IndexRectangle) -> "GridFunction":
        """Sub-grid function over an index rectangle (must be a cube)."""
        sub_shape = rectangle.shape
        grid = UniformGrid.from_shape(
            sub_shape, self.grid.point(rectangle.lower), self.grid.h * sub_shape[0]
        )
        return GridFunction(
            grid, self.values[rectangle.slices], GridMask(self.mask.known[rectangle.slices])
        )


@dataclass(frozen=True)
class DifferenceStencil:
    """Centered 2k-th order difference stencil (alternating binomial row)."""

    order: int
    coefficients: tuple[int, ...]

    @property
    def half_width(self) -> int:
        return self.order // 2


def central_stencil(k: int) -> DifferenceStencil:
    """Coefficients (-1)^j C(2k, j), j = 0..2k, of the centered Δ^{2k}."""
    if k < 1:
        raise ValueError(f"Stencil half-order must be >= 1, got {k}")
    coeffs = tuple(int((-1) ** j * comb(2 * k, j, exact=True)) for j in range(2 * k + 1))
    return DifferenceStencil(order=2 * k, coefficients=coeffs)


def forward_coefficients(m: int) -> FloatArray:
    """Forward difference weights: Δ^m f(n) = Σ_o (-1)^(m-o) C(m, o) f(n+o)."""
    return np.array([(-1) ** (m - o) * comb(m, o, exact=True) for o in range(m + 1)], dtype=float)


def apply_central_difference(values: Sequence[float], k: int, position: int) -> float:
    """Evaluate Σ_j (-1)^j C(2k,j) values[position - k + j].

    Raises:
        StencilSupportError: If the stencil does not fit inside ``values``.
    """
    values = np.asarray(values, dtype=float)
    if position - k < 0 or position + k >= values.size:
        raise StencilSupportError(
            f"Stencil of half-width {k} at position {position} leaves a sequence of length "
            f"{values.size}"
        )
    coeffs = np.asarray(central_stencil(k).coefficients, dtype=float)
    return float(coeffs @ values[position - k : position + k + 1])


def mixed_divided_difference(
    gf: GridFunction, order_per_axis: int, point: Sequence[int], periodic: bool = True
) -> float:
    """(Δ_1^m ... Δ_d^m f)(point) / h^{dm} with forward differences.

    With ``periodic`` the stencil wraps around the grid (spectral setting);
    otherwise a stencil leaving the grid raises StencilSupportError.
    """
    m = order_per_axis
    grid = gf.grid
    point = np.asarray(point, dtype=int)
    if not periodic and np.any(point + m >= grid.points_per_axis):
        raise StencilSupportError(f"Forward stencil of width {m} at {tuple(point)} leaves the grid")

    weights = forward_coefficients(m)
    total = 0.0
    for offsets in np.ndindex(*((m + 1,) * grid.dim)):
        index = (point + np.asarray(offsets)) % grid.points_per_axis
        total += np.prod(weights[list(offsets)]) * gf.value(index)
    return total / grid.h ** (grid.dim * m)


def mixed_divided_difference_field(values: FloatArray, order_per_axis: int, h: float) -> FloatArray:
    """Periodic mixed forward divided difference at every grid point (real or complex)."""
    result = np.asarray(values)
    if not np.iscomplexobj(result):
        result = result.astype(float)
    weights = forward_coefficients(order_per_axis)
    for axis in range(result.ndim):
        result = sum(w * np.roll(result, -o, axis=axis) for o, w in enumerate(weights))
    return result / h ** (result.ndim * order_per_axis)


def bounding_patch(mask: GridMask, k: int) -> IndexRectangle:
    """Minimal rectangle keeping every unknown point more than k steps from its faces.

    The rectangle extends k+1 layers beyond the bounding box of the unknown set,
    so every Δ^{2k} stencil centred in its k-inset lies inside it.

    Raises:
        EmptyHoleError: If the mask has no unknown points.
        MarginViolation: If the rectangle would leave the grid.
    """
    unknown = mask.unknown_indices()
    if unknown.size == 0:
        raise EmptyHoleError("Mask has no unknown points")

    shape = mask.known.shape
    lower = unknown.min(axis=0) - (k + 1)
    upper = unknown.max(axis=0) + (k + 1)
    for axis, (a, b) in enumerate(zip(lower, upper)):
        if a < 0 or b > shape[axis] - 1:
            raise MarginViolation(
                f"Hole lies within {k + 1} grid steps of the boundary along axis {axis}; "
                f"patch [{a}, {b}] leaves [0, {shape[axis] - 1}]",
                axis=axis,
            )
    return IndexRectangle(tuple(int(a) for a in lower), tuple(int(b) for b in upper))


def hole_components(mask: GridMask) -> list[BoolArray]:
    """Face-connected components of the unknown set, largest first."""
    structure = ndimage.generate_binary_structure(mask.known.ndim, 1)
    labels, count = ndimage.label(mask.unknown, structure=structure)
    components = [labels == label for label in range(1, count + 1)]
    components.sort(key=lambda c: int(c.sum()), reverse=True)
    return components


def split_patches(mask: GridMask, k: int) -> list[tuple[IndexRectangle, GridMask]]:
    """Group hole components into independent patches.

    Components whose bounding patches intersect are merged until all patches
    are pairwise disjoint. Each returned mask marks unknown only the points of
    its own group.
    """
    groups = [~c for c in hole_components(mask)]
    merged = True
    while merged:
        merged = False
        rects = [bounding_patch(GridMask(g), k) for g in groups]
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if rects[i].intersects(rects[j]):
                    groups[i] = groups[i] & groups[j]
                    del groups[j]
                    merged = True
                    break
            if merged:
                break

    patches = [(bounding_patch(GridMask(g), k), GridMask(g)) for g in groups]
    LOGGER.debug("Split %d unknown points into %d patches", mask.n_unknown, len(patches))
    return patches
