"""Readers and writers for grid data, point clouds and result files.

File formats:
- Grid CSV: header ``index_0,...,index_{d-1},value``, one row per grid point;
  ``NaN`` marks an unknown value.
- Mask CSV: header ``index_0,...,index_{d-1},known`` with 0/1 entries.
- Point cloud: one point per row, comma or whitespace separated, with an
  optional first line ``# ambient=n intrinsic=d``.
- Tagged points: header ``x_1,...,x_n,tag`` with tag ``known`` or ``imputed``.
- Coefficient magnitudes: header ``k_0,...,k_{d-1},abs_c``.

Parse errors raise InputFormatError with the 1-based line number.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import re
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ._grid import GridFunction, GridMask, UniformGrid
from ._mmls import PointCloud
from ._types import DEFAULT_BOX_EDGE, FloatArray, JSONType, PointTag
from .exceptions import GridShapeError, InputFormatError

LOGGER = logging.getLogger(__name__)

_CLOUD_HEADER = re.compile(r"#\s*ambient\s*=\s*(\d+)\s+intrinsic\s*=\s*(\d+)")

# Seeded inputs are not committed; the bundled configs read them from here
DEVDATA_DIR = "devdata"
SEED_HINT = "; seed it with scripts/seed_datasets.py (rcc task SeedDatasets)"


def _open_rows(path: Path) -> list[tuple[int, list[str]]]:
    if not path.is_file():
        hint = SEED_HINT if DEVDATA_DIR in path.parts else ""
        raise InputFormatError(f"File not found: {path}{hint}", path=str(path))
    with open(path, newline="", encoding="utf-8") as fd:
        return [
            (number, [cell.strip() for cell in row])
            for number, row in enumerate(csv.reader(fd), start=1)
            if row and any(cell.strip() for cell in row)
        ]


def _read_indexed_csv(
    path: str | Path, value_column: str
) -> tuple[int, int, dict[tuple[int, ...], tuple[int, str]]]:
    """Rows of an index_0..index_{d-1},<value_column> file keyed by multi-index."""
    path = Path(path)
    rows = _open_rows(path)
    if not rows:
        raise InputFormatError("File is empty", path=str(path), line=1)
    line, header = rows[0]
    dim = len(header) - 1
    expected = [f"index_{j}" for j in range(dim)] + [value_column]
    if dim < 1 or header != expected:
        raise InputFormatError(
            f"Expected header index_0,...,index_{{d-1}},{value_column}, got {','.join(header)}",
            path=str(path),
            line=line,
        )

    entries: dict[tuple[int, ...], tuple[int, str]] = {}
    largest = -1
    for line, row in rows[1:]:
        if len(row) != dim + 1:
            raise InputFormatError(
                f"Expected {dim + 1} columns, got {len(row)}", path=str(path), line=line
            )
        try:
            index = tuple(int(cell) for cell in row[:dim])
        except ValueError:
            raise InputFormatError(
                f"Grid indices must be integers, got {row[:dim]}", path=str(path), line=line
            ) from None
        if min(index) < 0:
            raise InputFormatError(f"Negative grid index {index}", path=str(path), line=line)
        if index in entries:
            raise InputFormatError(
                f"Duplicate grid index {index} (first seen on line {entries[index][0]})",
                path=str(path),
                line=line,
            )
        entries[index] = (line, row[dim])
        largest = max(largest, *index)

    n = largest + 1
    if len(entries) != n**dim:
        raise InputFormatError(
            f"Expected {n}^{dim} = {n ** dim} rows for a full grid, got {len(entries)}",
            path=str(path),
        )
    return dim, n, entries


def read_grid_csv(
    path: str | Path,
    box_origin: Sequence[float] = (),
    box_edge: float = DEFAULT_BOX_EDGE,
    mask_path: str | Path | None = None,
) -> GridFunction:
    """Load a grid function; NaN values (or a separate mask file) mark unknowns.

    Raises:
        InputFormatError: On malformed rows, a partial grid or a mismatched mask.
    """
    dim, n, entries = _read_indexed_csv(path, "value")
    values = np.empty((n,) * dim)
    for index, (line, cell) in entries.items():
        try:
            values[index] = float(cell)
        except ValueError:
            raise InputFormatError(
                f"Value must be a number or NaN, got {cell!r}", path=str(path), line=line
            ) from None
        if math.isinf(values[index]):
            raise InputFormatError("Infinite values are not allowed", path=str(path), line=line)

    known = ~np.isnan(values)
    if mask_path is not None:
        mask_known = read_mask_csv(mask_path)
        if mask_known.shape != values.shape:
            raise InputFormatError(
                f"Mask shape {mask_known.shape} does not match grid {values.shape}",
                path=str(mask_path),
            )
        missing = mask_known & ~known
        if missing.any():
            raise InputFormatError(
                f"Mask marks {int(missing.sum())} NaN values as known", path=str(mask_path)
            )
        known = mask_known

    try:
        grid = UniformGrid(dim, n, tuple(box_origin), box_edge)
    except GridShapeError as exc:
        raise InputFormatError(str(exc), path=str(path)) from exc
    LOGGER.info("Read %s: %d^%d grid, %d unknown", path, n, dim, int((~known).sum()))
    return GridFunction(grid, values, GridMask(known))


def read_mask_csv(path: str | Path) -> np.ndarray:
    """Known-mask array from an index/known CSV of 0/1 entries."""
    dim, n, entries = _read_indexed_csv(path, "known")
    known = np.zeros((n,) * dim, dtype=bool)
    for index, (line, cell) in entries.items():
        if cell not in ("0", "1"):
            raise InputFormatError(
                f"Mask entries must be 0 or 1, got {cell!r}", path=str(path), line=line
            )
        known[index] = cell == "1"
    return known


def write_grid_csv(path: str | Path, gf: GridFunction) -> Path:
    """Write every grid point in row-major order; unknown values as NaN."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = gf.grid.dim
    with open(path, "w", newline="", encoding="utf-8") as fd:
        writer = csv.writer(fd)
        writer.writerow([f"index_{j}" for j in range(dim)] + ["value"])
        for index in gf.grid.indices():
            value = gf.values[tuple(index)]
            writer.writerow([*map(int, index), "NaN" if np.isnan(value) else repr(float(value))])
    return path


def write_mask_csv(path: str | Path, mask: GridMask) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fd:
        writer = csv.writer(fd)
        writer.writerow([f"index_{j}" for j in range(mask.known.ndim)] + ["known"])
        for index in np.ndindex(*mask.known.shape):
            writer.writerow([*index, int(mask.known[index])])
    return path


def read_point_cloud(path: str | Path, intrinsic_dim: int | None = None) -> PointCloud:
    """Load a point cloud.

    The intrinsic dimension comes from ``intrinsic_dim``, else from the file
    header, else defaults to 2.

    Raises:
        InputFormatError: On ragged or non-numeric rows or a header mismatch.
    """
    path = Path(path)
    if not path.is_file():
        raise InputFormatError(f"File not found: {path}", path=str(path))
    header_dims: tuple[int, int] | None = None
    rows: list[list[float]] = []
    width = None
    with open(path, encoding="utf-8") as fd:
        for line, text in enumerate(fd, start=1):
            text = text.strip()
            if not text:
                continue
            if text.startswith("#"):
                match = _CLOUD_HEADER.match(text)
                if match and not rows:
                    header_dims = (int(match.group(1)), int(match.group(2)))
                continue
            cells = [c for c in re.split(r"[,\s]+", text) if c]
            try:
                row = [float(c) for c in cells]
            except ValueError:
                raise InputFormatError(
                    f"Coordinates must be numbers, got {text!r}", path=str(path), line=line
                ) from None
            if not all(math.isfinite(v) for v in row):
                raise InputFormatError("Coordinates must be finite", path=str(path), line=line)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise InputFormatError(
                    f"Expected {width} coordinates, got {len(row)}", path=str(path), line=line
                )
            rows.append(row)

    if not rows:
        raise InputFormatError("Point cloud file has no points", path=str(path))
    if header_dims is not None and header_dims[0] != width:
        raise InputFormatError(
            f"Header declares ambient={header_dims[0]} but rows have {width} columns",
            path=str(path),
            line=1,
        )
    if intrinsic_dim is None:
        intrinsic_dim = header_dims[1] if header_dims is not None else 2
    LOGGER.info("Read %s: %d points in R^%d", path, len(rows), width)
    return PointCloud(np.array(rows), intrinsic_dim)


def write_point_cloud(path: str | Path, cloud: PointCloud) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fd:
        fd.write(f"# ambient={cloud.ambient_dim} intrinsic={cloud.intrinsic_dim}\n")
        writer = csv.writer(fd)
        for point in cloud.points:
            writer.writerow([repr(float(v)) for v in point])
    return path


def write_tagged_points(path: str | Path, points: FloatArray, tags: Sequence[PointTag]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fd:
        writer = csv.writer(fd)
        writer.writerow([f"x_{j + 1}" for j in range(points.shape[1])] + ["tag"])
        for point, tag in zip(points, tags):
            writer.writerow([repr(float(v)) for v in point] + [PointTag(tag).value])
    return path


def read_tagged_points(path: str | Path) -> tuple[FloatArray, list[PointTag]]:
    path = Path(path)
    rows = _open_rows(path)
    if not rows or rows[0][1][-1:] != ["tag"]:
        raise InputFormatError("Expected header x_1,...,x_n,tag", path=str(path), line=1)
    width = len(rows[0][1])
    points, tags = [], []
    for line, row in rows[1:]:
        if len(row) != width:
            raise InputFormatError(
                f"Expected {width} fields, got {len(row)}", path=str(path), line=line
            )
        try:
            points.append([float(c) for c in row[:-1]])
            tags.append(PointTag(row[-1]))
        except ValueError:
            raise InputFormatError(f"Malformed row {row}", path=str(path), line=line) from None
    return np.array(points).reshape(len(points), width - 1), tags


def write_coefficients_csv(path: str | Path, table: FloatArray) -> Path:
    """Write the rows of coefficient_table: frequency multi-index then |c_k|."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = table.shape[1] - 1
    with open(path, "w", newline="", encoding="utf-8") as fd:
        writer = csv.writer(fd)
        writer.writerow([f"k_{j}" for j in range(dim)] + ["abs_c"])
        for row in table:
            writer.writerow([*(int(k) for k in row[:dim]), repr(float(row[dim]))])
    return path


def to_jsonable(value: Any) -> JSONType:
    """Convert numpy values, enums, paths and dataclasses to plain JSON types.

    Non-finite floats become None so the output is strict JSON.
    """
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        if hasattr(value, "to_dict"):
            return to_jsonable(value.to_dict())
        return to_jsonable(dataclasses.asdict(value))
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: str | Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fd:
        json.dump(to_jsonable(payload), fd, indent=2, sort_keys=True, allow_nan=False)
        fd.write("\n")
    return path


def read_json(path: str | Path) -> Any:
    path = Path(path)
    if not path.is_file():
        raise InputFormatError(f"File not found: {path}", path=str(path))
    try:
        with open(path, encoding="utf-8") as fd:
            return json.load(fd)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"Invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from exc
