#!/usr/bin/env python3
"""Summarize a grid CSV: size, known/unknown counts, hole components and value range."""

import sys
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from manifold_imputation._grid import hole_components
from manifold_imputation._io import read_grid_csv
from manifold_imputation.exceptions import InputFormatError

path = sys.argv[1] if len(sys.argv) > 1 else "devdata/disk-grid.csv"

try:
    gf = read_grid_csv(path)
except InputFormatError as exc:
    print(f"Cannot read {path}: {exc} (line {exc.line})")
    sys.exit(2)

mask = gf.mask
known = gf.known_values()

print(f"\n{'='*60}")
print(f"Grid: {path}")
print(f"{'='*60}\n")
print(f"  Size:      {gf.grid.points_per_axis}^{gf.grid.dim} (h = {gf.grid.h:.6g})")
print(f"  Known:     {mask.n_known}")
print(f"  Unknown:   {mask.n_unknown}")
if known.size:
    print(f"  Values:    [{np.min(known):.6g}, {np.max(known):.6g}]")

components = hole_components(mask)
print(f"\nHole components ({len(components)}):")
print("-" * 40)
for number, component in enumerate(components[:20]):
    indices = np.argwhere(component)
    print(
        f"  #{number}: {len(indices):5d} points, "
        f"index box {indices.min(axis=0).tolist()} .. {indices.max(axis=0).tolist()}"
    )
