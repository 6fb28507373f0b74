#!/usr/bin/env python3
"""Seed devdata/ with the datasets the bundled run configs expect.

Writes annulus-grid, disk-grid, plane and torus (data, exact values where
applicable and truth sidecars) with seed 0.
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from manifold_imputation.cli import main

DATASETS = [
    ("annulus-grid", "0.1"),
    ("disk-grid", "0.01"),
    ("plane", "0.0"),
    ("torus", "0.0"),
]


def seed_datasets(target: str = "devdata") -> int:
    for shape, noise in DATASETS:
        code = main(
            ["generate", "--shape", shape, "--noise", noise, "--seed", "0", "--output-dir", target]
        )
        if code != 0:
            print(f"Error: generating {shape} failed with exit code {code}")
            return code
        print(f"✓ Seeded {shape} into {target}")
    # generate leaves a run_config.json behind; devdata only keeps the named configs
    Path(target, "run_config.json").unlink(missing_ok=True)
    return 0


if __name__ == "__main__":
    sys.exit(seed_datasets(sys.argv[1] if len(sys.argv) > 1 else "devdata"))
