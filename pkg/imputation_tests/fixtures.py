import numpy as np
import pytest

from manifold_imputation._datasets import plane_cloud
from manifold_imputation._grid import GridFunction, GridMask, UniformGrid


def smooth_periodic(x, y):
    return np.sin(x) + 0.5 * np.cos(2 * y)


def disk_mask(grid: UniformGrid, center_index, radius_steps: float) -> GridMask:
    """Unknown inside a disk measured in index units around ``center_index``."""
    offsets = np.indices(grid.shape) - np.reshape(center_index, (-1,) + (1,) * grid.dim)
    return GridMask(np.sqrt(np.sum(offsets**2, axis=0)) > radius_steps)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid_2d():
    return UniformGrid(dim=2, points_per_axis=24)


@pytest.fixture
def exact_2d(grid_2d):
    return GridFunction.from_function(grid_2d, smooth_periodic)


@pytest.fixture
def holed_2d(grid_2d, exact_2d):
    """Smooth periodic data with a disk of radius 2.5 steps missing at the centre."""
    mask = disk_mask(grid_2d, (12, 12), 2.5)
    return GridFunction(grid_2d, exact_2d.values, mask)


@pytest.fixture(scope="session")
def plane_dataset():
    return plane_cloud(spacing=0.05, extent=1.0, hole_radius=0.2, seed=0)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    monkeypatch.delenv("IMPUTE_OUTPUT_DIR", raising=False)
    path = tmp_path / "output"
    path.mkdir()
    return path
