"""Type definitions and constants shared across the imputation modules."""

from enum import Enum
from typing import Any

import numpy as np
import numpy.typing as npt

# Default edge length of the periodic box [0, 2*pi]^d
DEFAULT_BOX_EDGE = 2.0 * np.pi

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]
BoolArray = npt.NDArray[np.bool_]
ComplexArray = npt.NDArray[np.complex128]

# Type alias for JSON-serializable data
JSONType = dict[str, Any] | list | str | int | float | bool | None


class WeightScheme(str, Enum):
    """Spectral weight construction."""

    PRESCRIBED_DECAY = "prescribed-decay"  # w_k = 1 / r_k^2
    HYPERBOLIC_CORNER = "hyperbolic-corner"  # w_k = 1 where r_k < C, else 0


class Backend(str, Enum):
    """Functional imputation back-end."""

    SPECTRAL = "spectral"
    VARIATIONAL = "variational"


class PointTag(str, Enum):
    """Provenance of an emitted point."""

    KNOWN = "known"  # projected from data (blue)
    IMPUTED = "imputed"  # filled by grid imputation (red)


class HoleScenario(str, Enum):
    """Hole size regime for the error scaling study."""

    SMALL = "small-hole"  # diameter q*h
    LARGE = "large-hole"  # fixed diameter D


class Shape(str, Enum):
    """Dataset generators."""

    PLANE = "plane"
    SPHERE = "sphere"
    TORUS = "torus"
    CONE4D = "cone4d"
    ANNULUS_GRID = "annulus-grid"
    DISK_GRID = "disk-grid"
