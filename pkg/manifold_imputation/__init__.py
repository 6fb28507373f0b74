"""Grid and manifold data imputation.

This package reconstructs missing values on uniform grids and fills holes in
scattered samples of a manifold.

Back-ends:
    - Spectral: weighted least squares on DFT coefficients, with weights
      derived from the decay bound of smooth functions
    - Variational: minimization of high-order central differences over a
      patch around each hole
    - MMLS: moving least-squares projection onto local tangent frames, used
      to turn a point cloud hole into per-coordinate grid problems

Usage:
    from manifold_imputation import GridFunction, UniformGrid, GridMask, impute_variational

    grid = UniformGrid(dim=2, points_per_axis=40)
    gf = GridFunction.from_function(grid, f, GridMask(known))
    completed, diagnostics = impute_variational(gf, VariationalConfig(k=2))

Command line: ``manifold-imputation --help`` or ``python -m manifold_imputation``.
"""

# ruff: noqa: E402

__version__ = "0.1.0"

from . import exceptions
from ._config import RunConfig, get_run_config, validate_run_config
from ._datasets import (
    ConeSurface,
    PlaneSurface,
    SphereSurface,
    VariableTorus,
    add_uniform_noise,
    generate_dataset,
)
from ._grid import (
    GridFunction,
    GridMask,
    IndexRectangle,
    UniformGrid,
    apply_central_difference,
    bounding_patch,
    central_stencil,
    hole_components,
    mixed_divided_difference,
    split_patches,
)
from ._holefill import (
    HoleFillConfig,
    HoleFillResult,
    build_reference_plane,
    cross_section_demo,
    detect_hole,
    fill_manifold_hole,
    knn_graph_geodesic,
    restricted_filling_distance,
)
from ._linalg import LeastSquaresProblem, LeastSquaresResult, infinity_norm_inverse, lsq_solve
from ._mmls import MMLSConfig, PointCloud, TangentFrame, fit_local_frame, mmls_project, project_many
from ._spectral import (
    DecayParams,
    assemble_spectral,
    build_weights,
    decay_bound,
    dft,
    idft,
    impute_spectral,
    inverse_estimate_check,
    solve_spectral,
    sum_identity,
    verify_optimality_bound,
)
from ._types import Backend, HoleScenario, PointTag, Shape, WeightScheme
from ._variational import (
    VariationalConfig,
    affected_stencil_report,
    assemble_variational,
    error_scaling_study,
    impute_variational,
    inverse_operator_bound,
    solve_variational,
)
from ._verify import run_verification
from .exceptions import ImputationError

__all__ = [
    "__version__",
    # grid core
    "UniformGrid",
    "GridMask",
    "GridFunction",
    "IndexRectangle",
    "central_stencil",
    "apply_central_difference",
    "mixed_divided_difference",
    "bounding_patch",
    "hole_components",
    "split_patches",
    # spectral
    "DecayParams",
    "decay_bound",
    "build_weights",
    "assemble_spectral",
    "solve_spectral",
    "impute_spectral",
    "dft",
    "idft",
    "verify_optimality_bound",
    "inverse_estimate_check",
    "sum_identity",
    # variational
    "VariationalConfig",
    "assemble_variational",
    "solve_variational",
    "impute_variational",
    "affected_stencil_report",
    "inverse_operator_bound",
    "error_scaling_study",
    # linear algebra
    "LeastSquaresProblem",
    "LeastSquaresResult",
    "lsq_solve",
    "infinity_norm_inverse",
    # mmls and hole filling
    "PointCloud",
    "MMLSConfig",
    "TangentFrame",
    "fit_local_frame",
    "mmls_project",
    "project_many",
    "HoleFillConfig",
    "HoleFillResult",
    "detect_hole",
    "restricted_filling_distance",
    "build_reference_plane",
    "fill_manifold_hole",
    "knn_graph_geodesic",
    "cross_section_demo",
    # datasets, config, verification
    "generate_dataset",
    "add_uniform_noise",
    "PlaneSurface",
    "SphereSurface",
    "VariableTorus",
    "ConeSurface",
    "RunConfig",
    "get_run_config",
    "validate_run_config",
    "run_verification",
    # enums and errors
    "Backend",
    "WeightScheme",
    "PointTag",
    "HoleScenario",
    "Shape",
    "ImputationError",
    "exceptions",
]
