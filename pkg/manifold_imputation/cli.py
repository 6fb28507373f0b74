"""Command line front end.

Commands:
    impute-grid       Fill the NaN values of a grid CSV (spectral or variational back-end)
    impute-manifold   Detect and fill the largest hole of a point cloud
    verify            Run the numerical verification suite
    generate          Write a seeded dataset plus its ground-truth sidecar
    bench             Run the bundled reproduction experiments

Every command reads an optional flat JSON config (``--config``); flags
override it. Exit codes: 0 success, 1 method failure, 2 input error.

Usage:
    manifold-imputation impute-grid --config devdata/annulus.json
    manifold-imputation generate --shape torus --seed 3 --output-dir output/torus
    python -m manifold_imputation verify
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from ._bench import bench_table, run_bench
from ._config import RunConfig, get_run_config
from ._datasets import (
    CloudDataset,
    generate_dataset,
    grid_truth_function,
    surface_from_truth,
)
from ._grid import GridFunction, split_patches
from ._holefill import fill_manifold_hole
from ._io import (
    read_grid_csv,
    read_json,
    read_point_cloud,
    to_jsonable,
    write_coefficients_csv,
    write_grid_csv,
    write_json,
    write_point_cloud,
    write_tagged_points,
)
from ._spectral import coefficient_table, impute_spectral
from ._types import Backend, Shape
from ._utils import ENV_LOG_LEVEL
from ._variational import (
    affected_stencil_report,
    assemble_variational,
    solve_variational,
    summarize_patches,
)
from ._verify import run_verification
from .exceptions import ConfigurationError, EmptyHoleError, ImputationError, InputFormatError

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_METHOD_FAILURE = 1
EXIT_INPUT_ERROR = 2

LOG_FORMAT = "%(asctime)s %(levelname)-8s %(name)s: %(message)s"


def setup_logging(level: str | None = None) -> None:
    """Configure the root logger once (flag, then IMPUTE_LOG_LEVEL, then INFO)."""
    name = (level or os.getenv(ENV_LOG_LEVEL) or "INFO").upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        raise ConfigurationError(f"Unknown log level '{name}'")
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)


def _grid_truth(config: RunConfig, gf: GridFunction) -> GridFunction | None:
    if not config.truth:
        return None
    truth = read_json(config.truth)
    func = grid_truth_function(truth.get("test_function", ""))
    return GridFunction.from_function(gf.grid, func)


def cmd_impute_grid(config: RunConfig) -> int:
    """Fill a grid CSV and write the completed grid with diagnostics."""
    out = config.output_path
    gf = read_grid_csv(config.input, config.box_origin, config.box_edge, config.mask or None)
    backend = Backend(config.backend)
    exact = _grid_truth(config, gf)
    diagnostics: dict[str, Any] = {"backend": backend.value, "seed": config.seed}

    if backend is Backend.SPECTRAL:
        completed, report = impute_spectral(
            gf, config.decay_params(), config.weight_scheme, config.rank_tolerance
        )
        diagnostics.update(report.to_dict())
        write_coefficients_csv(out / "coefficients.csv", coefficient_table(completed))
    else:
        patches = split_patches(gf.mask, config.k)
        if not patches:
            raise EmptyHoleError(f"{config.input} has no unknown values")
        completed = gf
        patch_reports, stencil_reports = [], []
        for rectangle, _ in patches:
            patch = assemble_variational(gf, config.variational_config(), rectangle)
            filled, report = solve_variational(patch, config.rank_tolerance)
            indices = patch.unknown_indices
            completed = completed.filled(indices, filled.values[tuple(indices.T)])
            patch_reports.append(report)
            stencil_reports.append(affected_stencil_report(patch, filled, exact).to_dict())
        diagnostics.update(summarize_patches(patch_reports))
        write_json(out / "affected_stencils.json", stencil_reports)

    if exact is not None:
        unknown = gf.mask.unknown
        diagnostics["max_error_unknown"] = float(
            np.abs(completed.array() - exact.values)[unknown].max(initial=0.0)
        )
    write_grid_csv(out / "completed.csv", completed)
    write_json(out / "diagnostics.json", diagnostics)
    LOGGER.info("Wrote completed grid and diagnostics to %s", out)
    return EXIT_OK


def cmd_impute_manifold(config: RunConfig) -> int:
    """Fill the largest hole of a point cloud."""
    out = config.output_path
    cloud = read_point_cloud(config.input, config.intrinsic_dim)
    truth = surface_from_truth(read_json(config.truth)) if config.truth else None
    result = fill_manifold_hole(cloud, config.holefill_config(), truth)
    if not result.filled:
        print("No hole detected; nothing to fill.")
    write_tagged_points(out / "points.csv", result.points, result.tags)
    write_json(out / "diagnostics.json", result.diagnostics)
    LOGGER.info("Wrote %d points and diagnostics to %s", len(result.tags), out)
    return EXIT_OK


def cmd_verify(config: RunConfig) -> int:
    """Run the verification suite; exit 0 iff every check passes."""
    report = run_verification(seed=config.seed, quick=config.quick)
    table = report.table()
    print(table)
    write_json(config.output_path / "verify.json", report.to_dict())
    (config.output_path / "verify.txt").write_text(table + "\n", encoding="utf-8")
    if not report.all_passed:
        for row in report.failures:
            LOGGER.error(
                "%s failed: measured %.4e vs bound %.4e (%s)",
                row.name,
                row.measured,
                row.bound,
                row.detail,
            )
        return EXIT_METHOD_FAILURE
    return EXIT_OK


def cmd_generate(config: RunConfig) -> int:
    """Write a dataset, its truth sidecar and the materialized config."""
    out = config.output_path
    params = dict(config.shape_params)
    if config.N and config.shape in (Shape.ANNULUS_GRID.value, Shape.DISK_GRID.value):
        params.setdefault("points_per_axis", config.N)
    dataset = generate_dataset(config.shape, params, noise=config.noise, seed=config.seed)

    if isinstance(dataset, CloudDataset):
        data_path = write_point_cloud(out / f"{dataset.name}.csv", dataset.cloud)
    else:
        data_path = write_grid_csv(out / f"{dataset.name}.csv", dataset.data)
        write_grid_csv(out / f"{dataset.name}.exact.csv", dataset.exact)
    write_json(out / f"{dataset.name}.truth.json", dataset.truth)
    print(f"Wrote {data_path}")
    return EXIT_OK


def cmd_bench(config: RunConfig) -> int:
    """Run the reproduction experiments and write bench.json / bench.txt."""
    report = run_bench(config)
    table = bench_table(report)
    print(table)
    write_json(config.output_path / "bench.json", report)
    (config.output_path / "bench.txt").write_text(table + "\n", encoding="utf-8")
    if all(result.get("passed") for result in report["experiments"].values()):
        return EXIT_OK
    return EXIT_METHOD_FAILURE


HANDLERS: dict[str, Callable[[RunConfig], int]] = {
    "impute-grid": cmd_impute_grid,
    "impute-manifold": cmd_impute_manifold,
    "verify": cmd_verify,
    "generate": cmd_generate,
    "bench": cmd_bench,
}


def _json_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not valid JSON: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON run configuration")
    common.add_argument("--output-dir", dest="output_dir", default=argparse.SUPPRESS)
    common.add_argument("--log-level", dest="log_level", default=None)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--noise", type=float, default=argparse.SUPPRESS)

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--backend", choices=[b.value for b in Backend], default=argparse.SUPPRESS)
    grid.add_argument("--weight-scheme", dest="weight_scheme", default=argparse.SUPPRESS)
    grid.add_argument("-M", dest="M", type=int, default=argparse.SUPPRESS)
    grid.add_argument("--C-bound", dest="C_bound", type=float, default=argparse.SUPPRESS)
    grid.add_argument("-k", dest="k", type=int, default=argparse.SUPPRESS)
    grid.add_argument(
        "--derivative-bound", dest="derivative_bound", type=float, default=argparse.SUPPRESS
    )
    grid.add_argument(
        "--rank-tolerance", dest="rank_tolerance", type=float, default=argparse.SUPPRESS
    )

    parser = argparse.ArgumentParser(
        prog="manifold-imputation",
        description="Grid and manifold data imputation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    impute_grid = sub.add_parser("impute-grid", parents=[common, grid], help="fill a grid CSV")
    impute_grid.add_argument("--input", default=argparse.SUPPRESS)
    impute_grid.add_argument("--mask", default=argparse.SUPPRESS)
    impute_grid.add_argument("--truth", default=argparse.SUPPRESS)
    impute_grid.add_argument("--box-edge", dest="box_edge", type=float, default=argparse.SUPPRESS)
    impute_grid.add_argument(
        "--box-origin", dest="box_origin", type=float, nargs="+", default=argparse.SUPPRESS,
        help="lower corner of the box, one value per axis",
    )

    manifold = sub.add_parser(
        "impute-manifold", parents=[common, grid], help="fill the largest hole of a point cloud"
    )
    manifold.add_argument("--input", default=argparse.SUPPRESS)
    manifold.add_argument("--truth", default=argparse.SUPPRESS)
    manifold.add_argument(
        "--intrinsic-dim", dest="intrinsic_dim", type=int, default=argparse.SUPPRESS
    )
    manifold.add_argument("--degree", type=int, default=argparse.SUPPRESS)
    manifold.add_argument("--rho", type=float, default=argparse.SUPPRESS)
    manifold.add_argument("--sigma", type=float, default=argparse.SUPPRESS)
    manifold.add_argument(
        "--mesh-multiplier", dest="mesh_multiplier", type=float, default=argparse.SUPPRESS
    )
    manifold.add_argument(
        "--admissibility-multiplier",
        dest="admissibility_multiplier",
        type=float,
        default=argparse.SUPPRESS,
    )

    verify = sub.add_parser("verify", parents=[common], help="run the verification suite")
    verify.add_argument("--quick", action="store_true", default=argparse.SUPPRESS)

    generate = sub.add_parser("generate", parents=[common], help="write a seeded dataset")
    generate.add_argument("--shape", choices=[s.value for s in Shape], default=argparse.SUPPRESS)
    generate.add_argument("-N", dest="N", type=int, default=argparse.SUPPRESS)
    generate.add_argument(
        "--shape-params", dest="shape_params", type=_json_value, default=argparse.SUPPRESS,
        help='generator keyword arguments as JSON, e.g. \'{"hole_radius": 0.3}\'',
    )

    bench = sub.add_parser("bench", parents=[common, grid], help="run the reproduction experiments")
    bench.add_argument(
        "--experiment", dest="experiments", action="append", default=argparse.SUPPRESS
    )
    bench.add_argument("--quick", action="store_true", default=argparse.SUPPRESS)
    return parser


def report_error(exc: ImputationError, output_dir: Path | None) -> None:
    """Machine-readable error on stderr and in error.json."""
    payload = to_jsonable(exc.to_dict())
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    if output_dir is not None:
        try:
            write_json(output_dir / "error.json", payload)
        except OSError as write_error:
            LOGGER.warning("Could not write error.json: %s", write_error)


def main(argv: Sequence[str] | None = None) -> int:
    args = vars(build_parser().parse_args(argv))
    config_path = args.pop("config", None)
    log_level = args.pop("log_level", None)
    output_dir: Path | None = None
    try:
        setup_logging(log_level)
        if "experiments" in args:
            args["experiments"] = tuple(args["experiments"])
        config = get_run_config(config_path, args)
        output_dir = config.output_path
        output_dir.mkdir(parents=True, exist_ok=True)
        write_json(output_dir / "run_config.json", config.to_dict())
        LOGGER.info("Running %s (seed %d)", config.command, config.seed)
        return HANDLERS[config.command](config)
    except (ConfigurationError, InputFormatError) as exc:
        LOGGER.error("Input error: %s", exc)
        report_error(exc, output_dir)
        return EXIT_INPUT_ERROR
    except ImputationError as exc:
        LOGGER.error("Imputation failed: %s", exc)
        report_error(exc, output_dir)
        return EXIT_METHOD_FAILURE


if __name__ == "__main__":
    sys.exit(main())
