"""Run configuration.

A run is described by one flat JSON file. Values are resolved in this order
(later wins):

1. RunConfig defaults
2. the JSON file (unknown keys are rejected)
3. environment: IMPUTE_OUTPUT_DIR overrides ``output_dir``
4. command line flags

The fully materialized configuration is written next to the outputs as
``run_config.json`` so that a run can be repeated exactly.
"""

from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from ._holefill import HoleFillConfig
from ._io import read_json
from ._mmls import MMLSConfig
from ._spectral import DecayParams
from ._types import DEFAULT_BOX_EDGE, Backend, WeightScheme
from ._utils import ENV_OUTPUT_DIR
from ._variational import VariationalConfig
from .exceptions import ConfigurationError, ImputationError

LOGGER = logging.getLogger(__name__)

COMMANDS = ("impute-grid", "impute-manifold", "verify", "generate", "bench")


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs; every field has a default."""

    command: str = "impute-grid"
    # inputs
    input: str = ""
    mask: str = ""
    truth: str = ""
    box_origin: tuple[float, ...] = ()
    box_edge: float = DEFAULT_BOX_EDGE
    intrinsic_dim: int = 2
    # grid back-ends
    backend: str = Backend.VARIATIONAL.value
    weight_scheme: str = WeightScheme.HYPERBOLIC_CORNER.value
    M: int = 8
    C_bound: float = 1e-3
    derivative_bound: float = 1.0
    k: int = 3
    rank_tolerance: float = 1e-12
    # manifold pipeline
    degree: int = 2
    rho: float = 0.3
    sigma: float | None = None
    mesh_multiplier: float = 2.0
    admissibility_multiplier: float = 1.0
    # datasets
    shape: str = ""
    shape_params: dict[str, Any] = field(default_factory=dict)
    N: int = 0
    noise: float = 0.0
    seed: int = 0
    # verify / bench
    experiments: tuple[str, ...] = ()
    quick: bool = False
    output_dir: str = "output"

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def decay_params(self) -> DecayParams:
        return DecayParams(M=self.M, C_bound=self.C_bound, derivative_bound=self.derivative_bound)

    def variational_config(self) -> VariationalConfig:
        return VariationalConfig(k=self.k, rank_tolerance=self.rank_tolerance)

    def mmls_config(self) -> MMLSConfig:
        return MMLSConfig(degree=self.degree, neighborhood_radius=self.rho, weight_scale=self.sigma)

    def holefill_config(self) -> HoleFillConfig:
        return HoleFillConfig(
            mmls=self.mmls_config(),
            k=self.k,
            backend=Backend(self.backend),
            admissibility_multiplier=self.admissibility_multiplier,
            mesh_multiplier=self.mesh_multiplier,
            spectral=self.decay_params(),
        )

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)


_SEQUENCE_FIELDS = {"box_origin": float, "experiments": str}


def _coerce(name: str, value: Any, default: Any) -> Any:
    """Check one JSON value against the type of its default."""
    if name == "sigma":
        if value is None:
            return None
        default = 0.0
    if name in _SEQUENCE_FIELDS:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"'{name}' must be a list, got {type(value).__name__}")
        kind = _SEQUENCE_FIELDS[name]
        if kind is float and not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigurationError(f"'{name}' must be a list of numbers")
        if kind is str and not all(isinstance(v, str) for v in value):
            raise ConfigurationError(f"'{name}' must be a list of strings")
        return tuple(kind(v) for v in value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"'{name}' must be true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"'{name}' must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"'{name}' must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigurationError(f"'{name}' must be a string, got {value!r}")
        return value
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigurationError(f"'{name}' must be an object, got {value!r}")
        return dict(value)
    return value


def config_from_mapping(data: Mapping[str, Any], base: RunConfig | None = None) -> RunConfig:
    """Apply a flat mapping on top of ``base`` (default RunConfig()).

    Raises:
        ConfigurationError: On unknown keys or values of the wrong type.
    """
    base = base or RunConfig()
    known = {f.name: f for f in fields(RunConfig)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigurationError(
            f"Unknown configuration key(s): {', '.join(unknown)}. "
            f"Valid keys: {', '.join(sorted(known))}"
        )
    defaults = RunConfig()
    updates = {name: _coerce(name, value, getattr(defaults, name)) for name, value in data.items()}
    return replace(base, **updates)


def get_run_config(
    path: str | Path | None = None, overrides: Mapping[str, Any] | None = None
) -> RunConfig:
    """Resolve the run configuration from file, environment and overrides.

    Args:
        path: Optional JSON configuration file
        overrides: Values from command line flags (None entries are ignored)

    Returns:
        Validated RunConfig
    """
    config = RunConfig()
    if path:
        data = read_json(path)
        if not isinstance(data, dict):
            raise ConfigurationError(f"Configuration file {path} must hold a JSON object")
        config = config_from_mapping(data, config)
        LOGGER.info("Loaded configuration from %s", path)

    env_output = os.getenv(ENV_OUTPUT_DIR)
    if env_output:
        config = replace(config, output_dir=env_output)

    if overrides:
        config = config_from_mapping(
            {k: v for k, v in overrides.items() if v is not None}, config
        )

    validate_run_config(config)
    return config


def validate_run_config(config: RunConfig) -> None:
    """Validate ranges and the settings each command needs.

    Raises:
        ConfigurationError: With a hint on how to fix the value.
    """
    if config.command not in COMMANDS:
        raise ConfigurationError(
            f"Unknown command '{config.command}'. Available: {', '.join(COMMANDS)}"
        )
    try:
        Backend(config.backend)
        WeightScheme(config.weight_scheme)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None

    if config.command in ("impute-grid", "impute-manifold") and not config.input:
        raise ConfigurationError(
            f"'{config.command}' needs an input file. Example: --input devdata/annulus.csv"
        )
    if config.command == "generate" and not config.shape:
        raise ConfigurationError("'generate' needs a shape. Example: --shape torus")
    if config.noise < 0:
        raise ConfigurationError(f"Noise amplitude must be >= 0, got {config.noise}")
    if config.N < 0:
        raise ConfigurationError(f"N must be >= 0 (0 keeps the dataset default), got {config.N}")
    if config.intrinsic_dim < 1:
        raise ConfigurationError(f"intrinsic_dim must be >= 1, got {config.intrinsic_dim}")
    if config.mesh_multiplier < 0.5:
        raise ConfigurationError(
            f"mesh_multiplier must be >= 0.5 (the smallest mesh spacing factor), "
            f"got {config.mesh_multiplier}"
        )
    if config.admissibility_multiplier < 0:
        raise ConfigurationError("admissibility_multiplier must be >= 0")

    # parameter objects carry their own range checks
    try:
        config.decay_params()
        config.variational_config()
        config.mmls_config()
    except (ValueError, ImputationError) as exc:
        raise ConfigurationError(str(exc)) from exc
