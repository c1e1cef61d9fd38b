#!/usr/bin/env python3
"""
Configuration management module for SMALLDET.

Run settings come from three layers: built-in defaults, an optional JSON
config file and command-line flags. Later layers override earlier ones and
unknown keys are rejected.
"""
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from .errors import ConfigError, UsageError
from .gaussian_model import CovarianceSpec
from .montecarlo import LAW_METHODS, VARIANTS
from .determinants import COMPLEX_CONVENTIONS
from .scalar_laws import GridConfig
from .streams import DEFAULT_BLOCK_SIZE

logger = logging.getLogger(__name__)

COMMANDS = ("d-values", "product-law", "bound-check", "lemma-check", "complex-law")
OUTPUT_FORMATS = ("csv", "json")


@dataclass
class RunConfig:
    """Validated settings for one subcommand run."""

    command: str
    spec: Union[str, Dict[str, Any]] = "iid"
    n: int = 2
    m: Optional[int] = None
    eps: List[float] = field(default_factory=lambda: [0.1])
    trials: int = 100_000
    seed: int = 0
    workers: int = 1
    block_size: int = DEFAULT_BLOCK_SIZE
    first_trial: int = 0
    confidence: float = 0.99
    variant: str = "square"
    out: Optional[str] = None
    format: str = "csv"
    grid_step: float = 2.0 ** -7
    u_min: float = -45.0
    u_max: float = 6.0
    t_min: float = -60.0
    t_max: float = 12.0
    require_positive: bool = False
    asymptotic: bool = False
    stabilize: Optional[int] = None
    cases: int = 500
    n_max: int = 5
    m_max: int = 8
    convention: str = "unit-complex"
    shapes: Optional[List[float]] = None
    scale: Optional[float] = None
    law_method: str = "convolution"

    def validate(self) -> None:
        """
        Check ranges and choices.

        Raises:
            UsageError: If a value is out of range or not a known choice
        """
        if self.command not in COMMANDS:
            raise UsageError(f"Unknown command '{self.command}'")
        if self.format not in OUTPUT_FORMATS:
            raise UsageError(f"Output format must be one of {OUTPUT_FORMATS}, got '{self.format}'")
        if self.variant not in VARIANTS:
            raise UsageError(f"Variant must be one of {VARIANTS}, got '{self.variant}'")
        if self.convention not in COMPLEX_CONVENTIONS:
            raise UsageError(f"Unknown complex convention '{self.convention}'")
        if self.law_method not in LAW_METHODS:
            raise UsageError(f"Law method must be one of {LAW_METHODS}, got '{self.law_method}'")
        if self.n < 1:
            raise UsageError(f"n must be positive, got {self.n}")
        if self.m is not None and self.m < 1:
            raise UsageError(f"m must be positive, got {self.m}")
        if not self.eps or any(not e > 0 for e in self.eps):
            raise UsageError(f"eps values must be positive, got {self.eps}")
        for name in ("trials", "workers", "block_size", "cases", "n_max", "m_max"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be positive, got {getattr(self, name)}")
        if self.seed < 0 or self.first_trial < 0:
            raise UsageError("seed and first_trial must be non-negative")
        if not 0 < self.confidence < 1:
            raise UsageError(f"confidence must be in (0, 1), got {self.confidence}")
        if self.stabilize is not None and self.stabilize < self.n:
            raise UsageError(f"--stabilize must be at least n={self.n}, got {self.stabilize}")
        self.grid()
        self.covariance()

    @property
    def columns(self) -> int:
        return self.n if self.m is None else self.m

    def grid(self) -> GridConfig:
        return GridConfig(
            step=self.grid_step,
            u_min=self.u_min,
            u_max=self.u_max,
            t_min=self.t_min,
            t_max=self.t_max,
        )

    def covariance(self) -> CovarianceSpec:
        if isinstance(self.spec, Mapping):
            return CovarianceSpec.from_mapping(self.spec)
        return CovarianceSpec.parse(str(self.spec))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


FIELD_NAMES = tuple(f.name for f in fields(RunConfig))


class ConfigManager:
    """Loads JSON run configuration and layers command-line overrides on top."""

    def __init__(self, config_file: Optional[Union[str, Path]] = None):
        """
        Initialize configuration manager.

        Args:
            config_file: Optional JSON file with RunConfig keys
        """
        self.config_file = Path(config_file).expanduser() if config_file else None
        self._config_cache: Optional[Dict[str, Any]] = None

    def load_config(self) -> Dict[str, Any]:
        """
        Load the config file, or an empty mapping when none was given.

        Raises:
            ConfigError: If the file cannot be read, is not a JSON object or
                names unknown keys
        """
        if self._config_cache is not None:
            return self._config_cache
        if self.config_file is None:
            self._config_cache = {}
            return self._config_cache

        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{self.config_file}: invalid JSON: {e}") from e
        except OSError as e:
            raise ConfigError(f"{self.config_file}: cannot read config: {e}") from e

        if not isinstance(config, dict):
            raise ConfigError(f"{self.config_file}: config must be a JSON object")
        self._check_keys(config)
        logger.info(f"Loaded configuration from {self.config_file}")
        self._config_cache = config
        return config

    def save_config(self, config: Mapping[str, Any], path: Union[str, Path]) -> None:
        """Write a config mapping as JSON, e.g. to record a run's settings."""
        self._check_keys(config)
        path = Path(path)
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(dict(config), f, indent=2, sort_keys=True)
                f.write("\n")
            logger.info(f"Saved configuration to {path}")
        except OSError as e:
            logger.error(f"Failed to save config: {e}")
            raise

    @staticmethod
    def _check_keys(config: Mapping[str, Any]) -> None:
        unknown = sorted(set(config) - set(FIELD_NAMES))
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")

    def build_run_config(
        self, command: str, overrides: Optional[Mapping[str, Any]] = None
    ) -> RunConfig:
        """
        Merge defaults, file values and overrides into a validated RunConfig.

        Args:
            command: Subcommand name
            overrides: Values from the command line; None entries are ignored

        Returns:
            Validated RunConfig
        """
        merged: Dict[str, Any] = dict(self.load_config())
        merged.pop("command", None)
        for key, value in (overrides or {}).items():
            if value is not None:
                merged[key] = value
        self._check_keys(merged)

        try:
            config = RunConfig(command=command, **merged)
        except TypeError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e
        if isinstance(config.eps, (int, float)):
            config.eps = [float(config.eps)]
        try:
            config.validate()
        except TypeError as e:
            raise ConfigError(f"Invalid configuration value: {e}") from e
        logger.debug(f"Run configuration: {config.to_dict()}")
        return config
