"""Configuration and run models for sparsenet."""

from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any

from .errors import ValidationError


class ConfigError(ValidationError):
    """Configuration or run parameters are invalid."""

    pass


class Command(StrEnum):
    """CLI commands."""

    NORMALIZE = "normalize"
    CORR = "corr"
    CROSS_CORR = "cross-corr"
    SPARSE_CORR = "sparse-corr"
    GLASSO = "glasso"
    PARTIAL = "partial"
    FILTRATION = "filtration"
    BENCH = "bench"
    RANK = "rank"
    SYNTH = "synth"


@dataclass
class DataConfig:
    """Data ingestion and export configuration."""

    drop_constant: bool
    export_threshold: float


@dataclass
class ThresholdConfig:
    """Soft-thresholding configuration."""

    dense_limit: int
    grid_count: int


@dataclass
class GlassoConfig:
    """Graphical-LASSO configuration."""

    tol: float
    max_sweeps: int
    penalize_diagonal: bool
    zero_eps: float
    screened: bool


@dataclass
class PartialConfig:
    """Partial-correlation configuration."""

    rule: str
    positive_only: bool
    tol: float
    max_passes: int


@dataclass
class FiltrationConfig:
    """Filtration configuration."""

    method: str
    grid: int
    symmetrize: str


@dataclass
class BenchConfig:
    """Benchmark configuration."""

    n: list[int]
    p: list[int]
    grid: int
    tol: float


@dataclass
class RuntimeConfig:
    """Runtime configuration."""

    threads: int
    seed: int
    output_dir: str


@dataclass
class LoggingConfig:
    """Logging configuration."""

    level: str
    format: str


def _section(cls: type, values: dict[str, Any], name: str) -> Any:
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"Invalid [{name}] section: {e}") from e


@dataclass
class SparseNetConfig:
    """Main sparsenet configuration."""

    data: DataConfig
    threshold: ThresholdConfig
    glasso: GlassoConfig
    partial: PartialConfig
    filtration: FiltrationConfig
    bench: BenchConfig
    runtime: RuntimeConfig
    logging: LoggingConfig

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SparseNetConfig":
        """Create config from dictionary."""
        config = cls(
            data=_section(DataConfig, data["data"], "data"),
            threshold=_section(ThresholdConfig, data["threshold"], "threshold"),
            glasso=_section(GlassoConfig, data["glasso"], "glasso"),
            partial=_section(PartialConfig, data["partial"], "partial"),
            filtration=_section(FiltrationConfig, data["filtration"], "filtration"),
            bench=_section(BenchConfig, data["bench"], "bench"),
            runtime=_section(RuntimeConfig, data["runtime"], "runtime"),
            logging=_section(LoggingConfig, data["logging"], "logging"),
        )
        config.validate()
        return config

    def validate(self) -> None:
        """Reject values no command can run with."""
        if self.runtime.threads < 1:
            raise ConfigError("runtime.threads must be at least 1")
        if self.partial.rule not in ("and", "or"):
            raise ConfigError(f"partial.rule must be 'and' or 'or', got {self.partial.rule!r}")
        if self.filtration.method not in ("corr", "glasso"):
            raise ConfigError(
                f"filtration.method must be 'corr' or 'glasso', got {self.filtration.method!r}"
            )
        if self.filtration.symmetrize not in ("max", "min"):
            raise ConfigError("filtration.symmetrize must be 'max' or 'min'")
        if self.glasso.tol <= 0 or self.partial.tol <= 0 or self.bench.tol <= 0:
            raise ConfigError("Tolerances must be positive")
        if self.threshold.grid_count < 2 or self.filtration.grid < 2:
            raise ConfigError("Grid counts must be at least 2")

    def get_output_dir(self) -> Path:
        """Output directory as Path object."""
        return Path(self.runtime.output_dir).expanduser()


@dataclass
class RunConfig:
    """One CLI invocation, after config file, environment and flags are merged.

    Attributes:
        command: Command to run
        inputs: Input CSV paths (two for cross-correlations)
        lam: Single sparsity value; excludes ``grid_count``
        grid_count: Number of λ values of a data-driven grid; excludes ``lam``
        tol: Solver tolerance override
        output_dir: Directory results are written to
        seed: Seed for synthetic-data commands, echoed in outputs
        options: Command-specific flags
    """

    command: Command
    inputs: tuple[Path, ...] = ()
    lam: float | None = None
    grid_count: int | None = None
    tol: float | None = None
    output_dir: Path = Path(".")
    seed: int = 42
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.lam is not None and self.grid_count is not None:
            raise ConfigError("--lambda and --lambda-grid are mutually exclusive")
        if self.lam is not None and self.lam < 0:
            raise ConfigError(f"Lambda must be non-negative, got {self.lam}")
        if self.grid_count is not None and self.grid_count < 2:
            raise ConfigError(f"Grid count must be at least 2, got {self.grid_count}")
        if self.tol is not None and self.tol <= 0:
            raise ConfigError(f"Tolerance must be positive, got {self.tol}")

    def option(self, name: str, default: Any = None) -> Any:
        """Command-specific flag value, or ``default`` when unset."""
        value = self.options.get(name)
        return default if value is None else value
