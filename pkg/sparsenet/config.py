"""Configuration management for sparsenet.

Defaults are overridden by a TOML file, then by ``SPARSENET_*`` environment
variables. Command-line flags are applied last, by the CLI.
"""

import os
import tomllib
from pathlib import Path
from typing import Any

import structlog

from sparsenet.models import ConfigError, SparseNetConfig

logger = structlog.get_logger(__name__)

_TRUE = ("true", "yes", "on")
_FALSE = ("false", "no", "off")


class ConfigLoader:
    """Configuration loader with TOML file and environment variable support."""

    DEFAULT_CONFIG: dict[str, dict[str, Any]] = {
        "data": {
            "drop_constant": False,
            "export_threshold": 0.0,
        },
        "threshold": {
            "dense_limit": 2000,
            "grid_count": 50,
        },
        "glasso": {
            "tol": 1e-6,
            "max_sweeps": 200,
            "penalize_diagonal": True,
            "zero_eps": 1e-8,
            "screened": True,
        },
        "partial": {
            "rule": "and",
            "positive_only": False,
            "tol": 1e-8,
            "max_passes": 10000,
        },
        "filtration": {
            "method": "corr",
            "grid": 100,
            "symmetrize": "max",
        },
        "bench": {
            "n": [5, 10],
            "p": [2, 10, 50, 100],
            "grid": 10,
            "tol": 1e-10,
        },
        "runtime": {
            "threads": 1,
            "seed": 42,
            "output_dir": ".",
        },
        "logging": {
            "level": "INFO",
            "format": "human",  # "human" or "json"
        },
    }

    ENV_PREFIX = "SPARSENET_"

    # Short environment names for frequently overridden keys
    ENV_ALIASES = {
        "threads": ("runtime", "threads"),
        "seed": ("runtime", "seed"),
    }

    def __init__(self, config_path: Path | None = None):
        """Initialize the config loader.

        Args:
            config_path: Optional path to config file. Defaults to
                ~/.sparsenet/config.toml
        """
        if config_path is None:
            config_path = Path.home() / ".sparsenet" / "config.toml"

        self.config_path = config_path
        self.config_dir = config_path.parent

    def load(self) -> SparseNetConfig:
        """Load configuration from file and environment variables.

        Returns:
            Loaded configuration object

        Raises:
            ConfigError: If the file is malformed or a value is invalid
        """
        config_dict = self._deep_copy_dict(self.DEFAULT_CONFIG)

        if self.config_path.exists():
            try:
                with open(self.config_path, "rb") as f:
                    file_config = tomllib.load(f)
            except (OSError, tomllib.TOMLDecodeError) as e:
                raise ConfigError(f"Cannot read config file {self.config_path}: {e}") from e
            config_dict = self._merge_dicts(config_dict, file_config)
            logger.debug("Loaded configuration from file", path=str(self.config_path))
        else:
            logger.debug(
                "Config file not found, using defaults", path=str(self.config_path)
            )

        config_dict = self._apply_env_overrides(config_dict)
        return SparseNetConfig.from_dict(config_dict)

    def create_default_config(self) -> None:
        """Write the default configuration file if it doesn't exist."""
        if self.config_path.exists():
            logger.debug("Config file already exists", path=str(self.config_path))
            return

        self.config_dir.mkdir(mode=0o700, parents=True, exist_ok=True)
        self.config_path.write_text(self._dict_to_toml(self.DEFAULT_CONFIG), "utf-8")
        logger.info("Created default configuration file", path=str(self.config_path))

    def _deep_copy_dict(self, d: dict[str, Any]) -> dict[str, Any]:
        """Deep copy a dictionary of sections."""
        result: dict[str, Any] = {}
        for key, value in d.items():
            if isinstance(value, dict):
                result[key] = self._deep_copy_dict(value)
            elif isinstance(value, list):
                result[key] = list(value)
            else:
                result[key] = value
        return result

    def _merge_dicts(
        self, base: dict[str, Any], override: dict[str, Any]
    ) -> dict[str, Any]:
        """Recursively merge two dictionaries."""
        result = self._deep_copy_dict(base)

        for key, value in override.items():
            if (
                key in result
                and isinstance(result[key], dict)
                and isinstance(value, dict)
            ):
                result[key] = self._merge_dicts(result[key], value)
            else:
                result[key] = value

        return result

    def _apply_env_overrides(self, config: dict[str, Any]) -> dict[str, Any]:
        """Apply SPARSENET_* environment variables to config."""
        env_vars = {
            k: v for k, v in os.environ.items() if k.startswith(self.ENV_PREFIX)
        }
        if not env_vars:
            return config

        logger.debug("Applying environment overrides", count=len(env_vars))
        result = self._deep_copy_dict(config)

        for env_key, env_value in env_vars.items():
            config_key = env_key[len(self.ENV_PREFIX) :].lower()

            if config_key in self.ENV_ALIASES:
                section, key = self.ENV_ALIASES[config_key]
            elif "_" in config_key:
                # SPARSENET_GLASSO_MAX_SWEEPS -> glasso.max_sweeps
                section, key = config_key.split("_", 1)
            else:
                logger.debug("Ignoring unknown environment override", name=env_key)
                continue

            if section not in result or not isinstance(result[section], dict):
                logger.debug("Ignoring unknown environment override", name=env_key)
                continue
            current = result[section].get(key)
            result[section][key] = self._convert_env_value(env_value, current)

        return result

    def _convert_env_value(self, value: str, current: Any = None) -> Any:
        """Convert an environment string, guided by the value it replaces."""
        text = value.strip()
        lowered = text.lower()
        try:
            if isinstance(current, bool):
                if lowered in (*_TRUE, "1"):
                    return True
                if lowered in (*_FALSE, "0"):
                    return False
                raise ValueError(value)
            if isinstance(current, int):
                return int(text)
            if isinstance(current, float):
                return float(text)
            if isinstance(current, list):
                return [int(part) for part in text.split(",") if part.strip()]
        except ValueError as e:
            raise ConfigError(f"Cannot convert environment value {value!r}") from e
        if isinstance(current, str):
            return text

        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        for convert in (int, float):
            try:
                return convert(text)
            except ValueError:
                pass
        return text

    def _dict_to_toml(self, d: dict[str, Any]) -> str:
        """Convert a dictionary of sections to TOML."""
        lines: list[str] = []
        for section, values in d.items():
            if lines:
                lines.append("")
            lines.append(f"[{section}]")
            for key, value in values.items():
                lines.append(f"{key} = {self._toml_value(value)}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def _toml_value(value: Any) -> str:
        if isinstance(value, bool):
            return str(value).lower()
        if isinstance(value, str):
            return f'"{value}"'
        if isinstance(value, list):
            return "[" + ", ".join(str(v) for v in value) + "]"
        return repr(value)


def load_config(config_path: Path | None = None) -> SparseNetConfig:
    """Load configuration using the default loader.

    Args:
        config_path: Optional path to config file

    Returns:
        Loaded configuration object
    """
    return ConfigLoader(config_path).load()


def create_default_config(config_path: Path | None = None) -> None:
    """Create default configuration file.

    Args:
        config_path: Optional path to config file
    """
    ConfigLoader(config_path).create_default_config()
