"""Configuration module for loading YAML experiment files."""

from frontdoor_mta.config.loader import (
    ConfigLoader,
    DataConfig,
    ExperimentConfig,
    PathsConfig,
    PathSettings,
    SensitivityConfig,
    config_hash,
)

__all__ = [
    "ConfigLoader",
    "DataConfig",
    "ExperimentConfig",
    "PathSettings",
    "PathsConfig",
    "SensitivityConfig",
    "config_hash",
]
