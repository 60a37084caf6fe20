"""Experiment configuration: YAML files, path settings and config hashing."""

import hashlib
import json
from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from frontdoor_mta.errors import ConfigurationError
from frontdoor_mta.evaluation.auuc import EvalProtocol
from frontdoor_mta.nn.config import ModelConfig
from frontdoor_mta.scm.models import ScmConfig
from frontdoor_mta.training.plan import TrainPlan

SUPPORTED_VERSIONS = (1,)


class DataConfig(BaseModel):
    """Dataset size and split."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_episodes: int = Field(default=20_000, ge=1)


class SensitivityConfig(BaseModel):
    """Proxy-quality sweep levels."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    relevance_levels: list[float] = [0.3, 0.6, 0.9]
    leakage_levels: list[float] = [0.0, 0.5]


class PathsConfig(BaseModel):
    """Artifact locations; excluded from the config hash."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    data_dir: Path = Path("runs/data")
    checkpoint_dir: Path = Path("runs/checkpoint")
    report_dir: Path = Path("runs/reports")


class PathSettings(BaseSettings):
    """Path overrides from ``FDMTA_*`` environment variables (or a ``.env`` file)."""

    model_config = SettingsConfigDict(env_prefix="FDMTA_", env_file=".env", extra="ignore")

    data_dir: Optional[Path] = None
    checkpoint_dir: Optional[Path] = None
    report_dir: Optional[Path] = None


class ExperimentConfig(BaseModel):
    """Everything one run needs; reproducible from this object and the code version."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    scm: ScmConfig = ScmConfig()
    model: ModelConfig = ModelConfig()
    plan: TrainPlan = TrainPlan()
    eval: EvalProtocol = EvalProtocol()
    data: DataConfig = DataConfig()
    sensitivity: SensitivityConfig = SensitivityConfig()
    paths: PathsConfig = PathsConfig()
    run_id: str = "default"

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Copy with the generator and model seeds replaced."""
        return self.model_copy(
            update={
                "scm": self.scm.model_copy(update={"seed": seed}),
                "model": self.model.model_copy(update={"seed": seed}),
            }
        )

    def with_env_paths(self, settings: Optional[PathSettings] = None) -> "ExperimentConfig":
        """Copy with paths overridden by any ``FDMTA_*`` settings that are set."""
        settings = settings or PathSettings()
        overrides = {k: v for k, v in settings.model_dump().items() if v is not None}
        if not overrides:
            return self
        return self.model_copy(update={"paths": self.paths.model_copy(update=overrides)})


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON of ``cfg`` without ``paths`` and ``run_id``."""
    payload = cfg.model_dump(mode="json", exclude={"paths", "run_id"})
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _format_errors(exc: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
    )


class ConfigLoader:
    """Loads an :class:`ExperimentConfig` from a YAML file."""

    def __init__(self, config_path: Optional[str] = None):
        """Initialize config loader.

        Args:
            config_path: YAML experiment file; None means all defaults
        """
        self.config_path = Path(config_path) if config_path is not None else None

    def _load_yaml(self) -> dict:
        """Load and parse the YAML file.

        Returns:
            Parsed YAML data as dictionary (empty when no file was given)
        """
        if self.config_path is None:
            return {}
        if not self.config_path.exists():
            raise ConfigurationError(f"Config file not found: expected {self.config_path}")
        with open(self.config_path, encoding="utf-8") as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as exc:
                raise ConfigurationError(f"{self.config_path} is not valid YAML: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigurationError(f"{self.config_path} must contain a mapping at the top level")
        return data or {}

    def load(self) -> ExperimentConfig:
        """Parse and validate the experiment; missing sections use defaults.

        Raises:
            ConfigurationError: Unknown version, unknown keys or invalid values, with
                field-level messages
        """
        data = dict(self._load_yaml())
        version = data.pop("version", SUPPORTED_VERSIONS[-1])
        if version not in SUPPORTED_VERSIONS:
            raise ConfigurationError(
                f"Unsupported config version {version}; supported: {SUPPORTED_VERSIONS}"
            )
        try:
            return ExperimentConfig(**data)
        except ValidationError as exc:
            source = self.config_path or "<defaults>"
            raise ConfigurationError(f"Invalid config {source}: {_format_errors(exc)}") from exc
