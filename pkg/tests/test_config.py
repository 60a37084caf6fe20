"""Tests for experiment configuration loading and hashing."""

from pathlib import Path

import pytest

from frontdoor_mta.config import ConfigLoader, ExperimentConfig, PathSettings, config_hash
from frontdoor_mta.errors import ConfigurationError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"


def write(tmp_path, text: str) -> Path:
    path = tmp_path / "experiment.yaml"
    path.write_text(text, encoding="utf-8")
    return path


class TestConfigLoader:
    """Tests for ConfigLoader."""

    def test_no_file_gives_defaults(self):
        assert ConfigLoader().load() == ExperimentConfig()

    def test_sections_override_defaults(self, tmp_path):
        path = write(
            tmp_path, "version: 1\nscm:\n  n_clusters: 5\n  seed: 2\ndata:\n  n_episodes: 50\n"
        )
        cfg = ConfigLoader(path).load()
        assert cfg.scm.n_clusters == 5
        assert cfg.data.n_episodes == 50
        assert cfg.model == ExperimentConfig().model

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            ConfigLoader(tmp_path / "absent.yaml").load()

    def test_unsupported_version(self, tmp_path):
        with pytest.raises(ConfigurationError, match="version 2"):
            ConfigLoader(write(tmp_path, "version: 2\n")).load()

    def test_unknown_key_names_field(self, tmp_path):
        with pytest.raises(ConfigurationError, match="scm.bogus"):
            ConfigLoader(write(tmp_path, "scm:\n  bogus: 1\n")).load()

    def test_out_of_range_value(self, tmp_path):
        with pytest.raises(ConfigurationError, match="model.tau_ctr"):
            ConfigLoader(write(tmp_path, "model:\n  tau_ctr: 0\n")).load()

    def test_non_mapping_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError, match="mapping"):
            ConfigLoader(write(tmp_path, "- a\n- b\n")).load()

    def test_invalid_yaml(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not valid YAML"):
            ConfigLoader(write(tmp_path, "scm: [unclosed\n")).load()

    @pytest.mark.parametrize(
        "name",
        [
            "experiment.example.yaml",
            "fixtures/c1.yaml",
            "fixtures/frontdoor.yaml",
            "fixtures/high_leakage.yaml",
            "fixtures/sparse.yaml",
        ],
    )
    def test_shipped_configs_load(self, name):
        assert isinstance(ConfigLoader(CONFIG_DIR / name).load(), ExperimentConfig)


class TestConfigHash:
    """Tests for the experiment hash."""

    def test_stable(self):
        assert config_hash(ExperimentConfig()) == config_hash(ExperimentConfig())
        assert len(config_hash(ExperimentConfig())) == 64

    def test_changes_with_semantics(self):
        assert config_hash(ExperimentConfig().with_seed(99)) != config_hash(ExperimentConfig())

    def test_ignores_paths_and_run_id(self, tmp_path):
        cfg = ExperimentConfig()
        moved = cfg.model_copy(
            update={
                "run_id": "other",
                "paths": cfg.paths.model_copy(update={"data_dir": tmp_path}),
            }
        )
        assert config_hash(moved) == config_hash(cfg)

    def test_with_seed_updates_both_seeds(self):
        cfg = ExperimentConfig().with_seed(17)
        assert cfg.scm.seed == 17
        assert cfg.model.seed == 17


class TestPathSettings:
    """Tests for environment path overrides."""

    def test_env_overrides_paths(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("FDMTA_DATA_DIR", str(tmp_path / "data"))
        cfg = ExperimentConfig().with_env_paths()
        assert cfg.paths.data_dir == tmp_path / "data"
        assert cfg.paths.report_dir == ExperimentConfig().paths.report_dir

    def test_no_env_keeps_config(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        for name in ("FDMTA_DATA_DIR", "FDMTA_CHECKPOINT_DIR", "FDMTA_REPORT_DIR"):
            monkeypatch.delenv(name, raising=False)
        cfg = ExperimentConfig()
        assert cfg.with_env_paths() is cfg

    def test_dotenv_file(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.delenv("FDMTA_REPORT_DIR", raising=False)
        (tmp_path / ".env").write_text("FDMTA_REPORT_DIR=out/reports\n", encoding="utf-8")
        assert PathSettings().report_dir == Path("out/reports")
