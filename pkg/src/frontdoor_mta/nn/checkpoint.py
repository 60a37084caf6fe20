"""Versioned parameter checkpoints: a binary snapshot plus a YAML manifest."""

import logging
from pathlib import Path
from typing import Optional

import yaml

from frontdoor_mta.autodiff import snapshot
from frontdoor_mta.errors import DataError
from frontdoor_mta.nn.config import ModelConfig
from frontdoor_mta.nn.state import ModelState, init_state

logger = logging.getLogger(__name__)

PARAMS_FILE = "params.fdmt"
MANIFEST_FILE = "checkpoint.yaml"
CHECKPOINT_VERSION = 1


def save_checkpoint(
    out_dir: Path,
    state: ModelState,
    config_hash: str,
    seed: int,
    stage: str,
    step: int,
) -> Path:
    """Write ``params.fdmt`` and ``checkpoint.yaml`` into ``out_dir``.

    Returns:
        The checkpoint directory
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    snapshot.save(out_dir / PARAMS_FILE, state.to_arrays())
    manifest = {
        "version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "seed": seed,
        "stage": stage,
        "step": step,
        "n_clusters": state.n_clusters,
        "d_x": state.d_x,
        "model": state.config.model_dump(mode="json"),
    }
    with open(out_dir / MANIFEST_FILE, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=True)
    logger.debug("Checkpoint written to %s (stage %s, step %d)", out_dir, stage, step)
    return out_dir


def read_checkpoint_manifest(ckpt_dir: Path) -> dict:
    path = Path(ckpt_dir) / MANIFEST_FILE
    if not path.exists():
        raise DataError(f"Checkpoint manifest not found: expected {path}")
    with open(path, encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def load_checkpoint(
    ckpt_dir: Path, expected_hash: Optional[str] = None, force: bool = False
) -> tuple[ModelState, dict]:
    """Restore a state written by :func:`save_checkpoint`.

    Args:
        ckpt_dir: Checkpoint directory
        expected_hash: Config hash the checkpoint must carry (skipped when None)
        force: Load despite a hash mismatch (logged as a warning)

    Returns:
        (state, manifest)
    """
    ckpt_dir = Path(ckpt_dir)
    manifest = read_checkpoint_manifest(ckpt_dir)
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"Unsupported checkpoint version {manifest.get('version')} in {ckpt_dir}")
    if expected_hash is not None and manifest.get("config_hash") != expected_hash:
        message = (
            f"Checkpoint at {ckpt_dir} was trained under config {manifest.get('config_hash')}, "
            f"expected {expected_hash}"
        )
        if not force:
            raise DataError(message + " (pass --force to override)")
        logger.warning("%s; loading anyway", message)

    config = ModelConfig(**manifest["model"])
    state = init_state(config, manifest["n_clusters"], manifest["d_x"])
    state.load_arrays(snapshot.load(ckpt_dir / PARAMS_FILE))
    return state, manifest
