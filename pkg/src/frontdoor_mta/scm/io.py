"""Line-delimited dataset serialization with a separately sealed latent file.

Episode file (``episodes.jsonl``), one JSON object per line::

    {"episode_id": str, "user_id": str, "x": [float, ...],
     "touches": [{"touch_id": str, "cluster_id": int, "timestamp": int,
                  "proxy_score": float}, ...],
     "y": 0 | 1, "latent_handle": str}

Latent file (``latents.sealed.jsonl``), read only by oracle/evaluation paths::

    {"latent_handle": str, "w": float, "eps_m": float, "m": float}

Manifest (``manifest.yaml``): config hash, seed, episode count, file digests.
"""

import hashlib
import json
from pathlib import Path
from typing import Optional

import yaml

from frontdoor_mta.errors import DataError
from frontdoor_mta.scm.generator import LatentStore, SyntheticDataset
from frontdoor_mta.scm.models import Episode, LatentDraw, ScmConfig

EPISODES_FILE = "episodes.jsonl"
LATENTS_FILE = "latents.sealed.jsonl"
MANIFEST_FILE = "manifest.yaml"


def file_digest(path: Path) -> str:
    """SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_episodes(path: Path, episodes: list[Episode]) -> None:
    """Write episodes, one JSON object per line."""
    with open(path, "w", encoding="utf-8") as f:
        for ep in episodes:
            f.write(ep.model_dump_json())
            f.write("\n")


def read_episodes(path: Path) -> list[Episode]:
    """Read an episode file written by :func:`write_episodes`."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"Episode file not found: expected {path}")
    with open(path, encoding="utf-8") as f:
        return [Episode.model_validate_json(line) for line in f if line.strip()]


def write_latents(path: Path, latents: LatentStore) -> None:
    """Write the sealed latent file keyed by latent_handle."""
    with open(path, "w", encoding="utf-8") as f:
        for handle, draw in latents.items():
            record = {"latent_handle": handle, **draw.model_dump()}
            f.write(json.dumps(record, sort_keys=True))
            f.write("\n")


def read_latents(path: Path) -> LatentStore:
    """Read a sealed latent file."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"Latent file not found: expected {path}")
    draws = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            record = json.loads(line)
            handle = record.pop("latent_handle")
            draws[handle] = LatentDraw(**record)
    return LatentStore(draws)


def save_dataset(out_dir: Path, dataset: SyntheticDataset, config_hash: str) -> dict:
    """Write episodes, sealed latents and manifest into ``out_dir``.

    Returns:
        The manifest dictionary that was written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_episodes(out_dir / EPISODES_FILE, dataset.episodes)
    write_latents(out_dir / LATENTS_FILE, dataset.latents)

    manifest = {
        "config_hash": config_hash,
        "seed": dataset.config.seed,
        "n_episodes": len(dataset.episodes),
        "scm": dataset.config.model_dump(mode="json"),
        "files": {
            EPISODES_FILE: file_digest(out_dir / EPISODES_FILE),
            LATENTS_FILE: file_digest(out_dir / LATENTS_FILE),
        },
    }
    with open(out_dir / MANIFEST_FILE, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=True)
    return manifest


def read_manifest(data_dir: Path) -> dict:
    """Load a dataset manifest."""
    path = Path(data_dir) / MANIFEST_FILE
    if not path.exists():
        raise DataError(f"Dataset manifest not found: expected {path}")
    with open(path, encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def load_dataset(data_dir: Path, expected_hash: Optional[str] = None) -> SyntheticDataset:
    """Load a dataset directory written by :func:`save_dataset`.

    Args:
        data_dir: Directory containing episodes, latents and manifest
        expected_hash: Config hash the dataset must carry (skipped when None)
    """
    data_dir = Path(data_dir)
    manifest = read_manifest(data_dir)
    if expected_hash is not None and manifest.get("config_hash") != expected_hash:
        raise DataError(
            f"Dataset at {data_dir} was generated by config {manifest.get('config_hash')}, "
            f"expected {expected_hash}"
        )
    config = ScmConfig(**manifest["scm"])
    episodes = read_episodes(data_dir / EPISODES_FILE)
    latents = read_latents(data_dir / LATENTS_FILE)
    return SyntheticDataset(config=config, episodes=episodes, latents=latents)
