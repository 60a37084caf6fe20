"""Flattened, segment-indexed view of a list of episodes."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from frontdoor_mta.errors import ContractViolation, VocabularyError
from frontdoor_mta.scm.models import Episode


def proxy_bin(score, bins: int) -> np.ndarray:
    """Signature bin of a proxy score in [0, 1]: round(score * (bins - 1))."""
    score = np.asarray(score, dtype=np.float64)
    return np.clip(np.rint(score * (bins - 1)), 0, bins - 1).astype(np.int64)


@dataclass(frozen=True)
class EpisodeBatch:
    """Touches of B episodes laid out as flat arrays.

    ``segments[i]`` is the episode row of touch ``i``. Episodes may be empty, in which
    case they own no touch rows.
    """

    episode_ids: tuple[str, ...]
    user_ids: tuple[str, ...]
    x: np.ndarray  # (B, d_x)
    y: np.ndarray  # (B,)
    clusters: np.ndarray  # (n,)
    segments: np.ndarray  # (n,)
    timestamps: np.ndarray  # (n,)
    proxy: np.ndarray  # (n,)
    lengths: np.ndarray  # (B,)

    @property
    def size(self) -> int:
        return len(self.episode_ids)

    @property
    def n_touches(self) -> int:
        return len(self.clusters)

    @classmethod
    def from_episodes(
        cls, episodes: Sequence[Episode], n_clusters: int, d_x: int
    ) -> "EpisodeBatch":
        """Build a batch, rejecting cluster ids outside the vocabulary.

        Raises:
            VocabularyError: A touch references a cluster id >= n_clusters
            ContractViolation: Covariate width differs from d_x or the batch is empty
        """
        if not episodes:
            raise ContractViolation("cannot build a batch from zero episodes")
        clusters, segments, stamps, proxy, lengths = [], [], [], [], []
        for row, ep in enumerate(episodes):
            if len(ep.x) != d_x:
                raise ContractViolation(
                    f"episode {ep.episode_id} has {len(ep.x)} covariates, expected {d_x}"
                )
            for touch in ep.touches:
                if touch.cluster_id >= n_clusters:
                    raise VocabularyError(
                        f"cluster id {touch.cluster_id} of {touch.touch_id} outside "
                        f"vocabulary [0, {n_clusters})"
                    )
                clusters.append(touch.cluster_id)
                segments.append(row)
                stamps.append(touch.timestamp)
                proxy.append(touch.proxy_score)
            lengths.append(len(ep.touches))

        return cls(
            episode_ids=tuple(ep.episode_id for ep in episodes),
            user_ids=tuple(ep.user_id for ep in episodes),
            x=np.array([ep.x for ep in episodes], dtype=np.float64).reshape(len(episodes), d_x),
            y=np.array([ep.y for ep in episodes], dtype=np.float64),
            clusters=np.array(clusters, dtype=np.int64),
            segments=np.array(segments, dtype=np.int64),
            timestamps=np.array(stamps, dtype=np.int64),
            proxy=np.array(proxy, dtype=np.float64),
            lengths=np.array(lengths, dtype=np.int64),
        )

    def take(self, rows: np.ndarray) -> "EpisodeBatch":
        """Sub-batch of the given episode rows, in the given order."""
        rows = np.asarray(rows, dtype=np.int64)
        remap = np.full(self.size, -1, dtype=np.int64)
        remap[rows] = np.arange(len(rows))
        starts = np.concatenate([[0], np.cumsum(self.lengths)[:-1]])
        touch_index = np.concatenate(
            [np.arange(starts[r], starts[r] + self.lengths[r]) for r in rows]
            or [np.zeros(0, dtype=np.int64)]
        ).astype(np.int64)
        return EpisodeBatch(
            episode_ids=tuple(self.episode_ids[r] for r in rows),
            user_ids=tuple(self.user_ids[r] for r in rows),
            x=self.x[rows],
            y=self.y[rows],
            clusters=self.clusters[touch_index],
            segments=remap[self.segments[touch_index]],
            timestamps=self.timestamps[touch_index],
            proxy=self.proxy[touch_index],
            lengths=self.lengths[rows],
        )
