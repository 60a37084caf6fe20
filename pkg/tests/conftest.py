"""Shared fixtures: small causal configs, datasets and fresh model states."""

import numpy as np
import pytest

from frontdoor_mta.nn import ModelConfig, init_state
from frontdoor_mta.scm import Episode, ScmConfig, TouchEvent, generate
from frontdoor_mta.training import TrainPlan


def make_episode(
    clusters,
    x=(0.3, -0.2),
    y=1,
    proxy=None,
    episode_id="e0",
    user_id="u0",
) -> Episode:
    """Hand-built episode with timestamps 1, 2, ..."""
    proxy = proxy if proxy is not None else [0.5] * len(clusters)
    touches = [
        TouchEvent(
            touch_id=f"{episode_id}-t{j}",
            cluster_id=int(c),
            timestamp=j + 1,
            proxy_score=float(p),
        )
        for j, (c, p) in enumerate(zip(clusters, proxy))
    ]
    return Episode(
        episode_id=episode_id,
        user_id=user_id,
        x=list(x),
        touches=touches,
        y=y,
        latent_handle=f"lat-{episode_id}",
    )


@pytest.fixture
def scm_config() -> ScmConfig:
    return ScmConfig(
        d_x=2,
        n_clusters=4,
        seq_len_range=(1, 4),
        beta_w=1.5,
        sessions_per_user=4,
        enumeration_bins=41,
        oracle_mc_draws=20_000,
        seed=3,
    )


@pytest.fixture
def dataset(scm_config):
    return generate(scm_config, 400)


@pytest.fixture
def model_config() -> ModelConfig:
    return ModelConfig(
        embed_dim=4,
        backbone_widths=(6, 4),
        mediator_dim=3,
        adversary_width=3,
        proxy_bins=5,
        top_k=3,
        lr_dense=1e-2,
        lr_sparse=5e-2,
        seed=1,
    )


@pytest.fixture
def state(model_config, scm_config):
    return init_state(model_config, scm_config.n_clusters, scm_config.d_x)


@pytest.fixture
def quick_plan() -> TrainPlan:
    return TrainPlan(stage_steps=(6, 4, 6), batch_size=16, eval_every=5, log_every=5)


@pytest.fixture
def episodes():
    """Six hand-built episodes over 4 clusters and 2 users."""
    rng = np.random.default_rng(0)
    out = []
    for i in range(6):
        clusters = [(i + j) % 4 for j in range(1 + i % 3)]
        out.append(
            make_episode(
                clusters,
                x=tuple(rng.standard_normal(2)),
                y=i % 2,
                proxy=list(rng.uniform(0, 1, len(clusters))),
                episode_id=f"e{i}",
                user_id=f"u{i % 2}",
            )
        )
    return out
