"""Tests for the synthetic causal model: generator, oracle and dataset files."""

from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.special import expit
from scipy.stats import norm

from frontdoor_mta.config import ConfigLoader
from frontdoor_mta.errors import CapabilityError, ConfigurationError, ContractViolation, DataError
from frontdoor_mta.scm import (
    GroundTruth,
    ScmConfig,
    generate,
    observational_marginal,
    oracle_do_expectation,
    oracle_subset_value,
    oracle_uplift,
    population_do_expectation,
    rng_for,
    sensitivity_grid,
    structural_params,
)
from frontdoor_mta.scm.io import load_dataset, read_manifest, save_dataset
from tests.conftest import make_episode

FIXTURES = Path(__file__).resolve().parent.parent / "config" / "fixtures"


@pytest.fixture
def c1_config() -> ScmConfig:
    return ConfigLoader(FIXTURES / "c1.yaml").load().scm


def brute_force_do(config: ScmConfig, x, t, bins: int) -> float:
    """Plain double loop over the latent quantile grid."""
    params = structural_params(config)
    x = np.asarray(x, dtype=float)
    grid = [norm.ppf((i + 0.5) / bins) for i in range(bins)]
    pathway = sum(config.beta_tm[c] for c in t)
    total = 0.0
    for w in grid:
        for eps in grid:
            offset = config.gamma_x * (params.m_direction @ x)
            m = expit(pathway + offset + config.mediator_noise * eps)
            logit = (
                config.base_rate_logit
                + config.beta_my * m
                + config.beta_w * w
                + config.beta_xy * (params.y_direction @ x)
            )
            total += expit(logit)
    return total / bins**2


class TestScmConfig:
    """Tests for ScmConfig validation."""

    def test_default_pathway_weights_match_cluster_count(self):
        """beta_tm defaults to one weight per cluster."""
        config = ScmConfig(n_clusters=5)
        assert len(config.beta_tm) == 5

    def test_rejects_wrong_pathway_length(self):
        with pytest.raises(ValidationError):
            ScmConfig(n_clusters=3, beta_tm=(0.1, 0.2))

    def test_rejects_out_of_range_relevance(self):
        with pytest.raises(ValidationError):
            ScmConfig(proxy_relevance=1.5)

    def test_rejects_inverted_length_range(self):
        with pytest.raises(ValidationError):
            ScmConfig(seq_len_range=(4, 2))


class TestGenerator:
    """Tests for observational episode generation."""

    def test_same_seed_same_episodes(self, scm_config):
        """Generation is a pure function of (config, n)."""
        a = generate(scm_config, 50)
        b = generate(scm_config, 50)
        assert [e.model_dump() for e in a.episodes] == [e.model_dump() for e in b.episodes]

    def test_worker_count_does_not_change_output(self, scm_config):
        serial = generate(scm_config, 40, workers=1)
        parallel = generate(scm_config, 40, workers=2)
        assert [e.model_dump() for e in serial.episodes] == [
            e.model_dump() for e in parallel.episodes
        ]

    def test_zero_episodes_rejected(self, scm_config):
        with pytest.raises(ConfigurationError):
            generate(scm_config, 0)

    def test_episode_invariants(self, dataset, scm_config):
        lo, hi = scm_config.seq_len_range
        for ep in dataset.episodes:
            assert lo <= len(ep.touches) <= hi
            stamps = [t.timestamp for t in ep.touches]
            assert stamps == sorted(stamps) and len(set(stamps)) == len(stamps)
            assert all(0 <= c < scm_config.n_clusters for c in ep.cluster_ids)
            assert all(0.0 <= s <= 1.0 for s in ep.proxy_scores)
            assert ep.latent_handle in dataset.latents

    def test_latents_are_not_on_episodes(self, dataset):
        """Episodes expose no latent fields; the store is the only route to W and M."""
        fields = set(dataset.episodes[0].model_dump())
        assert not {"w", "m", "eps_m"} & fields
        draw = dataset.latents.unseal(dataset.episodes[0].latent_handle)
        assert 0.0 < draw.m < 1.0

    def test_sessions_share_user_covariates(self, dataset, scm_config):
        by_user = {}
        for ep in dataset.episodes:
            by_user.setdefault(ep.user_id, []).append(tuple(ep.x))
        for xs in by_user.values():
            assert len(set(xs)) == 1
            assert len(xs) <= scm_config.sessions_per_user

    def test_streams_are_independent_of_call_order(self):
        a = rng_for(1, "episode", 3, 0).random(4)
        rng_for(1, "episode", 2, 0).random(100)
        b = rng_for(1, "episode", 3, 0).random(4)
        np.testing.assert_array_equal(a, b)

    def test_split_is_user_level_and_deterministic(self, dataset):
        train, held = dataset.split(0.25)
        assert {e.user_id for e in train}.isdisjoint({e.user_id for e in held})
        assert len(train) + len(held) == len(dataset)
        train2, _ = dataset.split(0.25)
        assert [e.episode_id for e in train] == [e.episode_id for e in train2]

    def test_no_leakage_proxy_is_blind_to_outcome(self):
        """With relevance 0 and leakage 0 the proxy is pure noise."""
        config = ScmConfig(n_clusters=3, d_x=2, proxy_relevance=0.0, proxy_leakage=0.0, seed=9)
        data = generate(config, 3000)
        pos = [max(e.proxy_scores) for e in data.episodes if e.y == 1]
        neg = [max(e.proxy_scores) for e in data.episodes if e.y == 0]
        assert abs(np.mean(pos) - np.mean(neg)) < 0.03

    def test_leakage_separates_proxy_by_outcome(self):
        config = ScmConfig(n_clusters=3, d_x=2, proxy_relevance=0.5, proxy_leakage=1.0, seed=9)
        data = generate(config, 3000)
        pos = [np.mean(e.proxy_scores) for e in data.episodes if e.y == 1]
        neg = [np.mean(e.proxy_scores) for e in data.episodes if e.y == 0]
        assert np.mean(pos) - np.mean(neg) > 0.3


class TestOracle:
    """Tests for the interventional oracle."""

    def test_enumeration_matches_brute_force(self, scm_config):
        x = [0.4, -1.1]
        t = [0, 2, 2]
        got = oracle_do_expectation(scm_config, x, t)
        assert got.method == "enumeration"
        assert got.std_error == 0.0
        assert got.value == pytest.approx(
            brute_force_do(scm_config, x, t, scm_config.enumeration_bins), abs=1e-12
        )

    def test_monte_carlo_agrees_with_enumeration(self, scm_config):
        x = [0.1, 0.2]
        exact = oracle_do_expectation(scm_config, x, [1])
        mc = oracle_do_expectation(scm_config, x, [1], method="monte_carlo")
        assert mc.method == "monte_carlo"
        assert abs(mc.value - exact.value) < 5 * mc.std_error + 2e-3

    def test_empty_sequence_is_no_exposure(self, scm_config):
        value = oracle_do_expectation(scm_config, [0.0, 0.0], []).value
        assert value == pytest.approx(brute_force_do(scm_config, [0.0, 0.0], [], 41), abs=1e-12)

    def test_monotone_in_pathway_weight(self, scm_config):
        """Adding a cluster with a positive pathway weight raises P(Y | do)."""
        assert scm_config.beta_tm[3] > 0
        low = oracle_do_expectation(scm_config, [0, 0], [0]).value
        high = oracle_do_expectation(scm_config, [0, 0], [0, 3]).value
        assert high > low

    def test_unknown_cluster_rejected(self, scm_config):
        with pytest.raises(ContractViolation):
            oracle_do_expectation(scm_config, [0, 0], [7])

    def test_infeasible_enumeration_without_budget(self):
        config = ScmConfig(n_clusters=2, enumeration_bins=1001, oracle_mc_draws=0)
        with pytest.raises(CapabilityError):
            oracle_do_expectation(config, [0.0] * config.d_x, [0], method="enumeration")

    def test_uplift_identity_is_exact(self, scm_config):
        ep = make_episode([0, 3, 1], x=(0.2, 0.5))
        truth = oracle_uplift(scm_config, ep)
        assert isinstance(truth, GroundTruth)
        for p, u in zip(truth.p_do_minus, truth.true_uplift):
            assert u == truth.p_do_full - p

    def test_subset_value_keeps_order(self, scm_config):
        ep = make_episode([0, 3, 1, 3], x=(0.2, 0.5))
        value = oracle_subset_value(scm_config, ep, {3})
        assert value == oracle_do_expectation(scm_config, ep.x, [3, 3]).value

    def test_observational_marginal_matches_data(self, scm_config):
        marginal = observational_marginal(scm_config, draws=200_000)
        data = generate(scm_config.model_copy(update={"sessions_per_user": 1}), 20_000)
        base_rate = np.mean([e.y for e in data.episodes])
        assert abs(base_rate - marginal.value) < 0.02

    def test_population_do_is_a_probability(self, scm_config):
        value = population_do_expectation(scm_config, [2], draws=500).value
        assert 0.0 < value < 1.0

    def test_c1_sequence_matches_brute_force(self, c1_config):
        x = [0.4, -1.1, 0.3]
        got = oracle_do_expectation(c1_config, x, [3, 1, 4]).value
        assert got == pytest.approx(
            brute_force_do(c1_config, x, [3, 1, 4], c1_config.enumeration_bins), abs=1e-12
        )

    def test_c1_episode_uplifts_match_brute_force(self, c1_config):
        ep = generate(c1_config, 4).episodes[0]
        t = list(ep.cluster_ids)
        bins = c1_config.enumeration_bins
        full = brute_force_do(c1_config, ep.x, t, bins)
        expected = [
            full - brute_force_do(c1_config, ep.x, t[:j] + t[j + 1 :], bins) for j in range(len(t))
        ]
        truth = oracle_uplift(c1_config, ep)
        assert len(t) >= 2
        np.testing.assert_allclose(truth.true_uplift, expected, rtol=0, atol=1e-12)


class TestSensitivityGrid:
    """Tests for proxy-quality sweeps."""

    def test_grid_is_relevance_major(self, scm_config):
        grid = sensitivity_grid(scm_config, [0.2, 0.8], [0.0, 1.0])
        assert [(c.proxy_relevance, c.proxy_leakage) for c in grid] == [
            (0.2, 0.0),
            (0.2, 1.0),
            (0.8, 0.0),
            (0.8, 1.0),
        ]
        assert all(c.seed == scm_config.seed for c in grid)

    def test_out_of_range_level_rejected(self, scm_config):
        with pytest.raises(ConfigurationError):
            sensitivity_grid(scm_config, [1.2], [0.0])
        with pytest.raises(ConfigurationError):
            sensitivity_grid(scm_config, [0.5], [-0.1])


class TestDatasetFiles:
    """Tests for dataset serialization."""

    def test_save_load_preserves_episodes(self, dataset, tmp_path):
        save_dataset(tmp_path, dataset, "abc")
        loaded = load_dataset(tmp_path, expected_hash="abc")
        assert loaded.episodes == dataset.episodes
        assert loaded.config == dataset.config
        handle = dataset.episodes[5].latent_handle
        assert loaded.latents.unseal(handle) == dataset.latents.unseal(handle)

    def test_same_config_same_manifest(self, scm_config, tmp_path):
        a = save_dataset(tmp_path / "a", generate(scm_config, 30), "h")
        b = save_dataset(tmp_path / "b", generate(scm_config, 30), "h")
        assert a == b

    def test_hash_mismatch_refused(self, dataset, tmp_path):
        save_dataset(tmp_path, dataset, "abc")
        with pytest.raises(DataError, match="expected other"):
            load_dataset(tmp_path, expected_hash="other")

    def test_missing_manifest_names_path(self, tmp_path):
        with pytest.raises(DataError, match="manifest.yaml"):
            read_manifest(tmp_path / "nowhere")
