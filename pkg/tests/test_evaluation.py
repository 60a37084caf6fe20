"""Tests for the AUC family, Shapley values, grouped AUUC and the diagnostics."""

import logging
import math
import zlib
from functools import partial
from itertools import combinations, permutations
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from frontdoor_mta.baselines import LogisticLite
from frontdoor_mta.config import ConfigLoader
from frontdoor_mta.errors import (
    CapabilityError,
    ConfigurationError,
    ContractViolation,
    DegenerateStratificationError,
    PipelineStageError,
    UndefinedMetricError,
)
from frontdoor_mta.estimators import ModelAttributor
from frontdoor_mta.evaluation import (
    BucketAuuc,
    BucketedAuucReport,
    EvalProtocol,
    adversary_auc,
    auc,
    bucket_auuc,
    cluster_treatments,
    episode_frame,
    evaluate_method,
    exact_shapley,
    exposure_pairs,
    gauc,
    gauc_with_skips,
    grouped_auuc,
    histogram_overlap,
    logloss,
    oracle_pair_score,
    oracle_value_fn,
    propensity_buckets,
    proxy_auc,
    sampled_shapley,
    stability_report,
    uplift_curve,
    variance_reduction_check,
)
from frontdoor_mta.scm import generate, sensitivity_grid
from frontdoor_mta.training import staged_train

FIXTURES = Path(__file__).resolve().parent.parent / "config" / "fixtures"


def brute_auc(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def additive_value(weights, coalition: frozenset) -> float:
    return float(sum(weights[i] for i in coalition))


def squared_value(weights, coalition: frozenset) -> float:
    return float(sum(weights[i] for i in coalition)) ** 2 / 4.0


def permutation_shapley(v, n):
    """Average marginal contribution over all n! orderings."""
    phi = np.zeros(n)
    orders = list(permutations(range(n)))
    for order in orders:
        coalition = frozenset()
        for player in order:
            phi[player] += v(coalition | {player}) - v(coalition)
            coalition = coalition | {player}
    return phi / len(orders)


def random_score(ep, clusters: frozenset) -> float:
    key = f"{ep.episode_id}/{sorted(clusters)}".encode()
    return (zlib.crc32(key) % 10_000) / 10_000.0


class TestAucFamily:
    """Tests for AUC, log-loss and gAUC."""

    def test_auc_matches_pair_count(self):
        rng = np.random.default_rng(2)
        scores = np.round(rng.uniform(size=60), 1)  # plenty of ties
        labels = rng.integers(0, 2, 60)
        assert auc(scores, labels) == pytest.approx(brute_auc(scores, labels), abs=1e-12)

    def test_auc_single_class(self):
        with pytest.raises(UndefinedMetricError):
            auc([0.1, 0.2], [1, 1])

    def test_auc_rejects_non_binary(self):
        with pytest.raises(ContractViolation):
            auc([0.1, 0.2], [0, 2])

    def test_logloss_formula_with_clamp(self):
        p = np.array([0.0, 0.8, 1.0])
        y = np.array([0, 1, 1])
        clipped = np.clip(p, 1e-7, 1 - 1e-7)
        expected = -np.mean(y * np.log(clipped) + (1 - y) * np.log(1 - clipped))
        assert logloss(p, y) == pytest.approx(expected, rel=1e-9)

    def test_gauc_is_impression_weighted(self):
        scores = [0.9, 0.1, 0.4, 0.2, 0.3, 0.8, 0.5]
        labels = [1, 0, 0, 1, 1, 0, 1]
        users = ["a", "a", "b", "b", "b", "c", "c"]
        parts = [(0, 2), (2, 5), (5, 7)]
        expected = sum((b - a) * brute_auc(scores[a:b], labels[a:b]) for a, b in parts) / 7
        assert gauc(scores, labels, users) == pytest.approx(expected)

    def test_gauc_skips_single_class_users(self):
        value, skipped = gauc_with_skips([0.9, 0.1, 0.5, 0.6], [1, 0, 1, 1], ["a", "a", "b", "b"])
        assert value == 1.0
        assert skipped == 1

    def test_gauc_all_users_single_class(self):
        with pytest.raises(UndefinedMetricError):
            gauc([0.1, 0.2], [1, 0], ["a", "b"])


class TestShapley:
    """Tests for exact and sampled Shapley values."""

    def test_exact_matches_permutation_average(self):
        weights = [0.3, -0.1, 0.7, 0.2]
        v = partial(squared_value, weights)
        np.testing.assert_allclose(exact_shapley(v, 4).phi, permutation_shapley(v, 4), atol=1e-12)

    def test_efficiency(self):
        weights = [0.3, -0.1, 0.7, 0.2, 0.05]
        v = partial(squared_value, weights)
        estimate = exact_shapley(v, 5)
        assert estimate.total == pytest.approx(v(frozenset(range(5))) - v(frozenset()))

    def test_additive_game_exact_in_both(self):
        weights = [0.5, -0.25, 1.5]
        v = partial(additive_value, weights)
        np.testing.assert_allclose(exact_shapley(v, 3).phi, weights, atol=1e-12)
        sampled = sampled_shapley(v, 3, samples=20, seed=1)
        np.testing.assert_allclose(sampled.phi, weights, atol=1e-12)

    def test_sampled_converges(self):
        weights = list(np.linspace(0.05, 0.4, 8))
        v = partial(squared_value, weights)
        exact = exact_shapley(v, 8).phi
        sampled = sampled_shapley(v, 8, samples=10_000, seed=3)
        np.testing.assert_allclose(sampled.phi, exact, atol=1e-2)
        assert sampled.sample_count == 10_000

    def test_sampled_independent_of_workers(self):
        v = partial(squared_value, [0.1, 0.2, 0.3, 0.4])
        serial = sampled_shapley(v, 4, samples=600, seed=9)
        parallel = sampled_shapley(v, 4, samples=600, seed=9, workers=2)
        np.testing.assert_array_equal(serial.phi, parallel.phi)

    def test_exact_refuses_large_games(self):
        with pytest.raises(CapabilityError):
            exact_shapley(partial(additive_value, [0.0] * 13), 13)

    def test_sampled_needs_samples(self):
        with pytest.raises(ContractViolation):
            sampled_shapley(partial(additive_value, [1.0]), 1, samples=0)


class TestUpliftCurve:
    """Tests for the normalized uplift curve and per-bucket AUUC."""

    def test_curve_matches_loop(self):
        scores = [0.2, 0.9, 0.5, 0.1]
        labels = [1.0, -0.5, 2.0, 0.5]
        z = sum(abs(v) for v in labels)
        ranked = [labels[i] for i in sorted(range(4), key=lambda i: -scores[i])]
        expected = [sum(ranked[: k + 1]) / z for k in range(4)]
        np.testing.assert_allclose(uplift_curve(scores, labels), expected)
        assert bucket_auuc(scores, labels) == pytest.approx(np.mean(expected))

    def test_zero_label_mass(self):
        with pytest.raises(UndefinedMetricError):
            uplift_curve([0.1, 0.2], [0.0, 0.0])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(5)
        scores = rng.standard_normal(50)
        labels = rng.standard_normal(50)
        assert bucket_auuc(scores, labels) == bucket_auuc(np.exp(scores), labels)

    def test_perfect_ranking_beats_reversed(self):
        labels = np.array([3.0, 2.0, 1.0, 0.5])
        assert bucket_auuc(labels, labels) > bucket_auuc(-labels, labels)


class TestPropensityBuckets:
    """Tests for quantile stratification."""

    def test_equal_mass(self):
        buckets = propensity_buckets(np.linspace(0.01, 0.99, 40), n_buckets=4)
        assert np.bincount(buckets).tolist() == [10, 10, 10, 10]

    def test_monotone_in_propensity(self):
        e = np.random.default_rng(1).uniform(size=100)
        buckets = propensity_buckets(e, 5)
        order = np.argsort(e)
        assert np.all(np.diff(buckets[order]) >= 0)

    def test_too_few_pairs(self):
        with pytest.raises(DegenerateStratificationError):
            propensity_buckets([0.1, 0.2], n_buckets=3)

    def test_one_bucket_rejected(self):
        with pytest.raises(ConfigurationError):
            propensity_buckets([0.1, 0.2], n_buckets=1)

    def test_constant_propensity_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="frontdoor_mta"):
            buckets = propensity_buckets(np.full(20, 0.3), 4)
        assert len(np.unique(buckets)) == 1
        assert "Degenerate" in caplog.text


class TestBucketedReport:
    """Tests for report consistency checks."""

    def _bucket(self, index, n, value):
        return BucketAuuc(index=index, e_low=0.1, e_high=0.2, n_pairs=n, auuc=value)

    def test_consistent_report(self):
        report = BucketedAuucReport(
            buckets=[self._bucket(0, 3, 0.6), self._bucket(1, 1, 0.2)],
            weights=[0.75, 0.25],
            gauuc=0.75 * 0.6 + 0.25 * 0.2,
            protocol=EvalProtocol(),
            seed=0,
        )
        assert report.gauuc == pytest.approx(0.5)

    def test_wrong_aggregate_rejected(self):
        with pytest.raises(ValueError):
            BucketedAuucReport(
                buckets=[self._bucket(0, 3, 0.6), self._bucket(1, 1, 0.2)],
                weights=[0.75, 0.25],
                gauuc=0.4,
                protocol=EvalProtocol(),
                seed=0,
            )

    def test_weight_count_must_match(self):
        with pytest.raises(ValueError):
            BucketedAuucReport(
                buckets=[self._bucket(0, 3, 0.6)],
                weights=[0.5, 0.5],
                gauuc=0.3,
                protocol=EvalProtocol(),
                seed=0,
            )


class TestGroupedAuuc:
    """Tests for the full grouped-AUUC pipeline on a small dataset."""

    @pytest.fixture
    def protocol(self):
        return EvalProtocol(n_buckets=4, shapley_samples=16, seeds=(0,))

    @pytest.fixture
    def eval_episodes(self, dataset):
        return [ep for ep in dataset.episodes[:200] if ep.touches]

    def test_pairs_sorted_and_unique(self, eval_episodes):
        pairs = exposure_pairs(eval_episodes, np.arange(4))
        keys = [(p.user_id, p.group) for p in pairs]
        assert keys == sorted(set(keys))

    def test_oracle_scores_beat_random(self, eval_episodes, scm_config, protocol):
        value = oracle_value_fn(scm_config)
        oracle = grouped_auuc(eval_episodes, oracle_pair_score(scm_config), value, protocol, 4)
        random = grouped_auuc(eval_episodes, random_score, value, protocol, 4)
        assert oracle.gauuc > random.gauuc

    def test_invariant_to_monotone_transform(self, eval_episodes, scm_config, protocol):
        value = oracle_value_fn(scm_config)
        score = oracle_pair_score(scm_config)

        def stretched(ep, clusters):
            return math.exp(50.0 * score(ep, clusters))

        base = grouped_auuc(eval_episodes, score, value, protocol, 4)
        transformed = grouped_auuc(eval_episodes, stretched, value, protocol, 4)
        assert base.gauuc == transformed.gauuc
        for a, b in zip(base.buckets, transformed.buckets):
            assert a.curve == b.curve

    def test_weights_follow_bucket_sizes(self, eval_episodes, scm_config, protocol):
        report = grouped_auuc(
            eval_episodes, random_score, oracle_value_fn(scm_config), protocol, 4
        )
        included = [b for b in report.buckets if not b.excluded]
        total = sum(b.n_pairs for b in included)
        assert report.weights == [b.n_pairs / total for b in included]

    def test_clustering_without_embeddings_names_stage(self, eval_episodes, scm_config):
        protocol = EvalProtocol(n_buckets=4, n_treatment_clusters=2, shapley_samples=4)
        with pytest.raises(PipelineStageError) as info:
            grouped_auuc(eval_episodes, random_score, oracle_value_fn(scm_config), protocol, 4)
        assert info.value.stage == "cluster"

    def test_clustered_treatments(self, eval_episodes, scm_config):
        protocol = EvalProtocol(n_buckets=4, n_treatment_clusters=2, shapley_samples=4)
        embeddings = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]])
        report = grouped_auuc(
            eval_episodes, random_score, oracle_value_fn(scm_config), protocol, 4,
            embeddings=embeddings,
        )
        assert np.isfinite(report.gauuc)

    def test_cluster_treatments_limits(self):
        embeddings = np.array([[0.0], [0.0], [1.0]])
        with pytest.raises(ConfigurationError):
            cluster_treatments(embeddings, 3)
        assert len(set(cluster_treatments(embeddings, 2).tolist())) == 2


class TestStability:
    """Tests for cross-seed distribution stability."""

    def test_identical_samples(self):
        a = np.random.default_rng(0).standard_normal(200)
        report = stability_report([a, a.copy()])
        assert report.max_ks == 0.0
        assert report.min_overlap == pytest.approx(1.0)

    def test_shift_detected(self):
        rng = np.random.default_rng(1)
        report = stability_report([rng.standard_normal(300), rng.standard_normal(300) + 3.0])
        assert report.max_ks > 0.7
        assert report.min_overlap < 0.3

    def test_all_pairs_reported(self):
        rng = np.random.default_rng(2)
        report = stability_report([rng.standard_normal(50) for _ in range(4)])
        assert [(p.first, p.second) for p in report.pairs] == list(combinations(range(4), 2))

    def test_needs_two_distributions(self):
        with pytest.raises(ContractViolation):
            stability_report([[0.1, 0.2]])

    def test_constant_overlap(self):
        assert histogram_overlap(np.ones(5), np.ones(3)) == 1.0


class TestVarianceCheck:
    """Tests for the proxy variance-reduction check."""

    def test_informative_proxy_reduces_variance(self):
        rng = np.random.default_rng(3)
        n = 4000
        y_prime = rng.integers(0, 2, n)
        y = (rng.uniform(size=n) < np.where(y_prime == 1, 0.9, 0.1)).astype(int)
        frame = pd.DataFrame(
            {"x": rng.integers(0, 2, n), "t": rng.integers(0, 2, n), "y_prime": y_prime, "y": y}
        )
        check = variance_reduction_check(frame)
        assert check.holds
        assert check.var_with < check.var_without - 0.1
        assert check.cells_dropped == 0

    def test_small_cells_dropped(self):
        frame = pd.DataFrame(
            {"x": [0] * 30 + [1], "t": [0] * 31, "y_prime": [0] * 31, "y": [0, 1] * 15 + [1]}
        )
        check = variance_reduction_check(frame)
        assert check.cells_dropped == 1
        assert check.n_used == 30

    def test_missing_columns(self):
        with pytest.raises(ContractViolation):
            variance_reduction_check(pd.DataFrame({"x": [0], "y": [1]}))

    def test_episode_frame(self, dataset):
        frame = episode_frame(dataset.episodes, x_bins=2, proxy_bins=4)
        assert list(frame.columns) == ["x", "t", "y_prime", "y"]
        assert frame["y_prime"].between(0, 3).all()
        assert len(frame) == sum(1 for ep in dataset.episodes if ep.touches)


class TestLeakage:
    """Tests for the leakage diagnostics."""

    def test_aucs_are_probabilities(self, state, dataset):
        episodes = [ep for ep in dataset.episodes[:100] if ep.touches]
        assert 0.0 <= adversary_auc(state, episodes) <= 1.0
        assert 0.0 <= proxy_auc(state, episodes) <= 1.0


class TestEvaluateMethod:
    """Tests for the per-method metric row."""

    def test_workers_do_not_change_results(self, dataset, scm_config):
        episodes = [ep for ep in dataset.episodes if ep.touches]
        model = LogisticLite(scm_config.n_clusters).fit(episodes[:200])
        held = episodes[200:]
        protocol = EvalProtocol(n_buckets=2, shapley_samples=8, seeds=(0, 1))
        value = oracle_value_fn(scm_config)
        serial, serial_reports = evaluate_method(model, held, protocol, 4, value)
        parallel, parallel_reports = evaluate_method(model, held, protocol, 4, value, workers=2)
        assert serial == parallel
        assert [r.seed for r in parallel_reports] == [0, 1]
        assert [r.gauuc for r in parallel_reports] == serial.gauuc_by_seed


@pytest.fixture(scope="module")
def c1():
    return ConfigLoader(FIXTURES / "c1.yaml").load()


@pytest.mark.slow
class TestOracleRanking:
    """Grouped AUUC of the true uplift ranking on the c1 fixture, five protocol seeds."""

    @pytest.fixture(scope="class")
    def held(self, c1):
        data = generate(c1.scm, c1.data.n_episodes, workers=2)
        _, held = data.split(c1.plan.holdout_fraction)
        return [ep for ep in held[:400] if ep.touches]

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_oracle_beats_random(self, c1, held, seed):
        protocol = c1.eval.model_copy(update={"shapley_samples": 16})
        value = oracle_value_fn(c1.scm)
        n = c1.scm.n_clusters
        oracle = grouped_auuc(held, oracle_pair_score(c1.scm), value, protocol, n, seed)
        random = grouped_auuc(held, random_score, value, protocol, n, seed)
        assert oracle.gauuc > random.gauuc

    def test_oracle_invariant_to_monotone_transform(self, c1, held):
        protocol = c1.eval.model_copy(update={"shapley_samples": 16})
        value = oracle_value_fn(c1.scm)
        score = oracle_pair_score(c1.scm)

        def stretched(ep, clusters):
            return math.exp(50.0 * score(ep, clusters))

        n = c1.scm.n_clusters
        base = grouped_auuc(held, score, value, protocol, n, seed=3)
        assert grouped_auuc(held, stretched, value, protocol, n, seed=3).gauuc == base.gauuc


@pytest.mark.slow
class TestProxySweep:
    """Downstream grouped AUUC of the trained network along a proxy-relevance sweep."""

    def test_gauuc_non_decreasing_in_relevance(self, c1):
        protocol = c1.eval.model_copy(update={"shapley_samples": 16, "seeds": (0, 1, 2)})
        avg_auuc = []
        for scm in sensitivity_grid(c1.scm, [0.0, 0.5, 1.0], [0.0]):
            data = generate(scm, c1.data.n_episodes, workers=2)
            result = staged_train(data, c1.model, c1.plan)
            held = [ep for ep in result.held_out[:400] if ep.touches]
            row, _ = evaluate_method(
                ModelAttributor(result.state),
                held,
                protocol,
                scm.n_clusters,
                oracle_value_fn(scm),
                workers=3,
            )
            avg_auuc.append(row.avg_auuc)
        assert avg_auuc == sorted(avg_auuc)
