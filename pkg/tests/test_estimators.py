"""Tests for IPW weights, front-door estimators and deletion attribution."""

import logging
from pathlib import Path

import numpy as np
import pytest
from sklearn.linear_model import LogisticRegression

from frontdoor_mta.config import ConfigLoader
from frontdoor_mta.errors import ContractViolation, PositivityError
from frontdoor_mta.estimators import (
    AttributionReport,
    IpwConfig,
    ModelAttributor,
    attribute,
    bootstrap_frontdoor_variance,
    build_frontdoor_tables,
    coverage_summary,
    deletion_uplift,
    episode_weights,
    frontdoor_do,
    frontdoor_ipw_do,
    ipw_weight,
    ipw_weights,
    make_sample,
    naive_conditional,
    overlap_support,
    quantile_bins,
    rank_agreement,
    read_reports,
    top_k_mask,
    write_reports,
)
from frontdoor_mta.nn import predict_upload
from frontdoor_mta.scm import GroundTruth, generate, population_do_expectation
from tests.conftest import make_episode

FIXTURES = Path(__file__).resolve().parent.parent / "config" / "fixtures"


def reference_frontdoor(f_hat, p_m_given_t, p_tx, t) -> float:
    """Triple loop over (m, t', x)."""
    n_m, n_t, n_x = f_hat.shape
    total = 0.0
    for m in range(n_m):
        inner = 0.0
        for tp in range(n_t):
            for x in range(n_x):
                inner += f_hat[m, tp, x] * p_tx[tp, x]
        total += p_m_given_t[t, m] * inner
    return total


def single_touch_sample(dataset, n_m=21, n_x=2):
    """Front-door sample using the sealed latent mediator of single-touch episodes."""
    eps = dataset.episodes
    t = [ep.cluster_ids[0] for ep in eps]
    m = np.array([dataset.latents.unseal(ep.latent_handle).m for ep in eps])
    x0 = np.array([ep.x[0] for ep in eps])
    y = [ep.y for ep in eps]
    return make_sample(t, m, x0, y, dataset.config.n_clusters, n_m=n_m, n_x=n_x)


class TestIpw:
    """Tests for inverse-propensity weights."""

    def test_weight_is_inverse(self):
        assert ipw_weight(IpwConfig(), 0.25) == 4.0

    def test_clamp_is_logged(self, caplog):
        cfg = IpwConfig(p_floor=0.05)
        with caplog.at_level(logging.WARNING, logger="frontdoor_mta"):
            assert ipw_weight(cfg, 0.001) == pytest.approx(20.0)
        assert "clamped" in caplog.text

    def test_vector_clamp_counts(self, caplog):
        cfg = IpwConfig(p_floor=0.1, p_ceil=0.9)
        with caplog.at_level(logging.WARNING, logger="frontdoor_mta"):
            w = ipw_weights(cfg, np.array([0.01, 0.5, 0.99]))
        np.testing.assert_allclose(w, [10.0, 2.0, 1 / 0.9])
        assert "2 of 3" in caplog.text

    def test_floor_above_ceiling_rejected(self):
        with pytest.raises(ValueError):
            IpwConfig(p_floor=0.6, p_ceil=0.5)

    def test_episode_weight_is_geometric_mean(self):
        cfg = IpwConfig(normalize=False)
        p = np.array([0.5, 0.125, 0.2])
        segments = np.array([0, 0, 2])
        w = episode_weights(cfg, p, segments, 3)
        np.testing.assert_allclose(w, [np.sqrt(2.0 * 8.0), 1.0, 5.0])

    def test_sequence_length_keeps_single_touch_scale(self):
        cfg = IpwConfig(normalize=False)
        w = episode_weights(cfg, np.full(5, 0.25), np.array([0, 1, 1, 1, 1]), 2)
        np.testing.assert_allclose(w, [4.0, 4.0])

    def test_normalized_to_unit_mean(self):
        w = episode_weights(IpwConfig(), np.array([0.5, 0.1, 0.3]), np.array([0, 1, 2]), 3)
        assert w.mean() == pytest.approx(1.0)

    def test_unit_propensity_gives_unweighted_estimate(self):
        """With every propensity at 1 the weighted mean equals the plain mean."""
        cfg = IpwConfig(p_ceil=1.0, normalize=False)
        y = np.array([1.0, 0.0, 1.0, 1.0])
        w = episode_weights(cfg, np.ones(4), np.arange(4), 4)
        assert np.average(y, weights=w) == y.mean()


class TestFrontdoorDo:
    """Tests for the plug-in front-door formula."""

    @pytest.fixture
    def tables(self):
        rng = np.random.default_rng(4)
        f_hat = rng.uniform(0, 1, (3, 2, 2))
        p_m = rng.dirichlet(np.ones(3), size=2)
        p_tx = rng.dirichlet(np.ones(4)).reshape(2, 2)
        return f_hat, p_m, p_tx

    def test_matches_reference_loop(self, tables):
        f_hat, p_m, p_tx = tables
        for t in range(2):
            assert frontdoor_do(f_hat, p_m, p_tx, t) == pytest.approx(
                reference_frontdoor(f_hat, p_m, p_tx, t), abs=1e-14
            )

    def test_unnormalized_row_rejected(self, tables):
        f_hat, p_m, p_tx = tables
        bad = p_m.copy()
        bad[1] *= 1.1
        with pytest.raises(ContractViolation):
            frontdoor_do(f_hat, bad, p_tx, 0)

    def test_empty_cell_names_cell(self, tables):
        f_hat, p_m, p_tx = tables
        f_hat = f_hat.copy()
        f_hat[2, 1, 0] = np.nan
        with pytest.raises(PositivityError) as info:
            frontdoor_do(f_hat, p_m, p_tx, 0)
        assert info.value.cell == (2, 1, 0)

    def test_shape_mismatch_rejected(self, tables):
        f_hat, p_m, p_tx = tables
        with pytest.raises(ContractViolation):
            frontdoor_do(f_hat[:2], p_m, p_tx, 0)

    def test_full_support_equals_no_support(self, tables):
        f_hat, p_m, p_tx = tables
        full = np.ones_like(p_tx, dtype=bool)
        assert frontdoor_do(f_hat, p_m, p_tx, 1, full) == pytest.approx(
            frontdoor_do(f_hat, p_m, p_tx, 1), abs=1e-15
        )

    def test_support_renormalizes(self, tables):
        f_hat, p_m, p_tx = tables
        support = np.array([[True, False], [False, False]])
        expected = sum(p_m[0, m] * f_hat[m, 0, 0] for m in range(3))
        assert frontdoor_do(f_hat, p_m, p_tx, 0, support) == pytest.approx(expected)

    def test_empty_support_rejected(self, tables):
        f_hat, p_m, p_tx = tables
        with pytest.raises(PositivityError):
            frontdoor_do(f_hat, p_m, p_tx, 0, np.zeros_like(p_tx, dtype=bool))

    def test_mediator_relabeling_invariant(self, tables):
        f_hat, p_m, p_tx = tables
        order = np.array([2, 0, 1])
        for t in range(2):
            assert frontdoor_do(f_hat[order], p_m[:, order], p_tx, t) == pytest.approx(
                frontdoor_do(f_hat, p_m, p_tx, t), abs=1e-15
            )


class TestFrontdoorSample:
    """Tests for discretization and table building."""

    def test_quantile_bins_are_balanced(self):
        bins = quantile_bins(np.arange(100.0), 4)
        assert np.bincount(bins).tolist() == [25, 25, 25, 25]

    def test_tables_are_normalized(self):
        rng = np.random.default_rng(0)
        n = 500
        sample = make_sample(
            rng.integers(0, 3, n), rng.standard_normal((n, 3)), rng.standard_normal(n),
            rng.integers(0, 2, n), n_t=3, n_m=4, n_x=2,
        )
        tables = build_frontdoor_tables(sample)
        assert tables.p_tx.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(tables.p_m_given_t.sum(axis=1), 1.0)
        assert tables.counts.sum() == n

    def test_unit_weights_match_plug_in(self):
        """The Hajek mediator distribution with unit weights is the plug-in P(m|t)."""
        rng = np.random.default_rng(1)
        n = 2000
        sample = make_sample(
            rng.integers(0, 2, n), rng.standard_normal(n), rng.standard_normal(n),
            rng.integers(0, 2, n), n_t=2, n_m=3, n_x=2,
        )
        tables = build_frontdoor_tables(sample)
        plug_in = frontdoor_do(tables.f_hat, tables.p_m_given_t, tables.p_tx, 1)
        assert frontdoor_ipw_do(tables, sample, 1, np.ones(n)) == pytest.approx(plug_in, abs=1e-12)

    def test_overlap_support_picks_best_cells(self):
        sample = make_sample(
            [0, 0, 1, 1, 2, 2], np.arange(6.0), [0, 1, 0, 1, 0, 1], [0, 1, 0, 1, 0, 1],
            n_t=3, n_m=2, n_x=2,
        )
        match = np.array([0.9, 0.1, 0.5, 0.5, 0.8, 0.2])
        support = overlap_support(sample, match, 2)
        assert support.sum() == 2
        assert support[0, 0] and support[2, 0]

    def test_naive_conditional(self, episodes):
        expected = np.mean([e.y for e in episodes if 0 in e.cluster_ids])
        assert naive_conditional(episodes, 0) == expected

    def test_naive_conditional_unseen_cluster(self, episodes):
        with pytest.raises(PositivityError):
            naive_conditional(episodes, 13)


@pytest.mark.slow
class TestDeconfounding:
    """Front-door recovery against the oracle on the confounded single-touch fixture."""

    @pytest.fixture(scope="class")
    def fixture_data(self):
        cfg = ConfigLoader(FIXTURES / "frontdoor.yaml").load()
        return cfg, generate(cfg.scm, cfg.data.n_episodes, workers=2)

    def test_frontdoor_recovers_oracle(self, fixture_data):
        cfg, data = fixture_data
        sample = single_touch_sample(data)
        tables = build_frontdoor_tables(sample)
        X = np.array([ep.x for ep in data.episodes])
        propensity = LogisticRegression(max_iter=2000).fit(X, sample.t).predict_proba(X)
        weights = 1.0 / np.clip(propensity[np.arange(len(sample)), sample.t], 0.01, 1.0)

        naive_errors = []
        for t in range(cfg.scm.n_clusters):
            truth = population_do_expectation(cfg.scm, [t]).value
            plug_in = frontdoor_do(tables.f_hat, tables.p_m_given_t, tables.p_tx, t)
            ipw = frontdoor_ipw_do(tables, sample, t, weights)
            assert abs(plug_in - truth) < 0.02, (t, plug_in, truth)
            assert abs(ipw - truth) < 0.02, (t, ipw, truth)
            naive_errors.append(abs(naive_conditional(data.episodes, t) - truth))
        assert max(naive_errors) > 0.05


@pytest.mark.slow
class TestOverlapFiltering:
    """Top-K overlap filtering lowers bootstrap variance on sparse treatments."""

    def test_filtered_variance_not_larger(self):
        cfg = ConfigLoader(FIXTURES / "sparse.yaml").load()
        data = generate(cfg.scm, cfg.data.n_episodes, workers=2)
        sample = single_touch_sample(data, n_m=5)
        target = int(np.argmax(cfg.scm.pathway_weights))
        match = np.array([ep.proxy_scores[0] for ep in data.episodes])
        support = overlap_support(sample, match, top_k=sample.n_t * sample.n_x // 2)

        filtered, _ = bootstrap_frontdoor_variance(sample, target, 200, seed=1, support=support)
        unfiltered, _ = bootstrap_frontdoor_variance(sample, target, 200, seed=1)
        assert filtered <= unfiltered


class TestAttribution:
    """Tests for counterfactual deletion attribution."""

    def test_deletion_identity(self, state):
        ep = make_episode([0, 2, 1, 3])
        for j in range(4):
            delta = deletion_uplift(state, ep, j)
            assert delta + predict_upload(state, ep.without(j)) == pytest.approx(
                predict_upload(state, ep), abs=1e-15
            )

    def test_index_out_of_range(self, state):
        with pytest.raises(ContractViolation):
            deletion_uplift(state, make_episode([0, 1]), 2)

    def test_report_matches_single_deletions(self, state):
        ep = make_episode([0, 2, 1, 3], proxy=[0.1, 0.9, 0.4, 0.7])
        report = attribute(state, ep, top_k=2)
        assert report.depth == 2
        for j, delta in enumerate(report.delta_hat):
            if report.mask[j]:
                assert delta == pytest.approx(deletion_uplift(state, ep, j), abs=1e-12)
            else:
                assert delta is None

    def test_depth_capped_by_sequence_length(self, state):
        ep = make_episode([0, 2, 1])
        assert attribute(state, ep, top_k=10).depth == 3

    def test_empty_episode_rejected(self, state):
        with pytest.raises(ContractViolation):
            attribute(state, make_episode([]))

    def test_top_k_ties_prefer_earlier(self):
        mask = top_k_mask(np.array([0.5, 0.9, 0.5, 0.5]), [1, 2, 3, 4], 2)
        assert mask.tolist() == [True, True, False, False]

    def test_report_rejects_misaligned_delta(self):
        with pytest.raises(ValueError):
            AttributionReport(
                episode_id="e", y=1, p_full=0.5, touch_ids=["a"], omega=[0.0], mask=[True],
                delta_hat=[None],
            )

    def test_coverage_summary(self):
        def report(y, mask, omega):
            return AttributionReport(
                episode_id="e", y=y, p_full=0.5, touch_ids=[str(i) for i in range(len(mask))],
                omega=omega, mask=mask, delta_hat=[0.1 if m else None for m in mask],
            )

        reports = [
            report(1, [True, True], [2.0, -2.0]),
            report(1, [True, False], [-2.0, 3.0]),
            report(0, [True], [5.0]),
        ]
        summary = coverage_summary(reports, threshold=0.54)
        assert summary.n_positive == 2
        assert summary.coverage == 0.5
        assert summary.mean_depth == 2.0

    def test_rank_agreement_perfect(self, state):
        ep = make_episode([0, 2, 1, 3])
        report = attribute(state, ep, top_k=4)
        deltas = [d for d in report.delta_hat]
        truth = GroundTruth.from_probabilities(0.9, [0.9 - d for d in deltas])
        assert rank_agreement([report], [truth]) == pytest.approx(1.0)

    def test_rank_agreement_needs_two_touches(self, state):
        report = attribute(state, make_episode([1]), top_k=1)
        truth = GroundTruth.from_probabilities(0.5, [0.4])
        with pytest.raises(ContractViolation):
            rank_agreement([report], [truth])

    def test_reports_file_carries_hash(self, state, episodes, tmp_path):
        reports = [attribute(state, ep) for ep in episodes]
        write_reports(tmp_path / "out" / "a.jsonl", reports, "h123")
        digest, loaded = read_reports(tmp_path / "out" / "a.jsonl")
        assert digest == "h123"
        assert loaded == reports

    def test_model_attributor_uplifts(self, state):
        ep = make_episode([0, 2, 1])
        uplifts = ModelAttributor(state).touch_uplifts(ep)
        for j in range(3):
            assert uplifts[j] == pytest.approx(deletion_uplift(state, ep, j), abs=1e-12)
