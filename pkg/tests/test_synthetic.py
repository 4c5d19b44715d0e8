"""Générateur synthétique: réseau planté, fiabilités, déclarations, réciprocité"""

from dataclasses import replace

import numpy as np
import pytest

from src.errors import InvalidConfigurationError, InvalidProbabilityError, TargetUnreachableError
from src.network_stats import reciprocity
from src.reports import MaskRule, ReporterMask
from src.synthetic import (Scenario, SynthConfig, community_labels, draw_report_pair,
                           generate_ground_truth, generate_reports, marginal_mean,
                           planted_reciprocity_target, truncated_power_law)


class TestConfig:
    def test_scenario_aliases(self):
        assert Scenario.parse("a") is Scenario.OVER_REPORTERS
        assert Scenario.parse("B") is Scenario.UNDER_REPORTERS
        assert Scenario.parse("gamma_theta") is Scenario.GAMMA_THETA
        with pytest.raises(InvalidConfigurationError):
            Scenario.parse("d")

    def test_defaults_depend_on_scenario(self):
        a = SynthConfig(scenario="a")
        c = SynthConfig(scenario="c")
        assert a.resolved_lambda_diff == pytest.approx(0.99)
        assert c.resolved_lambda_diff == 1.0
        assert not a.uses_degree_correction and c.uses_degree_correction
        assert a.lambdas.tolist() == pytest.approx([0.01, 1.0])

    def test_p_in_above_one(self):
        with pytest.raises(InvalidProbabilityError):
            SynthConfig(n_nodes=10, n_communities=2, avg_degree=8)

    @pytest.mark.parametrize("kwargs", [{"theta_ratio": 0.6}, {"eta_planted": 1.0},
                                        {"mask_rule": "custom"}, {"n_communities": 0},
                                        {"lambda_diff": 1.5}])
    def test_invalid_values(self, kwargs):
        with pytest.raises(InvalidConfigurationError):
            SynthConfig(**kwargs)


class TestGroundTruth:
    def test_community_labels(self):
        assert community_labels(5, 2).tolist() == [0, 0, 0, 1, 1]

    def test_power_law_support(self):
        values = truncated_power_law(np.random.default_rng(0), 2.5, 10_000, upper=50.0)
        assert values.min() >= 1.0 and values.max() <= 50.0
        assert np.median(values) < 2.0

    def test_complete_graph_when_p_in_is_one(self):
        gt = generate_ground_truth(SynthConfig(n_nodes=8, n_reporters=8, n_communities=1,
                                               avg_degree=8, scenario="a"))
        assert gt.y.nnz == 8 * 7
        assert gt.y.diagonal().sum() == 0

    def test_mean_edge_count_over_seeds(self):
        base = SynthConfig(n_nodes=100, n_reporters=100, n_communities=2, avg_degree=10,
                           p_out_ratio=0.1, scenario="a")
        counts = [generate_ground_truth(replace(base, seed=s)).y.nnz
                  for s in range(20)]
        within, between = 2 * 50 * 49, 2 * 50 * 50
        expected = within * base.p_in + between * base.p_out
        variance = within * base.p_in * (1 - base.p_in) + between * base.p_out * (1 - base.p_out)
        assert abs(np.mean(counts) - expected) < 3 * np.sqrt(variance / 20)

    def test_over_reporters_share(self):
        gt = generate_ground_truth(SynthConfig(n_reporters=100, scenario="a", theta_ratio=0.2))
        assert int(np.sum(gt.theta == 50.0)) == 20
        assert int(np.sum(gt.theta == 1.0)) == 80

    def test_under_reporters_share(self):
        gt = generate_ground_truth(SynthConfig(n_reporters=30, scenario="b", theta_ratio=0.1))
        assert int(np.sum(gt.theta == 0.5)) == 3

    def test_same_seed_same_network(self):
        cfg = SynthConfig(n_nodes=60, n_reporters=60, avg_degree=5, seed=4)
        first, second = generate_ground_truth(cfg), generate_ground_truth(cfg)
        assert (first.y != second.y).nnz == 0
        np.testing.assert_array_equal(first.theta, second.theta)


class TestReports:
    def test_deterministic_reporters_copy_the_network(self):
        cfg = SynthConfig(n_nodes=40, n_reporters=40, avg_degree=4, scenario="a",
                          theta_ratio=0.0, eta_planted=0.0, seed=1)
        gt = generate_ground_truth(cfg)
        X = generate_reports(gt, cfg.mask(), seed=1)
        y = gt.y.toarray()
        expected = [(i, j, m) for i in range(40) for j in range(40) if y[i, j]
                    for m in (i, j)]
        assert sorted((i, j, m) for i, j, m, _ in X) == sorted(expected)
        assert np.all(X.count == 1)

    def test_zero_rates_only_produce_true_edges(self):
        cfg = SynthConfig(n_nodes=40, n_reporters=40, avg_degree=4, scenario="c",
                          lambda0=0.0, eta_planted=0.0, seed=2)
        gt = generate_ground_truth(cfg)
        X = generate_reports(gt, cfg.mask(), seed=2)
        y = gt.y.toarray()
        assert X.nnz > 0
        assert all(y[i, j] == 1 for i, j, _, _ in X)

    def test_reports_respect_mask_and_seed(self):
        cfg = SynthConfig(n_nodes=30, n_reporters=10, avg_degree=4, mask_rule="full_roster", seed=3)
        gt = generate_ground_truth(cfg)
        X = generate_reports(gt, cfg.mask(), seed=3)
        assert X.mask.rule is MaskRule.FULL_ROSTER
        assert X.n_reporters == 10
        again = generate_reports(gt, cfg.mask(), seed=3)
        np.testing.assert_array_equal(X.keys, again.keys)
        np.testing.assert_array_equal(X.count, again.count)
        other = generate_reports(gt, cfg.mask(), seed=4)
        assert not (X.nnz == other.nnz and np.array_equal(X.keys, other.keys)
                    and np.array_equal(X.count, other.count))

    def test_self_dyads_with_fewer_reporters(self):
        cfg = SynthConfig(n_nodes=30, n_reporters=10, avg_degree=4, seed=5)
        gt = generate_ground_truth(cfg)
        X = generate_reports(gt, ReporterMask.self_dyads(), seed=5)
        assert np.all((X.reporter == X.ego) | (X.reporter == X.alter))
        assert np.all(X.reporter < 10)

    def test_two_step_draw_matches_marginals(self):
        rng = np.random.default_rng(0)
        theta, lam1, lam2, eta, n = 2.0, 1.0, 0.5, 0.5, 200_000
        first, second = draw_report_pair(rng, theta, lam1, lam2, eta, size=n)
        mu1 = marginal_mean(theta, lam1, lam2, eta)
        mu2 = marginal_mean(theta, lam2, lam1, eta)
        assert mu1 == pytest.approx(10 / 3)
        assert abs(first.mean() - mu1) < 3 * np.sqrt(mu1 / n)
        var2 = mu2 + eta ** 2 * mu1
        assert abs(second.mean() - mu2) < 3 * np.sqrt(var2 / n)

    def test_custom_mask_rejected(self):
        gt = generate_ground_truth(SynthConfig(n_nodes=10, n_reporters=10, avg_degree=2))
        mask = ReporterMask.custom([(0, 1, 0)], n_nodes=10, n_reporters=10)
        with pytest.raises(InvalidConfigurationError):
            generate_reports(gt, mask, seed=0)


class TestReciprocityTarget:
    def test_target_reached_with_same_edge_count(self):
        cfg = SynthConfig(n_nodes=100, n_reporters=100, avg_degree=10, scenario="a", seed=0)
        base = generate_ground_truth(cfg)
        gt = planted_reciprocity_target(cfg, target=0.2, tolerance=0.02)
        assert abs(reciprocity(gt.y) - 0.2) <= 0.02
        assert gt.reciprocity == pytest.approx(reciprocity(gt.y))
        assert gt.y.nnz == base.y.nnz
        np.testing.assert_array_equal(gt.theta, base.theta)

    def test_full_reciprocity_is_symmetric(self):
        cfg = SynthConfig(n_nodes=50, n_reporters=50, avg_degree=4, scenario="a", seed=1)
        gt = planted_reciprocity_target(cfg, target=1.0)
        assert (gt.y != gt.y.T).nnz == 0
        assert reciprocity(gt.y) == 1.0

    def test_no_reciprocity_on_dense_graph_is_unreachable(self):
        cfg = SynthConfig(n_nodes=10, n_reporters=10, n_communities=1, avg_degree=8, scenario="a")
        with pytest.raises(TargetUnreachableError) as err:
            planted_reciprocity_target(cfg, target=0.0)
        assert err.value.achieved is not None

    def test_target_outside_unit_interval(self):
        with pytest.raises(InvalidConfigurationError):
            planted_reciprocity_target(SynthConfig(n_nodes=10, n_reporters=10, avg_degree=2), target=1.5)
