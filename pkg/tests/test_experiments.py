"""Grilles de benchmark et taux de victoire"""

import pandas as pd
import pytest

from src.errors import UnsupportedKError
from src.experiments import (TIDY_COLUMNS, BenchmarkGrid, evaluate_cell, run_benchmark, run_eta_sweep,
                             summarize_benchmark, win_rate)
from src.inference import FitConfig
from src.priors import HyperParams
from src.synthetic import Scenario, SynthConfig

BASE = SynthConfig(n_nodes=30, n_reporters=30, avg_degree=4, seed=0)
FAST = FitConfig(max_iterations=60, elbo_rel_tol=1e-4)


def test_cells_cover_the_grid():
    grid = BenchmarkGrid(scenarios=["a", "b"], theta_ratios=[0.1, 0.2], etas=[0.2], seeds=3)
    cells = grid.cells(BASE)
    assert len(cells) == 2 * 2 * 1 * 3
    assert cells[0].scenario is Scenario.OVER_REPORTERS
    assert sorted({c.seed for c in cells}) == [0, 1, 2]


def test_grid_from_config_section():
    grid = BenchmarkGrid.from_mapping({"scenarios": ["c"], "etas": [0.1, 0.3], "seeds": 2})
    assert grid.scenarios == ("c",) and grid.etas == (0.1, 0.3)


def test_evaluate_cell_rows():
    cfg = SynthConfig(n_nodes=30, n_reporters=30, avg_degree=4, scenario="a", theta_ratio=0.2,
                      eta_planted=0.2, seed=1)
    table = pd.DataFrame(evaluate_cell(cfg, FAST, HyperParams()))
    assert set(table["method"]) == {"truth", "union", "intersection", "posterior",
                                    "posterior_no_mutuality"}
    posterior = table[table["method"] == "posterior"].set_index("metric")["value"]
    assert {"f1", "mse_theta", "eta_est", "best_threshold"} <= set(posterior.index)
    assert 0.0 <= posterior["f1"] <= 1.0
    assert "best_threshold" not in set(table.loc[table["method"] == "posterior_no_mutuality", "metric"])
    with pytest.raises(UnsupportedKError):
        evaluate_cell(cfg, FitConfig(n_levels=3), HyperParams())


def test_run_benchmark_and_summary():
    grid = BenchmarkGrid(scenarios=["b"], theta_ratios=[0.2], etas=[0.5], seeds=2,
                         mutuality_variants=[True])
    table = run_benchmark(grid, BASE, FAST, HyperParams())
    assert list(table.columns) == TIDY_COLUMNS
    assert sorted(table["seed"].unique()) == [0, 1]
    summary = summarize_benchmark(table)
    f1 = summary[(summary["method"] == "posterior") & (summary["metric"] == "f1")]
    assert len(f1) == 1 and f1["n"].iloc[0] == 2


def test_eta_sweep_rows():
    grid = BenchmarkGrid(eta_sweep=[0.0, 0.4], eta_sweep_seeds=2)
    sweep = run_eta_sweep(grid, BASE, FAST, HyperParams())
    assert len(sweep) == 4
    assert set(sweep.columns) == {"eta_planted", "seed", "eta_est", "converged"}
    assert (sweep["eta_est"] > 0).all()


def test_win_rate():
    rows = []
    for seed, (ours, union, inter) in enumerate([(0.9, 0.5, 0.4), (0.3, 0.6, 0.2), (0.7, 0.7, 0.1)]):
        for method, value in (("posterior", ours), ("union", union), ("intersection", inter)):
            rows.append({"scenario": "a", "theta_ratio": 0.1, "lambda_diff": 0.99, "eta_planted": 0.2,
                         "seed": seed, "method": method, "metric": "f1", "value": value})
    table = pd.DataFrame(rows)
    assert win_rate(table, "f1", "posterior", ["union", "intersection"]) == pytest.approx(2 / 3)
    assert win_rate(table, "f1", "posterior", ["union", "intersection"], margin=0.5) == 1.0
    assert win_rate(table, "f1", "posterior", ["union"], target=0.35) == pytest.approx(1 / 3)
    assert pd.isna(win_rate(table, "reciprocity", "posterior", ["union"]))


@pytest.mark.slow
def test_posterior_reciprocity_closest_to_planted():
    grid = BenchmarkGrid(scenarios=["c"], theta_ratios=[0.0], lambda_diffs=[1.0], etas=[0.2, 0.5],
                         seeds=5, reciprocity_target=0.2, mutuality_variants=[True])
    table = run_benchmark(grid, SynthConfig(seed=0), FitConfig(), HyperParams())
    assert win_rate(table, "reciprocity", "posterior", ["union", "intersection"], target=0.2) >= 0.8


@pytest.mark.slow
def test_posterior_f1_matches_best_baseline():
    grid = BenchmarkGrid(scenarios=["a", "b"], theta_ratios=[0.3, 0.4, 0.5], etas=[0.2], seeds=3,
                         mutuality_variants=[True])
    table = run_benchmark(grid, SynthConfig(seed=0), FitConfig(), HyperParams())
    assert win_rate(table, "f1", "posterior", ["union", "intersection"], margin=0.02) >= 0.8
