"""Seuil heuristique et estimation ponctuelle"""

import numpy as np
import pytest
from scipy import sparse

from conftest import random_reports
from src.errors import EmptySampleError, LengthMismatchError
from src.inference import FitConfig, fit, init_state, prepare
from src.priors import HyperParams
from src.reports import ReporterMask, ReportTensor
from src.thresholds import (SWEEP_GRID, edges_to_csr, fit_threshold_line, heuristic_threshold,
                            point_estimate, threshold_sweep)


@pytest.mark.parametrize("eta,expected", [(0.5, 0.26), (0.0, 0.05), (2.0, 0.75), (0.1, 0.05),
                                          (0.8, 0.422)])
def test_heuristic_threshold(eta, expected):
    assert heuristic_threshold(eta) == pytest.approx(expected)


def test_heuristic_threshold_without_clamp():
    assert heuristic_threshold(0.0, clamp=False) == pytest.approx(-0.01)


def test_sweep_grid_bounds():
    assert SWEEP_GRID[0] == 0.05 and SWEEP_GRID[-1] == 0.75
    assert len(SWEEP_GRID) == 29


def test_ineligible_pairs_fall_back_to_prior():
    # N = 4, M = 2: la paire (2, 3) n'a aucun déclarant éligible
    X = ReportTensor.empty(4, 2, ReporterMask.self_dyads())
    h, layout = prepare(X, HyperParams(p=[0.2, 0.8], p_overrides={(2, 3): [0.9, 0.1]}), 2)
    state = init_state(h, X, FitConfig(seed=0), layout)
    network = point_estimate(state, 0.0, override_threshold=0.5, prior=h).toarray()
    assert network[3, 2] == 1
    assert network[2, 3] == 0
    assert network.sum() == 11
    assert np.all(np.diag(network) == 0)


def test_point_estimate_returns_threshold():
    X = ReportTensor.empty(3, 3, ReporterMask.full_roster())
    h, layout = prepare(X, HyperParams(), 2)
    state = init_state(h, X, FitConfig(seed=0), layout)
    network, threshold = point_estimate(state, 0.5, return_threshold=True)
    assert threshold == pytest.approx(0.26)
    assert sparse.issparse(network)


def test_threshold_sweep_picks_closest_reciprocity():
    rng = np.random.default_rng(2)
    X = random_reports(rng, 10, ReporterMask.self_dyads(), density=0.3)
    result = fit(X, HyperParams(), FitConfig(seed=0, max_iterations=50))
    truth = np.zeros((10, 10), dtype=int)
    truth[0, 1] = truth[1, 0] = truth[2, 3] = 1
    sweep = threshold_sweep(result.state, truth)
    assert len(sweep.table) == len(SWEEP_GRID)
    assert sweep.truth_reciprocity == pytest.approx(2 / 3)
    best = sweep.table["abs_error"].min()
    candidates = sweep.table.loc[sweep.table["abs_error"] == best, "threshold"]
    assert sweep.best_threshold == candidates.min()
    with pytest.raises(EmptySampleError):
        threshold_sweep(result.state, truth, grid=[])


def test_fit_threshold_line():
    eta = np.array([0.0, 0.2, 0.4, 0.8])
    slope, intercept = fit_threshold_line(eta, 0.54 * eta - 0.01)
    assert slope == pytest.approx(0.54)
    assert intercept == pytest.approx(-0.01)
    with pytest.raises(LengthMismatchError):
        fit_threshold_line([0.1, 0.2], [0.1])
    with pytest.raises(EmptySampleError):
        fit_threshold_line([0.1], [0.1])


def test_edges_to_csr_matches_coo():
    rng = np.random.default_rng(3)
    n = 9
    keys = rng.choice(n * n, size=30, replace=False)
    network = edges_to_csr(keys, n)
    expected = sparse.coo_matrix((np.ones(keys.size), (keys // n, keys % n)), shape=(n, n)).toarray()
    np.testing.assert_array_equal(network.toarray(), expected)
    assert network.has_sorted_indices and network.dtype == np.int8
    assert edges_to_csr(np.zeros(0, dtype=np.int64), n).nnz == 0


def test_point_estimate_matches_dense_threshold():
    X = random_reports(np.random.default_rng(5), 6, ReporterMask.self_dyads(), density=0.3)
    result = fit(X, HyperParams(), FitConfig(seed=0, max_iterations=40))
    dense = result.state.dense_rho()[:, :, 1]
    expected = np.nan_to_num(dense, nan=0.0) >= 0.3
    network = point_estimate(result.state, 0.0, override_threshold=0.3, block_pairs=4)
    np.testing.assert_array_equal(network.toarray(), expected.astype(np.int8))
    assert network.has_sorted_indices
