"""Sérialisation JSON et cache .npz"""

import json

import numpy as np
import pytest

from conftest import random_reports
from src.errors import InvalidConfigurationError
from src.inference import FitConfig, fit
from src.priors import HyperParams, validate_hyperparams
from src.reports import ReporterMask, build_report_tensor
from src.serialization import from_dict, load_json, load_npz, save_json, save_npz, to_dict
from src.synthetic import SynthConfig, generate_ground_truth


@pytest.fixture(scope="module")
def result():
    X = random_reports(np.random.default_rng(8), 8, ReporterMask.self_dyads(), density=0.4)
    return fit(X, HyperParams(), FitConfig(seed=1, max_iterations=40))


def _assert_same_fit(a, b):
    assert a.elbo_trace == b.elbo_trace
    assert a.eta_est == b.eta_est
    np.testing.assert_array_equal(a.state.rho, b.state.rho)
    np.testing.assert_array_equal(a.state.dense_rho(), b.state.dense_rho())
    assert (a.point_network != b.point_network).nnz == 0
    assert a.state.mask == b.state.mask


def test_fit_result_json(result, tmp_path):
    path = save_json(result, tmp_path / "fit.json")
    assert json.loads(path.read_text(encoding="utf-8"))["__type__"] == "FitResult"
    _assert_same_fit(result, load_json(path))


def test_fit_result_npz(result, tmp_path):
    _assert_same_fit(result, load_npz(save_npz(result, tmp_path / "fit.npz")))


def test_custom_mask_tensor():
    mask = ReporterMask.custom([(0, 1, 0), (1, 2, 2)], n_nodes=3, n_reporters=3)
    X = build_report_tensor([(0, 1, 0, 4)], 3, mask)
    back = from_dict(json.loads(json.dumps(to_dict(X))))
    assert list(back) == list(X)
    np.testing.assert_array_equal(back.mask.custom_reporter, mask.custom_reporter)


def test_hyperparams_keep_validation_status():
    raw = HyperParams(alpha=2.0, p_overrides={(0, 1): [0.8, 0.2]})
    back = from_dict(json.loads(json.dumps(to_dict(raw))))
    assert not back.is_validated
    assert back.alpha == 2.0
    assert tuple(back.p_overrides[(0, 1)]) == (0.8, 0.2)

    checked = validate_hyperparams(raw, 2, 3, 3)
    back = from_dict(json.loads(json.dumps(to_dict(checked))))
    assert back.is_validated
    np.testing.assert_array_equal(back.alpha, checked.alpha)


def test_ground_truth(tmp_path):
    gt = generate_ground_truth(SynthConfig(n_nodes=20, n_reporters=20, avg_degree=3, seed=2))
    back = load_json(save_json(gt, tmp_path / "gt.json"))
    assert (back.y != gt.y).nnz == 0
    np.testing.assert_array_equal(back.theta, gt.theta)
    assert back.scenario == gt.scenario


def test_unknown_types():
    with pytest.raises(InvalidConfigurationError):
        to_dict(object())
    with pytest.raises(InvalidConfigurationError):
        from_dict({"__type__": "Nope"})
