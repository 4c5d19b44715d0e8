"""Fichiers de sortie: artefacts d'ajustement, manifeste, données synthétiques"""

import json

import numpy as np
import pandas as pd
import pytest
from scipy import sparse

from src.exports import (eta_payload, file_sha256, network_frame, theta_frame, write_fit_artifacts,
                         write_manifest, write_rho, write_synthetic)
from src.inference import FitConfig, fit
from src.ingest import ingest_reports
from src.priors import HyperParams
from src.reports import ReporterMask, build_report_tensor
from src.synthetic import SynthConfig, generate_ground_truth, generate_reports


@pytest.fixture(scope="module")
def result():
    records = [(0, 1, 0, 1), (1, 0, 0, 1), (0, 1, 1, 2), (1, 2, 2, 1), (2, 0, 2, 1)]
    X = build_report_tensor(records, 3, ReporterMask.self_dyads())
    return fit(X, HyperParams(), FitConfig(seed=0, max_iterations=50))


def test_rho_file_lists_every_eligible_pair(result, tmp_path):
    path = write_rho(result.state, tmp_path / "rho.csv", labels=["a", "b", "c"], block_pairs=2)
    table = pd.read_csv(path)
    assert list(table.columns) == ["i", "j", "k", "probability"]
    assert len(table) == 6 * 2
    sums = table.groupby(["i", "j"])["probability"].sum()
    np.testing.assert_allclose(sums.to_numpy(), 1.0, atol=1e-12)
    assert set(table["i"]) == {"a", "b", "c"}


def test_theta_and_eta(result):
    frame = theta_frame(result.state)
    assert list(frame.columns) == ["reporter", "shape", "rate", "mean"]
    np.testing.assert_allclose(frame["mean"], frame["shape"] / frame["rate"])
    payload = eta_payload(result)
    assert payload["mean"] == pytest.approx(result.eta_est)
    assert payload["threshold"] == result.threshold
    assert 0.05 <= payload["heuristic_threshold"] <= 0.75


def test_fit_artifacts_respect_switches(result, tmp_path):
    written = write_fit_artifacts(result, tmp_path, {"rho": False, "theta": True, "elbo_trace": True})
    names = sorted(p.name for p in written)
    assert names == ["elbo.csv", "eta.json", "network.csv", "theta.csv"]
    elbo = pd.read_csv(tmp_path / "elbo.csv")
    assert elbo["iteration"].tolist() == list(result.elbo_iterations)


def test_network_frame_is_sorted():
    net = sparse.csr_matrix(np.array([[0, 0, 1], [1, 0, 0], [1, 1, 0]]))
    frame = network_frame(net, labels=["x", "y", "z"])
    assert list(zip(frame["i"], frame["j"])) == [("x", "z"), ("y", "x"), ("z", "x"), ("z", "y")]


def test_manifest_hashes(result, tmp_path):
    artifact = tmp_path / "theta.csv"
    artifact.write_text("reporter,mean\n0,1.0\n", encoding="utf-8")
    path = write_manifest(tmp_path, 5, "abc", inputs=[artifact], artifacts=[artifact])
    manifest = json.loads(path.read_text(encoding="utf-8"))
    assert manifest["seed"] == 5 and manifest["config_hash"] == "abc"
    assert manifest["artifacts"] == {"theta.csv": file_sha256(artifact)}
    assert {"numpy", "scipy", "pandas", "python"} <= set(manifest["versions"])


def test_synthetic_files_read_back(tmp_path):
    cfg = SynthConfig(n_nodes=25, n_reporters=25, avg_degree=3, seed=6)
    gt = generate_ground_truth(cfg)
    X = generate_reports(gt, cfg.mask(), seed=6)
    written = write_synthetic(gt, X, cfg, tmp_path, report_seed=6)
    assert {p.name for p in written} == {"reports.csv", "nodes.csv", "ground_truth.csv",
                                         "theta_true.csv", "synth_config.json"}
    data = ingest_reports(tmp_path / "reports.csv", tmp_path / "nodes.csv")
    back = data.layers["synthetic"]
    np.testing.assert_array_equal(back.keys, X.keys)
    np.testing.assert_array_equal(back.count, X.count)
    config = json.loads((tmp_path / "synth_config.json").read_text(encoding="utf-8"))
    assert config["scenario"] == "gamma_theta" and config["report_seed"] == 6
    assert config["p_in"] == pytest.approx(cfg.p_in)


def test_eta_without_mutuality_is_zero():
    records = [(0, 1, 0, 1), (1, 0, 0, 1), (0, 1, 1, 2), (1, 2, 2, 1), (2, 0, 2, 1)]
    X = build_report_tensor(records, 3, ReporterMask.self_dyads())
    plain = fit(X, HyperParams(), FitConfig(seed=0, max_iterations=50, mutuality=False))
    payload = eta_payload(plain)
    assert payload["mean"] == 0.0 and payload["mutuality"] is False
    assert payload["shape"] is None and payload["rate"] is None
    assert payload["heuristic_threshold"] == pytest.approx(0.05)
