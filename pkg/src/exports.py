"""
Artefacts sur disque
====================
CSV (guillemets RFC-4180, fins de ligne \\n) et JSON pour tous les résultats:

    rho.csv       i,j,k,probability       (toutes les paires éligibles)
    theta.csv     reporter,shape,rate,mean
    eta.json      shape,rate,mean,heuristic_threshold,threshold
    elbo.csv      iteration,elbo
    summary.csv   une ligne NetworkSummary par (tie_type, méthode)
    manifest.json graine, empreinte de la configuration, versions, horodatage

Le générateur écrit reports.csv (relu tel quel par ingest_reports), nodes.csv,
ground_truth.csv, theta_true.csv et synth_config.json.
"""

import csv
import hashlib
import json
import logging
import platform
from dataclasses import asdict
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import networkx
import numpy as np
import pandas as pd
import scipy
import yaml

from src.network_stats import NetworkSummary
from src.reports import ReportTensor
from src.state import FitResult, GroundTruth, VariationalState
from src.synthetic import SynthConfig
from src.thresholds import heuristic_threshold

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PROJECT_VERSION = "1.0.0"
SYNTH_TIE_TYPE = "synthetic"


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    return path


def write_json(payload: Mapping, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2, sort_keys=True, default=_jsonable)
        f.write("\n")
    return path


def _jsonable(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Valeur non sérialisable: {type(value).__name__}")


def _names(indices: np.ndarray, labels: Optional[Sequence[str]]):
    if labels is None:
        return indices
    return np.asarray(labels, dtype=object)[indices]


# --- Ajustement ---

def write_rho(state: VariationalState, path: PathLike, labels: Optional[Sequence[str]] = None,
              block_pairs: Optional[int] = None) -> Path:
    """Écrit ρ par blocs, sans matérialiser la matrice N×N×K"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    K = state.n_levels
    blocks = state.iter_rho_rows() if block_pairs is None else state.iter_rho_rows(block_pairs)
    header = True
    with open(path, "w", encoding="utf-8", newline="") as f:
        for ego, alter, rows in blocks:
            frame = pd.DataFrame({
                "i": _names(np.repeat(ego, K), labels),
                "j": _names(np.repeat(alter, K), labels),
                "k": np.tile(np.arange(K), ego.size),
                "probability": rows.reshape(-1),
            })
            frame.to_csv(f, index=False, header=header, lineterminator="\n")
            header = False
        if header:
            f.write("i,j,k,probability\n")
    return path


def theta_frame(state: VariationalState, labels: Optional[Sequence[str]] = None) -> pd.DataFrame:
    return pd.DataFrame({
        "reporter": _names(np.arange(state.n_reporters), labels),
        "shape": state.gamma_shape,
        "rate": state.gamma_rate,
        "mean": state.theta_mean,
    })


def eta_payload(result: FitResult) -> Dict:
    """Loi a posteriori de η; sans mutualité η vaut 0 et la loi Gamma n'est pas renvoyée"""
    state = result.state
    return {
        "shape": state.nu_shape if result.mutuality else None,
        "rate": state.nu_rate if result.mutuality else None,
        "mean": result.eta_est,
        "heuristic_threshold": heuristic_threshold(result.eta_est),
        "threshold": result.threshold,
        "mutuality": result.mutuality,
    }


def elbo_frame(result: FitResult) -> pd.DataFrame:
    return pd.DataFrame({"iteration": list(result.elbo_iterations), "elbo": list(result.elbo_trace)})


def network_frame(network, labels: Optional[Sequence[str]] = None, value_name: str = "y") -> pd.DataFrame:
    coo = network.tocoo()
    order = np.lexsort((coo.col, coo.row))
    return pd.DataFrame({
        "i": _names(coo.row[order].astype(np.int64), labels),
        "j": _names(coo.col[order].astype(np.int64), labels),
        value_name: coo.data[order].astype(np.int64),
    })


def summary_frame(rows: Iterable[Dict]) -> pd.DataFrame:
    columns = ["tie_type", "method"] + list(NetworkSummary.__dataclass_fields__)
    frame = pd.DataFrame(list(rows))
    return frame.reindex(columns=columns + [c for c in frame.columns if c not in columns])


def write_fit_artifacts(result: FitResult, out_dir: PathLike, emit: Mapping[str, bool],
                        labels: Optional[Sequence[str]] = None,
                        block_pairs: Optional[int] = None) -> List[Path]:
    """Artefacts d'un ajustement (une couche) dans out_dir"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [write_json(eta_payload(result), out_dir / "eta.json")]
    if emit.get("rho", True):
        written.append(write_rho(result.state, out_dir / "rho.csv", labels, block_pairs))
    if emit.get("theta", True):
        written.append(write_csv(theta_frame(result.state, labels), out_dir / "theta.csv"))
    if emit.get("elbo_trace", True):
        written.append(write_csv(elbo_frame(result), out_dir / "elbo.csv"))
    if result.point_network is not None:
        written.append(write_csv(network_frame(result.point_network, labels), out_dir / "network.csv"))
    logger.debug("%d artefacts écrits dans %s", len(written), out_dir)
    return written


# --- Manifeste ---

def file_sha256(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def library_versions() -> Dict[str, str]:
    return {
        "project": PROJECT_VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "networkx": networkx.__version__,
        "pyyaml": yaml.__version__,
    }


def write_manifest(out_dir: PathLike, seed: int, config_digest: str,
                   inputs: Iterable[PathLike] = (), artifacts: Iterable[PathLike] = (),
                   extra: Optional[Mapping] = None) -> Path:
    """Seul fichier dont le contenu varie d'une exécution à l'autre (horodatage)"""
    out_dir = Path(out_dir)
    payload = {
        "seed": int(seed),
        "config_hash": config_digest,
        "versions": library_versions(),
        "timestamp": datetime.now().isoformat(timespec="seconds"),
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "artifacts": {str(Path(p).relative_to(out_dir)): file_sha256(p) for p in artifacts},
    }
    if extra:
        payload.update(extra)
    return write_json(payload, out_dir / "manifest.json")


# --- Générateur ---

def reports_frame(X: ReportTensor, tie_type: str = SYNTH_TIE_TYPE,
                  labels: Optional[Sequence[str]] = None) -> pd.DataFrame:
    return pd.DataFrame({
        "ego": _names(X.ego, labels) if labels is not None else X.ego.astype(str),
        "alter": _names(X.alter, labels) if labels is not None else X.alter.astype(str),
        "reporter": _names(X.reporter, labels) if labels is not None else X.reporter.astype(str),
        "tie_type": tie_type,
        "weight": X.count,
    })


def synth_config_payload(cfg: SynthConfig, gt: GroundTruth, report_seed: int) -> Dict:
    payload = asdict(cfg)
    payload.update({
        "p_in": cfg.p_in,
        "p_out": cfg.p_out,
        "lambda": cfg.lambdas.tolist(),
        "report_seed": int(report_seed),
        "achieved_reciprocity": gt.reciprocity,
    })
    return payload


def write_synthetic(gt: GroundTruth, X: ReportTensor, cfg: SynthConfig, out_dir: PathLike,
                    report_seed: int) -> List[Path]:
    out_dir = Path(out_dir)
    labels = [str(i) for i in range(gt.n_nodes)]
    return [
        write_csv(reports_frame(X), out_dir / "reports.csv"),
        write_csv(pd.DataFrame({"label": labels}), out_dir / "nodes.csv"),
        write_csv(network_frame(gt.y), out_dir / "ground_truth.csv"),
        write_csv(pd.DataFrame({"reporter": np.arange(gt.theta.size), "theta": gt.theta}),
                  out_dir / "theta_true.csv"),
        write_json(synth_config_payload(cfg, gt, report_seed), out_dir / "synth_config.json"),
    ]
