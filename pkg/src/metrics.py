"""
Métriques d'estimation
======================
F1 sur les liens, erreur quadratique sur les fiabilités, distance de
Wasserstein entre distributions de fiabilité, et récupération de la mutualité.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import wasserstein_distance

from src.errors import EmptySampleError, LengthMismatchError, ShapeMismatchError
from src.network_stats import Network, as_binary


def precision_recall(estimate: Network, truth: Network) -> Tuple[float, float]:
    if estimate.shape != truth.shape:
        raise ShapeMismatchError(f"Formes différentes: {estimate.shape} et {truth.shape}")
    est, true = as_binary(estimate), as_binary(truth)
    hits = est.multiply(true).nnz
    precision = hits / est.nnz if est.nnz else 0.0
    recall = hits / true.nnz if true.nnz else 0.0
    return precision, recall


def f1_score(estimate: Network, truth: Network) -> float:
    """Moyenne harmonique de la précision et du rappel; 0 si les deux sont nuls"""
    precision, recall = precision_recall(estimate, truth)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def mse_theta(theta_est: Sequence[float], theta_true: Sequence[float]) -> float:
    est = np.asarray(theta_est, dtype=np.float64)
    true = np.asarray(theta_true, dtype=np.float64)
    if est.shape != true.shape:
        raise LengthMismatchError(f"{est.size} estimations pour {true.size} valeurs vraies")
    if est.size == 0:
        raise EmptySampleError("Vecteurs de fiabilité vides")
    return float(np.mean((est - true) ** 2))


def wasserstein_1d(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """Distance d'ordre 1 entre deux échantillons empiriques (couplage des quantiles)"""
    a = np.asarray(sample_a, dtype=np.float64).ravel()
    b = np.asarray(sample_b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptySampleError("Échantillon vide pour la distance de Wasserstein")
    if a.size == b.size:
        return float(np.mean(np.abs(np.sort(a) - np.sort(b))))
    return float(wasserstein_distance(a, b))


@dataclass(frozen=True)
class EtaRecovery:
    correlation: float
    slope: float
    intercept: float
    table: pd.DataFrame


def eta_recovery_report(planted: Sequence[float], estimated: Sequence[float]) -> EtaRecovery:
    """Corrélation de Pearson, droite estimé ≈ pente·planté + ordonnée, résidus par paire"""
    planted = np.asarray(planted, dtype=np.float64)
    estimated = np.asarray(estimated, dtype=np.float64)
    if planted.size != estimated.size:
        raise LengthMismatchError(f"{planted.size} valeurs plantées pour {estimated.size} estimations")
    if planted.size < 3:
        raise LengthMismatchError("Au moins trois paires sont nécessaires")

    correlation = float(np.corrcoef(planted, estimated)[0, 1])
    slope, intercept = np.polyfit(planted, estimated, deg=1)
    table = pd.DataFrame({
        "eta_planted": planted,
        "eta_est": estimated,
        "residual": estimated - planted,
    })
    return EtaRecovery(correlation=correlation, slope=float(slope),
                       intercept=float(intercept), table=table)
