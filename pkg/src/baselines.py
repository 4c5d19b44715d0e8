"""
Agrégations de référence
========================
Union: un lien existe si au moins un déclarant éligible l'a déclaré.
Intersection: tous les déclarants éligibles de la paire doivent l'avoir déclaré.
Une déclaration compte dès que X_ijm > 0; les paires sans déclarant éligible
sont absentes dans les deux cas.
"""

import numpy as np
from scipy import sparse

from src.reports import ReportTensor


def _network(ego: np.ndarray, alter: np.ndarray, n_nodes: int) -> sparse.csr_matrix:
    return sparse.csr_matrix((np.ones(ego.size, dtype=np.int8), (ego, alter)),
                             shape=(n_nodes, n_nodes))


def _reporters_per_dyad(X: ReportTensor):
    """Paires déclarées et nombre de déclarants distincts qui les ont déclarées"""
    keys = X.ego * X.n_nodes + X.alter
    dyads, counts = np.unique(keys, return_counts=True)
    ego, alter = np.divmod(dyads, X.n_nodes)
    return ego, alter, counts


def union_baseline(X: ReportTensor) -> sparse.csr_matrix:
    ego, alter, _ = _reporters_per_dyad(X)
    return _network(ego, alter, X.n_nodes)


def intersection_baseline(X: ReportTensor) -> sparse.csr_matrix:
    ego, alter, positive = _reporters_per_dyad(X)
    eligible = X.mask.eligible_count(ego, alter, X.n_nodes, X.n_reporters)
    agree = positive >= eligible
    return _network(ego[agree], alter[agree], X.n_nodes)


def layer_network(X: ReportTensor, reporter_side: str) -> sparse.csr_matrix:
    """
    Réseau d'une seule question d'un plan à double échantillonnage:
    « ego » garde les liens déclarés par l'émetteur (m = i),
    « alter » ceux déclarés par le receveur (m = j).
    """
    side = X.ego if reporter_side == "ego" else X.alter
    keep = X.reporter == side
    return _network(X.ego[keep], X.alter[keep], X.n_nodes)
