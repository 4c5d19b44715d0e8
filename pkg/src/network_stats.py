"""
Statistiques de réseau
======================
Résumés d'un réseau binaire dirigé: liens, degré moyen, transitivité,
réciprocité, densité. Les réseaux sont des matrices scipy.sparse N×N
(ou des tableaux numpy 0/1), diagonale nulle.
"""

from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Union

import networkx as nx
import numpy as np
import pandas as pd
from scipy import sparse

Network = Union[sparse.spmatrix, np.ndarray]

SUMMARY_FIELDS = ["n_edges", "mean_degree", "std_degree", "transitivity", "reciprocity", "density"]


def as_binary(net: Network) -> sparse.csr_matrix:
    """Copie binaire (int8) en CSR, diagonale retirée"""
    A = sparse.csr_matrix(net)
    A = (sparse.triu(A, 1) + sparse.tril(A, -1)).tocsr()
    A.eliminate_zeros()
    return (A != 0).astype(np.int8).tocsr()


@dataclass(frozen=True)
class NetworkSummary:
    n_nodes: int
    n_edges: int
    mean_degree: float
    std_degree: float
    transitivity: float
    reciprocity: float
    density: float

    def to_dict(self) -> Dict:
        return asdict(self)

    @property
    def mean_degree_label(self) -> str:
        return f"{self.mean_degree:.2f} ± {self.std_degree:.2f}"


def reciprocity(net: Network) -> float:
    """Part des liens dirigés dont le lien inverse existe aussi"""
    A = as_binary(net)
    if A.nnz == 0:
        return 0.0
    return float(A.multiply(A.T).nnz) / A.nnz


def density(net: Network) -> float:
    A = as_binary(net)
    n = A.shape[0]
    if n < 2:
        return 0.0
    return A.nnz / (n * (n - 1))


def degree_stats(net: Network):
    """Degré moyen = liens / N; écart-type sur les nœuds de (entrant + sortant) / 2"""
    A = as_binary(net)
    n = A.shape[0]
    if n == 0:
        return 0.0, 0.0
    per_node = (np.asarray(A.sum(axis=0)).ravel() + np.asarray(A.sum(axis=1)).ravel()) / 2.0
    return A.nnz / n, float(np.std(per_node))


def transitivity(net: Network, directed: bool = False) -> float:
    """
    Par défaut: transitivité globale du graphe non orienté sous-jacent (networkx).
    directed=True: triplets ordonnés fermés / chemins ordonnés de longueur 2.
    """
    A = as_binary(net)
    if not directed:
        undirected = ((A + A.T) > 0).astype(np.int8)
        return float(nx.transitivity(nx.from_scipy_sparse_array(undirected)))

    A = A.astype(np.int64)
    two_paths = A @ A
    open_paths = two_paths.sum() - two_paths.diagonal().sum()
    if open_paths == 0:
        return 0.0
    closed = two_paths.multiply(A).sum()
    return float(closed) / float(open_paths)


def network_summary(net: Network, directed_transitivity: bool = False) -> NetworkSummary:
    A = as_binary(net)
    mean_degree, std_degree = degree_stats(A)
    return NetworkSummary(
        n_nodes=int(A.shape[0]),
        n_edges=int(A.nnz),
        mean_degree=float(mean_degree),
        std_degree=std_degree,
        transitivity=transitivity(A, directed=directed_transitivity),
        reciprocity=reciprocity(A),
        density=density(A),
    )


def aggregate_summaries(rows: Union[pd.DataFrame, Iterable[Dict]],
                        keys: List[str] = None) -> pd.DataFrame:
    """Moyenne ± écart-type (entre villages) de chaque statistique, par type de lien et méthode"""
    table = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    keys = keys or ["tie_type", "method"]
    if table.empty:
        return pd.DataFrame(columns=keys + ["n_networks"])
    present = [f for f in SUMMARY_FIELDS if f in table.columns]
    grouped = table.groupby(keys, sort=True)
    stats = grouped[present].agg(["mean", "std"])
    stats.columns = [f"{field}_{stat}" for field, stat in stats.columns]
    stats.insert(0, "n_networks", grouped.size())
    return stats.reset_index()
