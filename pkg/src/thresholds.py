"""
Estimation ponctuelle du réseau
===============================
Seuil sur ρ_ij,1 pour passer de la postérieure au réseau binaire Ŷ.
Le seuil par défaut suit la relation linéaire t = 0.54·η − 0.01, bornée à la
plage de calibration [0.05, 0.75].
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import sparse

from src.dyads import DEFAULT_BLOCK_PAIRS, reporter_cutoff
from src.errors import EmptySampleError, LengthMismatchError, UnsupportedKError
from src.priors import HyperParams
from src.reports import MaskRule, dyad_keys
from src.state import VariationalState

HEURISTIC_SLOPE = 0.54
HEURISTIC_INTERCEPT = -0.01
THRESHOLD_BOUNDS = (0.05, 0.75)
SWEEP_GRID = tuple(round(0.05 + 0.025 * i, 3) for i in range(29))   # 0.050 … 0.750


def heuristic_threshold(eta_est: float, clamp: bool = True) -> float:
    threshold = HEURISTIC_SLOPE * eta_est + HEURISTIC_INTERCEPT
    if clamp:
        threshold = float(np.clip(threshold, *THRESHOLD_BOUNDS))
    return threshold


def _ineligible_pairs(state: VariationalState) -> Tuple[np.ndarray, np.ndarray]:
    """Paires (i ≠ j) sans aucun déclarant éligible"""
    N = state.n_nodes
    if state.mask.rule is MaskRule.FULL_ROSTER:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if state.mask.rule is MaskRule.SELF_DYADS:
        outside = np.arange(reporter_cutoff(N, state.n_reporters), N)
        ego = np.repeat(outside, outside.size)
        alter = np.tile(outside, outside.size)
    else:
        ego, alter = np.divmod(np.arange(N * N, dtype=np.int64), N)
        covered = dyad_keys(*state.mask.custom_dyads(), N)
        keep = ~np.isin(ego * N + alter, covered)
        ego, alter = ego[keep], alter[keep]
    off = ego != alter
    return ego[off], alter[off]


def point_estimate(state: VariationalState, eta_est: float,
                   override_threshold: Optional[float] = None,
                   prior: Optional[HyperParams] = None,
                   block_pairs: int = DEFAULT_BLOCK_PAIRS,
                   return_threshold: bool = False
                   ) -> Union[sparse.csr_matrix, Tuple[sparse.csr_matrix, float]]:
    """
    Ŷ_ij = 1 ssi ρ_ij,1 ≥ t. Les paires sans déclarant éligible utilisent
    le prior p_ij,1 (prior personnalisé s'il existe dans `prior`).
    """
    if state.n_levels != 2:
        raise UnsupportedKError(f"Estimation ponctuelle définie pour K=2 seulement (K={state.n_levels})")
    threshold = float(override_threshold) if override_threshold is not None \
        else heuristic_threshold(eta_est)

    kept = []
    for ego, alter, rows in state.iter_rho_rows(block_pairs):
        keep = rows[:, 1] >= threshold
        kept.append(dyad_keys(ego[keep], alter[keep], state.n_nodes))

    ego, alter = _ineligible_pairs(state)
    if ego.size:
        # niveau « lien présent » dans l'indexation d'origine des priors
        tie_level = 1 if state.level_order is None else int(state.level_order[1])
        decision = np.full(ego.size, state.prior_row[1] >= threshold)
        if prior is not None and prior.p_overrides:
            keys = ego * state.n_nodes + alter
            for (i, j), row in prior.p_overrides.items():
                pos = np.searchsorted(keys, i * state.n_nodes + j)
                if pos < keys.size and keys[pos] == i * state.n_nodes + j:
                    decision[pos] = row[tie_level] >= threshold
        kept.append(dyad_keys(ego[decision], alter[decision], state.n_nodes))

    network = edges_to_csr(np.concatenate(kept) if kept else np.zeros(0, dtype=np.int64), state.n_nodes)
    if return_threshold:
        return network, threshold
    return network


def edges_to_csr(keys: np.ndarray, n_nodes: int) -> sparse.csr_matrix:
    """Matrice CSR 0/1 à partir de clés i·N + j distinctes, sans passer par COO"""
    keys = np.sort(keys)
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys // n_nodes, minlength=n_nodes), out=indptr[1:])
    index_type = np.int32 if n_nodes < 2 ** 31 else np.int64
    indices = (keys % n_nodes).astype(index_type)
    return sparse.csr_matrix((np.ones(keys.size, dtype=np.int8), indices, indptr),
                             shape=(n_nodes, n_nodes))


@dataclass(frozen=True)
class ThresholdSweep:
    table: pd.DataFrame
    best_threshold: float
    truth_reciprocity: float


def threshold_sweep(state: VariationalState, truth, grid: Optional[Sequence[float]] = None,
                    prior: Optional[HyperParams] = None) -> ThresholdSweep:
    """
    Réciprocité de Ŷ pour chaque seuil de la grille; le meilleur seuil est
    celui dont la réciprocité est la plus proche de celle du vrai réseau
    (le plus petit en cas d'égalité).
    """
    from src.network_stats import reciprocity

    grid = SWEEP_GRID if grid is None else tuple(grid)
    if not grid:
        raise EmptySampleError("Grille de seuils vide")
    target = reciprocity(truth)
    rows = []
    for t in grid:
        estimate = point_estimate(state, 0.0, override_threshold=t, prior=prior)
        value = reciprocity(estimate)
        rows.append({"threshold": float(t), "reciprocity": value,
                     "n_edges": int(estimate.nnz), "abs_error": abs(value - target)})
    table = pd.DataFrame(rows)
    best = table.sort_values(["abs_error", "threshold"], kind="mergesort").iloc[0]
    return ThresholdSweep(table=table, best_threshold=float(best["threshold"]),
                          truth_reciprocity=target)


def fit_threshold_line(eta_estimates: Sequence[float],
                       best_thresholds: Sequence[float]) -> Tuple[float, float]:
    """Droite des moindres carrés seuil ≈ pente·η + ordonnée"""
    eta = np.asarray(eta_estimates, dtype=np.float64)
    best = np.asarray(best_thresholds, dtype=np.float64)
    if eta.size != best.size:
        raise LengthMismatchError(f"{eta.size} estimations de η pour {best.size} seuils")
    if eta.size < 2:
        raise EmptySampleError("Au moins deux points sont nécessaires")
    slope, intercept = np.polyfit(eta, best, deg=1)
    return float(slope), float(intercept)
