"""
États et résultats
==================
Paramètres variationnels (γ, φ, ν, ρ), responsabilités auxiliaires,
vérité terrain synthétique et résultat d'un ajustement.

Tous les objets sont immuables: les tableaux sont en lecture seule et les
mises à jour produisent de nouveaux objets (dataclasses.replace).
"""

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.special import digamma

from src.dyads import DEFAULT_BLOCK_PAIRS, implicit_log_rows, iter_eligible_pairs, pair_sums
from src.errors import NonPositiveParameterError, SimplexViolationError
from src.reports import MaskRule, ReporterMask, dyad_keys

ROW_SUM_TOL = 1e-12

IMPLICIT_ROW = "row"        # toutes les paires implicites partagent implicit_row
IMPLICIT_SCORES = "scores"  # ligne = softmax(log p − basis_lambda · S(basis_theta))

_STATE_ARRAYS = ("gamma_shape", "gamma_rate", "phi_shape", "phi_rate", "rho_ego", "rho_alter",
                 "rho", "prior_row", "implicit_row", "basis_theta", "basis_lambda", "implicit_mass",
                 "implicit_total", "level_order")


def _readonly(value, dtype=np.float64) -> np.ndarray:
    arr = np.array(value, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class VariationalState:
    n_nodes: int
    n_reporters: int
    mask: ReporterMask
    gamma_shape: np.ndarray
    gamma_rate: np.ndarray
    phi_shape: np.ndarray
    phi_rate: np.ndarray
    nu_shape: float
    nu_rate: float
    rho_ego: np.ndarray
    rho_alter: np.ndarray
    rho: np.ndarray
    prior_row: np.ndarray
    implicit_mode: str = IMPLICIT_ROW
    implicit_row: Optional[np.ndarray] = None
    basis_theta: Optional[np.ndarray] = None
    basis_lambda: Optional[np.ndarray] = None
    implicit_mass: Optional[np.ndarray] = None
    implicit_entropy: float = 0.0
    implicit_total: Optional[np.ndarray] = None   # Σ ρ par niveau sur les paires implicites
    level_order: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in _STATE_ARRAYS:
            value = getattr(self, name)
            if value is not None:
                dtype = np.int64 if name in ("rho_ego", "rho_alter", "level_order") else np.float64
                object.__setattr__(self, name, _readonly(value, dtype))
        object.__setattr__(self, "nu_shape", float(self.nu_shape))
        object.__setattr__(self, "nu_rate", float(self.nu_rate))
        object.__setattr__(self, "implicit_entropy", float(self.implicit_entropy))
        object.__setattr__(self, "rho", self.rho.reshape(-1, self.n_levels))
        object.__setattr__(self, "_rho_keys", dyad_keys(self.rho_ego, self.rho_alter, self.n_nodes))

    # --- Espérances ---

    @property
    def n_levels(self) -> int:
        return int(self.phi_shape.size)

    @property
    def theta_mean(self) -> np.ndarray:
        return self.gamma_shape / self.gamma_rate

    @property
    def lambda_mean(self) -> np.ndarray:
        return self.phi_shape / self.phi_rate

    @property
    def eta_mean(self) -> float:
        return self.nu_shape / self.nu_rate

    @property
    def elog_theta(self) -> np.ndarray:
        return digamma(self.gamma_shape) - np.log(self.gamma_rate)

    @property
    def elog_lambda(self) -> np.ndarray:
        return digamma(self.phi_shape) - np.log(self.phi_rate)

    @property
    def elog_eta(self) -> float:
        return float(digamma(self.nu_shape) - np.log(self.nu_rate))

    @property
    def n_explicit(self) -> int:
        return int(self.rho_ego.size)

    @property
    def level_share(self) -> np.ndarray:
        """Part moyenne de chaque niveau sur toutes les paires éligibles"""
        totals = self.rho.sum(axis=0)
        if self.implicit_total is not None:
            totals = totals + self.implicit_total
        count = float(totals.sum())
        return totals / count if count > 0 else np.full(self.n_levels, np.nan)

    # --- Validation ---

    def validate(self) -> "VariationalState":
        for name in ("gamma_shape", "gamma_rate", "phi_shape", "phi_rate"):
            values = getattr(self, name)
            if not np.all(np.isfinite(values)) or np.any(values <= 0):
                raise NonPositiveParameterError(f"{name} contient une valeur non positive")
        for name in ("nu_shape", "nu_rate"):
            if not (np.isfinite(getattr(self, name)) and getattr(self, name) > 0):
                raise NonPositiveParameterError(f"{name}={getattr(self, name)} non positif")
        if self.rho.size:
            worst = float(np.max(np.abs(self.rho.sum(axis=1) - 1.0)))
            if worst > ROW_SUM_TOL or np.any(self.rho < 0):
                raise SimplexViolationError(f"Ligne ρ non normalisée (écart {worst:.3g})")
        if self.implicit_mode == IMPLICIT_ROW and self.implicit_row is not None:
            if abs(float(self.implicit_row.sum()) - 1.0) > ROW_SUM_TOL:
                raise SimplexViolationError("Ligne implicite non normalisée")
        return self

    # --- Lignes ρ ---

    def implicit_log_rows(self, ego: np.ndarray, alter: np.ndarray) -> np.ndarray:
        """log ρ des paires implicites (i, j), sans tenir compte des lignes explicites"""
        n = np.size(ego)
        if self.implicit_mode == IMPLICIT_ROW:
            return np.tile(np.log(self.implicit_row), (n, 1))
        sums = pair_sums(self.mask, self.n_nodes, self.n_reporters, self.basis_theta,
                         np.asarray(ego), np.asarray(alter))
        return implicit_log_rows(np.log(self.prior_row), self.basis_lambda, sums)

    def rho_rows(self, ego: np.ndarray, alter: np.ndarray) -> np.ndarray:
        """ρ pour des paires éligibles quelconques"""
        ego = np.asarray(ego, dtype=np.int64)
        alter = np.asarray(alter, dtype=np.int64)
        keys = dyad_keys(ego, alter, self.n_nodes)
        pos = np.searchsorted(self._rho_keys, keys)
        pos = np.minimum(pos, max(self.n_explicit - 1, 0))
        found = (self._rho_keys[pos] == keys) if self.n_explicit else np.zeros(keys.shape, bool)
        if self.mask.rule is MaskRule.CUSTOM:
            out = np.full((keys.size, self.n_levels), np.nan)
        else:
            out = np.exp(self.implicit_log_rows(ego, alter))
        out[found] = self.rho[pos[found]]
        return out

    def iter_rho_rows(self, block_pairs: int = DEFAULT_BLOCK_PAIRS
                      ) -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Toutes les paires éligibles et leur ligne ρ, par blocs triés par (i, j)"""
        if self.mask.rule is MaskRule.CUSTOM:
            for start in range(0, self.n_explicit, block_pairs):
                stop = start + block_pairs
                yield self.rho_ego[start:stop], self.rho_alter[start:stop], self.rho[start:stop]
            return
        for ego, alter in iter_eligible_pairs(self.mask, self.n_nodes, self.n_reporters, block_pairs):
            yield ego, alter, self.rho_rows(ego, alter)

    def dense_rho(self) -> np.ndarray:
        """Tableau N×N×K (NaN hors des paires éligibles), pour les petits réseaux"""
        out = np.full((self.n_nodes, self.n_nodes, self.n_levels), np.nan)
        for ego, alter, rows in self.iter_rho_rows():
            out[ego, alter] = rows
        return out

    def relabeled(self, order: Sequence[int]) -> "VariationalState":
        """Permute les niveaux: le nouveau niveau k est l'ancien order[k]"""
        order = np.asarray(order, dtype=np.int64)
        changes = dict(
            phi_shape=self.phi_shape[order], phi_rate=self.phi_rate[order],
            rho=self.rho[:, order], prior_row=self.prior_row[order],
        )
        for name in ("implicit_row", "basis_lambda", "implicit_total"):
            if getattr(self, name) is not None:
                changes[name] = getattr(self, name)[order]
        if self.implicit_mass is not None:
            changes["implicit_mass"] = self.implicit_mass[:, order]
        previous = np.arange(self.n_levels) if self.level_order is None else self.level_order
        changes["level_order"] = previous[order]
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class AuxiliaryResponsibilities:
    """ẑ¹ et ẑ² par déclaration positive (lignes alignées sur le tenseur) et par niveau"""
    zhat1: np.ndarray
    zhat2: np.ndarray
    n_underflow: int = 0

    def __post_init__(self):
        # tableaux de taille nnz × K: figés sur place, sans copie
        for name in ("zhat1", "zhat2"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Réseau planté et paramètres des benchmarks synthétiques"""
    y: sparse.csr_matrix
    theta: np.ndarray
    lambda_: np.ndarray
    eta: float
    communities: Optional[np.ndarray] = None
    scenario: Optional[str] = None
    reciprocity: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise SimplexViolationError(f"η planté hors de [0, 1): {self.eta}")
        y = sparse.csr_matrix(self.y, dtype=np.int8)
        y = (sparse.triu(y, 1) + sparse.tril(y, -1)).tocsr()
        y.eliminate_zeros()
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "theta", _readonly(self.theta))
        object.__setattr__(self, "lambda_", _readonly(self.lambda_))
        object.__setattr__(self, "eta", float(self.eta))
        if self.communities is not None:
            object.__setattr__(self, "communities", _readonly(self.communities, np.int64))

    @property
    def n_nodes(self) -> int:
        return int(self.y.shape[0])


@dataclass(frozen=True, eq=False)
class FitResult:
    state: VariationalState
    elbo_trace: Tuple[float, ...]
    n_iterations: int
    converged: bool
    eta_est: float
    theta_est: np.ndarray
    point_network: Optional[sparse.csr_matrix] = None
    threshold: Optional[float] = None
    elbo_iterations: Tuple[int, ...] = ()
    mutuality: bool = True
    monotonicity_violations: Tuple[int, ...] = ()
    provenance: Optional["FitResult"] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "elbo_trace", tuple(float(v) for v in self.elbo_trace))
        object.__setattr__(self, "elbo_iterations", tuple(int(v) for v in self.elbo_iterations))
        object.__setattr__(self, "theta_est", _readonly(self.theta_est))

    @property
    def final_elbo(self) -> float:
        return self.elbo_trace[-1] if self.elbo_trace else float("nan")
