"""
Structure des paires
====================
Tout ce qui dépend du masque et des déclarations, calculé une seule fois:

- les paires « explicites » (au moins une déclaration positive, un prior
  personnalisé ou une entrée de masque personnalisé) dont la ligne ρ est stockée;
- les paires « implicites » (éligibles sans déclaration), qui partagent une
  ligne ρ en forme close et ne sont jamais matérialisées;
- les sommes par paire et les répartitions vers les déclarants.

Les sommes sur les paires implicites passent par la masse A[m, k] =
Σ_{paires implicites où m est éligible} ρ_ij,k, calculée par blocs de lignes.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy.special import log_softmax

from src.errors import MaskViolationError
from src.priors import HyperParams
from src.reports import MaskRule, ReportTensor, ReporterMask, dyad_keys

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_PAIRS = 262_144


# --- Structure d'éligibilité (indépendante des données) ---

def reporter_cutoff(n_nodes: int, n_reporters: int) -> int:
    """Nombre de nœuds qui sont aussi des déclarants (masque self_dyads)"""
    return min(n_nodes, n_reporters)


def n_eligible_dyads(mask: ReporterMask, n_nodes: int, n_reporters: int) -> int:
    if mask.rule is MaskRule.SELF_DYADS:
        outside = n_nodes - reporter_cutoff(n_nodes, n_reporters)
        return n_nodes * (n_nodes - 1) - outside * max(outside - 1, 0)
    if mask.rule is MaskRule.FULL_ROSTER:
        return n_nodes * (n_nodes - 1)
    return int(mask.custom_dyads()[0].size)


def eligible_per_reporter(mask: ReporterMask, n_nodes: int, n_reporters: int) -> np.ndarray:
    """Nombre de paires que chaque déclarant pouvait renseigner"""
    if mask.rule is MaskRule.SELF_DYADS:
        out = np.zeros(n_reporters, dtype=np.int64)
        out[:reporter_cutoff(n_nodes, n_reporters)] = 2 * (n_nodes - 1)
        return out
    if mask.rule is MaskRule.FULL_ROSTER:
        return np.full(n_reporters, n_nodes * (n_nodes - 1), dtype=np.int64)
    return np.bincount(mask.custom_reporter, minlength=n_reporters).astype(np.int64)


def block_ranges(mask: ReporterMask, n_nodes: int, n_reporters: int,
                 block_pairs: int = DEFAULT_BLOCK_PAIRS) -> List[Tuple[int, int, np.ndarray]]:
    """
    Découpe les paires éligibles en blocs (première ligne, dernière ligne + 1, colonnes).
    La diagonale est incluse dans les blocs et doit être masquée par l'appelant.
    Un masque personnalisé n'a pas de paire implicite: liste vide.
    """
    if mask.rule is MaskRule.CUSTOM:
        return []
    if mask.rule is MaskRule.FULL_ROSTER:
        segments = [(0, n_nodes, np.arange(n_nodes))]
    else:
        cut = reporter_cutoff(n_nodes, n_reporters)
        segments = [(0, cut, np.arange(n_nodes))]
        if cut < n_nodes and cut > 0:
            segments.append((cut, n_nodes, np.arange(cut)))

    blocks = []
    for first, last, cols in segments:
        step = max(1, block_pairs // max(len(cols), 1))
        for r0 in range(first, last, step):
            blocks.append((r0, min(r0 + step, last), cols))
    return blocks


def pair_sums(mask: ReporterMask, n_nodes: int, n_reporters: int, values: np.ndarray,
              ego: np.ndarray, alter: np.ndarray) -> np.ndarray:
    """S_ij = Σ_{m éligible pour (i, j)} values[m], pour des paires hors masque personnalisé"""
    if mask.rule is MaskRule.SELF_DYADS:
        cut = reporter_cutoff(n_nodes, n_reporters)
        padded = np.zeros(n_nodes)
        padded[:cut] = values[:cut]
        return padded[ego] + padded[alter]
    if mask.rule is MaskRule.FULL_ROSTER:
        return np.full(np.shape(ego), float(np.sum(values)))
    raise MaskViolationError("Sommes par paire non définies hors des paires d'un masque personnalisé")


def implicit_log_rows(log_prior: np.ndarray, basis_lambda: np.ndarray,
                      basis_sums: np.ndarray) -> np.ndarray:
    """log ρ d'une paire implicite: log_softmax(log p − E[λ]·S)"""
    logits = log_prior - np.multiply.outer(basis_sums, basis_lambda)
    return log_softmax(logits, axis=-1)


# --- Disposition liée aux données ---

@dataclass(frozen=True, eq=False)
class DyadLayout:
    """Index des déclarations et des paires explicites d'un tenseur"""
    n_nodes: int
    n_reporters: int
    n_levels: int
    mask: ReporterMask
    # une entrée par déclaration stockée, triée par (i, j, m)
    ego: np.ndarray
    alter: np.ndarray
    reporter: np.ndarray
    count: np.ndarray
    rev: np.ndarray
    log_rev: np.ndarray
    entry_dyad: np.ndarray
    # paires explicites, triées par (i, j)
    exp_ego: np.ndarray
    exp_alter: np.ndarray
    exp_keys: np.ndarray
    prior_rows: np.ndarray
    log_prior: np.ndarray
    shared_log_prior: np.ndarray
    shared_rows: np.ndarray          # vrai si la paire suit le prior partagé
    custom_dyad_idx: Optional[np.ndarray]
    custom_reporter: Optional[np.ndarray]
    nu_data: float
    n_implicit: int
    implicit_per_reporter: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.count.size)

    @property
    def n_explicit(self) -> int:
        return int(self.exp_keys.size)

    @classmethod
    def build(cls, X: ReportTensor, h: HyperParams, n_levels: int) -> "DyadLayout":
        """h doit avoir été validé (validate_hyperparams)"""
        N, M, mask = X.n_nodes, X.n_reporters, X.mask
        shared = np.log(np.asarray(h.p, dtype=np.float64))

        # X est trié par (i, j, m): les clés de paire sont déjà croissantes
        report_keys = dyad_keys(X.ego, X.alter, N)
        first = np.ones(report_keys.size, dtype=bool)
        first[1:] = report_keys[1:] != report_keys[:-1]
        extra = []
        if h.p_overrides:
            o_ego = np.array([i for i, _ in h.p_overrides], dtype=np.int64)
            o_alter = np.array([j for _, j in h.p_overrides], dtype=np.int64)
            eligible = mask.eligible_count(o_ego, o_alter, N, M) > 0
            if not np.all(eligible):
                logger.debug("%d priors personnalisés sur des paires sans déclarant éligible",
                             int((~eligible).sum()))
            extra.append(dyad_keys(o_ego[eligible], o_alter[eligible], N))
        if mask.rule is MaskRule.CUSTOM:
            c_ego, c_alter = mask.custom_dyads()
            extra.append(dyad_keys(c_ego, c_alter, N))

        if extra:
            exp_keys = np.unique(np.concatenate([report_keys[first]] + extra))
            entry_dyad = np.searchsorted(exp_keys, report_keys)
        else:
            exp_keys = report_keys[first]
            entry_dyad = np.cumsum(first) - 1
        del first
        exp_ego, exp_alter = np.divmod(exp_keys, N)

        shared_rows = np.ones(exp_keys.size, dtype=bool)
        if h.p_overrides:
            prior_rows = np.tile(np.asarray(h.p, dtype=np.float64), (exp_keys.size, 1))
            for (i, j), row in h.p_overrides.items():
                pos = np.searchsorted(exp_keys, i * N + j)
                if pos < exp_keys.size and exp_keys[pos] == i * N + j:
                    prior_rows[pos] = row
                    shared_rows[pos] = False
            log_prior = np.log(prior_rows)
        else:
            # vues en lecture seule, sans copie par paire
            prior_rows = np.broadcast_to(np.asarray(h.p, dtype=np.float64), (exp_keys.size, n_levels))
            log_prior = np.broadcast_to(shared, (exp_keys.size, n_levels))

        custom_dyad_idx = custom_reporter = None
        if mask.rule is MaskRule.CUSTOM:
            custom_dyad_idx = np.searchsorted(exp_keys, dyad_keys(mask.custom_ego, mask.custom_alter, N))
            custom_reporter = np.asarray(mask.custom_reporter)

        rev = X.reverse_counts().astype(np.float64)
        log_rev = np.log(np.maximum(rev, 1.0))

        # Σ R_ijm X_jim: chaque déclaration X_abm compte pour la paire (b, a)
        if mask.rule is MaskRule.FULL_ROSTER:
            nu_data = float(X.total)
        else:
            nu_data = float(np.sum(X.count[mask.contains(X.alter, X.ego, X.reporter, N, M)]))

        layout = cls(
            n_nodes=N, n_reporters=M, n_levels=n_levels, mask=mask,
            ego=X.ego, alter=X.alter, reporter=X.reporter,
            count=X.count.astype(np.float64), rev=rev, log_rev=log_rev,
            entry_dyad=entry_dyad,
            exp_ego=exp_ego, exp_alter=exp_alter, exp_keys=exp_keys,
            prior_rows=prior_rows, log_prior=log_prior, shared_log_prior=shared,
            shared_rows=shared_rows,
            custom_dyad_idx=custom_dyad_idx, custom_reporter=custom_reporter,
            nu_data=nu_data, n_implicit=0,
            implicit_per_reporter=np.zeros(M, dtype=np.int64),
        )
        n_implicit = n_eligible_dyads(mask, N, M) - layout.n_explicit
        per_reporter = eligible_per_reporter(mask, N, M) - np.rint(
            layout.scatter_to_reporters(np.ones(layout.n_explicit))).astype(np.int64)
        object.__setattr__(layout, "n_implicit", int(n_implicit))
        object.__setattr__(layout, "implicit_per_reporter", per_reporter)
        for name in ("count", "rev", "log_rev", "entry_dyad", "exp_ego", "exp_alter",
                     "shared_rows", "implicit_per_reporter"):
            getattr(layout, name).setflags(write=False)
        if h.p_overrides:
            prior_rows.setflags(write=False)
            log_prior.setflags(write=False)
        logger.debug("Disposition: %d déclarations, %d paires explicites, %d implicites",
                     layout.nnz, layout.n_explicit, layout.n_implicit)
        return layout

    @property
    def n_eligible(self) -> int:
        return self.n_explicit + self.n_implicit

    def explicit_log_prior(self, shared_log_prior: Optional[np.ndarray] = None) -> np.ndarray:
        """log p de chaque paire explicite, avec un prior partagé éventuellement ré-estimé"""
        if shared_log_prior is None:
            return self.log_prior
        if self.shared_rows.all():
            return np.broadcast_to(shared_log_prior, (self.n_explicit, self.n_levels))
        return np.where(self.shared_rows[:, None], shared_log_prior[None, :], self.log_prior)

    # --- Sommes sur les paires explicites ---

    def dyad_sums(self, values: np.ndarray) -> np.ndarray:
        """S_ij = Σ_{m éligible} values[m] pour chaque paire explicite"""
        if self.mask.rule is MaskRule.CUSTOM:
            return np.bincount(self.custom_dyad_idx, weights=values[self.custom_reporter],
                               minlength=self.n_explicit)
        return pair_sums(self.mask, self.n_nodes, self.n_reporters, values,
                         self.exp_ego, self.exp_alter)

    def scatter_to_reporters(self, weights: np.ndarray) -> np.ndarray:
        """Σ_{paires explicites où m est éligible} weights, par déclarant (1D ou (n, K))"""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim == 2:
            return np.stack([self.scatter_to_reporters(weights[:, k])
                             for k in range(weights.shape[1])], axis=1)
        M = self.n_reporters
        if self.mask.rule is MaskRule.SELF_DYADS:
            out = np.zeros(M)
            for side in (self.exp_ego, self.exp_alter):
                sel = side < M
                out += np.bincount(side[sel], weights=weights[sel], minlength=M)
            return out
        if self.mask.rule is MaskRule.FULL_ROSTER:
            return np.full(M, float(weights.sum()))
        return np.bincount(self.custom_reporter, weights=weights[self.custom_dyad_idx], minlength=M)

    # --- Masse des paires implicites ---

    def constant_row_mass(self, row: np.ndarray, shared_log_prior: Optional[np.ndarray] = None
                          ) -> Tuple[np.ndarray, float, np.ndarray]:
        """Masse A, terme d'entropie et total par niveau quand toutes les paires implicites partagent une ligne"""
        log_p = self.shared_log_prior if shared_log_prior is None else shared_log_prior
        row = np.asarray(row, dtype=np.float64)
        mass = np.outer(self.implicit_per_reporter.astype(np.float64), row)
        entropy = self.n_implicit * float(np.sum(row * (log_p - np.log(row))))
        return mass, entropy, self.n_implicit * row

    def implicit_mass(self, basis_theta: np.ndarray, basis_lambda: np.ndarray,
                      block_pairs: int = DEFAULT_BLOCK_PAIRS, n_threads: int = 1,
                      shared_log_prior: Optional[np.ndarray] = None
                      ) -> Tuple[np.ndarray, float, np.ndarray]:
        """
        Masse A[m, k], Σ ρ (log p − log ρ) et Σ ρ par niveau des paires implicites
        dont la ligne vaut softmax(log p − E[λ]·S) avec S calculé sur basis_theta.
        """
        K = self.n_levels
        if self.mask.rule is MaskRule.CUSTOM or self.n_implicit == 0:
            return np.zeros((self.n_reporters, K)), 0.0, np.zeros(K)
        log_p = self.shared_log_prior if shared_log_prior is None else shared_log_prior
        if self.mask.rule is MaskRule.FULL_ROSTER:
            s = np.array([float(np.sum(basis_theta))])
            row = np.exp(implicit_log_rows(log_p, basis_lambda, s))[0]
            return self.constant_row_mass(row, log_p)

        # self_dyads: somme par blocs sur toutes les paires éligibles, puis retrait des explicites
        N, M = self.n_nodes, self.n_reporters
        cut = reporter_cutoff(N, M)
        padded = np.zeros(N)
        padded[:cut] = basis_theta[:cut]

        def block_mass(block):
            r0, r1, cols = block
            rows = np.arange(r0, r1)
            sums = padded[rows][:, None] + padded[cols][None, :]
            log_rho = implicit_log_rows(log_p, basis_lambda, sums)
            rho = np.exp(log_rho)
            rho[rows[:, None] == cols[None, :]] = 0.0
            entropy = float(np.sum(rho * (log_p - log_rho)))
            return rho.sum(axis=1), rho.sum(axis=0), entropy

        blocks = block_ranges(self.mask, N, M, block_pairs)
        if n_threads > 1:
            with ThreadPoolExecutor(max_workers=n_threads) as pool:
                partials = list(pool.map(block_mass, blocks))
        else:
            partials = [block_mass(block) for block in blocks]

        mass = np.zeros((M, K))
        total = np.zeros(K)
        entropy = 0.0
        for (r0, r1, cols), (row_part, col_part, ent) in zip(blocks, partials):
            top = min(r1, cut)
            if top > r0:
                mass[r0:top] += row_part[:top - r0]
            reporters = cols < cut
            mass[cols[reporters]] += col_part[reporters]
            total += row_part.sum(axis=0)
            entropy += ent

        if self.n_explicit:
            exp_log = implicit_log_rows(log_p, basis_lambda, self.dyad_sums(basis_theta))
            exp_rho = np.exp(exp_log)
            mass -= self.scatter_to_reporters(exp_rho)
            total -= exp_rho.sum(axis=0)
            entropy -= float(np.sum(exp_rho * (log_p - exp_log)))
        return np.maximum(mass, 0.0), entropy, np.maximum(total, 0.0)


def density_prior_row(X: ReportTensor, n_levels: int, floor: float = 0.01,
                      ceiling: float = 0.5) -> np.ndarray:
    """
    Point de départ du prior partagé estimé: part des paires éligibles ayant au
    moins une déclaration, bornée à [floor, ceiling] et répartie sur les niveaux
    1..K-1. Le niveau 0 (lien absent) reçoit le reste.
    """
    if n_levels == 1:
        return np.ones(1)
    eligible = n_eligible_dyads(X.mask, X.n_nodes, X.n_reporters)
    reported = np.unique(dyad_keys(X.ego, X.alter, X.n_nodes)).size
    density = float(np.clip(reported / max(eligible, 1), floor, ceiling))
    row = np.full(n_levels, density / (n_levels - 1))
    row[0] = 1.0 - density
    return row


def iter_eligible_pairs(mask: ReporterMask, n_nodes: int, n_reporters: int,
                        block_pairs: int = DEFAULT_BLOCK_PAIRS
                        ) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Paires éligibles hors masque personnalisé, par blocs, dans l'ordre (i, j)"""
    for r0, r1, cols in block_ranges(mask, n_nodes, n_reporters, block_pairs):
        ego = np.repeat(np.arange(r0, r1), len(cols))
        alter = np.tile(cols, r1 - r0)
        off = ego != alter
        yield ego[off], alter[off]
