"""
Générateur synthétique
======================
Réseaux plantés (SBM ou SBM à degrés corrigés) et déclarations multiples
avec mutualité, selon trois scénarios:

- over_reporters  (a): une part θ_ratio des déclarants sur-déclare (θ = 50),
  les autres sont fiables (θ = 1, déclarations déterministes);
- under_reporters (b): idem avec θ = 0.5;
- gamma_theta     (c): θ ~ Gamma(2, 2), réseau SBM à degrés corrigés.

Chaque paire non ordonnée est déclarée en deux temps par chaque déclarant
éligible: une direction tirée à pile ou face suit sa loi marginale, l'autre
suit la loi conditionnelle sachant la première.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Optional, Tuple

import numpy as np
from scipy import sparse

from src.errors import InvalidConfigurationError, InvalidProbabilityError, TargetUnreachableError
from src.network_stats import reciprocity
from src.reports import MaskRule, ReportTensor, ReporterMask
from src.state import GroundTruth

logger = logging.getLogger(__name__)

ROW_CHUNK_PAIRS = 1_000_000


class Scenario(str, Enum):
    OVER_REPORTERS = "over_reporters"
    UNDER_REPORTERS = "under_reporters"
    GAMMA_THETA = "gamma_theta"

    @classmethod
    def parse(cls, value) -> "Scenario":
        aliases = {"a": cls.OVER_REPORTERS, "b": cls.UNDER_REPORTERS, "c": cls.GAMMA_THETA}
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise InvalidConfigurationError(f"Scénario inconnu: {value!r}") from None


@dataclass(frozen=True)
class SynthConfig:
    n_nodes: int = 100
    n_reporters: int = 100
    n_communities: int = 2
    avg_degree: float = 10.0
    p_out_ratio: float = 0.1
    degree_correction: Optional[bool] = None   # None: activé pour le scénario gamma_theta
    exponent_in: float = 2.0
    exponent_out: float = 2.5
    propensity_max: float = 50.0
    scenario: Scenario = Scenario.GAMMA_THETA
    theta_ratio: float = 0.0
    theta_over: float = 50.0
    theta_under: float = 0.5
    theta_gamma_shape: float = 2.0
    theta_gamma_rate: float = 2.0
    lambda0: float = 0.01
    lambda_diff: Optional[float] = None        # None: 1 − λ0 pour a/b, 1.0 pour c
    eta_planted: float = 0.5
    mask_rule: MaskRule = MaskRule.SELF_DYADS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario.parse(self.scenario))
        object.__setattr__(self, "mask_rule", MaskRule(self.mask_rule))
        if self.mask_rule is MaskRule.CUSTOM:
            raise InvalidConfigurationError("Le générateur ne prend en charge que self_dyads et full_roster")
        if self.n_nodes < 2 or self.n_reporters < 1:
            raise InvalidConfigurationError(f"Dimensions invalides N={self.n_nodes}, M={self.n_reporters}")
        if not 1 <= self.n_communities <= self.n_nodes:
            raise InvalidConfigurationError(f"Nombre de communautés invalide: {self.n_communities}")
        if self.avg_degree <= 0 or self.p_out_ratio < 0:
            raise InvalidConfigurationError("avg_degree > 0 et p_out_ratio ≥ 0 requis")
        if self.p_in > 1.0:
            raise InvalidProbabilityError(
                f"p_in = ⟨k⟩·C/N = {self.p_in:.4g} > 1: degré moyen trop élevé pour N={self.n_nodes}")
        if not 0.0 <= self.theta_ratio <= 0.5:
            raise InvalidConfigurationError(f"theta_ratio doit être dans [0, 0.5] (reçu {self.theta_ratio})")
        if not 0.0 <= self.eta_planted < 1.0:
            raise InvalidConfigurationError(f"eta_planted doit être dans [0, 1) (reçu {self.eta_planted})")
        if not 0.0 < self.resolved_lambda_diff <= 1.0 or self.lambda0 < 0:
            raise InvalidConfigurationError("lambda_diff dans (0, 1] et lambda0 ≥ 0 requis")

    @property
    def p_in(self) -> float:
        return self.avg_degree * self.n_communities / self.n_nodes

    @property
    def p_out(self) -> float:
        return self.p_out_ratio * self.p_in

    @property
    def resolved_lambda_diff(self) -> float:
        if self.lambda_diff is not None:
            return float(self.lambda_diff)
        return 1.0 if self.scenario is Scenario.GAMMA_THETA else 1.0 - self.lambda0

    @property
    def uses_degree_correction(self) -> bool:
        if self.degree_correction is None:
            return self.scenario is Scenario.GAMMA_THETA
        return bool(self.degree_correction)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([self.lambda0, self.lambda0 + self.resolved_lambda_diff])

    def mask(self) -> ReporterMask:
        return ReporterMask(self.mask_rule)


# --- Réseau planté ---

def truncated_power_law(rng: np.random.Generator, exponent: float, size: int,
                        upper: float = 50.0) -> np.ndarray:
    """Densité ∝ x^(−exponent) sur [1, upper], par inversion de la fonction de répartition"""
    u = rng.random(size)
    power = 1.0 - exponent
    return (1.0 - u * (1.0 - upper ** power)) ** (1.0 / power)


def community_labels(n_nodes: int, n_communities: int) -> np.ndarray:
    return (np.arange(n_nodes) * n_communities) // n_nodes


def edge_probabilities(cfg: SynthConfig, labels: np.ndarray, rows: np.ndarray,
                       out_prop: Optional[np.ndarray], in_prop: Optional[np.ndarray]) -> np.ndarray:
    same = labels[rows][:, None] == labels[None, :]
    probs = np.where(same, cfg.p_in, cfg.p_out)
    if out_prop is not None:
        probs = probs * out_prop[rows][:, None] * in_prop[None, :]
    probs = np.minimum(probs, 1.0)
    probs[np.arange(rows.size), rows] = 0.0
    return probs


def _sample_network(cfg: SynthConfig, rng: np.random.Generator, labels: np.ndarray,
                    out_prop, in_prop) -> sparse.csr_matrix:
    N = cfg.n_nodes
    step = max(1, ROW_CHUNK_PAIRS // N)
    egos, alters = [], []
    for r0 in range(0, N, step):
        rows = np.arange(r0, min(r0 + step, N))
        probs = edge_probabilities(cfg, labels, rows, out_prop, in_prop)
        hit_r, hit_c = np.nonzero(rng.random(probs.shape) < probs)
        egos.append(rows[hit_r])
        alters.append(hit_c)
    ego, alter = np.concatenate(egos), np.concatenate(alters)
    return sparse.csr_matrix((np.ones(ego.size, dtype=np.int8), (ego, alter)), shape=(N, N))


def sample_theta(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    M = cfg.n_reporters
    if cfg.scenario is Scenario.GAMMA_THETA:
        return rng.gamma(cfg.theta_gamma_shape, 1.0 / cfg.theta_gamma_rate, size=M)
    theta = np.ones(M)
    special = rng.choice(M, size=int(np.floor(cfg.theta_ratio * M)), replace=False)
    theta[special] = cfg.theta_over if cfg.scenario is Scenario.OVER_REPORTERS else cfg.theta_under
    return theta


def generate_ground_truth(cfg: SynthConfig) -> GroundTruth:
    rng = np.random.default_rng(cfg.seed)
    labels = community_labels(cfg.n_nodes, cfg.n_communities)

    out_prop = in_prop = None
    if cfg.uses_degree_correction:
        out_prop = truncated_power_law(rng, cfg.exponent_out, cfg.n_nodes, cfg.propensity_max)
        in_prop = truncated_power_law(rng, cfg.exponent_in, cfg.n_nodes, cfg.propensity_max)
        out_prop /= out_prop.mean()
        in_prop /= in_prop.mean()

    y = _sample_network(cfg, rng, labels, out_prop, in_prop)
    theta = sample_theta(cfg, rng)
    logger.debug("Réseau planté: %d liens, réciprocité %.3f", y.nnz, reciprocity(y))
    return GroundTruth(y=y, theta=theta, lambda_=cfg.lambdas, eta=cfg.eta_planted,
                       communities=labels, scenario=cfg.scenario.value)


# --- Réciprocité imposée ---

def planted_reciprocity_target(cfg: SynthConfig, target: float = 0.2, tolerance: float = 0.02,
                               max_attempts: int = 20) -> GroundTruth:
    """
    Ajuste un réseau SBM pour que sa réciprocité soit à ±tolerance de target,
    à nombre de liens E0 constant: E0 = 2·(paires mutuelles) + (paires simples).
    Les paires mutuelles en trop perdent une direction, celles qui manquent
    sont obtenues en symétrisant des paires simples, et les paires simples
    ajoutées viennent de nouveaux tirages du même modèle.
    """
    if not 0.0 <= target <= 1.0:
        raise InvalidConfigurationError(f"Réciprocité cible hors de [0, 1]: {target}")
    base = generate_ground_truth(cfg)
    N = cfg.n_nodes
    rng = np.random.default_rng([cfg.seed, 1])

    coo = base.y.tocoo()
    edges = set(zip(coo.row.tolist(), coo.col.tolist()))
    n_edges = len(edges)
    if target >= 1.0:
        want_mutual, want_single = (n_edges + 1) // 2, 0
    else:
        want_mutual = int(round(target * n_edges / 2))
        want_single = n_edges - 2 * want_mutual
    if want_mutual + want_single > N * (N - 1) // 2:
        raise TargetUnreachableError(
            f"Réciprocité {target} impossible avec {n_edges} liens sur {N} nœuds",
            achieved=reciprocity(base.y))

    mutual = sorted({(min(i, j), max(i, j)) for i, j in edges if (j, i) in edges})
    single = sorted((i, j) for i, j in edges if (j, i) not in edges)
    rng.shuffle(mutual)
    rng.shuffle(single)

    if len(mutual) > want_mutual:
        for a, b in mutual[want_mutual:]:
            single.append((a, b) if rng.random() < 0.5 else (b, a))
        mutual = mutual[:want_mutual]
    else:
        missing = want_mutual - len(mutual)
        promoted, single = single[:missing], single[missing:]
        mutual += [(min(i, j), max(i, j)) for i, j in promoted]
    # paires mutuelles ou simples encore manquantes: prises parmi des paires vides
    if len(single) > want_single:
        single = single[:want_single]

    occupied = {(min(i, j), max(i, j)) for i, j in single} | set(mutual)
    needed_single = want_single - len(single)
    needed_mutual = want_mutual - len(mutual)
    attempt = 0
    while (needed_single > 0 or needed_mutual > 0) and attempt < max_attempts:
        attempt += 1
        fresh = generate_ground_truth(replace(cfg, seed=cfg.seed + 7919 * attempt)).y.tocoo()
        order = rng.permutation(fresh.nnz)
        for i, j in zip(fresh.row[order].tolist(), fresh.col[order].tolist()):
            dyad = (min(i, j), max(i, j))
            if dyad in occupied:
                continue
            occupied.add(dyad)
            if needed_mutual > 0:
                mutual.append(dyad)
                needed_mutual -= 1
            elif needed_single > 0:
                single.append((i, j))
                needed_single -= 1
            else:
                break

    ego = [i for i, _ in single] + [a for a, _ in mutual] + [b for _, b in mutual]
    alter = [j for _, j in single] + [b for _, b in mutual] + [a for a, _ in mutual]
    y = sparse.csr_matrix((np.ones(len(ego), dtype=np.int8), (ego, alter)), shape=(N, N))
    achieved = reciprocity(y)
    if needed_single > 0 or needed_mutual > 0 or abs(achieved - target) > tolerance:
        raise TargetUnreachableError(
            f"Réciprocité {achieved:.3f} obtenue, cible {target} ± {tolerance}"
            f" ({max_attempts} tentatives)", achieved=achieved)
    logger.info("Réciprocité plantée: %.3f (cible %.3f, %d liens)", achieved, target, y.nnz)
    return replace(base, y=y, reciprocity=achieved)


# --- Déclarations ---

def marginal_mean(theta: float, lambda_first, lambda_second, eta: float):
    """E[X_ijm] = θ (λ_Yij + η λ_Yji) / (1 − η²)"""
    return theta * (np.asarray(lambda_first) + eta * np.asarray(lambda_second)) / (1.0 - eta ** 2)


def draw_report_pair(rng: np.random.Generator, theta, lambda_first, lambda_second, eta: float,
                     size: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Première direction selon sa marginale, seconde selon la conditionnelle"""
    first = rng.poisson(marginal_mean(theta, lambda_first, lambda_second, eta), size=size)
    second = rng.poisson(np.asarray(theta) * np.asarray(lambda_second) + eta * first)
    return first, second


def _dyad_reporters(mask: ReporterMask, n_nodes: int, n_reporters: int
                    ) -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """(a, b, m) avec a < b et m éligible pour la paire, par blocs de lignes"""
    step = max(1, ROW_CHUNK_PAIRS // n_nodes)
    for r0 in range(0, n_nodes, step):
        rows = np.arange(r0, min(r0 + step, n_nodes))
        a, b = np.nonzero(np.arange(n_nodes)[None, :] > rows[:, None])
        a = rows[a]
        if mask.rule is MaskRule.SELF_DYADS:
            parts = []
            for side in (a, b):
                ok = side < n_reporters
                parts.append((a[ok], b[ok], side[ok]))
            order = np.lexsort((np.concatenate([p[2] for p in parts]),
                                np.concatenate([p[1] for p in parts]),
                                np.concatenate([p[0] for p in parts])))
            yield tuple(np.concatenate([p[k] for p in parts])[order] for k in range(3))
        else:
            yield (np.repeat(a, n_reporters), np.repeat(b, n_reporters),
                   np.tile(np.arange(n_reporters), a.size))


def generate_reports(gt: GroundTruth, mask: ReporterMask, seed: int,
                     n_reporters: Optional[int] = None) -> ReportTensor:
    """
    Pour chaque paire {i, j} et chaque déclarant éligible: pile ou face sur la
    direction, X_ijm ~ Poisson(μ_ijm), puis X_jim ~ Poisson(θ_m λ_Yji + η X_ijm).
    Dans les scénarios a/b, les déclarants avec θ_m = 1 arrondissent ces moyennes.
    """
    if mask.rule is MaskRule.CUSTOM:
        raise InvalidConfigurationError("Le générateur ne prend en charge que self_dyads et full_roster")
    N = gt.n_nodes
    M = n_reporters if n_reporters is not None else gt.theta.size
    rng = np.random.default_rng([seed, 2])   # flux distinct de celui du réseau planté
    eta, lam = gt.eta, gt.lambda_
    deterministic_scenario = gt.scenario in (Scenario.OVER_REPORTERS.value,
                                             Scenario.UNDER_REPORTERS.value)
    y = gt.y.tocsr()

    records = []
    for a, b, m in _dyad_reporters(mask, N, M):
        if a.size == 0:
            continue
        flip = rng.random(a.size) < 0.5
        i, j = np.where(flip, a, b), np.where(flip, b, a)
        y_first = np.asarray(y[i, j]).ravel().astype(np.int64)
        y_second = np.asarray(y[j, i]).ravel().astype(np.int64)
        theta = gt.theta[m]
        mu = marginal_mean(theta, lam[y_first], lam[y_second], eta)
        first, second = draw_report_pair(rng, theta, lam[y_first], lam[y_second], eta)

        if deterministic_scenario:
            fixed = theta == 1.0
            first = np.where(fixed, np.floor(mu + 0.5), first).astype(np.int64)
            second = np.where(fixed, np.floor(theta * lam[y_second] + eta * first + 0.5),
                              second).astype(np.int64)

        for ego, alter, count in ((i, j, first), (j, i, second)):
            keep = (count > 0) & mask.contains(ego, alter, m, N, M)
            records.append((ego[keep], alter[keep], m[keep], count[keep]))

    if not records:
        return ReportTensor.empty(N, M, mask)
    ego, alter, reporter, count = (np.concatenate([r[k] for r in records]) for k in range(4))
    return ReportTensor(N, M, mask, ego, alter, reporter, count)
