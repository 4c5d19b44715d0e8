"""
Inférence variationnelle
========================
Montée de coordonnées (CAVI) sur le modèle Gamma–Poisson avec mutualité:

    X_ijm | Y_ij = k, X_jim ~ Poisson(θ_m λ_k + η X_jim)

Chaque balayage applique, dans cet ordre: responsabilités ẑ → θ → λ → ρ → η,
puis évalue l'ELBO. Quand le prior partagé p n'est pas fourni, il est
ré-estimé juste avant ρ (p_k = part moyenne du niveau k). Toutes les sommes se
décomposent en une partie creuse (déclarations positives) et une partie en
forme close (paires sans déclaration).
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import digamma, expit, gammaln, softmax, xlogy

from src.dyads import DEFAULT_BLOCK_PAIRS, DyadLayout, density_prior_row
from src.errors import InvalidConfigurationError, NonFiniteElboError
from src.priors import HyperParams, validate_hyperparams
from src.reports import ReportTensor
from src.state import (IMPLICIT_ROW, IMPLICIT_SCORES, AuxiliaryResponsibilities,
                       FitResult, VariationalState)

logger = logging.getLogger(__name__)

INIT_RHO_MODES = ("reports", "prior")
PRIOR_FLOOR = 1e-8


@dataclass(frozen=True)
class FitConfig:
    seed: int = 0
    max_iterations: int = 500
    elbo_rel_tol: float = 1e-5
    elbo_check_every: int = 1
    init_offset_scale: float = 0.1
    init_rho: str = "reports"        # reports: paires déclarées penchées vers le niveau haut
    init_tie_share: float = 0.5
    monotonicity_tol: float = 1e-3
    n_levels: int = 2
    mutuality: bool = True
    override_threshold: Optional[float] = None
    block_pairs: int = DEFAULT_BLOCK_PAIRS
    n_threads: int = 1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidConfigurationError(f"max_iterations doit être ≥ 1 (reçu {self.max_iterations})")
        if self.elbo_check_every < 1:
            raise InvalidConfigurationError("elbo_check_every doit être ≥ 1")
        for name in ("elbo_rel_tol", "init_offset_scale", "monotonicity_tol"):
            if getattr(self, name) < 0:
                raise InvalidConfigurationError(f"{name} doit être ≥ 0")
        if self.init_rho not in INIT_RHO_MODES:
            raise InvalidConfigurationError(
                f"init_rho inconnu: {self.init_rho!r} (attendu: {', '.join(INIT_RHO_MODES)})")
        if not 0.0 <= self.init_tie_share < 1.0:
            raise InvalidConfigurationError(f"init_tie_share doit être dans [0, 1) (reçu {self.init_tie_share})")
        if self.n_levels < 1:
            raise InvalidConfigurationError("n_levels doit être ≥ 1")
        if self.block_pairs < 1 or self.n_threads < 1:
            raise InvalidConfigurationError("block_pairs et n_threads doivent être ≥ 1")
        if self.override_threshold is not None and not 0.0 <= self.override_threshold <= 1.0:
            raise InvalidConfigurationError(
                f"Seuil imposé hors de [0, 1]: {self.override_threshold}")


def prepare(X: ReportTensor, h: HyperParams, n_levels: int):
    """
    Valide les hyperparamètres et construit la disposition des paires.
    Un prior partagé estimé part de la densité des paires déclarées.
    """
    h = validate_hyperparams(h, n_levels, X.n_nodes, X.n_reporters)
    if h.learn_p:
        h = replace(h, p=density_prior_row(X, n_levels))
        h = validate_hyperparams(h, n_levels, X.n_nodes, X.n_reporters)
    return h, DyadLayout.build(X, h, n_levels)


def _layout_for(X: ReportTensor, h: Optional[HyperParams], n_levels: int,
                layout: Optional[DyadLayout]) -> DyadLayout:
    if layout is not None:
        return layout
    return prepare(X, h if h is not None else HyperParams(), n_levels)[1]


def _validated(h: HyperParams, X: ReportTensor, n_levels: int) -> HyperParams:
    return h if h.is_validated else validate_hyperparams(h, n_levels, X.n_nodes, X.n_reporters)


# --- Initialisation ---

def init_state(h: HyperParams, X: ReportTensor, config: FitConfig,
               layout: Optional[DyadLayout] = None) -> VariationalState:
    """
    Priors multipliés par (1 + u), u ~ U[0, init_offset_scale], tirés dans
    l'ordre γ^shape, γ^rate, φ^shape, φ^rate, ν^shape, ν^rate, ρ explicites,
    ligne implicite. Les niveaux sont ensuite triés par moyenne φ croissante.

    Avec init_rho="reports", la ligne ρ de chaque paire déclarée devient
    (1 − s)·ligne + s·e_{K−1} (s = init_tie_share): sans cela la première mise
    à jour de λ voit des niveaux indiscernables.
    """
    K = config.n_levels
    h = _validated(h, X, K)
    layout = _layout_for(X, h, K, layout)
    rng = np.random.default_rng(config.seed)
    scale = config.init_offset_scale

    def perturb(values):
        values = np.asarray(values, dtype=np.float64)
        return values * (1.0 + rng.uniform(0.0, scale, size=values.shape))

    def perturb_rows(rows):
        rows = perturb(rows)
        if scale > 0:
            rows = rows / rows.sum(axis=-1, keepdims=True)
        return rows

    gamma_shape, gamma_rate = perturb(h.alpha), perturb(h.beta)
    phi_shape, phi_rate = perturb(h.a), perturb(h.b)
    nu_shape, nu_rate = float(perturb(h.c)), float(perturb(h.d))
    if not config.mutuality:
        nu_shape, nu_rate = h.c, h.d
    rho = perturb_rows(layout.prior_rows)
    implicit_row = perturb_rows(np.asarray(h.p))

    if config.init_rho == "reports" and K > 1 and layout.nnz:
        share = config.init_tie_share
        reported = np.zeros(layout.n_explicit, dtype=bool)
        reported[layout.entry_dyad] = True
        rho[reported] *= 1.0 - share
        rho[reported, K - 1] += share

    order = np.argsort(phi_shape / phi_rate, kind="stable")
    mass, entropy, total = layout.constant_row_mass(implicit_row, np.log(h.p))

    state = VariationalState(
        n_nodes=X.n_nodes, n_reporters=X.n_reporters, mask=X.mask,
        gamma_shape=gamma_shape, gamma_rate=gamma_rate,
        phi_shape=phi_shape[order], phi_rate=phi_rate[order],
        nu_shape=nu_shape, nu_rate=nu_rate,
        rho_ego=layout.exp_ego, rho_alter=layout.exp_alter, rho=rho,
        prior_row=h.p, implicit_mode=IMPLICIT_ROW, implicit_row=implicit_row,
        implicit_mass=mass, implicit_entropy=entropy, implicit_total=total,
    )
    return state.validate()


# --- Mises à jour ---

def update_responsibilities(state: VariationalState, X: ReportTensor,
                            layout: Optional[DyadLayout] = None,
                            mutuality: bool = True) -> AuxiliaryResponsibilities:
    """
    ẑ¹ ∝ exp(E[log θ_m] + E[log λ_k]), ẑ² ∝ X_jim exp(E[log η]), normalisés
    par (i, j, m, k). Sans déclaration inverse: ẑ¹ = 1 et ẑ² = 0 exactement.
    """
    layout = _layout_for(X, None, state.n_levels, layout)
    shape = (layout.nnz, state.n_levels)
    if not mutuality or layout.nnz == 0:
        return AuxiliaryResponsibilities(np.ones(shape), np.zeros(shape))

    zhat1 = state.elog_theta[layout.reporter][:, None] + state.elog_lambda[None, :]
    zhat1 -= (layout.log_rev + state.elog_eta)[:, None]
    with np.errstate(all="ignore"):
        expit(zhat1, out=zhat1)
    one_way = layout.rev == 0
    zhat1[one_way] = 1.0

    bad = ~np.isfinite(zhat1)
    n_bad = int(bad.sum())
    if n_bad:
        logger.warning("Sous-dépassement numérique sur %d responsabilités: ẑ¹ fixé à 1", n_bad)
        zhat1[bad] = 1.0
    zhat2 = 1.0 - zhat1
    zhat2[one_way] = 0.0
    return AuxiliaryResponsibilities(zhat1, zhat2, n_underflow=n_bad)


def update_theta(state: VariationalState, zhat: AuxiliaryResponsibilities, X: ReportTensor,
                 h: HyperParams, layout: Optional[DyadLayout] = None) -> VariationalState:
    """γ_m^shape = α_m + Σ ρ X ẑ¹, γ_m^rate = β_m + Σ_{paires éligibles} Σ_k ρ_k E[λ_k]"""
    h = _validated(h, X, state.n_levels)
    layout = _layout_for(X, h, state.n_levels, layout)
    weights = layout.count * np.einsum("ik,ik->i", state.rho[layout.entry_dyad], zhat.zhat1)
    shape = h.alpha + np.bincount(layout.reporter, weights=weights, minlength=state.n_reporters)

    elam = state.lambda_mean
    rate = (h.beta + layout.scatter_to_reporters(state.rho @ elam)
            + state.implicit_mass @ elam)
    return replace(state, gamma_shape=shape, gamma_rate=rate)


def update_lambda(state: VariationalState, zhat: AuxiliaryResponsibilities, X: ReportTensor,
                  h: HyperParams, layout: Optional[DyadLayout] = None) -> VariationalState:
    """φ_k^shape = a_k + Σ ρ_k X ẑ¹_k, φ_k^rate = b_k + Σ_{paires} ρ_k Σ_{m éligible} E[θ_m]"""
    h = _validated(h, X, state.n_levels)
    layout = _layout_for(X, h, state.n_levels, layout)
    shape = h.a + np.einsum("i,ik,ik->k", layout.count, state.rho[layout.entry_dyad], zhat.zhat1)

    theta = state.theta_mean
    sums = layout.dyad_sums(theta)
    rate = h.b + state.rho.T @ sums + theta @ state.implicit_mass
    return replace(state, phi_shape=shape, phi_rate=rate)


def update_prior(state: VariationalState, layout: DyadLayout) -> VariationalState:
    """
    p_k ∝ Σ ρ_ij,k sur les paires qui suivent le prior partagé (paires
    implicites comprises): maximum exact de l'ELBO en p, ρ fixé.
    """
    if state.n_levels == 1:
        return state
    if layout.shared_rows.all():
        totals = state.rho.sum(axis=0)
    else:
        totals = state.rho[layout.shared_rows].sum(axis=0)
    if state.implicit_total is not None:
        totals = totals + state.implicit_total
    if totals.sum() <= 0:
        return state
    p = np.maximum(totals / totals.sum(), PRIOR_FLOOR)
    return replace(state, prior_row=p / p.sum())


def update_rho(state: VariationalState, zhat: AuxiliaryResponsibilities, X: ReportTensor,
               h: HyperParams, layout: Optional[DyadLayout] = None,
               block_pairs: int = DEFAULT_BLOCK_PAIRS, n_threads: int = 1) -> VariationalState:
    """
    ρ_ij,k ∝ exp{log p_ij,k + Σ_m X_ijm ẑ¹_ijm,k E[log λ_k] − E[λ_k] Σ_m E[θ_m]}.

    Les paires sans déclaration gardent la forme close softmax(log p − E[λ]·S)
    avec E[λ] et E[θ] figés ici; leur masse par déclarant est recalculée.
    Le prior partagé est celui de l'état (prior_row).
    """
    h = _validated(h, X, state.n_levels)
    layout = _layout_for(X, h, state.n_levels, layout)
    K = state.n_levels
    theta, elam, elog_lam = state.theta_mean, state.lambda_mean, state.elog_lambda
    log_p = np.log(state.prior_row)

    scores = np.outer(layout.dyad_sums(theta), -elam)
    scores += layout.explicit_log_prior(log_p)
    for k in range(K):
        scores[:, k] += elog_lam[k] * np.bincount(
            layout.entry_dyad, weights=layout.count * zhat.zhat1[:, k], minlength=layout.n_explicit)
    rho = softmax(scores, axis=1)

    mass, entropy, total = layout.implicit_mass(theta, elam, block_pairs=block_pairs,
                                                n_threads=n_threads, shared_log_prior=log_p)
    return replace(state, rho=rho, implicit_mode=IMPLICIT_SCORES, implicit_row=None,
                   basis_theta=theta, basis_lambda=elam,
                   implicit_mass=mass, implicit_entropy=entropy, implicit_total=total)


def update_eta(state: VariationalState, zhat: AuxiliaryResponsibilities, X: ReportTensor,
               h: HyperParams, layout: Optional[DyadLayout] = None,
               mutuality: bool = True) -> VariationalState:
    """ν^shape = c + Σ ρ_k X ẑ²_k, ν^rate = d + Σ R_ijm X_jim (constant)"""
    h = _validated(h, X, state.n_levels)
    if not mutuality:
        return replace(state, nu_shape=h.c, nu_rate=h.d)
    layout = _layout_for(X, h, state.n_levels, layout)
    shape = h.c + float(np.einsum("i,ik,ik->", layout.count, state.rho[layout.entry_dyad], zhat.zhat2))
    return replace(state, nu_shape=shape, nu_rate=h.d + layout.nu_data)


# --- ELBO ---

def _gamma_elbo(prior_shape, prior_rate, shape, rate) -> float:
    """E_q[log p(x)] − E_q[log q(x)] pour un facteur Gamma, sans les constantes du prior"""
    return float(np.sum((prior_shape - shape) * digamma(shape) - prior_shape * np.log(rate)
                        + gammaln(shape) + shape * (1.0 - prior_rate / rate)))


def compute_elbo(state: VariationalState, X: ReportTensor, h: HyperParams,
                 zhat: Optional[AuxiliaryResponsibilities] = None,
                 layout: Optional[DyadLayout] = None, mutuality: bool = True) -> float:
    """
    ELBO à une constante près (log X_ijm! et constantes des priors omises),
    avec la séparation E[log(θλ + ηX)] ≈ E[log θλ] + E[log ηX] pondérée par ẑ.
    """
    params = np.concatenate([state.gamma_shape, state.gamma_rate, state.phi_shape,
                             state.phi_rate, [state.nu_shape, state.nu_rate]])
    if not np.all(np.isfinite(params)) or np.any(params <= 0):
        raise NonFiniteElboError("Paramètre Gamma non positif dans l'état variationnel")

    h = _validated(h, X, state.n_levels)
    layout = _layout_for(X, h, state.n_levels, layout)
    if zhat is None:
        zhat = update_responsibilities(state, X, layout, mutuality)

    theta, elam = state.theta_mean, state.lambda_mean
    z1, z2 = zhat.zhat1, zhat.zhat2

    per_level = state.elog_theta[layout.reporter][:, None] + state.elog_lambda[None, :]
    per_level *= z1
    per_level -= xlogy(z1, z1)
    per_level -= xlogy(z2, z2)
    if mutuality:
        per_level += z2 * (state.elog_eta + layout.log_rev[:, None])
    elbo = float(np.einsum("i,ik,ik->", layout.count, state.rho[layout.entry_dyad], per_level))
    del per_level

    level_load = state.rho.T @ layout.dyad_sums(theta) + theta @ state.implicit_mass
    elbo -= float(elam @ level_load)

    elbo += _gamma_elbo(h.alpha, h.beta, state.gamma_shape, state.gamma_rate)
    elbo += _gamma_elbo(h.a, h.b, state.phi_shape, state.phi_rate)
    if mutuality:
        elbo -= state.eta_mean * layout.nu_data
        elbo += _gamma_elbo(h.c, h.d, state.nu_shape, state.nu_rate)

    log_p = layout.explicit_log_prior(np.log(state.prior_row))
    elbo += float(np.sum(state.rho * log_p - xlogy(state.rho, state.rho)))
    elbo += state.implicit_entropy

    if not np.isfinite(elbo):
        raise NonFiniteElboError(f"ELBO non fini ({elbo})")
    return elbo


# --- Boucle principale ---

def fit(X: ReportTensor, h: HyperParams, config: FitConfig) -> FitResult:
    from src.thresholds import point_estimate

    h, layout = prepare(X, h, config.n_levels)
    state = init_state(h, X, config, layout)
    mutuality = config.mutuality

    trace, checked_at, violations = [], [], []
    converged = False
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        zhat = update_responsibilities(state, X, layout, mutuality)
        state = update_theta(state, zhat, X, h, layout)
        state = update_lambda(state, zhat, X, h, layout)
        if h.learn_p:
            state = update_prior(state, layout)
        state = update_rho(state, zhat, X, h, layout, config.block_pairs, config.n_threads)
        state = update_eta(state, zhat, X, h, layout, mutuality)

        if iteration % config.elbo_check_every and iteration != config.max_iterations:
            continue
        try:
            elbo = compute_elbo(state, X, h, zhat, layout, mutuality)
        except NonFiniteElboError as err:
            raise NonFiniteElboError(err.message, iteration=iteration) from err

        if trace:
            previous = trace[-1]
            if elbo < previous - config.monotonicity_tol * abs(previous):
                logger.warning("ELBO en baisse à l'itération %d: %.10g → %.10g",
                               iteration, previous, elbo)
                violations.append(iteration)
            change = abs(elbo - previous) / max(abs(elbo), np.finfo(float).tiny)
            trace.append(elbo)
            checked_at.append(iteration)
            if change < config.elbo_rel_tol:
                converged = True
                break
        else:
            trace.append(elbo)
            checked_at.append(iteration)

    if not converged:
        logger.warning("Pas de convergence après %d itérations", iteration)

    order = np.argsort(state.lambda_mean, kind="stable")
    if np.any(order != np.arange(state.n_levels)):
        logger.debug("Niveaux réordonnés par E[λ] croissant: %s", order.tolist())
        state = state.relabeled(order)
    state.validate()

    share = state.level_share
    if state.n_levels > 1 and share[-1] > 0.5:
        logger.warning("Le niveau le plus haut porte %.0f %% des paires éligibles: "
                       "ajustement probablement dégénéré (prior p=%s)",
                       100 * share[-1], np.round(state.prior_row, 4).tolist())

    # sans mutualité, η est fixé à 0 dans le modèle
    eta_est = state.eta_mean if mutuality else 0.0
    if eta_est >= 1.0:
        logger.warning("η estimé = %.3f ≥ 1: hors du domaine du modèle génératif", eta_est)

    point_network = threshold = None
    if state.n_levels == 2:
        point_network, threshold = point_estimate(
            state, eta_est, config.override_threshold, prior=h,
            block_pairs=config.block_pairs, return_threshold=True)

    logger.info("Ajustement terminé: %d itérations, convergé=%s, η=%.4f",
                iteration, converged, eta_est)
    return FitResult(
        state=state, elbo_trace=trace, n_iterations=iteration, converged=converged,
        eta_est=eta_est, theta_est=state.theta_mean, point_network=point_network,
        threshold=threshold, elbo_iterations=checked_at, mutuality=mutuality,
        monotonicity_violations=violations,
    )


def two_step_fit(X: ReportTensor, h: HyperParams, config: FitConfig,
                 scale: float = 1.0) -> FitResult:
    """
    Étape 1: prior θ faible et commun. Étape 2: α_m = s · θ̂_m · β_m (β fixé),
    pour que la moyenne a priori suive la fiabilité estimée à l'étape 1.
    """
    if scale <= 0:
        raise InvalidConfigurationError(f"Facteur d'échelle non positif: {scale}")
    first = fit(X, h, config)
    h = validate_hyperparams(h, config.n_levels, X.n_nodes, X.n_reporters)
    refined = h.with_reporter_prior(scale * first.theta_est * h.beta)
    logger.info("Deuxième étape: priors θ par déclarant (moyenne %.3f)", float(np.mean(refined.alpha)))
    second = fit(X, refined, config)
    return replace(second, provenance=first)
