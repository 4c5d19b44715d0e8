"""
Mises à jour CAVI contre une transcription dense et indépendante
(boucles explicites sur i, j, m, k; digamma écrite à la main) sur de petits
réseaux aléatoires N = M = 3, K = 2.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import random_hyperparams, random_reports
from src.inference import (FitConfig, compute_elbo, init_state, prepare, update_eta, update_lambda,
                           update_prior, update_responsibilities, update_rho, update_theta)
from src.priors import HyperParams
from src.reports import ReporterMask, build_report_tensor

N = M = 3
K = 2
TOL = 1e-10


def psi(x: float) -> float:
    """Digamma: récurrence jusqu'à x ≥ 20 puis développement asymptotique"""
    acc = 0.0
    while x < 20.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = inv2 * (1 / 12 - inv2 * (1 / 120 - inv2 * (1 / 252 - inv2 * (1 / 240 - inv2 / 132))))
    return acc + math.log(x) - 0.5 / x - series


class Dense:
    """Quantités denses d'un état: espérances, ρ sur toutes les paires éligibles"""

    def __init__(self, state, X, h):
        self.X = X.dense().astype(float)
        self.elig = np.zeros((N, N, M), dtype=bool)
        for i in range(N):
            for j in range(N):
                for m in range(M):
                    self.elig[i, j, m] = bool(X.mask.contains([i], [j], [m], N, M)[0])
        self.pairs = [(i, j) for i in range(N) for j in range(N) if self.elig[i, j].any()]
        self.rho = state.dense_rho()
        self.gs, self.gr = state.gamma_shape, state.gamma_rate
        self.ps, self.pr = state.phi_shape, state.phi_rate
        self.ns, self.nr = state.nu_shape, state.nu_rate
        self.Etheta = [self.gs[m] / self.gr[m] for m in range(M)]
        self.Elam = [self.ps[k] / self.pr[k] for k in range(K)]
        self.Eeta = self.ns / self.nr
        self.Elogtheta = [psi(self.gs[m]) - math.log(self.gr[m]) for m in range(M)]
        self.Eloglam = [psi(self.ps[k]) - math.log(self.pr[k]) for k in range(K)]
        self.Elogeta = psi(self.ns) - math.log(self.nr)
        self.h = h

    def zhat(self):
        z1 = np.zeros((N, N, M, K))
        z2 = np.zeros((N, N, M, K))
        for i in range(N):
            for j in range(N):
                for m in range(M):
                    if self.X[i, j, m] == 0:
                        continue
                    for k in range(K):
                        back = self.X[j, i, m]
                        if back == 0:
                            z1[i, j, m, k] = 1.0
                            continue
                        u1 = math.exp(self.Elogtheta[m] + self.Eloglam[k])
                        u2 = back * math.exp(self.Elogeta)
                        z1[i, j, m, k] = u1 / (u1 + u2)
                        z2[i, j, m, k] = u2 / (u1 + u2)
        return z1, z2

    def theta(self, z1):
        shape, rate = np.array(self.h.alpha, float), np.array(self.h.beta, float)
        for m in range(M):
            for i, j in self.pairs:
                for k in range(K):
                    shape[m] += self.X[i, j, m] * self.rho[i, j, k] * z1[i, j, m, k]
                    if self.elig[i, j, m]:
                        rate[m] += self.rho[i, j, k] * self.Elam[k]
        return shape, rate

    def lam(self, z1):
        shape, rate = np.array(self.h.a, float), np.array(self.h.b, float)
        for k in range(K):
            for i, j in self.pairs:
                for m in range(M):
                    shape[k] += self.X[i, j, m] * self.rho[i, j, k] * z1[i, j, m, k]
                    if self.elig[i, j, m]:
                        rate[k] += self.rho[i, j, k] * self.Etheta[m]
        return shape, rate

    def rho_update(self, z1):
        out = np.full((N, N, K), np.nan)
        for i, j in self.pairs:
            scores = []
            for k in range(K):
                s = math.log(self.h.p[k])
                for m in range(M):
                    s += self.X[i, j, m] * z1[i, j, m, k] * self.Eloglam[k]
                    if self.elig[i, j, m]:
                        s -= self.Elam[k] * self.Etheta[m]
                scores.append(s)
            top = max(scores)
            weights = [math.exp(s - top) for s in scores]
            out[i, j] = [w / sum(weights) for w in weights]
        return out

    def eta(self, z2):
        shape, rate = self.h.c, self.h.d
        for i in range(N):
            for j in range(N):
                for m in range(M):
                    if self.elig[i, j, m]:
                        rate += self.X[j, i, m]
                    for k in range(K):
                        shape += self.X[i, j, m] * self.rho[i, j, k] * z2[i, j, m, k]
        return shape, rate

    def elbo(self, z1, z2):
        total = 0.0
        for i, j in self.pairs:
            for m in range(M):
                x = self.X[i, j, m]
                for k in range(K):
                    r = self.rho[i, j, k]
                    if x > 0:
                        term = z1[i, j, m, k] * (self.Elogtheta[m] + self.Eloglam[k])
                        for z in (z1[i, j, m, k], z2[i, j, m, k]):
                            if z > 0:
                                term -= z * math.log(z)
                        if z2[i, j, m, k] > 0:
                            term += z2[i, j, m, k] * (self.Elogeta + math.log(self.X[j, i, m]))
                        total += x * r * term
                    if self.elig[i, j, m]:
                        total -= r * self.Elam[k] * self.Etheta[m]
            for m in range(M):
                if self.elig[i, j, m]:
                    total -= self.Eeta * self.X[j, i, m]
            for k in range(K):
                r = self.rho[i, j, k]
                total += r * (math.log(self.h.p[k]) - math.log(r))

        def gamma_term(a0, b0, s, r):
            return (a0 - s) * psi(s) - a0 * math.log(r) + math.lgamma(s) + s * (1 - b0 / r)

        for m in range(M):
            total += gamma_term(self.h.alpha[m], self.h.beta[m], self.gs[m], self.gr[m])
        for k in range(K):
            total += gamma_term(self.h.a[k], self.h.b[k], self.ps[k], self.pr[k])
        total += gamma_term(self.h.c, self.h.d, self.ns, self.nr)
        return total


def _instance(seed: int, mask: ReporterMask):
    rng = np.random.default_rng(seed)
    X = random_reports(rng, N, mask, density=0.4)
    h, layout = prepare(X, random_hyperparams(rng, M, K), K)
    state = init_state(h, X, FitConfig(seed=seed, n_levels=K), layout)
    return X, h, layout, state


MASKS = [ReporterMask.self_dyads(), ReporterMask.full_roster()]


@pytest.mark.parametrize("mask", MASKS, ids=["self_dyads", "full_roster"])
@pytest.mark.parametrize("seed", range(25))
def test_updates_match_dense_transcription(seed, mask):
    X, h, layout, state = _instance(seed, mask)
    dense = Dense(state, X, h)
    z1, z2 = dense.zhat()

    zhat = update_responsibilities(state, X, layout)
    np.testing.assert_allclose(zhat.zhat1, z1[X.ego, X.alter, X.reporter], rtol=0, atol=TOL)
    np.testing.assert_allclose(zhat.zhat2, z2[X.ego, X.alter, X.reporter], rtol=0, atol=TOL)

    after = update_theta(state, zhat, X, h, layout)
    shape, rate = dense.theta(z1)
    np.testing.assert_allclose(after.gamma_shape, shape, rtol=TOL)
    np.testing.assert_allclose(after.gamma_rate, rate, rtol=TOL)

    after = update_lambda(state, zhat, X, h, layout)
    shape, rate = dense.lam(z1)
    np.testing.assert_allclose(after.phi_shape, shape, rtol=TOL)
    np.testing.assert_allclose(after.phi_rate, rate, rtol=TOL)

    after = update_rho(state, zhat, X, h, layout)
    np.testing.assert_allclose(after.dense_rho(), dense.rho_update(z1), rtol=0, atol=TOL)

    after = update_eta(state, zhat, X, h, layout)
    shape, rate = dense.eta(z2)
    assert after.nu_shape == pytest.approx(shape, rel=TOL)
    assert after.nu_rate == pytest.approx(rate, rel=TOL)


@pytest.mark.parametrize("mask", MASKS, ids=["self_dyads", "full_roster"])
@pytest.mark.parametrize("seed", range(10))
def test_elbo_matches_dense_transcription(seed, mask):
    X, h, layout, state = _instance(seed, mask)

    dense = Dense(state, X, h)
    zhat = update_responsibilities(state, X, layout)
    assert compute_elbo(state, X, h, zhat, layout) == pytest.approx(dense.elbo(*dense.zhat()), rel=1e-9)

    # après un balayage complet: paires implicites en forme close
    state = update_theta(state, zhat, X, h, layout)
    state = update_lambda(state, zhat, X, h, layout)
    state = update_rho(state, zhat, X, h, layout)
    state = update_eta(state, zhat, X, h, layout)
    dense = Dense(state, X, h)
    zhat = update_responsibilities(state, X, layout)
    assert compute_elbo(state, X, h, zhat, layout) == pytest.approx(dense.elbo(*dense.zhat()), rel=1e-9)


def test_responsibility_split_on_reference_values():
    # γ = φ_k = ν = (2, 1), X_ijm = X_jim = 1: ẑ¹ = A / (A + B), A = exp(2Ψ(2)), B = exp(Ψ(2))
    X = build_report_tensor([(0, 1, 0, 1), (1, 0, 0, 1)], 2, ReporterMask.self_dyads())
    h, layout = prepare(X, HyperParams(alpha=2.0, beta=1.0, a=2.0, b=1.0, c=2.0, d=1.0, p=[0.5, 0.5]), K)
    state = init_state(h, X, FitConfig(init_offset_scale=0.0), layout)
    zhat = update_responsibilities(state, X, layout)

    a, b = math.exp(psi(2.0) + psi(2.0)), math.exp(psi(2.0))
    np.testing.assert_allclose(zhat.zhat1, a / (a + b), rtol=0, atol=1e-12)
    np.testing.assert_allclose(zhat.zhat2, b / (a + b), rtol=0, atol=1e-12)
    assert a / (a + b) == pytest.approx(0.6041493, abs=1e-7)


@pytest.mark.parametrize("mask", MASKS, ids=["self_dyads", "full_roster"])
@pytest.mark.parametrize("seed", range(10))
def test_learned_prior_is_mean_responsibility(seed, mask):
    rng = np.random.default_rng(seed)
    X = random_reports(rng, N, mask, density=0.4)
    h, layout = prepare(X, replace(random_hyperparams(rng, M, K), p=None), K)
    assert h.learn_p
    state = init_state(h, X, FitConfig(seed=seed, n_levels=K), layout)

    zhat = update_responsibilities(state, X, layout)
    state = update_theta(state, zhat, X, h, layout)
    state = update_lambda(state, zhat, X, h, layout)
    state = update_rho(state, zhat, X, h, layout)
    learned = update_prior(state, layout)
    rows = state.dense_rho().reshape(-1, K)
    np.testing.assert_allclose(learned.prior_row, np.nanmean(rows, axis=0), rtol=0, atol=1e-12)

    # ELBO avec le prior ré-estimé, contre la transcription dense
    state = update_rho(learned, zhat, X, h, layout)
    dense = Dense(state, X, replace(h, p=state.prior_row))
    zhat = update_responsibilities(state, X, layout)
    assert compute_elbo(state, X, h, zhat, layout) == pytest.approx(dense.elbo(*dense.zhat()), rel=1e-9)
