"""
Diagnostics par déclarant
=========================
Pour les plans à double échantillonnage (masque self_dyads, une question
« donne à » et une question « reçoit de » dans la même couche):

- taux de répétition: part des alters nommés en « donne à » qui sont
  renommés en « reçoit de »;
- confirmation des liens: six catégories selon que le déclarant, l'autre
  membre de la paire, ou les deux, ont déclaré le lien.
"""

from dataclasses import asdict, dataclass
from itertools import combinations
from typing import Dict, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from src.errors import IndexOutOfRangeError, LengthMismatchError, NoNominationsError
from src.metrics import wasserstein_1d
from src.reports import ReportTensor


def _check_reporter(X: ReportTensor, reporter: int):
    if not 0 <= reporter < min(X.n_reporters, X.n_nodes):
        raise IndexOutOfRangeError(f"Déclarant {reporter} hors de [0, {min(X.n_reporters, X.n_nodes)})")


def repeat_nomination_rate(X: ReportTensor, reporter: int) -> float:
    """|{j : X_mjm > 0 et X_jmm > 0}| / |{j : X_mjm > 0}|"""
    _check_reporter(X, reporter)
    ego, alter, _ = X.for_reporter(reporter)
    give = set(alter[ego == reporter].tolist())
    get = set(ego[alter == reporter].tolist())
    if not give:
        raise NoNominationsError(f"Le déclarant {reporter} n'a nommé personne en « donne à »")
    return len(give & get) / len(give)


@dataclass(frozen=True)
class TieConfirmation:
    confirmed_give: int = 0
    confirmed_get: int = 0
    reporter_only_give: int = 0
    reporter_only_get: int = 0
    other_only_give: int = 0
    other_only_get: int = 0

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)

    @property
    def total(self) -> int:
        return sum(self.to_dict().values())


def tie_confirmation_summary(X: ReportTensor, reporter: int) -> TieConfirmation:
    """
    « donne à » (m → j): X_mjm du déclarant contre X_mjj de j.
    « reçoit de » (j → m): X_jmm du déclarant contre X_jmj de j.
    """
    _check_reporter(X, reporter)
    m = reporter

    involving = (X.ego == m) | (X.alter == m)
    ego, alter = X.ego[involving], X.alter[involving]
    give_partners = np.unique(alter[ego == m])
    get_partners = np.unique(ego[alter == m])

    def split(partners, tie_ego, tie_alter):
        if partners.size == 0:
            return 0, 0, 0
        own = X.lookup(tie_ego, tie_alter, np.full(partners.size, m)) > 0
        valid = partners < X.n_reporters
        other = np.zeros(partners.size, dtype=bool)
        other[valid] = X.lookup(tie_ego[valid], tie_alter[valid], partners[valid]) > 0
        return int(np.sum(own & other)), int(np.sum(own & ~other)), int(np.sum(~own & other))

    give = split(give_partners, np.full(give_partners.size, m), give_partners)
    get = split(get_partners, get_partners, np.full(get_partners.size, m))
    return TieConfirmation(
        confirmed_give=give[0], confirmed_get=get[0],
        reporter_only_give=give[1], reporter_only_get=get[1],
        other_only_give=give[2], other_only_get=get[2],
    )


def reporter_diagnostics(X: ReportTensor, theta_est: Sequence[float]) -> pd.DataFrame:
    """
    Une ligne par déclarant: fiabilité estimée, nominations « donne à » et
    « reçoit de », taux de répétition (NaN si indéfini) et nombre d'autres
    déclarants ayant rapporté un lien qui l'implique.
    """
    theta = np.asarray(theta_est, dtype=np.float64)
    M, N = X.n_reporters, X.n_nodes
    if theta.size != M:
        raise LengthMismatchError(f"{theta.size} fiabilités pour {M} déclarants")

    gives = X.reporter == X.ego
    gets = X.reporter == X.alter
    n_give = np.bincount(X.reporter[gives], minlength=M)
    n_get = np.bincount(X.reporter[gets], minlength=M)

    give_keys = X.reporter[gives] * N + X.alter[gives]
    get_keys = X.reporter[gets] * N + X.ego[gets]
    repeated = np.bincount(X.reporter[gives][np.isin(give_keys, get_keys)], minlength=M)
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(n_give > 0, repeated / np.maximum(n_give, 1), np.nan)

    # (nœud impliqué, autre déclarant) distincts
    nodes = np.concatenate([X.ego, X.alter])
    reporters = np.concatenate([X.reporter, X.reporter])
    other = nodes != reporters
    pairs = np.unique(nodes[other] * M + reporters[other])
    involved = pairs // M
    involved = involved[involved < M]
    by_others = np.bincount(involved, minlength=M)

    return pd.DataFrame({
        "reporter": np.arange(M),
        "theta": theta,
        "n_give": n_give,
        "n_get": n_get,
        "repeat_rate": rate,
        "reported_by_others": by_others,
    })


def diagnostics_overview(table: pd.DataFrame, low_theta: float = 0.1) -> Dict[str, float]:
    """Parts de déclarants qui répètent tout, et lien entre θ et degré rapporté par les autres"""
    defined = table.dropna(subset=["repeat_rate"])
    low = defined[defined["theta"] < low_theta]
    overview = {
        "n_reporters": int(len(table)),
        "share_full_repeat": float((defined["repeat_rate"] == 1.0).mean()) if len(defined) else float("nan"),
        "share_low_theta_full_repeat": float((low["repeat_rate"] == 1.0).mean()) if len(low) else float("nan"),
        "spearman_theta_reported_by_others": float("nan"),
    }
    if len(table) >= 3 and table["theta"].nunique() > 1 and table["reported_by_others"].nunique() > 1:
        overview["spearman_theta_reported_by_others"] = float(
            spearmanr(table["theta"], table["reported_by_others"])[0])
    return overview


def reliability_distances(theta_by_layer: Mapping[str, Sequence[float]]) -> pd.DataFrame:
    """Matrice symétrique des distances de Wasserstein entre types de liens"""
    names = list(theta_by_layer)
    out = pd.DataFrame(0.0, index=names, columns=names)
    for a, b in combinations(names, 2):
        dist = wasserstein_1d(theta_by_layer[a], theta_by_layer[b])
        out.loc[a, b] = out.loc[b, a] = dist
    return out
