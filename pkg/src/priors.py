"""
Hyperparamètres
===============
Priors Gamma sur les fiabilités θ_m, les niveaux λ_k et la mutualité η,
et prior catégoriel p_ij sur les K niveaux de chaque paire.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import IndexOutOfRangeError, NonPositiveParameterError, SimplexViolationError

Scalar = Union[float, int]
Vector = Union[Scalar, Sequence[float], np.ndarray]

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class HyperParams:
    alpha: Vector = 1.0                 # forme de θ_m (scalaire ou un par déclarant)
    beta: Vector = 1.0                  # taux de θ_m
    a: Vector = 1.0                     # forme de λ_k (scalaire ou un par niveau)
    b: Vector = 1.0                     # taux de λ_k
    c: float = 1.0                      # forme de η
    d: float = 1.0                      # taux de η
    p: Optional[Sequence[float]] = None  # prior catégoriel partagé, uniforme par défaut
    learn_p: Optional[bool] = None       # None: p estimé si et seulement si p n'est pas fourni
    p_overrides: Mapping[Tuple[int, int], Sequence[float]] = field(default_factory=dict)

    @property
    def is_validated(self) -> bool:
        return all(isinstance(getattr(self, name), np.ndarray)
                   for name in ("alpha", "beta", "a", "b", "p"))

    def with_reporter_prior(self, alpha, beta=None) -> "HyperParams":
        """Copie avec des priors θ par déclarant (utilisé par l'ajustement en deux étapes)"""
        return replace(self, alpha=np.asarray(alpha, dtype=np.float64),
                       beta=self.beta if beta is None else np.asarray(beta, dtype=np.float64))


def _broadcast(name: str, value: Vector, size: int) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(size, float(arr))
    arr = arr.reshape(-1)
    if arr.size != size:
        raise NonPositiveParameterError(f"{name}: {arr.size} valeurs, {size} attendues")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        bad = arr[~(np.isfinite(arr) & (arr > 0))][0]
        raise NonPositiveParameterError(f"{name} doit être strictement positif (reçu {bad})")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


def _simplex(name: str, row, n_levels: int) -> np.ndarray:
    arr = np.asarray(row, dtype=np.float64).reshape(-1)
    if arr.size != n_levels:
        raise SimplexViolationError(f"{name}: {arr.size} niveaux, K={n_levels} attendus")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise SimplexViolationError(f"{name}: probabilités strictement positives requises {arr.tolist()}")
    total = arr.sum()
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise SimplexViolationError(f"{name}: somme {total:.6g} ≠ 1 {arr.tolist()}")
    arr = arr / total
    arr.setflags(write=False)
    return arr


def validate_hyperparams(h: HyperParams, n_levels: int, n_nodes: int,
                         n_reporters: int) -> HyperParams:
    """
    Vérifie positivité et contraintes de simplexe, et complète les valeurs
    par entité à partir des scalaires. Idempotent: learn_p est figé à la
    première validation (vrai si p n'était pas fourni).
    """
    if n_levels < 1:
        raise NonPositiveParameterError(f"K doit être ≥ 1 (reçu {n_levels})")

    p = _simplex("p", np.full(n_levels, 1.0 / n_levels) if h.p is None else h.p, n_levels)

    overrides: Dict[Tuple[int, int], np.ndarray] = {}
    for (i, j), row in sorted(dict(h.p_overrides).items()):
        i, j = int(i), int(j)
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise IndexOutOfRangeError(f"Prior personnalisé sur ({i}, {j}) hors de [0, {n_nodes})")
        if i == j:
            raise IndexOutOfRangeError(f"Prior personnalisé sur la diagonale ({i}, {i})")
        overrides[(i, j)] = _simplex(f"p[{i},{j}]", row, n_levels)

    learn_p = (h.p is None) if h.learn_p is None else bool(h.learn_p)
    c = _broadcast("c", h.c, 1)[0]
    d = _broadcast("d", h.d, 1)[0]
    return HyperParams(
        alpha=_broadcast("alpha", h.alpha, n_reporters),
        beta=_broadcast("beta", h.beta, n_reporters),
        a=_broadcast("a", h.a, n_levels),
        b=_broadcast("b", h.b, n_levels),
        c=float(c),
        d=float(d),
        p=p,
        learn_p=learn_p,
        p_overrides=overrides,
    )
