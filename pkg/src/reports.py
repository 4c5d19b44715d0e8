"""
Tenseur de déclarations
=======================
Stockage creux des déclarations X_ijm (le déclarant m affirme un lien i → j)
et du masque d'éligibilité R_ijm qui dit quels triplets un déclarant
pouvait renseigner.

Les zéros sont implicites: seules les déclarations positives sont stockées,
triées par (i, j, m) pour que toutes les réductions soient reproductibles.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence, Tuple

import numpy as np

from src.errors import IndexOutOfRangeError, MalformedRowError, MaskViolationError, SelfLoopError


class MaskRule(str, Enum):
    SELF_DYADS = "self_dyads"      # m ne renseigne que les liens qui l'impliquent
    FULL_ROSTER = "full_roster"    # chaque déclarant renseigne toutes les paires
    CUSTOM = "custom"              # liste explicite de triplets (i, j, m)


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


def triple_keys(ego, alter, reporter, n_nodes: int, n_reporters: int) -> np.ndarray:
    """Clé entière unique et ordonnée comme (i, j, m)"""
    ego = np.asarray(ego, dtype=np.int64)
    alter = np.asarray(alter, dtype=np.int64)
    reporter = np.asarray(reporter, dtype=np.int64)
    return (ego * n_nodes + alter) * n_reporters + reporter


def dyad_keys(ego, alter, n_nodes: int) -> np.ndarray:
    return np.asarray(ego, dtype=np.int64) * n_nodes + np.asarray(alter, dtype=np.int64)


def _lookup(sorted_keys: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Position de chaque requête dans sorted_keys, -1 si absente"""
    if sorted_keys.size == 0:
        return np.full(queries.shape, -1, dtype=np.int64)
    pos = np.searchsorted(sorted_keys, queries)
    pos = np.minimum(pos, sorted_keys.size - 1)
    found = sorted_keys[pos] == queries
    return np.where(found, pos, -1).astype(np.int64)


@dataclass(frozen=True)
class ReporterMask:
    """Masque R: quels triplets (i, j, m) chaque déclarant pouvait renseigner"""
    rule: MaskRule = MaskRule.SELF_DYADS
    custom_ego: Optional[np.ndarray] = None
    custom_alter: Optional[np.ndarray] = None
    custom_reporter: Optional[np.ndarray] = None
    n_nodes: Optional[int] = None
    n_reporters: Optional[int] = None
    _keys: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rule", MaskRule(self.rule))
        if self.rule is not MaskRule.CUSTOM:
            return
        if self.custom_ego is None or self.n_nodes is None or self.n_reporters is None:
            raise MaskViolationError("Un masque personnalisé exige ses triplets et ses dimensions")

        ego = np.asarray(self.custom_ego, dtype=np.int64)
        alter = np.asarray(self.custom_alter, dtype=np.int64)
        reporter = np.asarray(self.custom_reporter, dtype=np.int64)
        _check_ranges(ego, alter, reporter, self.n_nodes, self.n_reporters)

        keys = np.unique(triple_keys(ego, alter, reporter, self.n_nodes, self.n_reporters))
        dyads, reporter = np.divmod(keys, self.n_reporters)
        ego, alter = np.divmod(dyads, self.n_nodes)
        object.__setattr__(self, "custom_ego", _frozen(ego, np.int64))
        object.__setattr__(self, "custom_alter", _frozen(alter, np.int64))
        object.__setattr__(self, "custom_reporter", _frozen(reporter, np.int64))
        object.__setattr__(self, "_keys", _frozen(keys, np.int64))

    # --- Constructeurs ---

    @classmethod
    def self_dyads(cls) -> "ReporterMask":
        return cls(MaskRule.SELF_DYADS)

    @classmethod
    def full_roster(cls) -> "ReporterMask":
        return cls(MaskRule.FULL_ROSTER)

    @classmethod
    def custom(cls, entries: Iterable[Tuple[int, int, int]],
               n_nodes: int, n_reporters: int) -> "ReporterMask":
        triples = np.array(list(entries), dtype=np.int64).reshape(-1, 3)
        return cls(MaskRule.CUSTOM, triples[:, 0], triples[:, 1], triples[:, 2],
                   n_nodes=n_nodes, n_reporters=n_reporters)

    # --- Requêtes vectorisées ---

    def contains(self, ego, alter, reporter, n_nodes: int, n_reporters: int) -> np.ndarray:
        ego = np.asarray(ego, dtype=np.int64)
        alter = np.asarray(alter, dtype=np.int64)
        reporter = np.asarray(reporter, dtype=np.int64)
        if self.rule is MaskRule.SELF_DYADS:
            return (ego != alter) & ((reporter == ego) | (reporter == alter))
        if self.rule is MaskRule.FULL_ROSTER:
            return ego != alter
        self._check_dims(n_nodes, n_reporters)
        keys = triple_keys(ego, alter, reporter, n_nodes, n_reporters)
        return _lookup(self._keys, keys) >= 0

    def eligible_count(self, ego, alter, n_nodes: int, n_reporters: int) -> np.ndarray:
        """Nombre de déclarants éligibles pour chaque paire (i, j)"""
        ego = np.asarray(ego, dtype=np.int64)
        alter = np.asarray(alter, dtype=np.int64)
        off_diag = ego != alter
        if self.rule is MaskRule.SELF_DYADS:
            count = (ego < n_reporters).astype(np.int64) + (alter < n_reporters).astype(np.int64)
            return np.where(off_diag, count, 0)
        if self.rule is MaskRule.FULL_ROSTER:
            return np.where(off_diag, n_reporters, 0).astype(np.int64)
        self._check_dims(n_nodes, n_reporters)
        entry_dyads = self._keys // n_reporters
        queries = dyad_keys(ego, alter, n_nodes)
        left = np.searchsorted(entry_dyads, queries, side="left")
        right = np.searchsorted(entry_dyads, queries, side="right")
        return (right - left).astype(np.int64)

    def custom_dyads(self) -> Tuple[np.ndarray, np.ndarray]:
        """Paires distinctes couvertes par un masque personnalisé (triées)"""
        dyads = np.unique(self._keys // self.n_reporters)
        return np.divmod(dyads, self.n_nodes)

    def _check_dims(self, n_nodes: int, n_reporters: int):
        if (n_nodes, n_reporters) != (self.n_nodes, self.n_reporters):
            raise MaskViolationError(
                f"Masque défini pour N={self.n_nodes}, M={self.n_reporters}, "
                f"utilisé avec N={n_nodes}, M={n_reporters}"
            )


def _check_ranges(ego, alter, reporter, n_nodes: int, n_reporters: int):
    for name, values, bound in (("ego", ego, n_nodes), ("alter", alter, n_nodes),
                                ("reporter", reporter, n_reporters)):
        bad = np.flatnonzero((values < 0) | (values >= bound))
        if bad.size:
            raise IndexOutOfRangeError(
                f"Indice {name}={int(values[bad[0]])} hors de [0, {bound})", row=int(bad[0])
            )
    loops = np.flatnonzero(ego == alter)
    if loops.size:
        raise SelfLoopError(f"Boucle sur le nœud {int(ego[loops[0]])}", row=int(loops[0]))


@dataclass(frozen=True)
class ReportTensor:
    """Déclarations X_ijm ≥ 1, triées par (i, j, m), zéros implicites"""
    n_nodes: int
    n_reporters: int
    mask: ReporterMask
    ego: np.ndarray
    alter: np.ndarray
    reporter: np.ndarray
    count: np.ndarray

    def __post_init__(self):
        if self.n_nodes < 1 or self.n_reporters < 1:
            raise IndexOutOfRangeError(
                f"Dimensions invalides N={self.n_nodes}, M={self.n_reporters}"
            )
        ego = np.asarray(self.ego, dtype=np.int64).reshape(-1)
        alter = np.asarray(self.alter, dtype=np.int64).reshape(-1)
        reporter = np.asarray(self.reporter, dtype=np.int64).reshape(-1)
        count = np.asarray(self.count, dtype=np.int64).reshape(-1)
        if not (ego.size == alter.size == reporter.size == count.size):
            raise IndexOutOfRangeError("Colonnes de longueurs différentes")

        _check_ranges(ego, alter, reporter, self.n_nodes, self.n_reporters)
        small = np.flatnonzero(count < 1)
        if small.size:
            raise IndexOutOfRangeError(
                f"Compte {int(count[small[0]])} < 1 stocké explicitement", row=int(small[0])
            )
        allowed = self.mask.contains(ego, alter, reporter, self.n_nodes, self.n_reporters)
        outside = np.flatnonzero(~allowed)
        if outside.size:
            k = outside[0]
            raise MaskViolationError(
                f"Déclaration ({ego[k]}, {alter[k]}, {reporter[k]}) hors du masque "
                f"{self.mask.rule.value}", row=int(k)
            )

        # Tri canonique et fusion des doublons
        keys = triple_keys(ego, alter, reporter, self.n_nodes, self.n_reporters)
        unique_keys, inverse = np.unique(keys, return_inverse=True)
        merged = np.bincount(inverse, weights=count, minlength=unique_keys.size).astype(np.int64)
        dyads, reporter = np.divmod(unique_keys, self.n_reporters)
        ego, alter = np.divmod(dyads, self.n_nodes)

        object.__setattr__(self, "ego", _frozen(ego, np.int64))
        object.__setattr__(self, "alter", _frozen(alter, np.int64))
        object.__setattr__(self, "reporter", _frozen(reporter, np.int64))
        object.__setattr__(self, "count", _frozen(merged, np.int64))
        object.__setattr__(self, "_keys", _frozen(unique_keys, np.int64))

    @classmethod
    def empty(cls, n_nodes: int, n_reporters: int, mask: ReporterMask) -> "ReportTensor":
        none = np.zeros(0, dtype=np.int64)
        return cls(n_nodes, n_reporters, mask, none, none, none, none)

    # --- Accès ---

    @property
    def nnz(self) -> int:
        return int(self.count.size)

    @property
    def keys(self) -> np.ndarray:
        return self._keys

    @property
    def total(self) -> int:
        return int(self.count.sum())

    def __iter__(self) -> Iterator[Tuple[int, int, int, int]]:
        for i, j, m, x in zip(self.ego, self.alter, self.reporter, self.count):
            yield int(i), int(j), int(m), int(x)

    def __len__(self) -> int:
        return self.nnz

    def get(self, ego: int, alter: int, reporter: int) -> int:
        key = triple_keys([ego], [alter], [reporter], self.n_nodes, self.n_reporters)
        pos = _lookup(self._keys, key)[0]
        return int(self.count[pos]) if pos >= 0 else 0

    def lookup(self, ego, alter, reporter) -> np.ndarray:
        """Comptes X_ijm pour des triplets quelconques (0 si absent)"""
        keys = triple_keys(ego, alter, reporter, self.n_nodes, self.n_reporters)
        pos = _lookup(self._keys, keys)
        if self.nnz == 0:
            return np.zeros(pos.shape, dtype=np.int64)
        return np.where(pos >= 0, self.count[np.maximum(pos, 0)], 0).astype(np.int64)

    def reverse_counts(self) -> np.ndarray:
        """X_jim aligné sur chaque déclaration stockée X_ijm"""
        return self.lookup(self.alter, self.ego, self.reporter)

    def dense(self) -> np.ndarray:
        """Tableau N×N×M, réservé aux petits exemples et aux tests"""
        out = np.zeros((self.n_nodes, self.n_nodes, self.n_reporters), dtype=np.int64)
        out[self.ego, self.alter, self.reporter] = self.count
        return out

    def for_reporter(self, reporter: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        sel = self.reporter == reporter
        return self.ego[sel], self.alter[sel], self.count[sel]


def build_report_tensor(records: Sequence[Tuple[int, int, int, float]], n_nodes: int,
                        mask: ReporterMask, n_reporters: Optional[int] = None) -> ReportTensor:
    """
    Construit le tenseur à partir d'enregistrements (ego, alter, reporter, poids).

    Les doublons sont additionnés, les poids nuls ignorés. Les poids non
    entiers, les indices hors bornes, les boucles et les triplets hors masque
    sont rejetés avec le numéro de ligne.
    """
    table = np.array(list(records), dtype=np.float64).reshape(-1, 4)
    if n_reporters is None:
        n_reporters = n_nodes

    ego = table[:, 0].astype(np.int64)
    alter = table[:, 1].astype(np.int64)
    reporter = table[:, 2].astype(np.int64)
    weight = table[:, 3]

    fractional = np.flatnonzero(~np.isfinite(weight) | (np.mod(np.abs(np.nan_to_num(weight)), 1) != 0))
    if fractional.size:
        raise MalformedRowError(
            f"Poids non entier {weight[fractional[0]]}", row=int(fractional[0])
        )
    negative = np.flatnonzero(weight < 0)
    if negative.size:
        raise IndexOutOfRangeError(
            f"Poids négatif {weight[negative[0]]}", row=int(negative[0])
        )
    _check_ranges(ego, alter, reporter, n_nodes, n_reporters)
    allowed = mask.contains(ego, alter, reporter, n_nodes, n_reporters)
    outside = np.flatnonzero(~allowed)
    if outside.size:
        k = outside[0]
        raise MaskViolationError(
            f"Déclarant {reporter[k]} non éligible pour ({ego[k]}, {alter[k]})", row=int(k)
        )

    keep = weight > 0
    return ReportTensor(n_nodes, n_reporters, mask, ego[keep], alter[keep],
                        reporter[keep], weight[keep].astype(np.int64))
