"""
Lecture des déclarations
========================
Fichier CSV (UTF-8) d'en-tête exact `ego,alter,reporter,tie_type,weight`
(la colonne weight est facultative, 1 par défaut). Une ligne = un déclarant
affirme le lien ego → alter avec le poids donné.

Les libellés sont des chaînes opaques, indexées dans l'ordre de première
apparition (ou dans l'ordre d'un fichier roster `label`). Les déclarants
étant des membres du réseau, nœuds et déclarants partagent les mêmes
indices (M = N). Un tenseur est produit par type de lien.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.errors import (
    InvalidConfigurationError,
    MalformedHeaderError,
    MalformedRowError,
    NegativeWeightError,
    SelfLoopError,
    UnknownMaskViolationError,
)
from src.reports import MaskRule, ReporterMask, ReportTensor

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

REPORT_COLUMNS = ["ego", "alter", "reporter", "tie_type", "weight"]
ROSTER_COLUMNS = ["label"]
_FIRST_LINE = 2   # numéro de ligne de la première donnée (après l'en-tête)


@dataclass(frozen=True)
class IngestedReports:
    layers: Dict[str, ReportTensor]
    labels: List[str]
    path: Optional[Path] = None
    n_rows: int = 0
    label_index: Dict[str, int] = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def tie_types(self) -> List[str]:
        return list(self.layers)

    def label_map(self) -> pd.DataFrame:
        return pd.DataFrame({"index": np.arange(len(self.labels)), "label": self.labels})


def _read_csv(path: Path, expected: Sequence[str], optional_last: bool) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise MalformedHeaderError("Fichier vide, en-tête manquant", path=str(path)) from None
    except pd.errors.ParserError as e:
        raise MalformedRowError(f"Ligne illisible: {e}", path=str(path)) from None
    except UnicodeDecodeError:
        raise MalformedRowError("Le fichier n'est pas en UTF-8", path=str(path)) from None
    df = df.fillna("")

    columns = list(df.columns)
    accepted = [list(expected)]
    if optional_last:
        accepted.append(list(expected[:-1]))
    if columns not in accepted:
        raise MalformedHeaderError(
            f"En-tête {','.join(columns)!r} au lieu de {','.join(expected)!r}", path=str(path))
    return df


def read_roster(path: PathLike) -> List[str]:
    """Liste ordonnée des libellés (colonne unique `label`), doublons interdits"""
    path = Path(path)
    df = _read_csv(path, ROSTER_COLUMNS, optional_last=False)
    labels = df["label"].tolist()
    seen = set()
    for k, label in enumerate(labels):
        if label == "" or label in seen:
            raise MalformedRowError(f"Libellé vide ou répété: {label!r}", path=str(path),
                                    row=k + _FIRST_LINE)
        seen.add(label)
    return labels


def _parse_weights(df: pd.DataFrame, path: Path) -> np.ndarray:
    if "weight" not in df.columns:
        return np.ones(len(df), dtype=np.int64)
    raw = df["weight"].str.strip()
    values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values) | (np.mod(np.abs(np.nan_to_num(values)), 1) != 0))
    if bad.size:
        k = int(bad[0])
        raise MalformedRowError(f"Poids non entier: {df['weight'].iloc[k]!r}",
                                path=str(path), row=k + _FIRST_LINE)
    negative = np.flatnonzero(values < 0)
    if negative.size:
        k = int(negative[0])
        raise NegativeWeightError(f"Poids négatif: {int(values[k])}", path=str(path),
                                  row=k + _FIRST_LINE)
    return values.astype(np.int64)


def ingest_reports(path: PathLike, roster: Optional[PathLike] = None,
                   mask_rule: Union[MaskRule, str] = MaskRule.SELF_DYADS) -> IngestedReports:
    """
    Lit un fichier de déclarations et renvoie un ReportTensor par type de lien.

    Erreurs (avec chemin et numéro de ligne): MalformedHeaderError,
    MalformedRowError, NegativeWeightError, SelfLoopError, et
    UnknownMaskViolationError si, sous self_dyads, le déclarant n'est ni
    l'ego ni l'alter.
    """
    path = Path(path)
    mask_rule = MaskRule(mask_rule)
    if mask_rule is MaskRule.CUSTOM:
        raise InvalidConfigurationError("Un masque personnalisé ne peut pas être lu depuis un CSV de déclarations")
    df = _read_csv(path, REPORT_COLUMNS, optional_last=True)

    for column in REPORT_COLUMNS[:4]:
        empty = np.flatnonzero(df[column].str.strip().to_numpy() == "")
        if empty.size:
            raise MalformedRowError(f"Champ {column} vide", path=str(path),
                                    row=int(empty[0]) + _FIRST_LINE)
    weights = _parse_weights(df, path)

    labels: List[str] = read_roster(roster) if roster is not None else []
    index = {label: k for k, label in enumerate(labels)}
    n_roster = len(labels)
    # ordre de première apparition, ligne par ligne (ego, alter, reporter)
    interleaved = df[["ego", "alter", "reporter"]].to_numpy().ravel()
    for label in pd.unique(interleaved):
        if label not in index:
            index[label] = len(labels)
            labels.append(label)
    if roster is not None and len(labels) > n_roster:
        logger.info("%d libellés absents du roster ajoutés à la fin", len(labels) - n_roster)
    if not labels:
        raise MalformedRowError("Aucune déclaration et aucun roster: réseau vide", path=str(path))

    ego = df["ego"].map(index).to_numpy(dtype=np.int64)
    alter = df["alter"].map(index).to_numpy(dtype=np.int64)
    reporter = df["reporter"].map(index).to_numpy(dtype=np.int64)

    loops = np.flatnonzero(ego == alter)
    if loops.size:
        k = int(loops[0])
        raise SelfLoopError(f"Boucle sur {df['ego'].iloc[k]!r}", path=str(path), row=k + _FIRST_LINE)
    mask = ReporterMask(mask_rule)
    n = len(labels)
    outside = np.flatnonzero(~mask.contains(ego, alter, reporter, n, n))
    if outside.size:
        k = int(outside[0])
        raise UnknownMaskViolationError(
            f"Le déclarant {df['reporter'].iloc[k]!r} n'est ni l'ego ni l'alter", path=str(path),
            row=k + _FIRST_LINE)

    layers: Dict[str, ReportTensor] = {}
    tie_types = df["tie_type"].to_numpy()
    for tie_type in pd.unique(tie_types):
        sel = (tie_types == tie_type) & (weights > 0)
        layers[str(tie_type)] = ReportTensor(n, n, mask, ego[sel], alter[sel], reporter[sel], weights[sel])
        logger.debug("Couche %s: %d déclarations", tie_type, int(sel.sum()))

    logger.info("%s: %d lignes, %d nœuds, %d types de lien", path.name, len(df), n, len(layers))
    return IngestedReports(layers=layers, labels=labels, path=path, n_rows=len(df), label_index=index)
