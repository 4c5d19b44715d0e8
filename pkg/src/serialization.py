"""
Sérialisation
=============
Conversion en dictionnaires JSON des objets du modèle (déclarations, masque,
hyperparamètres, état variationnel, vérité terrain, résultat d'ajustement)
et cache binaire .npz optionnel.

Chaque dictionnaire porte une clé "__type__"; les tableaux numpy sont écrits
avec leur dtype, les réseaux creux en triplets (i, j, valeur).
"""

import json
import logging
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from scipy import sparse

from src.errors import InvalidConfigurationError
from src.priors import HyperParams
from src.reports import MaskRule, ReporterMask, ReportTensor
from src.state import FitResult, GroundTruth, VariationalState

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# --- Valeurs élémentaires ---

def _encode(value, arrays: Optional[Dict[str, np.ndarray]] = None):
    if isinstance(value, np.ndarray):
        if arrays is not None:
            key = f"a{len(arrays)}"
            arrays[key] = value
            return {"__array__": key}
        return {"__ndarray__": value.tolist(), "dtype": str(value.dtype), "shape": list(value.shape)}
    if sparse.issparse(value):
        coo = sparse.coo_matrix(value)
        return {"__csr__": {"row": _encode(coo.row.astype(np.int64), arrays),
                            "col": _encode(coo.col.astype(np.int64), arrays),
                            "data": _encode(coo.data, arrays),
                            "shape": list(coo.shape)}}
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, MaskRule):
        return value.value
    if isinstance(value, tuple):
        return [_encode(v, arrays) for v in value]
    return value


def _decode(value, arrays: Optional[Dict[str, np.ndarray]] = None):
    if isinstance(value, dict):
        if "__array__" in value:
            return np.array(arrays[value["__array__"]])
        if "__ndarray__" in value:
            return np.array(value["__ndarray__"], dtype=value["dtype"]).reshape(value["shape"])
        if "__csr__" in value:
            part = value["__csr__"]
            return sparse.csr_matrix(
                (_decode(part["data"], arrays), (_decode(part["row"], arrays), _decode(part["col"], arrays))),
                shape=tuple(part["shape"]))
        if "__type__" in value:
            return from_dict(value, arrays)
    return value


# --- Objets ---

def _mask_to_dict(mask: ReporterMask, arrays) -> Dict:
    return {"__type__": "ReporterMask", "rule": mask.rule.value,
            "custom_ego": _encode(mask.custom_ego, arrays),
            "custom_alter": _encode(mask.custom_alter, arrays),
            "custom_reporter": _encode(mask.custom_reporter, arrays),
            "n_nodes": mask.n_nodes, "n_reporters": mask.n_reporters}


def _tensor_to_dict(X: ReportTensor, arrays) -> Dict:
    return {"__type__": "ReportTensor", "n_nodes": X.n_nodes, "n_reporters": X.n_reporters,
            "mask": _mask_to_dict(X.mask, arrays),
            "ego": _encode(X.ego, arrays), "alter": _encode(X.alter, arrays),
            "reporter": _encode(X.reporter, arrays), "count": _encode(X.count, arrays)}


def _hyper_to_dict(h: HyperParams, arrays) -> Dict:
    out = {"__type__": "HyperParams"}
    for name in ("alpha", "beta", "a", "b", "p"):
        value = getattr(h, name)
        if value is None or np.ndim(value) == 0:
            out[name] = None if value is None else float(value)
        elif isinstance(value, np.ndarray):
            out[name] = _encode(value.astype(np.float64), arrays)
        else:
            out[name] = [float(v) for v in value]
    out["c"], out["d"] = float(h.c), float(h.d)
    out["learn_p"] = None if h.learn_p is None else bool(h.learn_p)
    out["p_overrides"] = [[int(i), int(j), [float(v) for v in row]]
                          for (i, j), row in sorted(h.p_overrides.items())]
    return out


def _dataclass_to_dict(obj, type_name: str, arrays) -> Dict:
    out = {"__type__": type_name}
    for f in fields(obj):
        value = getattr(obj, f.name)
        out[f.name] = to_dict(value, arrays) if _is_model_object(value) else _encode(value, arrays)
    return out


def _is_model_object(value) -> bool:
    return isinstance(value, (ReporterMask, ReportTensor, HyperParams, VariationalState,
                              GroundTruth, FitResult))


def to_dict(obj, arrays: Optional[Dict[str, np.ndarray]] = None) -> Dict[str, Any]:
    """Dictionnaire JSON-compatible (ou, avec arrays, références vers un cache .npz)"""
    if isinstance(obj, ReporterMask):
        return _mask_to_dict(obj, arrays)
    if isinstance(obj, ReportTensor):
        return _tensor_to_dict(obj, arrays)
    if isinstance(obj, HyperParams):
        return _hyper_to_dict(obj, arrays)
    if isinstance(obj, VariationalState):
        return _dataclass_to_dict(obj, "VariationalState", arrays)
    if isinstance(obj, GroundTruth):
        return _dataclass_to_dict(obj, "GroundTruth", arrays)
    if isinstance(obj, FitResult):
        return _dataclass_to_dict(obj, "FitResult", arrays)
    raise InvalidConfigurationError(f"Type non sérialisable: {type(obj).__name__}")


def from_dict(data: Dict[str, Any], arrays: Optional[Dict[str, np.ndarray]] = None):
    kind = data.get("__type__")
    values = {k: _decode(v, arrays) for k, v in data.items() if k != "__type__"}

    if kind == "ReporterMask":
        return ReporterMask(**values)
    if kind == "ReportTensor":
        return ReportTensor(**values)
    if kind == "HyperParams":
        overrides = {(int(i), int(j)): tuple(row) for i, j, row in values.pop("p_overrides")}
        return HyperParams(p_overrides=overrides, **values)
    if kind == "VariationalState":
        return VariationalState(**values)
    if kind == "GroundTruth":
        return GroundTruth(**values)
    if kind == "FitResult":
        values["elbo_trace"] = tuple(values["elbo_trace"])
        values["elbo_iterations"] = tuple(values["elbo_iterations"])
        values["monotonicity_violations"] = tuple(values["monotonicity_violations"])
        return FitResult(**values)
    raise InvalidConfigurationError(f"Type inconnu dans le fichier: {kind!r}")


# --- Fichiers ---

def save_json(obj, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_dict(obj), f, ensure_ascii=False, indent=2)
    logger.debug("Écrit %s", path)
    return path


def load_json(path: PathLike):
    with open(path, "r", encoding="utf-8") as f:
        return from_dict(json.load(f))


def save_npz(obj, path: PathLike) -> Path:
    """Cache binaire: structure JSON + tableaux bruts dans une même archive"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: Dict[str, np.ndarray] = {}
    header = json.dumps(to_dict(obj, arrays), ensure_ascii=False)
    np.savez_compressed(path, __header__=np.array(header), **arrays)
    return path


def load_npz(path: PathLike):
    with np.load(path, allow_pickle=False) as archive:
        arrays = {key: archive[key] for key in archive.files if key != "__header__"}
        header = json.loads(str(archive["__header__"]))
    return from_dict(header, arrays)
