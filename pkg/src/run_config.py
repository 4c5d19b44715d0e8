"""
Configuration d'exécution
=========================
Le fichier config/config.yaml livré avec le projet sert de schéma et de
valeurs par défaut. Un fichier utilisateur est fusionné par-dessus (clés
inconnues refusées), puis les options de la ligne de commande s'appliquent.
Les variables d'environnement ne sont jamais lues.
"""

import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import yaml

from src.errors import InvalidConfigurationError
from src.inference import FitConfig
from src.priors import HyperParams
from src.reports import MaskRule
from src.synthetic import SynthConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent / "config" / "config.yaml"

# Sections qui changent le résultat d'un ajustement
SEMANTIC_SECTIONS = ("inference", "priors", "two_step", "point_estimate", "summary")
SEMANTIC_DATA_KEYS = ("mask_rule", "tie_types")

_SYNTH_ONLY_KEYS = ("report_seed", "reciprocity_target", "reciprocity_tolerance")


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise InvalidConfigurationError(f"YAML invalide: {e}", path=str(path)) from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise InvalidConfigurationError("La configuration doit être un dictionnaire", path=str(path))
    return data


def deep_merge(base: Mapping[str, Any], update: Mapping[str, Any], where: str = "") -> Dict[str, Any]:
    """Fusionne update dans une copie de base; une clé absente de base est une erreur"""
    merged = copy.deepcopy(dict(base))
    for key, value in update.items():
        location = f"{where}.{key}" if where else str(key)
        if key not in merged:
            raise InvalidConfigurationError(f"Clé de configuration inconnue: {location}")
        if isinstance(merged[key], dict):
            if not isinstance(value, dict):
                raise InvalidConfigurationError(f"{location} doit être une section")
            merged[key] = deep_merge(merged[key], value, location)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def set_dotted(config: Dict[str, Any], dotted: str, value: Any) -> None:
    """Applique une option « section.clé » (les None sont ignorés)"""
    if value is None:
        return
    section, _, key = dotted.partition(".")
    if section not in config or key not in config[section]:
        raise InvalidConfigurationError(f"Clé de configuration inconnue: {dotted}")
    config[section][key] = value


def load_config(path: Optional[PathLike] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    defaults = _read_yaml(DEFAULT_CONFIG_PATH)
    config = defaults
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise InvalidConfigurationError("Fichier de configuration introuvable", path=str(path))
        try:
            config = deep_merge(defaults, _read_yaml(path))
        except InvalidConfigurationError as e:
            raise InvalidConfigurationError(e.message, path=str(path)) from None
    for dotted, value in (overrides or {}).items():
        set_dotted(config, dotted, value)
    return config


def config_hash(config: Mapping[str, Any]) -> str:
    """Empreinte SHA-256 des seules options qui changent le résultat"""
    semantic = {name: config.get(name) for name in SEMANTIC_SECTIONS}
    semantic["data"] = {k: config.get("data", {}).get(k) for k in SEMANTIC_DATA_KEYS}
    blob = json.dumps(semantic, sort_keys=True, ensure_ascii=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _optional_path(value) -> Optional[Path]:
    return Path(value) if value not in (None, "") else None


@dataclass(frozen=True)
class RunConfig:
    fit: FitConfig
    priors: HyperParams
    two_step: bool = False
    two_step_scale: float = 1.0
    reports: Optional[Path] = None
    roster: Optional[Path] = None
    mask_rule: MaskRule = MaskRule.SELF_DYADS
    tie_types: Optional[List[str]] = None
    output_dir: Path = Path("./exports/run")
    emit: Dict[str, bool] = field(default_factory=dict)
    directed_transitivity: bool = False
    synth: Optional[SynthConfig] = None
    report_seed: Optional[int] = None
    reciprocity_target: Optional[float] = None
    reciprocity_tolerance: float = 0.02
    benchmark: Dict[str, Any] = field(default_factory=dict)
    batch_dir: Optional[Path] = None
    batch_reports_name: str = "reports.csv"
    batch_roster_name: str = "nodes.csv"
    workers: int = 1
    log_level: str = "INFO"
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def emits(self, artifact: str) -> bool:
        return bool(self.emit.get(artifact, True))

    @classmethod
    def from_mapping(cls, config: Mapping[str, Any]) -> "RunConfig":
        try:
            inference = dict(config["inference"])
            fit = FitConfig(override_threshold=config["point_estimate"]["override_threshold"], **inference)
            priors = HyperParams(**config["priors"])

            synth_section = dict(config["synthetic"])
            synth_extras = {k: synth_section.pop(k) for k in _SYNTH_ONLY_KEYS}
            synth = SynthConfig(**synth_section)
        except TypeError as e:
            raise InvalidConfigurationError(f"Configuration invalide: {e}") from None

        data, outputs, batch = config["data"], dict(config["outputs"]), config["batch"]
        output_dir = Path(outputs.pop("directory"))
        workers = int(batch["workers"])
        if workers < 1:
            raise InvalidConfigurationError(f"batch.workers doit être ≥ 1 (reçu {workers})")
        tie_types = data["tie_types"]
        if tie_types is not None and not isinstance(tie_types, list):
            tie_types = [str(tie_types)]

        return cls(
            fit=fit,
            priors=priors,
            two_step=bool(config["two_step"]["enabled"]),
            two_step_scale=float(config["two_step"]["scale"]),
            reports=_optional_path(data["reports"]),
            roster=_optional_path(data["roster"]),
            mask_rule=MaskRule(data["mask_rule"]),
            tie_types=tie_types,
            output_dir=output_dir,
            emit={k: bool(v) for k, v in outputs.items()},
            directed_transitivity=bool(config["summary"]["directed_transitivity"]),
            synth=synth,
            report_seed=synth_extras["report_seed"],
            reciprocity_target=synth_extras["reciprocity_target"],
            reciprocity_tolerance=float(synth_extras["reciprocity_tolerance"]),
            benchmark=dict(config["benchmark"]),
            batch_dir=_optional_path(batch["input_dir"]),
            batch_reports_name=str(batch["reports_name"]),
            batch_roster_name=str(batch["roster_name"]),
            workers=workers,
            log_level=str(config["logging"]["level"]).upper(),
            raw=copy.deepcopy(dict(config)),
        )
