"""
Balayages de benchmark
======================
Grilles scénario × θ_ratio × λ_diff × η × graines sur données synthétiques.
Chaque cellule ajuste le modèle avec et sans mutualité, calcule l'union et
l'intersection, et produit un tableau long:

    scenario, theta_ratio, lambda_diff, eta_planted, seed, method, metric, value
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from src.baselines import intersection_baseline, union_baseline
from src.errors import UnsupportedKError
from src.inference import FitConfig, fit
from src.metrics import eta_recovery_report, f1_score, mse_theta
from src.network_stats import density, reciprocity
from src.priors import HyperParams
from src.synthetic import Scenario, SynthConfig, generate_ground_truth, generate_reports, \
    planted_reciprocity_target
from src.thresholds import threshold_sweep

logger = logging.getLogger(__name__)

TIDY_COLUMNS = ["scenario", "theta_ratio", "lambda_diff", "eta_planted", "seed", "method", "metric", "value"]


@dataclass(frozen=True)
class BenchmarkGrid:
    scenarios: Sequence[str] = ("over_reporters", "under_reporters")
    theta_ratios: Sequence[float] = (0.1, 0.2, 0.3, 0.4, 0.5)
    lambda_diffs: Sequence[Optional[float]] = (None,)
    etas: Sequence[float] = (0.2, 0.5)
    seeds: int = 10
    reciprocity_target: Optional[float] = None
    mutuality_variants: Sequence[bool] = (True, False)
    eta_sweep: Sequence[float] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
    eta_sweep_seeds: int = 5

    @classmethod
    def from_mapping(cls, section: Mapping) -> "BenchmarkGrid":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in section.items()})

    def cells(self, base: SynthConfig) -> List[SynthConfig]:
        out = []
        for scenario, ratio, diff, eta, seed in product(
                self.scenarios, self.theta_ratios, self.lambda_diffs, self.etas, range(self.seeds)):
            out.append(replace(base, scenario=Scenario.parse(scenario), theta_ratio=float(ratio),
                               lambda_diff=diff, eta_planted=float(eta), seed=base.seed + seed))
        return out


def simulate(cfg: SynthConfig, reciprocity_target: Optional[float] = None, tolerance: float = 0.02):
    """Réseau planté puis déclarations, graine des déclarations = graine du réseau"""
    if reciprocity_target is None:
        gt = generate_ground_truth(cfg)
    else:
        gt = planted_reciprocity_target(cfg, reciprocity_target, tolerance)
    return gt, generate_reports(gt, cfg.mask(), cfg.seed, n_reporters=cfg.n_reporters)


def _method_rows(network, truth) -> Dict[str, float]:
    return {"f1": f1_score(network, truth), "reciprocity": reciprocity(network),
            "density": density(network)}


def evaluate_cell(cfg: SynthConfig, fit_config: FitConfig, priors: HyperParams,
                  mutuality_variants: Sequence[bool] = (True, False),
                  reciprocity_target: Optional[float] = None) -> List[Dict]:
    if fit_config.n_levels != 2:
        raise UnsupportedKError(f"Le benchmark compare des réseaux binaires (K=2, reçu {fit_config.n_levels})")
    gt, X = simulate(cfg, reciprocity_target)
    key = {"scenario": cfg.scenario.value, "theta_ratio": cfg.theta_ratio,
           "lambda_diff": cfg.resolved_lambda_diff, "eta_planted": cfg.eta_planted, "seed": cfg.seed}
    rows = []

    def add(method: str, metrics: Dict[str, float]):
        for metric, value in metrics.items():
            rows.append({**key, "method": method, "metric": metric, "value": float(value)})

    add("truth", {"reciprocity": reciprocity(gt.y), "density": density(gt.y)})
    add("union", _method_rows(union_baseline(X), gt.y))
    add("intersection", _method_rows(intersection_baseline(X), gt.y))

    for mutuality in mutuality_variants:
        method = "posterior" if mutuality else "posterior_no_mutuality"
        result = fit(X, priors, replace(fit_config, mutuality=mutuality, seed=cfg.seed))
        metrics = _method_rows(result.point_network, gt.y)
        metrics.update({"mse_theta": mse_theta(result.theta_est, gt.theta),
                        "eta_est": result.eta_est, "threshold": result.threshold,
                        "converged": float(result.converged)})
        if mutuality:
            metrics["best_threshold"] = threshold_sweep(result.state, gt.y, prior=priors).best_threshold
        add(method, metrics)
    return rows


def _evaluate_star(args):
    return evaluate_cell(*args)


def run_benchmark(grid: BenchmarkGrid, base: SynthConfig, fit_config: FitConfig,
                  priors: HyperParams, workers: int = 1,
                  progress: Optional[Callable[[int, int], None]] = None) -> pd.DataFrame:
    """Tableau long de toutes les cellules; l'ordre des lignes ne dépend pas de workers"""
    cells = grid.cells(base)
    jobs = [(cfg, fit_config, priors, tuple(grid.mutuality_variants), grid.reciprocity_target)
            for cfg in cells]
    logger.info("Benchmark: %d cellules, %d processus", len(jobs), workers)
    rows: List[Dict] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for done, cell_rows in enumerate(pool.map(_evaluate_star, jobs), start=1):
                rows.extend(cell_rows)
                if progress:
                    progress(done, len(jobs))
    else:
        for done, job in enumerate(jobs, start=1):
            rows.extend(_evaluate_star(job))
            if progress:
                progress(done, len(jobs))
    return pd.DataFrame(rows, columns=TIDY_COLUMNS)


def run_eta_sweep(grid: BenchmarkGrid, base: SynthConfig, fit_config: FitConfig,
                  priors: HyperParams,
                  progress: Optional[Callable[[int, int], None]] = None) -> pd.DataFrame:
    """η planté contre η estimé (scénario gamma_theta), une ligne par graine"""
    rows = []
    points = list(product(grid.eta_sweep, range(grid.eta_sweep_seeds)))
    for done, (eta, seed) in enumerate(points, start=1):
        cfg = replace(base, scenario=Scenario.GAMMA_THETA, eta_planted=float(eta), seed=base.seed + seed)
        gt, X = simulate(cfg)
        result = fit(X, priors, replace(fit_config, seed=cfg.seed))
        rows.append({"eta_planted": float(eta), "seed": cfg.seed, "eta_est": result.eta_est,
                     "converged": result.converged})
        if progress:
            progress(done, len(points))
    return pd.DataFrame(rows)


def summarize_benchmark(table: pd.DataFrame) -> pd.DataFrame:
    """Moyenne et écart-type entre graines, par cellule, méthode et métrique"""
    keys = [c for c in TIDY_COLUMNS if c not in ("seed", "value")]
    if table.empty:
        return pd.DataFrame(columns=keys + ["mean", "std", "n"])
    grouped = table.groupby(keys, sort=True, dropna=False)["value"]
    return grouped.agg(["mean", "std", "count"]).rename(columns={"count": "n"}).reset_index()


def eta_recovery(sweep: pd.DataFrame):
    return eta_recovery_report(sweep["eta_planted"].to_numpy(), sweep["eta_est"].to_numpy())


def win_rate(table: pd.DataFrame, metric: str, method: str, rivals: Sequence[str],
             margin: float = 0.0, target: Optional[float] = None) -> float:
    """
    Part des (cellule, graine) où `method` bat toutes les `rivals`:
    score ≥ max(rivaux) − margin, ou, si target est donné,
    |score − target| < min(|rival − target|).
    """
    keys = ["scenario", "theta_ratio", "lambda_diff", "eta_planted", "seed"]
    subset = table[table["metric"] == metric]
    if subset.empty:
        return float("nan")
    wide = subset.pivot_table(index=keys, columns="method", values="value")
    if target is None:
        wins = wide[method] >= wide[list(rivals)].max(axis=1) - margin
    else:
        wins = (wide[method] - target).abs() < (wide[list(rivals)] - target).abs().min(axis=1)
    return float(np.mean(wins.to_numpy()))
