#!/usr/bin/env python3
"""
Benchmarks synthétiques:

    reciprocity  réciprocité plantée 0.2 (scénario gamma_theta, λ_diff = 1, η ∈ {0.2, 0.5}):
                 l'estimation ponctuelle doit être plus proche de 0.2 que l'union
                 et l'intersection dans au moins 80 % des graines
    f1           scénarios over/under_reporters, θ_ratio ∈ {0.3, 0.4, 0.5}:
                 F1 ≥ max(union, intersection) − 0.02 dans au moins 80 % des cellules
    eta          η planté ∈ {0, 0.1, …, 0.8}: corrélation de Pearson ≥ 0.9
"""

import argparse
import sys
import time
from pathlib import Path

from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

from src.exports import write_csv
from src.experiments import (BenchmarkGrid, eta_recovery, run_benchmark, run_eta_sweep,
                             summarize_benchmark, win_rate)
from src.run_config import RunConfig, load_config

console = Console()

RIVALS = ["union", "intersection"]
MIN_WIN_RATE = 0.8
MIN_CORRELATION = 0.9


def _progress():
    return Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                    BarColumn(), TextColumn("{task.completed}/{task.total}"), console=console)


def _run(grid, cfg: RunConfig, label: str):
    with _progress() as progress:
        task = progress.add_task(label, total=None)
        return run_benchmark(grid, cfg.synth, cfg.fit, cfg.priors, cfg.workers,
                             progress=lambda done, total: progress.update(task, completed=done, total=total))


def check_reciprocity(cfg: RunConfig, out: Path, seeds: int) -> bool:
    grid = BenchmarkGrid(scenarios=["gamma_theta"], theta_ratios=[0.0], lambda_diffs=[1.0],
                         etas=[0.2, 0.5], seeds=seeds, reciprocity_target=0.2,
                         mutuality_variants=[True])
    table = _run(grid, cfg, "Réciprocité plantée...")
    write_csv(table, out / "reciprocity_benchmark.csv")
    write_csv(summarize_benchmark(table), out / "reciprocity_summary.csv")

    result = Table(title="🔁 Récupération de la réciprocité (cible 0.2)")
    result.add_column("η planté", justify="right")
    result.add_column("Victoires", justify="right")
    rates = []
    for eta in grid.etas:
        rate = win_rate(table[table["eta_planted"] == eta], "reciprocity", "posterior", RIVALS, target=0.2)
        rates.append(rate)
        result.add_row(f"{eta:.1f}", f"{rate:.0%}")
    overall = win_rate(table, "reciprocity", "posterior", RIVALS, target=0.2)
    result.add_row("total", f"{overall:.0%}")
    console.print(result)
    return overall >= MIN_WIN_RATE


def check_f1(cfg: RunConfig, out: Path, seeds: int) -> bool:
    grid = BenchmarkGrid(scenarios=["over_reporters", "under_reporters"], theta_ratios=[0.3, 0.4, 0.5],
                         lambda_diffs=[None], etas=tuple(cfg.benchmark.get("etas", (0.2, 0.5))),
                         seeds=seeds, mutuality_variants=[True])
    table = _run(grid, cfg, "F1 avec déclarants peu fiables...")
    write_csv(table, out / "f1_benchmark.csv")
    summary = summarize_benchmark(table)
    write_csv(summary, out / "f1_summary.csv")

    result = Table(title="🎯 F1 contre union et intersection")
    for column in ("scénario", "θ_ratio", "posterior", "union", "intersection"):
        result.add_column(column, justify="right")
    f1 = summary[summary["metric"] == "f1"]
    for (scenario, ratio), group in f1.groupby(["scenario", "theta_ratio"]):
        means = group.groupby("method")["mean"].mean()
        result.add_row(scenario, f"{ratio:.1f}", *(f"{means.get(m, float('nan')):.3f}"
                                                   for m in ("posterior", "union", "intersection")))
    console.print(result)
    overall = win_rate(table, "f1", "posterior", RIVALS, margin=0.02)
    console.print(f"Victoires (marge 0.02): [bold]{overall:.0%}[/bold]")
    return overall >= MIN_WIN_RATE


def check_eta(cfg: RunConfig, out: Path, seeds: int) -> bool:
    grid = BenchmarkGrid(eta_sweep=tuple(cfg.benchmark.get("eta_sweep")), eta_sweep_seeds=seeds)
    with _progress() as progress:
        task = progress.add_task("Balayage de η...", total=None)
        sweep = run_eta_sweep(grid, cfg.synth, cfg.fit, cfg.priors,
                              progress=lambda done, total: progress.update(task, completed=done, total=total))
    write_csv(sweep, out / "eta_sweep.csv")
    report = eta_recovery(sweep)
    write_csv(report.table, out / "eta_recovery.csv")

    result = Table(title="🤝 Récupération de la mutualité")
    result.add_column("η planté", justify="right")
    result.add_column("η estimé (moyenne)", justify="right")
    for eta, group in sweep.groupby("eta_planted"):
        result.add_row(f"{eta:.1f}", f"{group['eta_est'].mean():.3f}")
    console.print(result)
    console.print(f"Corrélation: [bold]{report.correlation:.3f}[/bold]   "
                  f"pente {report.slope:.3f}, ordonnée {report.intercept:.3f}")
    return report.correlation >= MIN_CORRELATION


CHECKS = {"reciprocity": (check_reciprocity, 20), "f1": (check_f1, 10), "eta": (check_eta, 5)}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("checks", nargs="*", help=f"Parmi {', '.join(CHECKS)} (tous par défaut)")
    parser.add_argument("--config", type=Path, help="Fichier YAML fusionné sur config/config.yaml")
    parser.add_argument("--seeds", type=int, help="Graines par cellule (défaut propre à chaque test)")
    parser.add_argument("--workers", type=int)
    parser.add_argument("-o", "--output", type=Path, default=ROOT / "exports" / "acceptance")
    args = parser.parse_args()
    unknown = [name for name in args.checks if name not in CHECKS]
    if unknown:
        parser.error(f"Test inconnu: {', '.join(unknown)}")

    cfg = RunConfig.from_mapping(load_config(args.config, overrides={"batch.workers": args.workers}))
    failed = []
    for name in args.checks or list(CHECKS):
        check, default_seeds = CHECKS[name]
        start = time.perf_counter()
        console.rule(f"[bold]{name}")
        passed = check(cfg, args.output, args.seeds or default_seeds)
        console.print(f"{'[green]✅ PASSED' if passed else '[red]❌ FAILED'}[/] "
                      f"({time.perf_counter() - start:.0f} s)")
        if not passed:
            failed.append(name)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
