#!/usr/bin/env python3
"""
Monotonie de l'ELBO sur 20 instances synthétiques (scénario gamma_theta, N = M = 100).
Chaque pas doit vérifier ΔELBO ≥ −1e-3·|ELBO| et au moins 95 % des pas
doivent être non décroissants.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

from src.exports import write_csv
from src.inference import FitConfig, fit
from src.priors import HyperParams
from src.synthetic import Scenario, SynthConfig, generate_ground_truth, generate_reports

console = Console()

TOLERANCE = 1e-3
MIN_SHARE = 0.95


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--nodes", type=int, default=100)
    parser.add_argument("-o", "--output", type=Path, default=ROOT / "exports" / "acceptance")
    args = parser.parse_args()

    start = time.perf_counter()
    rows = []
    for seed in range(args.seeds):
        cfg = SynthConfig(n_nodes=args.nodes, n_reporters=args.nodes, scenario=Scenario.GAMMA_THETA,
                          lambda_diff=1.0, seed=seed)
        gt = generate_ground_truth(cfg)
        X = generate_reports(gt, cfg.mask(), seed)
        result = fit(X, HyperParams(), FitConfig(seed=seed, monotonicity_tol=TOLERANCE))
        trace = np.asarray(result.elbo_trace)
        for step, (before, after) in enumerate(zip(trace[:-1], trace[1:]), start=1):
            rows.append({"seed": seed, "step": step, "elbo_before": before, "elbo_after": after,
                         "delta": after - before,
                         "within_tolerance": after - before >= -TOLERANCE * abs(before)})

    steps = pd.DataFrame(rows)
    write_csv(steps, args.output / "elbo_steps.csv")
    share = float((steps["delta"] >= 0).mean()) if len(steps) else 1.0
    all_within = bool(steps["within_tolerance"].all()) if len(steps) else True
    passed = all_within and share >= MIN_SHARE

    table = Table(title="📈 Monotonie de l'ELBO")
    table.add_column("Mesure")
    table.add_column("Valeur", justify="right")
    table.add_row("Instances", str(args.seeds))
    table.add_row("Pas d'ELBO", str(len(steps)))
    table.add_row("Pas non décroissants", f"{share:.1%}")
    table.add_row("Tous dans la tolérance", "oui" if all_within else "non")
    table.add_row("Durée", f"{time.perf_counter() - start:.1f} s")
    console.print(table)
    console.print("[green]✅ PASSED[/green]" if passed else "[red]❌ FAILED[/red]")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
