#!/usr/bin/env python3
"""
Cohérence du générateur: pour chaque cellule (Y_ij, Y_ji) et η ∈ {0, 0.3, 0.6},
la moyenne Monte-Carlo de X_ijm doit rester à moins de 3σ de
θ (λ_Yij + η λ_Yji) / (1 − η²), pour les deux directions du tirage en deux temps.
"""

import sys
import time
from itertools import product
from pathlib import Path

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

from src.exports import write_csv
from src.synthetic import draw_report_pair, marginal_mean

console = Console()

DRAWS = 100_000
THETA = 1.3
LAMBDAS = (0.01, 1.0)
ETAS = (0.0, 0.3, 0.6)


def main() -> int:
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    rows = []
    for eta, (y_first, y_second) in product(ETAS, product((0, 1), repeat=2)):
        lam_first, lam_second = LAMBDAS[y_first], LAMBDAS[y_second]
        first, second = draw_report_pair(rng, THETA, lam_first, lam_second, eta, size=DRAWS)
        for direction, sample, expected in (
                ("first", first, marginal_mean(THETA, lam_first, lam_second, eta)),
                ("second", second, marginal_mean(THETA, lam_second, lam_first, eta))):
            sigma = sample.std(ddof=1) / np.sqrt(DRAWS)
            gap = abs(sample.mean() - float(expected))
            rows.append({"eta": eta, "y_ij": y_first, "y_ji": y_second, "direction": direction,
                         "expected": float(expected), "observed": float(sample.mean()),
                         "sigma": float(sigma), "within_3_sigma": gap <= 3 * max(sigma, 1e-12)})

    table_df = pd.DataFrame(rows)
    write_csv(table_df, ROOT / "exports" / "acceptance" / "generator_means.csv")

    table = Table(title="🧪 Moyennes marginales du générateur")
    for column in ("η", "Y_ij", "Y_ji", "direction", "attendu", "observé", "3σ"):
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(f"{row['eta']:.1f}", str(row["y_ij"]), str(row["y_ji"]), row["direction"],
                      f"{row['expected']:.4f}", f"{row['observed']:.4f}",
                      "✅" if row["within_3_sigma"] else "❌")
    console.print(table)
    passed = bool(table_df["within_3_sigma"].all())
    console.print(f"Durée: {time.perf_counter() - start:.1f} s")
    console.print("[green]✅ PASSED[/green]" if passed else "[red]❌ FAILED[/red]")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
