#!/usr/bin/env python3
"""
Déterminisme et passage à l'échelle:

1. deux ajustements avec la même graine et la même configuration produisent
   des artefacts identiques octet par octet (hors manifest.json);
2. un balayage CAVI complet sur un réseau creux N = M = 10 000 (degré moyen 10),
   avec la mémoire de pointe rapportée au nombre de déclarations stockées.
"""

import argparse
import sys
import tempfile
import time
import tracemalloc
from pathlib import Path

from rich.console import Console
from rich.table import Table

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

from src.inference import FitConfig, fit
from src.main import main as cli
from src.priors import HyperParams
from src.synthetic import SynthConfig, generate_ground_truth, generate_reports

console = Console()

SWEEP_BUDGET_S = 60.0


def check_determinism(workdir: Path) -> bool:
    synth = workdir / "synth"
    cli(["synth", "-o", str(synth), "--nodes", "200", "--reporters", "200", "--seed", "3"])
    runs = []
    for name in ("a", "b"):
        out = workdir / name
        cli(["fit", "--reports", str(synth / "reports.csv"), "--roster", str(synth / "nodes.csv"),
             "-o", str(out), "--seed", "5", "--threads", "1"])
        runs.append(out)
    files = sorted(p.relative_to(runs[0]) for p in runs[0].rglob("*")
                   if p.is_file() and p.name != "manifest.json")
    different = [str(rel) for rel in files if (runs[0] / rel).read_bytes() != (runs[1] / rel).read_bytes()]
    for rel in different:
        console.print(f"[red]  différent: {rel}[/red]")
    console.print(f"{len(files)} artefacts comparés, {len(different)} différents")
    return bool(files) and not different


def check_scale(n_nodes: int, threads: int) -> bool:
    cfg = SynthConfig(n_nodes=n_nodes, n_reporters=n_nodes, avg_degree=10.0, seed=0)
    start = time.perf_counter()
    gt = generate_ground_truth(cfg)
    X = generate_reports(gt, cfg.mask(), seed=0)
    console.print(f"Génération: {gt.y.nnz} liens, {X.nnz} déclarations "
                  f"({time.perf_counter() - start:.1f} s)")

    tracemalloc.start()
    start = time.perf_counter()
    result = fit(X, HyperParams(), FitConfig(seed=0, max_iterations=1, n_threads=threads))
    elapsed = time.perf_counter() - start
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()

    table = Table(title=f"📏 Un balayage, N = M = {n_nodes}")
    table.add_column("Mesure")
    table.add_column("Valeur", justify="right")
    table.add_row("Déclarations stockées", f"{X.nnz:,}")
    table.add_row("Paires explicites", f"{result.state.n_explicit:,}")
    table.add_row("Durée du balayage", f"{elapsed:.1f} s")
    table.add_row("Mémoire de pointe", f"{peak / 2**20:.1f} Mio")
    table.add_row("Octets par déclaration", f"{peak / max(X.nnz, 1):.0f}")
    console.print(table)
    return elapsed < SWEEP_BUDGET_S


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--nodes", type=int, default=10_000)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        console.rule("[bold]Déterminisme")
        deterministic = check_determinism(Path(tmp))
    console.rule("[bold]Passage à l'échelle")
    fast = check_scale(args.nodes, args.threads)
    for name, ok in (("déterminisme", deterministic), ("échelle", fast)):
        console.print(f"{name}: {'[green]✅ PASSED' if ok else '[red]❌ FAILED'}[/]")
    return 0 if deterministic and fast else 1


if __name__ == "__main__":
    sys.exit(main())
