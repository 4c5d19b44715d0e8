#!/usr/bin/env python3
"""
Reconstruction de réseaux latents
=================================
Point d'entrée en ligne de commande:

    fit    ajuste le modèle sur un fichier de déclarations (une couche par tie_type)
    synth  génère un réseau planté et ses déclarations
    eval   balayages de benchmark sur données synthétiques
    batch  un ajustement par village (sous-dossiers), résumé agrégé

Codes de sortie: 0 succès, 1 erreur, 2 au moins un ajustement sans convergence.
"""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

# Ajouter le répertoire parent au path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.baselines import intersection_baseline, layer_network, union_baseline
from src.diagnostics import diagnostics_overview, reliability_distances, reporter_diagnostics
from src.errors import InvalidConfigurationError, ReconstructionError
from src.experiments import BenchmarkGrid, eta_recovery, run_benchmark, run_eta_sweep, \
    summarize_benchmark
from src.exports import write_csv, write_fit_artifacts, write_json, write_manifest, \
    write_synthetic, summary_frame
from src.inference import fit, two_step_fit
from src.ingest import ingest_reports
from src.network_stats import aggregate_summaries, network_summary
from src.reports import MaskRule, ReportTensor, ReporterMask
from src.run_config import RunConfig, load_config
from src.serialization import save_npz
from src.synthetic import generate_ground_truth, generate_reports, planted_reciprocity_target

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

DEFAULT_LAYER = "all"

console = Console()
err_console = Console(stderr=True)
logger = logging.getLogger("src")


def setup_logging(level: str = "INFO"):
    """Journal rich sur stderr, une seule fois par processus"""
    root = logging.getLogger("src")
    root.setLevel(level.upper())
    if not any(isinstance(h, RichHandler) for h in root.handlers):
        root.addHandler(RichHandler(console=err_console, show_path=False, rich_tracebacks=False))
    root.propagate = False


# --- Ajustement ---

def _select_layers(ingested, cfg: RunConfig) -> Dict[str, ReportTensor]:
    layers = dict(ingested.layers)
    if cfg.tie_types:
        missing = [t for t in cfg.tie_types if t not in layers]
        if missing:
            raise InvalidConfigurationError(f"Types de lien absents du fichier: {', '.join(missing)}")
        layers = {t: layers[t] for t in cfg.tie_types}
    if not layers:
        n = ingested.n_nodes
        layers = {DEFAULT_LAYER: ReportTensor.empty(n, n, ReporterMask(cfg.mask_rule))}
    return layers


def _summary_rows(tie_type: str, X: ReportTensor, point_network, directed: bool) -> List[Dict]:
    networks = {"posterior": point_network, "union": union_baseline(X),
                "intersection": intersection_baseline(X)}
    if X.mask.rule is MaskRule.SELF_DYADS:
        networks["layer_ego"] = layer_network(X, "ego")
        networks["layer_alter"] = layer_network(X, "alter")
    rows = []
    for method, network in networks.items():
        if network is None:
            continue
        row = network_summary(network, directed_transitivity=directed).to_dict()
        rows.append({"tie_type": tie_type, "method": method, **row})
    return rows


def fit_reports(cfg: RunConfig, reports: Path, roster: Optional[Path],
                out_dir: Path) -> Tuple[int, List[Dict]]:
    """Ajuste chaque couche d'un fichier et écrit ses artefacts; renvoie (code, lignes de résumé)"""
    ingested = ingest_reports(reports, roster, cfg.mask_rule)
    layers = _select_layers(ingested, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)

    written = [write_csv(ingested.label_map(), out_dir / "labels.csv")]
    rows, thetas, code = [], {}, EXIT_OK
    for tie_type, X in layers.items():
        layer_dir = out_dir / tie_type
        logger.info("Couche %s: %d déclarations, N=%d", tie_type, X.nnz, X.n_nodes)
        if cfg.two_step:
            result = two_step_fit(X, cfg.priors, cfg.fit, scale=cfg.two_step_scale)
        else:
            result = fit(X, cfg.priors, cfg.fit)
        if not result.converged:
            code = EXIT_NOT_CONVERGED
        thetas[tie_type] = result.theta_est

        written += write_fit_artifacts(result, layer_dir, cfg.emit, ingested.labels, cfg.fit.block_pairs)
        if cfg.emits("diagnostics") and X.mask.rule is MaskRule.SELF_DYADS:
            table = reporter_diagnostics(X, result.theta_est)
            table.insert(1, "label", ingested.labels[:X.n_reporters])
            written.append(write_csv(table, layer_dir / "reporter_diagnostics.csv"))
            written.append(write_json(diagnostics_overview(table), layer_dir / "diagnostics.json"))
        if cfg.emits("npz_cache"):
            written.append(save_npz(result, layer_dir / "fit.npz"))
        rows += _summary_rows(tie_type, X, result.point_network, cfg.directed_transitivity)

    if cfg.emits("summary"):
        summary = summary_frame(rows)
        if not cfg.emits("baselines"):
            summary = summary[summary["method"] == "posterior"]
        written.append(write_csv(summary, out_dir / "summary.csv"))
    if len(thetas) > 1:
        distances = reliability_distances(thetas).reset_index().rename(columns={"index": "tie_type"})
        written.append(write_csv(distances, out_dir / "theta_wasserstein.csv"))

    inputs = [reports] + ([roster] if roster is not None else [])
    write_manifest(out_dir, cfg.fit.seed, cfg.hash, inputs, written,
                   extra={"exit_code": code, "tie_types": list(layers)})
    return code, rows


def display_summary(rows: List[Dict], title: str):
    table = Table(title=title)
    for column in ("tie_type", "method", "n_edges", "mean_degree", "reciprocity", "transitivity"):
        table.add_column(column, justify="right" if column not in ("tie_type", "method") else "left")
    for row in rows:
        table.add_row(str(row["tie_type"]), str(row["method"]), str(row["n_edges"]),
                      f"{row['mean_degree']:.2f}", f"{row['reciprocity']:.3f}",
                      f"{row['transitivity']:.3f}")
    console.print(table)


def run_fit(cfg: RunConfig) -> int:
    if cfg.reports is None:
        raise InvalidConfigurationError("Aucun fichier de déclarations (--reports ou data.reports)")
    code, rows = fit_reports(cfg, cfg.reports, cfg.roster, cfg.output_dir)
    display_summary(rows, f"Résumé - {cfg.reports.name}")
    if code == EXIT_NOT_CONVERGED:
        console.print("[yellow]⚠️  Au moins une couche n'a pas convergé[/yellow]")
    console.print(f"[green]✅ Artefacts écrits dans {cfg.output_dir}[/green]")
    return code


# --- Générateur ---

def run_synth(cfg: RunConfig) -> int:
    synth = cfg.synth
    report_seed = synth.seed if cfg.report_seed is None else int(cfg.report_seed)
    if cfg.reciprocity_target is None:
        gt = generate_ground_truth(synth)
    else:
        gt = planted_reciprocity_target(synth, cfg.reciprocity_target, cfg.reciprocity_tolerance)
    X = generate_reports(gt, synth.mask(), report_seed, n_reporters=synth.n_reporters)
    written = write_synthetic(gt, X, synth, cfg.output_dir, report_seed)
    write_manifest(cfg.output_dir, synth.seed, cfg.hash, artifacts=written)
    console.print(Panel(
        f"Scénario: {synth.scenario.value}\n"
        f"Nœuds: {gt.n_nodes}   Liens: {gt.y.nnz}   Déclarations: {X.nnz}\n"
        f"Sortie: {cfg.output_dir}",
        title="🧪 Données synthétiques", border_style="blue"))
    return EXIT_OK


# --- Benchmark ---

def run_eval(cfg: RunConfig) -> int:
    grid = BenchmarkGrid.from_mapping(cfg.benchmark)
    out = cfg.output_dir
    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                  BarColumn(), TextColumn("{task.completed}/{task.total}"), console=console) as progress:
        task = progress.add_task("Benchmark...", total=None)
        table = run_benchmark(grid, cfg.synth, cfg.fit, cfg.priors, cfg.workers,
                              progress=lambda done, total: progress.update(task, completed=done, total=total))
        sweep_task = progress.add_task("Balayage de η...", total=None)
        sweep = run_eta_sweep(grid, cfg.synth, cfg.fit, cfg.priors,
                              progress=lambda done, total: progress.update(sweep_task, completed=done,
                                                                          total=total))

    written = [write_csv(table, out / "benchmark.csv"),
               write_csv(summarize_benchmark(table), out / "benchmark_summary.csv"),
               write_csv(sweep, out / "eta_sweep.csv")]
    code = EXIT_OK if sweep["converged"].all() else EXIT_NOT_CONVERGED
    if len(sweep) >= 3:
        report = eta_recovery(sweep)
        written.append(write_csv(report.table, out / "eta_recovery.csv"))
        console.print(f"Corrélation η planté / estimé: [bold]{report.correlation:.3f}[/bold]")
    write_manifest(out, cfg.fit.seed, cfg.hash, artifacts=written)
    console.print(f"[green]✅ Tableaux écrits dans {out}[/green]")
    return code


# --- Lots ---

def _village_job(args) -> Tuple[str, int, List[Dict], Optional[str]]:
    cfg, name, reports, roster, out_dir = args
    try:
        code, rows = fit_reports(cfg, reports, roster, out_dir)
    except ReconstructionError as e:
        return name, EXIT_ERROR, [], str(e)
    return name, code, rows, None


def run_batch(cfg: RunConfig) -> int:
    if cfg.batch_dir is None or not cfg.batch_dir.is_dir():
        raise InvalidConfigurationError(f"Dossier de lot introuvable: {cfg.batch_dir}")
    villages = sorted(p for p in cfg.batch_dir.iterdir() if (p / cfg.batch_reports_name).exists())
    if not villages:
        raise InvalidConfigurationError(f"Aucun {cfg.batch_reports_name} dans {cfg.batch_dir}")
    jobs = []
    for village in villages:
        roster = village / cfg.batch_roster_name
        jobs.append((cfg, village.name, village / cfg.batch_reports_name,
                     roster if roster.exists() else None, cfg.output_dir / village.name))

    rows, code = [], EXIT_OK
    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"), BarColumn(),
                  console=console) as progress:
        task = progress.add_task(f"{len(jobs)} villages...", total=len(jobs))
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                outcomes = list(pool.map(_village_job, jobs))
                progress.update(task, completed=len(jobs))
        else:
            outcomes = []
            for job in jobs:
                outcomes.append(_village_job(job))
                progress.advance(task)

    for name, village_code, village_rows, error in outcomes:
        if error:
            err_console.print(f"[red]❌ {name}: {error}[/red]")
        code = max(code, village_code)
        rows += [{"village": name, **row} for row in village_rows]

    written = []
    if rows:
        written.append(write_csv(summary_frame(rows), cfg.output_dir / "batch_summary.csv"))
        written.append(write_csv(aggregate_summaries(rows), cfg.output_dir / "summary_by_method.csv"))
    write_manifest(cfg.output_dir, cfg.fit.seed, cfg.hash, artifacts=written,
                   extra={"villages": [v.name for v in villages], "exit_code": code})
    console.print(f"[green]✅ {len(villages)} villages traités, résumé dans {cfg.output_dir}[/green]")
    return code


# --- Ligne de commande ---

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Fichier YAML fusionné sur config/config.yaml")
    common.add_argument("--log-level", dest="logging.level", help="DEBUG, INFO, WARNING...")
    common.add_argument("-o", "--output", dest="outputs.directory", help="Dossier de sortie")

    parser = argparse.ArgumentParser(
        description="Reconstruction de réseaux latents à partir de déclarations multiples")
    sub = parser.add_subparsers(dest="command", required=True)

    fit_p = sub.add_parser("fit", parents=[common], help="Ajuster le modèle sur un CSV de déclarations")
    fit_p.add_argument("--seed", dest="inference.seed", type=int)
    fit_p.add_argument("--reports", dest="data.reports")
    fit_p.add_argument("--roster", dest="data.roster")
    fit_p.add_argument("--mask-rule", dest="data.mask_rule", choices=["self_dyads", "full_roster"])
    fit_p.add_argument("--tie-type", dest="data.tie_types", action="append")
    fit_p.add_argument("--max-iterations", dest="inference.max_iterations", type=int)
    fit_p.add_argument("--tol", dest="inference.elbo_rel_tol", type=float)
    fit_p.add_argument("--levels", dest="inference.n_levels", type=int)
    fit_p.add_argument("--threads", dest="inference.n_threads", type=int)
    fit_p.add_argument("--no-mutuality", dest="inference.mutuality", action="store_const", const=False)
    fit_p.add_argument("--two-step", dest="two_step.enabled", action="store_const", const=True)
    fit_p.add_argument("--two-step-scale", dest="two_step.scale", type=float)
    fit_p.add_argument("--threshold", dest="point_estimate.override_threshold", type=float)

    synth_p = sub.add_parser("synth", parents=[common], help="Générer des données synthétiques")
    synth_p.add_argument("--scenario", dest="synthetic.scenario",
                         choices=["over_reporters", "under_reporters", "gamma_theta", "a", "b", "c"])
    synth_p.add_argument("--nodes", dest="synthetic.n_nodes", type=int)
    synth_p.add_argument("--reporters", dest="synthetic.n_reporters", type=int)
    synth_p.add_argument("--communities", dest="synthetic.n_communities", type=int)
    synth_p.add_argument("--avg-degree", dest="synthetic.avg_degree", type=float)
    synth_p.add_argument("--theta-ratio", dest="synthetic.theta_ratio", type=float)
    synth_p.add_argument("--lambda-diff", dest="synthetic.lambda_diff", type=float)
    synth_p.add_argument("--eta", dest="synthetic.eta_planted", type=float)
    synth_p.add_argument("--seed", dest="synthetic.seed", type=int)
    synth_p.add_argument("--report-seed", dest="synthetic.report_seed", type=int)
    synth_p.add_argument("--reciprocity", dest="synthetic.reciprocity_target", type=float)

    eval_p = sub.add_parser("eval", parents=[common], help="Balayages de benchmark synthétiques")
    eval_p.add_argument("--seed", dest="inference.seed", type=int)
    eval_p.add_argument("--seeds", dest="benchmark.seeds", type=int)
    eval_p.add_argument("--workers", dest="batch.workers", type=int)

    batch_p = sub.add_parser("batch", parents=[common], help="Un ajustement par sous-dossier de village")
    batch_p.add_argument("--seed", dest="inference.seed", type=int)
    batch_p.add_argument("--input-dir", dest="batch.input_dir")
    batch_p.add_argument("--workers", dest="batch.workers", type=int)
    batch_p.add_argument("--mask-rule", dest="data.mask_rule", choices=["self_dyads", "full_roster"])
    batch_p.add_argument("--no-mutuality", dest="inference.mutuality", action="store_const", const=False)
    batch_p.add_argument("--two-step", dest="two_step.enabled", action="store_const", const=True)
    return parser


COMMANDS = {"fit": run_fit, "synth": run_synth, "eval": run_eval, "batch": run_batch}


def main(argv: Optional[List[str]] = None) -> int:
    """Point d'entrée principal"""
    args = vars(build_parser().parse_args(argv))
    command, config_path = args.pop("command"), args.pop("config")
    try:
        cfg = RunConfig.from_mapping(load_config(config_path, overrides=args))
        setup_logging(cfg.log_level)
        return COMMANDS[command](cfg)
    except (ReconstructionError, OSError) as e:
        err_console.print(f"[red]❌ {e}[/red]")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
