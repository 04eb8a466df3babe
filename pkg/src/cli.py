"""
Command-line interface for sparse sensing experiments.
"""

import math
from pathlib import Path
from typing import Iterable, List, Optional

import click
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from . import config
from .analysis import mse_to_db
from .exceptions import InvalidArgumentError, OutputPathError, SingularityError
from .harness import ExperimentRunner, compare_with_bounds, compute_bounds, select_reweighted_factor
from .models import BoundRow, ComparisonRow, EpsilonSelection, ExperimentConfig, MseCurve, SweepSummary
from .utils import read_curves_csv, setup_logging


console = Console()

HANDLED_ERRORS = (InvalidArgumentError, OutputPathError, SingularityError)


def _fail(error: Exception) -> None:
    console.print(f"[red]Error: {escape(str(error))}[/red]")
    raise click.exceptions.Exit(1)


def experiment_options(func):
    """Flags shared by the commands that execute trials."""
    options = [
        click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='Flat key = value config file'),
        click.option('--seed', type=click.IntRange(min=0), help='Root seed'),
        click.option('--trials', type=click.IntRange(min=1), help='Monte Carlo trials per point'),
        click.option('--out', type=click.Path(), help='Output CSV path'),
        click.option('--solvers', help='Comma-separated subset of rza-nlmf,nlmf,omp,bpdn'),
        click.option('--no-decimate', is_flag=True, help='Write every iteration instead of every 50th'),
        click.option('--workers', type=click.IntRange(min=1), help='Parallel worker processes'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def load_experiment(config_path: Optional[str], no_decimate: bool = False, **overrides) -> ExperimentConfig:
    """Defaults < config file < command-line flags."""
    if overrides.get('out') is not None:
        overrides['output'] = overrides.pop('out')
    overrides.pop('out', None)
    if no_decimate:
        overrides['decimate'] = 1
    return ExperimentConfig.from_file(Path(config_path) if config_path else None, **overrides)


@click.group()
@click.option('--log-level', default=config.LOG_LEVEL, help='Logging level')
@click.option('--log-file', type=click.Path(), help='Log file path')
def cli(log_level: str, log_file: Optional[str]):
    """Sparse Sense - adaptive and nonlinear sparse sensing experiments"""
    log_path = Path(log_file) if log_file else None
    setup_logging(log_level, log_path)


@cli.command()
@experiment_options
@click.option('--solver', type=click.Choice(['rza-nlmf', 'nlmf', 'omp', 'bpdn']), default='rza-nlmf',
              help='Solver for the single point')
@click.option('--k', 'k', type=int, default=config.K_LIST[0], help='Sparsity level K')
@click.option('--snr', type=float, default=10.0, help='SNR in dB (inf for noiseless)')
@click.option('--epsilon', type=float, default=config.EPSILON, help='Reweighted factor')
def run(config_path, seed, trials, out, solvers, no_decimate, workers, solver, k, snr, epsilon):
    """Run a single (solver, K, SNR, epsilon) point."""
    try:
        cfg = load_experiment(
            config_path, no_decimate,
            seed=seed, trials=trials, out=out, workers=workers,
            solvers=solvers or [solver], k_list=[k], snr_list=[snr], epsilon_list=[epsilon],
        )
        _execute(cfg)
    except HANDLED_ERRORS as e:
        _fail(e)


@cli.command()
@experiment_options
@click.option('--epsilon-sweep', is_flag=True, help='Run the preset reweighted-factor grid 2..20000')
def sweep(config_path, seed, trials, out, solvers, no_decimate, workers, epsilon_sweep):
    """Run the full (solver, K, SNR, epsilon) sweep of a config."""
    try:
        cfg = load_experiment(
            config_path, no_decimate,
            seed=seed, trials=trials, out=out, solvers=solvers, workers=workers,
            epsilon_list=list(config.EPSILON_SWEEP) if epsilon_sweep else None,
        )
        _execute(cfg)
    except HANDLED_ERRORS as e:
        _fail(e)


@cli.command()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='Flat key = value config file')
def bounds(config_path: Optional[str]):
    """Print crlb_nss and crlb_ass for every (K, SNR, epsilon) of a config."""
    try:
        cfg = load_experiment(config_path)
        display_bounds(compute_bounds(cfg))
    except HANDLED_ERRORS as e:
        _fail(e)


@cli.command()
@click.option('--curves', 'curves_path', type=click.Path(), required=True, help='Curve CSV from run/sweep')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='Config supplying bound parameters')
def compare(curves_path: str, config_path: Optional[str]):
    """Join final MSE of each curve with the bounds at its (K, SNR)."""
    try:
        curves = read_curves_csv(Path(curves_path))
        cfg = load_experiment(config_path)
        if curves:
            update = {
                'k_list': sorted({c.metadata.k for c in curves}),
                'snr_list': sorted({c.metadata.snr_db for c in curves}),
            }
            epsilons = sorted({c.metadata.epsilon for c in curves if c.metadata.solver.uses_epsilon})
            if epsilons:
                update['epsilon_list'] = epsilons
            cfg = cfg.model_copy(update=update)
        display_comparison(compare_with_bounds(curves, compute_bounds(cfg)))
    except HANDLED_ERRORS as e:
        _fail(e)


@cli.command('select-epsilon')
@click.option('--curves', 'curves_path', type=click.Path(), required=True, help='Curve CSV of an epsilon sweep')
def select_epsilon(curves_path: str):
    """Pick the reweighted factor from an epsilon sweep."""
    try:
        selection = select_reweighted_factor(read_curves_csv(Path(curves_path)))
        display_selection(selection)
    except HANDLED_ERRORS as e:
        _fail(e)


def _execute(cfg: ExperimentConfig) -> List[MseCurve]:
    runner = ExperimentRunner(cfg)
    points = cfg.points()
    console.print(f"[bold blue]Running {len(points)} points x {cfg.trials} trials (seed {cfg.seed})[/bold blue]")

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        console=console
    ) as progress:
        task = progress.add_task("Sweeping...", total=len(points))

        def advance(point, curve):
            progress.update(task, advance=1, description=f"{point.solver.value} K={point.k} SNR={point.snr_db}")

        curves, summary = runner.sweep(on_point=advance)

    display_curves(curves)
    display_summary(summary)
    return curves


def _fmt(value: float, spec: str = ".4g") -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return format(value, spec)


def display_curves(curves: Iterable[MseCurve]):
    """Display the final MSE of each curve."""
    table = Table(title="Final MSE")
    table.add_column("Solver", style="cyan")
    table.add_column("K", justify="right")
    table.add_column("SNR (dB)", justify="right")
    table.add_column("epsilon", justify="right")
    table.add_column("MSE", style="green", justify="right")
    table.add_column("MSE (dB)", style="green", justify="right")
    table.add_column("Failed", style="yellow", justify="right")

    for curve in curves:
        meta = curve.metadata
        table.add_row(
            meta.solver.value, str(meta.k), _fmt(meta.snr_db), _fmt(meta.epsilon),
            _fmt(curve.final_mse), _fmt(mse_to_db(curve.final_mse), ".2f"), str(meta.failed_trials),
        )
    console.print(table)


def display_summary(summary: SweepSummary):
    """Display sweep statistics."""
    style = "yellow" if summary.failed_trials else "green"
    console.print(Panel.fit(
        f"[bold {style}]Sweep completed[/bold {style}]\n"
        f"Points: {summary.points}  Trials: {summary.trials}  Failed: {summary.failed_trials}\n"
        f"Wall time: {summary.wall_time_s:.2f}s  Peak memory: {summary.peak_memory_mb:.1f} MB\n"
        f"Rows written: {summary.rows_written} -> {summary.output}",
        border_style=style
    ))
    for error in summary.errors[:5]:
        console.print(f"  [yellow]•[/yellow] {error}")
    if len(summary.errors) > 5:
        console.print(f"  ... and {len(summary.errors) - 5} more")


def display_bounds(rows: Iterable[BoundRow]):
    """Display the bound table."""
    table = Table(title="Closed-form bounds")
    table.add_column("K", justify="right")
    table.add_column("SNR (dB)", justify="right")
    table.add_column("epsilon", justify="right")
    table.add_column("sigma_n^2", justify="right")
    table.add_column("crlb_nss", style="green", justify="right")
    table.add_column("crlb_ass", style="magenta", justify="right")
    table.add_column("valid", justify="center")

    for row in rows:
        table.add_row(
            str(row.k), _fmt(row.snr_db), _fmt(row.epsilon), _fmt(row.sigma_n_sq, ".6g"),
            _fmt(row.crlb_nss, ".6g"),
            _fmt(row.crlb_ass, ".6g"), "[green]yes[/green]" if row.crlb_ass_valid else "[red]no[/red]",
        )
    console.print(table)


def display_comparison(rows: Iterable[ComparisonRow]):
    """Display final MSE next to the bounds."""
    table = Table(title="Final MSE vs bounds")
    table.add_column("Solver", style="cyan")
    table.add_column("K", justify="right")
    table.add_column("SNR (dB)", justify="right")
    table.add_column("epsilon", justify="right")
    table.add_column("MSE", style="green", justify="right")
    table.add_column("MSE (dB)", justify="right")
    table.add_column("crlb_nss", justify="right")
    table.add_column("crlb_ass", justify="right")
    table.add_column("at epsilon", justify="right")

    for row in rows:
        ass = _fmt(row.crlb_ass, ".4g") + ("" if row.crlb_ass_valid else " *")
        table.add_row(
            row.solver.value, str(row.k), _fmt(row.snr_db), _fmt(row.epsilon),
            _fmt(row.final_mse), _fmt(row.final_mse_db, ".2f"), _fmt(row.crlb_nss), ass,
            _fmt(row.bound_epsilon),
        )
    console.print(table)
    console.print("[dim]* crlb_ass outside its validity region[/dim]")


def display_selection(selection: EpsilonSelection):
    """Display the reweighted-factor choice."""
    table = Table(title="Best epsilon per point")
    table.add_column("K", justify="right")
    table.add_column("SNR (dB)", justify="right")
    table.add_column("epsilon", style="green", justify="right")
    for (k, snr_db), eps in sorted(selection.best_by_point.items()):
        table.add_row(str(k), _fmt(snr_db), _fmt(eps))
    console.print(table)

    gaps = Table(title="Worst-case gap to the best (dB)")
    gaps.add_column("epsilon", justify="right")
    gaps.add_column("gap", justify="right")
    for eps, gap in sorted(selection.gap_db_by_epsilon.items()):
        gaps.add_row(_fmt(eps), _fmt(gap, ".2f"))
    console.print(gaps)

    console.print(
        f"\n[bold]Robust choice:[/bold] epsilon = [green]{_fmt(selection.robust_epsilon)}[/green] "
        f"(within {selection.robust_gap_db:.2f} dB everywhere)"
    )


if __name__ == '__main__':
    cli()
