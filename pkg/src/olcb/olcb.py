import functools
from collections.abc import Callable
from pathlib import Path

import click
from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from . import harness
from .console import console, setup_logging
from .errors import OlcbError
from .harness import CampaignResult, ExperimentConfig

rprint = console.print


class VerificationFailed(click.ClickException):
    """A campaign ran to completion and found rows that violate their inequality."""

    exit_code = 2


class AliasedGroup(click.Group):
    def get_command(self, ctx, cmd_name):
        rv = click.Group.get_command(self, ctx, cmd_name)
        if rv is not None:
            return rv
        matches = [x for x in self.list_commands(ctx) if x.startswith(cmd_name)]
        if not matches:
            return None
        elif len(matches) == 1:
            return click.Group.get_command(self, ctx, matches[0])
        ctx.fail(f"Too many matches: {', '.join(sorted(matches))}")

    def resolve_command(self, ctx, args):
        # always return the full command name
        _, cmd, args = super().resolve_command(ctx, args)
        if cmd is None:
            return None, None, args
        return cmd.name, cmd, args


def with_experiment(func):
    """Decorator to load the experiment config and output directory into a command"""

    @click.option("--config", "-c", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
    @click.option("--out", "-o", default="out", type=click.Path(file_okay=False), help="Output directory (default: out)")
    @click.option("--verbose", "-v", is_flag=True, help="Show debug logging")
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        setup_logging(kwargs.pop("verbose"))
        try:
            config = harness.load_experiment(kwargs.pop("config_path"))
        except OlcbError as err:
            raise click.ClickException(str(err)) from err
        out_dir = Path(kwargs.pop("out"))
        out_dir.mkdir(parents=True, exist_ok=True)
        return func(config, out_dir, *args, **kwargs)

    return wrapper


def run_campaign(
    name: str,
    campaign: Callable[..., CampaignResult],
    config: ExperimentConfig,
    out_dir: Path,
) -> CampaignResult:
    """Run a campaign under a progress bar, report it, and turn failures into exit codes."""
    with Progress(
        SpinnerColumn(),
        TextColumn("[bold]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task(f"{name} ({config.name})", total=None)
        try:
            result = campaign(config, out_dir, lambda n: progress.advance(task, n))
        except OlcbError as err:
            raise click.ClickException(str(err)) from err

    result.artifacts.append(harness.write_metadata(out_dir, config, name))
    print_result(result)
    summary = result.summary
    if not summary.passed:
        raise VerificationFailed(f"{summary.failures} of {summary.total} rows failed")
    return result


def print_result(result: CampaignResult) -> None:
    summary = result.summary
    table = Table(title="Verification summary")
    table.add_column("statistic", style="cyan")
    table.add_column("rows", justify="right")
    table.add_column("failed", justify="right")
    for statistic, (total, failed) in sorted(summary.by_statistic.items()):
        table.add_row(statistic, str(total), f"[bold red]{failed}[/]" if failed else "0")
    rprint(table)

    budget = result.budget
    rprint(
        f"tolerance budget: solver residual [bold]{budget.solver_residual:.3e}[/] + "
        f"quadrature [bold]{budget.quadrature:.3e}[/] + bracket width [bold]{budget.bracket_width:.3e}[/] "
        f"= [bold]{budget.total:.3e}[/]"
    )
    rprint(f"min slack: {summary.min_slack:.6g}")
    for path in result.artifacts:
        rprint(f"wrote [green]{path}[/]")
    for row in result.rows:
        if not row.passed:
            rprint(f"[red]FAIL[/] {row.body_id} {row.statistic}: lhs={row.lhs:.12g} rhs={row.rhs:.12g} {row.metadata}")


@click.command(cls=AliasedGroup)
def cli():
    """Orlicz–Lorentz centroid bodies: solvers and verification campaigns"""
    pass


@cli.command()
@with_experiment
def norm(config: ExperimentConfig, out_dir: Path):
    """Solve h(Γ_{φ,ω}K, x) for the configured directions"""
    run_campaign("norm", harness.run_norm, config, out_dir)


@cli.command()
@with_experiment
def centroid(config: ExperimentConfig, out_dir: Path):
    """Build Γ_{φ,ω}K on a direction grid and bracket its volume"""
    run_campaign("centroid", harness.run_centroid, config, out_dir)


@cli.command()
@with_experiment
def steiner(config: ExperimentConfig, out_dir: Path):
    """Steiner-symmetrize the body along the configured directions"""
    run_campaign("steiner", harness.run_steiner, config, out_dir)


@cli.command(name="verify-bp")
@with_experiment
def verify_bp(config: ExperimentConfig, out_dir: Path):
    """Check that no body beats the ball's volume ratio"""
    run_campaign("verify-bp", harness.run_verify_bp, config, out_dir)


@cli.command(name="verify-lemmas")
@with_experiment
def verify_lemmas(config: ExperimentConfig, out_dir: Path):
    """Run the sandwich, equivariance, Steiner and inclusion campaigns"""
    run_campaign("verify-lemmas", harness.run_verify_lemmas, config, out_dir)


@cli.command()
@with_experiment
def converge(config: ExperimentConfig, out_dir: Path):
    """Symmetrize repeatedly and track |Γ_{φ,ω}K_i| along the way"""
    run_campaign("converge", harness.run_converge, config, out_dir)
