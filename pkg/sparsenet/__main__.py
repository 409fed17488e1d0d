"""Main CLI entrypoint for sparsenet."""

from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any

import typer
from rich.console import Console

from sparsenet import __version__
from sparsenet.config import create_default_config, load_config
from sparsenet.controller import NetworkController
from sparsenet.errors import SparseNetError
from sparsenet.logging import (
    configure_logging,
    get_logger,
    log_error_with_context,
    log_execution_context,
)
from sparsenet.models import Command, ConfigError, RunConfig, SparseNetConfig
from sparsenet.renderer import NetworkRenderer
from sparsenet.synth import StructureKind

app = typer.Typer(
    name="sparsenet",
    help="Sparse correlation, partial-correlation and graphical-LASSO networks and their β₀ filtrations",
    no_args_is_help=True,
)
console = Console()


@dataclass
class CliState:
    """Options of the app callback, shared with every command."""

    config: SparseNetConfig
    config_path: Path | None = None


InputOpt = Annotated[
    list[Path],
    typer.Option(
        "--input",
        "-i",
        help="Data CSV, one row per subject (repeat for paired data)",
        exists=True,
        dir_okay=False,
    ),
]
OutputOpt = Annotated[
    Path | None,
    typer.Option("--output", "-o", help="Output directory [default: runtime.output_dir]"),
]
SeedOpt = Annotated[
    int | None, typer.Option("--seed", help="Random seed [default: runtime.seed]")
]
LambdaOpt = Annotated[
    float | None, typer.Option("--lambda", help="Single sparsity value", min=0.0)
]
GridOpt = Annotated[
    int | None,
    typer.Option("--lambda-grid", help="Number of λ values spanning the data", min=2),
]
TolOpt = Annotated[float | None, typer.Option("--tol", help="Solver tolerance")]
ThreadsOpt = Annotated[
    int | None,
    typer.Option("--threads", help="Worker threads [default: runtime.threads]", min=1),
]
DropOpt = Annotated[
    bool | None,
    typer.Option(
        "--drop-constant/--fail-constant",
        help="Drop zero-variance columns instead of failing",
    ),
]


def version_callback(value: bool) -> None:
    """Show version and exit."""
    if value:
        console.print(f"sparsenet version {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    ctx: typer.Context,
    version: Annotated[
        bool,
        typer.Option(
            "--version",
            "-v",
            help="Show version and exit",
            callback=version_callback,
            is_eager=True,
        ),
    ] = False,
    verbose: Annotated[
        bool, typer.Option("--verbose", help="Enable verbose logging")
    ] = False,
    json_logs: Annotated[
        bool, typer.Option("--json-logs", help="Output logs as JSON lines")
    ] = False,
    config_path: Annotated[
        Path | None,
        typer.Option(
            "--config", help="Config file [default: ~/.sparsenet/config.toml]"
        ),
    ] = None,
) -> None:
    """sparsenet - sparse network models for small-n large-p data."""
    try:
        config = load_config(config_path)
    except ConfigError as e:
        console.print(f"[bold red]Configuration error: {e}[/bold red]")
        raise typer.Exit(code=e.exit_code) from e

    configure_logging(
        verbose=verbose,
        json_output=json_logs or config.logging.format == "json",
        level=config.logging.level,
    )
    ctx.obj = CliState(config=config, config_path=config_path)


def _execute(
    ctx: typer.Context,
    command: Command,
    inputs: list[Path] | None = None,
    lam: float | None = None,
    grid_count: int | None = None,
    tol: float | None = None,
    output: Path | None = None,
    seed: int | None = None,
    **options: Any,
) -> None:
    """Build the RunConfig for ``command`` and run it, mapping errors to exit codes."""
    logger = log_execution_context(get_logger(__name__), str(command))
    state: CliState = ctx.obj
    config = state.config

    try:
        run = RunConfig(
            command=command,
            inputs=tuple(inputs or ()),
            lam=lam,
            grid_count=grid_count,
            tol=tol,
            output_dir=output if output is not None else config.get_output_dir(),
            seed=seed if seed is not None else config.runtime.seed,
            options=options,
        )
        logger.info(
            "Starting sparsenet",
            version=__version__,
            inputs=[str(p) for p in run.inputs],
            output_dir=str(run.output_dir),
            seed=run.seed,
        )
        controller = NetworkController(config, NetworkRenderer(console))
        written = controller.run(run)
    except SparseNetError as e:
        logger.error("Command failed", error=str(e))
        console.print(f"[bold red]Error: {e}[/bold red]")
        raise typer.Exit(code=e.exit_code) from e
    except Exception as e:
        log_error_with_context(logger, e, str(command))
        console.print(f"[bold red]Error: {e}[/bold red]")
        raise typer.Exit(code=1) from e

    console.print()
    for path in written:
        console.print(f"[dim]wrote {path}[/dim]")


@app.command()
def normalize(
    ctx: typer.Context,
    inputs: InputOpt,
    output: OutputOpt = None,
    drop_constant: DropOpt = None,
) -> None:
    """Center columns and scale them to unit norm."""
    _execute(ctx, Command.NORMALIZE, inputs, output=output, drop_constant=drop_constant)


@app.command()
def corr(
    ctx: typer.Context,
    inputs: InputOpt,
    output: OutputOpt = None,
    drop_constant: DropOpt = None,
) -> None:
    """Sample correlation matrix."""
    _execute(ctx, Command.CORR, inputs, output=output, drop_constant=drop_constant)


@app.command("cross-corr")
def cross_corr(
    ctx: typer.Context,
    inputs: InputOpt,
    output: OutputOpt = None,
    drop_constant: DropOpt = None,
) -> None:
    """Sample cross-correlations of two paired data files."""
    _execute(ctx, Command.CROSS_CORR, inputs, output=output, drop_constant=drop_constant)


@app.command()
def rank(
    ctx: typer.Context,
    inputs: InputOpt,
    tol: TolOpt = None,
    output: OutputOpt = None,
) -> None:
    """Numerical rank of the sample correlation matrix."""
    _execute(ctx, Command.RANK, inputs, tol=tol, output=output)


@app.command("sparse-corr")
def sparse_corr(
    ctx: typer.Context,
    inputs: InputOpt,
    lam: LambdaOpt = None,
    grid_count: GridOpt = None,
    output: OutputOpt = None,
    drop_constant: DropOpt = None,
) -> None:
    """Soft-thresholded correlations (or cross-correlations of two inputs)."""
    _execute(
        ctx,
        Command.SPARSE_CORR,
        inputs,
        lam=lam,
        grid_count=grid_count,
        output=output,
        drop_constant=drop_constant,
    )


@app.command()
def glasso(
    ctx: typer.Context,
    inputs: InputOpt,
    lam: LambdaOpt = None,
    grid_count: GridOpt = None,
    penalize_diagonal: Annotated[
        bool | None,
        typer.Option(
            "--penalize-diagonal/--no-penalize-diagonal",
            help="Penalize the precision diagonal [default: glasso.penalize_diagonal]",
        ),
    ] = None,
    screened: Annotated[
        bool | None,
        typer.Option(
            "--screened/--unscreened",
            help="Solve blocks of the thresholded covariance separately",
        ),
    ] = None,
    tol: TolOpt = None,
    threads: ThreadsOpt = None,
    output: OutputOpt = None,
) -> None:
    """Graphical-LASSO sparse precision matrix."""
    _execute(
        ctx,
        Command.GLASSO,
        inputs,
        lam=lam,
        grid_count=grid_count,
        tol=tol,
        output=output,
        penalize_diagonal=penalize_diagonal,
        screened=screened,
        threads=threads,
    )


@app.command()
def partial(
    ctx: typer.Context,
    inputs: InputOpt,
    lam: Annotated[
        float | None,
        typer.Option("--lambda", help="Node-wise LASSO penalty", min=0.0),
    ] = None,
    lse: Annotated[
        bool, typer.Option("--lse", help="Least-squares residual route (n > p)")
    ] = False,
    rule: Annotated[
        str | None,
        typer.Option("--rule", help="Symmetrization of node-wise coefficients: and|or"),
    ] = None,
    positive_only: Annotated[
        bool | None,
        typer.Option("--positive-only/--signed", help="Keep positive edges only"),
    ] = None,
    force_pinv: Annotated[
        bool, typer.Option("--force-pinv", help="Allow n <= p via pseudo-inverse")
    ] = False,
    tol: TolOpt = None,
    threads: ThreadsOpt = None,
    output: OutputOpt = None,
    drop_constant: DropOpt = None,
) -> None:
    """Partial-correlation network."""
    _execute(
        ctx,
        Command.PARTIAL,
        inputs,
        lam=lam,
        tol=tol,
        output=output,
        lse=lse,
        rule=rule,
        positive_only=positive_only,
        force_pinv=force_pinv,
        threads=threads,
        drop_constant=drop_constant,
    )


@app.command()
def filtration(
    ctx: typer.Context,
    inputs: InputOpt,
    grid_count: Annotated[
        int | None,
        typer.Option("--grid", help="Number of λ values [default: filtration.grid]", min=2),
    ] = None,
    method: Annotated[
        str | None,
        typer.Option("--method", help="corr (thresholded correlation) or glasso"),
    ] = None,
    symmetrize: Annotated[
        str | None,
        typer.Option("--symmetrize", help="Rule for cross-correlations: max|min"),
    ] = None,
    permuted: Annotated[
        list[float] | None,
        typer.Option("--permuted", help="Dump the block-permuted adjacency at this λ"),
    ] = None,
    scratch: Annotated[
        bool, typer.Option("--scratch", help="Recompute every grid point independently")
    ] = False,
    tol: TolOpt = None,
    threads: ThreadsOpt = None,
    output: OutputOpt = None,
    drop_constant: DropOpt = None,
) -> None:
    """β₀ curve and component partitions along a λ grid."""
    _execute(
        ctx,
        Command.FILTRATION,
        inputs,
        grid_count=grid_count,
        tol=tol,
        output=output,
        method=method,
        symmetrize=symmetrize,
        permuted=permuted or None,
        scratch=scratch,
        threads=threads,
        drop_constant=drop_constant,
    )


@app.command()
def bench(
    ctx: typer.Context,
    n: Annotated[
        list[int] | None, typer.Option("--n", help="Observation counts [default: bench.n]")
    ] = None,
    p: Annotated[
        list[int] | None, typer.Option("--p", help="Node counts [default: bench.p]")
    ] = None,
    grid_count: Annotated[
        int | None, typer.Option("--grid", help="λ values per cell", min=2)
    ] = None,
    baseline: Annotated[
        str, typer.Option("--baseline", help="pairwise or vectorized LASSO")
    ] = "pairwise",
    separation: Annotated[
        bool,
        typer.Option("--separation", help="Run the planted-group β₀ separation instead"),
    ] = False,
    tol: TolOpt = None,
    threads: ThreadsOpt = None,
    seed: SeedOpt = None,
    output: OutputOpt = None,
) -> None:
    """Time soft-thresholding against numerical LASSO."""
    _execute(
        ctx,
        Command.BENCH,
        grid_count=grid_count,
        tol=tol,
        output=output,
        seed=seed,
        n=n or None,
        p=p or None,
        baseline=baseline,
        separation=separation,
        threads=threads,
    )


@app.command()
def synth(
    ctx: typer.Context,
    n: Annotated[int, typer.Option("--n", help="Observations", min=2)],
    p: Annotated[int, typer.Option("--p", help="Nodes", min=2)],
    structure: Annotated[
        StructureKind, typer.Option("--structure", help="Planted structure")
    ] = StructureKind.IID_NORMAL,
    blocks: Annotated[int, typer.Option("--blocks", min=1)] = 2,
    within: Annotated[float, typer.Option("--within")] = 0.7,
    between: Annotated[float, typer.Option("--between")] = 0.0,
    strength: Annotated[float, typer.Option("--strength")] = 0.4,
    moment_matched: Annotated[
        bool,
        typer.Option(
            "--moment-matched",
            help="Sample covariance equals the model covariance exactly",
        ),
    ] = False,
    seed: SeedOpt = None,
    output: OutputOpt = None,
) -> None:
    """Write a synthetic data CSV."""
    _execute(
        ctx,
        Command.SYNTH,
        output=output,
        seed=seed,
        n=n,
        p=p,
        structure=structure,
        blocks=blocks,
        within=within,
        between=between,
        strength=strength,
        moment_matched=moment_matched,
    )


@app.command("init-config")
def init_config(ctx: typer.Context) -> None:
    """Write the default config file if it does not exist."""
    state: CliState = ctx.obj
    create_default_config(state.config_path)
    console.print("Config file ready")


if __name__ == "__main__":
    app()
