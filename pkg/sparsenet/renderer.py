"""
Network renderer module - prints partitions, β₀ curves and diagnostics.

Everything written to files is also summarized on the console through Rich
trees, tables and panels.
"""

import logging
from collections.abc import Mapping

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text
from rich.tree import Tree

from .bench import BenchReport, SeparationReport
from .filtration import FiltrationResult, GlassoFiltration
from .graph import GraphPartition

logger = logging.getLogger(__name__)


class NetworkRenderer:
    """
    Renderer for network estimates and filtrations.
    """

    def __init__(self, console: Console | None = None, max_nodes: int = 12):
        """
        Initialize the renderer.

        Args:
            console: Rich Console instance (created if None)
            max_nodes: Nodes listed per component before eliding the rest
        """
        self.console = console or Console()
        self.max_nodes = max_nodes

    def render_partition(
        self,
        partition: GraphPartition,
        title: str = "Components",
        names: tuple[str, ...] | None = None,
        max_components: int = 20,
    ) -> Tree:
        """
        Render a node partition as a tree, largest components first.

        Args:
            partition: Partition to render
            title: Root label
            names: Node names, defaulting to indices
            max_components: Components shown before eliding the rest

        Returns:
            Rich Tree object ready for display
        """
        components = sorted(partition.components, key=lambda c: (-len(c), c[0]))
        tree = Tree(
            f"[bold blue]{title}[/bold blue] [dim](κ = {partition.kappa})[/dim]",
            guide_style="dim cyan",
        )
        for comp in components[:max_components]:
            label = Text()
            label.append(f"{len(comp)} node{'s' if len(comp) != 1 else ''}", style="bold yellow")
            shown = [names[i] if names else str(i) for i in comp[: self.max_nodes]]
            more = len(comp) - len(shown)
            label.append(": " + ", ".join(shown), style="dim")
            if more > 0:
                label.append(f" … (+{more})", style="dim")
            tree.add(label)
        if len(components) > max_components:
            tree.add(Text(f"… {len(components) - max_components} more", style="dim italic"))
        logger.debug(f"Rendered partition with {partition.kappa} components")
        return tree

    def render_curve(
        self, filtration: FiltrationResult, title: str = "β₀ curve", max_rows: int = 25
    ) -> Table:
        """
        Render a β₀ curve as a table, subsampled to ``max_rows`` rows.
        """
        table = Table(title=title, title_justify="left")
        table.add_column("λ", justify="right", style="cyan")
        table.add_column("β₀", justify="right", style="bold")
        table.add_column("Edges", justify="right")

        rows = list(filtration.rows())
        step = max(1, -(-len(rows) // max_rows))
        picked = rows[::step]
        if rows and picked[-1] is not rows[-1]:
            picked.append(rows[-1])
        for lam, beta0, edges in picked:
            table.add_row(f"{lam:.4g}", str(beta0), str(edges))
        return table

    def render_diagnostics(
        self, diagnostics: Mapping[str, object], title: str = "Diagnostics"
    ) -> Panel:
        """
        Render key-value diagnostics in a panel.
        """
        table = Table(show_header=False, box=None, pad_edge=False)
        table.add_column("Metric", style="bold")
        table.add_column("Value", justify="right")
        for key, value in diagnostics.items():
            if isinstance(value, float):
                text = f"{value:.6g}"
            elif isinstance(value, bool):
                text = "[green]yes[/green]" if value else "[red]no[/red]"
            else:
                text = str(value)
            table.add_row(f"{key}:", text)
        return Panel(
            table,
            title=f"[bold]{title}[/bold]",
            title_align="left",
            border_style="blue",
        )

    def render_bench(self, report: BenchReport) -> Table:
        """Benchmark timings with speed-up ratio and agreement."""
        table = Table(
            title=f"{report.methods[0]} vs {report.methods[1]}", title_justify="left"
        )
        table.add_column("n", justify="right")
        table.add_column("p", justify="right")
        table.add_column("t_soft (s)", justify="right")
        table.add_column("t_lasso (s)", justify="right")
        table.add_column("Ratio", justify="right", style="bold green")
        table.add_column("Agreement", justify="right", style="dim")
        for cell in report.cells:
            table.add_row(
                str(cell.n),
                str(cell.p),
                f"{cell.t_soft:.3g}",
                f"{cell.t_lasso:.3g}",
                f"{cell.ratio:.3g}",
                f"{cell.agreement:.2g}",
            )
        return table

    def render_separation(self, report: SeparationReport) -> Panel:
        """Group β₀ differences at the compared grid value."""
        return self.render_diagnostics(
            {
                "lambda": report.grid[report.mid_index],
                "min β₀ difference": report.min_difference,
                "required": report.p / 4,
                "separated": report.separated,
            },
            title="Group separation",
        )

    def print_filtration(
        self,
        filtration: FiltrationResult,
        names: tuple[str, ...] | None = None,
        show_partition_at: int | None = None,
    ) -> None:
        """
        Print a β₀ curve and optionally the partition at one grid index.
        """
        self.console.print()
        self.console.print(self.render_curve(filtration))
        if show_partition_at is not None:
            partition = filtration.partitions[show_partition_at]
            lam = filtration.grid[show_partition_at]
            self.console.print()
            self.console.print(
                self.render_partition(partition, title=f"Components at λ = {lam:.4g}", names=names)
            )

    def print_glasso_filtration(self, result: GlassoFiltration) -> None:
        """Print the zero-pattern curve and the agreement verdict."""
        self.print_filtration(result.zero_pattern)
        summary: dict[str, object] = {
            "grid points": len(result.agreement),
            "skipped": len(result.skipped),
            "partitions agree": result.partitions_agree,
        }
        if result.nestedness is not None:
            summary["node nested"] = result.nestedness.node_nested
            summary["edge nested"] = result.nestedness.edge_nested
        self.console.print()
        self.console.print(self.render_diagnostics(summary, title="Zero pattern vs threshold"))

    def print_diagnostics(self, diagnostics: Mapping[str, object], title: str) -> None:
        self.console.print()
        self.console.print(self.render_diagnostics(diagnostics, title=title))
