"""
Controller module for sparsenet - runs one CLI command end to end.

The controller loads input data, calls the estimation and filtration
modules with parameters merged from configuration and flags, writes the
results through ResultWriter and prints console summaries.
"""

import logging
import time
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np

from .bench import beta0_separation, bench_sparse_cross
from .data import (
    DataMatrix,
    SymmetricMatrix,
    normalize,
    rank_diagnostic,
    sample_correlation,
    sample_covariance,
    sample_cross_correlation,
)
from .errors import ConvergenceError
from .filtration import build_filtration, glasso_filtration
from .glasso import glasso_fit, glasso_fit_screened, glasso_path
from .graph import (
    GraphPartition,
    block_permutation,
    threshold_adjacency,
    zero_pattern_adjacency,
)
from .models import Command, ConfigError, RunConfig, SparseNetConfig
from .partial import PartialMethod, partial_from_residuals, sparse_partial_network
from .persistence import ResultWriter, load_data_csv
from .renderer import NetworkRenderer
from .synth import Structure, StructureKind, synth_data
from .thresholding import (
    LambdaGrid,
    lambda_grid_from_data,
    sparse_correlation_path,
    sparse_cross_correlation,
)

logger = logging.getLogger(__name__)

# Singular values listed in rank.json, largest and smallest
SPECTRUM_TAIL = 10


class ControllerError(ConfigError):
    """Base exception for controller-related errors."""

    pass


class IncompleteSolutionError(ConvergenceError):
    """Outputs were written but some fits did not converge."""

    pass


class NetworkController:
    """
    Runs sparsenet commands.

    One controller may run several commands; each call to run() writes into
    the output directory of its RunConfig.
    """

    def __init__(
        self,
        config: SparseNetConfig,
        renderer: NetworkRenderer | None = None,
    ):
        """
        Initialize the controller.

        Args:
            config: Loaded configuration; RunConfig values take precedence
            renderer: Console renderer (created if None)
        """
        self.config = config
        self.renderer = renderer or NetworkRenderer()
        self._handlers: dict[Command, Callable[[RunConfig, ResultWriter], None]] = {
            Command.NORMALIZE: self._normalize,
            Command.CORR: self._corr,
            Command.CROSS_CORR: self._cross_corr,
            Command.RANK: self._rank,
            Command.SPARSE_CORR: self._sparse_corr,
            Command.GLASSO: self._glasso,
            Command.PARTIAL: self._partial,
            Command.FILTRATION: self._filtration,
            Command.BENCH: self._bench,
            Command.SYNTH: self._synth,
        }

    def run(self, run: RunConfig) -> list[Path]:
        """
        Execute one command.

        Args:
            run: Command, inputs and flags

        Returns:
            Paths of every file written

        Raises:
            SparseNetError: Subclasses carry the process exit code
        """
        logger.info(f"Running {run.command} with {len(run.inputs)} input(s)")
        writer = ResultWriter(run.output_dir, run.seed)
        started = time.perf_counter()
        try:
            self._handlers[run.command](run, writer)
        except IncompleteSolutionError:
            writer.write_timing(
                {"command": str(run.command), "seconds": time.perf_counter() - started}
            )
            raise
        elapsed = time.perf_counter() - started
        writer.write_timing({"command": str(run.command), "seconds": elapsed})
        logger.info(f"{run.command} finished in {elapsed:.3f}s")
        return writer.written

    # Input helpers

    def _load(self, run: RunConfig, count: int = 1) -> list[DataMatrix]:
        if len(run.inputs) < count:
            raise ControllerError(
                f"{run.command} needs {count} input file(s), got {len(run.inputs)}"
            )
        return [load_data_csv(path) for path in run.inputs[:count]]

    def _normalized(self, run: RunConfig, count: int = 1) -> list[DataMatrix]:
        drop = bool(run.option("drop_constant", self.config.data.drop_constant))
        return [normalize(data, drop_constant=drop) for data in self._load(run, count)]

    def _correlation_input(self, run: RunConfig) -> tuple[SymmetricMatrix, DataMatrix]:
        """Correlation of one input, or cross-correlation of two."""
        if len(run.inputs) >= 2:
            x, y = self._normalized(run, 2)
            return sample_cross_correlation(x, y), x
        (x,) = self._normalized(run)
        return sample_correlation(x), x

    def _grid(self, run: RunConfig, m: SymmetricMatrix, default_count: int) -> LambdaGrid:
        if run.lam is not None:
            return LambdaGrid.explicit([run.lam])
        return lambda_grid_from_data(m, run.grid_count or default_count)

    def _threads(self, run: RunConfig) -> int:
        return int(run.option("threads", self.config.runtime.threads))

    def _export_threshold(self) -> float:
        return self.config.data.export_threshold

    # Commands

    def _normalize(self, run: RunConfig, writer: ResultWriter) -> None:
        (raw,) = self._load(run)
        drop = bool(run.option("drop_constant", self.config.data.drop_constant))
        data = normalize(raw, drop_constant=drop)
        writer.write_data_csv("normalized.csv", data)
        dropped = (
            sorted(set(range(raw.p)) - set(data.column_index))
            if data.column_index is not None
            else []
        )
        summary = {
            "n": data.n,
            "p": data.p,
            "column_index": data.column_index,
            "dropped": dropped,
        }
        writer.write_json("normalize.json", summary)
        self.renderer.print_diagnostics(summary, "Normalized data")

    def _corr(self, run: RunConfig, writer: ResultWriter) -> None:
        (data,) = self._normalized(run)
        corr = sample_correlation(data)
        writer.write_matrix_csv("correlation.csv", corr.entries, data.names())
        summary = {"n": data.n, "p": data.p, "max_off_diagonal": corr.max_off_diagonal()}
        writer.write_json("correlation.json", summary)
        self.renderer.print_diagnostics(summary, "Sample correlation")

    def _cross_corr(self, run: RunConfig, writer: ResultWriter) -> None:
        x, y = self._normalized(run, 2)
        cross = sample_cross_correlation(x, y)
        writer.write_matrix_csv("cross_correlation.csv", cross.entries, x.names())
        summary = {"n": x.n, "p": x.p, "max_abs": float(np.abs(cross.entries).max())}
        writer.write_json("cross_correlation.json", summary)
        self.renderer.print_diagnostics(summary, "Sample cross-correlation")

    def _rank(self, run: RunConfig, writer: ResultWriter) -> None:
        (data,) = self._normalized(run)
        report = rank_diagnostic(sample_correlation(data), tol=run.tol)
        values = report.singular_values
        summary = {
            "n": data.n,
            "p": data.p,
            "rank": report.rank,
            "deficient": report.deficient,
            "tol": report.tol,
            "largest": values[:SPECTRUM_TAIL],
            "smallest": values[-SPECTRUM_TAIL:],
        }
        writer.write_json("rank.json", summary)
        self.renderer.print_diagnostics(
            {k: summary[k] for k in ("n", "p", "rank", "deficient", "tol")},
            "Rank diagnostic",
        )

    def _sparse_corr(self, run: RunConfig, writer: ResultWriter) -> None:
        m, _ = self._correlation_input(run)
        cross = not m.symmetric
        dense_limit = self.config.threshold.dense_limit
        grid = self._grid(run, m, self.config.threshold.grid_count)
        threshold = self._export_threshold()

        if cross:
            estimates = [sparse_cross_correlation(m, lam, dense_limit) for lam in grid]
        else:
            estimates = sparse_correlation_path(m, grid, dense_limit)

        if run.lam is not None:
            (estimate,) = estimates
            writer.write_edge_list("sparse_corr_edges.csv", estimate.edges(threshold))
            summary: dict[str, object] = {
                "lambda": estimate.lam,
                "nnz": estimate.nnz,
                "p": estimate.dim,
                "source": str(estimate.source),
            }
        else:
            for t, estimate in enumerate(estimates):
                writer.write_edge_list(
                    f"sparse_corr_edges_{t:03d}.csv", estimate.edges(threshold)
                )
            summary = {
                "p": m.dim,
                "source": str(estimates[0].source),
                "path": [{"lambda": e.lam, "nnz": e.nnz} for e in estimates],
            }
        writer.write_json("sparse_corr.json", summary)
        self.renderer.print_diagnostics(
            {"p": m.dim, "grid points": len(estimates), "nnz at smallest λ": estimates[0].nnz},
            "Sparse correlation",
        )

    def _glasso(self, run: RunConfig, writer: ResultWriter) -> None:
        (data,) = self._load(run)
        cfg = self.config.glasso
        s = sample_covariance(data)
        tol = run.tol or cfg.tol
        penalize = bool(run.option("penalize_diagonal", cfg.penalize_diagonal))
        screened = bool(run.option("screened", cfg.screened))
        eps = cfg.zero_eps

        if run.lam is not None:
            if screened:
                solution = glasso_fit_screened(
                    s, run.lam, tol, cfg.max_sweeps, penalize, self._threads(run)
                )
            else:
                solution = glasso_fit(s, run.lam, tol, cfg.max_sweeps, penalize)
            adjacency = zero_pattern_adjacency(solution.precision, eps)
            values = solution.precision.entries
            writer.write_edge_list(
                "precision_edges.csv",
                ((i, j, float(values[i, j])) for i, j in adjacency.edges.tolist()),
            )
            diagnostics = solution.diagnostics()
            writer.write_json("glasso.json", diagnostics)
            self.renderer.print_diagnostics(diagnostics, "Graphical LASSO")
            if not solution.converged:
                raise IncompleteSolutionError(
                    f"Graphical LASSO did not converge at lambda={run.lam} "
                    f"in {cfg.max_sweeps} sweeps"
                )
            return

        grid = lambda_grid_from_data(s, run.grid_count or self.config.threshold.grid_count)
        positive = tuple(lam for lam in grid if lam > 0)
        if positive:
            grid = LambdaGrid(positive, grid.origin)
        else:
            # Diagonal covariance: every lambda gives the same empty graph
            logger.warning("Covariance is diagonal; fitting lambda = 0 only")
        solutions = glasso_path(s, grid, tol, cfg.max_sweeps, penalize)
        for t, solution in enumerate(solutions):
            adjacency = zero_pattern_adjacency(solution.precision, eps)
            values = solution.precision.entries
            writer.write_edge_list(
                f"precision_edges_{t:03d}.csv",
                ((i, j, float(values[i, j])) for i, j in adjacency.edges.tolist()),
            )
        writer.write_json(
            "glasso.json", {"path": [solution.diagnostics() for solution in solutions]}
        )
        self.renderer.print_diagnostics(
            {
                "grid points": len(solutions),
                "converged": all(sol.converged for sol in solutions),
                "max kkt residual": max(sol.kkt_residual for sol in solutions),
            },
            "Graphical LASSO path",
        )
        stalled = [sol.lam for sol in solutions if not sol.converged]
        if stalled:
            raise IncompleteSolutionError(
                f"Graphical LASSO did not converge at lambda={stalled}"
            )

    def _partial(self, run: RunConfig, writer: ResultWriter) -> None:
        (data,) = self._normalized(run)
        cfg = self.config.partial
        positive_only = bool(run.option("positive_only", cfg.positive_only))
        lse = bool(run.option("lse", False))
        if lse and run.lam is not None:
            raise ControllerError("--lse and --lambda are mutually exclusive")

        if run.lam is None:
            result = partial_from_residuals(
                data, bool(run.option("force_pinv", False)), self._threads(run)
            )
        else:
            rule = run.option("rule", cfg.rule)
            if rule not in ("and", "or"):
                raise ControllerError(f"Unknown rule: {rule}")
            result = sparse_partial_network(
                data,
                run.lam,
                rule=rule,
                positive_only=positive_only,
                tol=run.tol or cfg.tol,
                max_passes=cfg.max_passes,
                threads=self._threads(run),
            )

        edges = list(result.edges(self._export_threshold(), positive_only))
        writer.write_edge_list("partial_edges.csv", edges)
        summary = {
            "method": str(result.method),
            "lambda": result.lam,
            "edges": len(edges),
            "failed_nodes": result.failed_nodes,
        }
        writer.write_json("partial.json", summary)
        self.renderer.print_diagnostics(summary, "Partial correlation")
        if result.method == PartialMethod.SPARSE and result.failed_nodes:
            raise IncompleteSolutionError(
                f"Node-wise regressions failed for nodes {list(result.failed_nodes)}"
            )

    def _filtration(self, run: RunConfig, writer: ResultWriter) -> None:
        cfg = self.config.filtration
        method = run.option("method", cfg.method)
        count = run.grid_count or cfg.grid
        threads = self._threads(run)

        if method == "glasso":
            (data,) = self._load(run)
            s = sample_covariance(data)
            grid = self._grid(run, s, count)
            result = glasso_filtration(
                data,
                grid,
                tol=run.tol or self.config.glasso.tol,
                max_sweeps=self.config.glasso.max_sweeps,
                penalize_diagonal=bool(
                    run.option("penalize_diagonal", self.config.glasso.penalize_diagonal)
                ),
                eps=self.config.glasso.zero_eps,
                threads=threads,
                strict=True,
            )
            writer.write_curve_csv("beta0.csv", result.zero_pattern)
            writer.write_curve_csv("beta0_threshold.csv", result.threshold)
            self._write_partitions(writer, result.zero_pattern.grid, result.zero_pattern.partitions)
            writer.write_json(
                "agreement.json",
                {
                    "agreement": result.agreement,
                    "skipped": result.skipped,
                    "node_nested": result.nestedness.node_nested if result.nestedness else None,
                    "edge_nested": result.nestedness.edge_nested if result.nestedness else None,
                },
            )
            self._dump_permuted(run, writer, s)
            self.renderer.print_glasso_filtration(result)
            return
        if method != "corr":
            raise ControllerError(f"Unknown filtration method: {method}")

        m, x = self._correlation_input(run)
        grid = self._grid(run, m, count)
        symmetrize = run.option("symmetrize", cfg.symmetrize)
        filtration = build_filtration(
            m,
            grid,
            method="scratch" if run.option("scratch", False) else "incremental",
            symmetrize=symmetrize,
            threads=threads,
        )
        writer.write_curve_csv("beta0.csv", filtration)
        self._write_partitions(writer, grid, filtration.partitions)
        self._dump_permuted(run, writer, m)
        self.renderer.print_filtration(filtration, names=x.names())

    def _write_partitions(
        self, writer: ResultWriter, grid: LambdaGrid, partitions: Sequence[GraphPartition]
    ) -> None:
        writer.write_json(
            "partitions.json",
            {
                "grid": grid.values,
                "partitions": [
                    {"lambda": lam, "kappa": part.kappa, "labels": part.labels}
                    for lam, part in zip(grid.values, partitions, strict=True)
                ],
            },
        )

    def _dump_permuted(
        self, run: RunConfig, writer: ResultWriter, m: SymmetricMatrix
    ) -> None:
        """Block-diagonal layouts of the threshold graph at requested λ values."""
        for k, lam in enumerate(run.option("permuted", [])):
            adjacency = threshold_adjacency(
                m, lam, run.option("symmetrize", self.config.filtration.symmetrize)
            )
            layout = block_permutation(adjacency)
            dense = layout.permute(adjacency.to_dense()).astype(np.int8)
            writer.write_matrix_csv(
                f"permuted_{k:02d}.csv", dense, [str(node) for node in layout.perm]
            )
            writer.write_json(
                f"permuted_{k:02d}.json",
                {"lambda": lam, "perm": layout.perm, "sizes": layout.sizes},
            )

    def _bench(self, run: RunConfig, writer: ResultWriter) -> None:
        cfg = self.config.bench
        if run.option("separation", False):
            separation = beta0_separation(seeds=tuple(range(run.seed, run.seed + 10)))
            writer.write_json(
                "separation.json",
                {
                    "grid": separation.grid.values,
                    "differences": separation.differences,
                    "separated": separation.separated,
                    "curves_a": separation.curves_a,
                    "curves_b": separation.curves_b,
                },
            )
            self.renderer.console.print(self.renderer.render_separation(separation))
            return

        report = bench_sparse_cross(
            run.option("n", cfg.n),
            run.option("p", cfg.p),
            grid_count=run.grid_count or cfg.grid,
            seed=run.seed,
            lasso_tol=run.tol or cfg.tol,
            baseline=run.option("baseline", "pairwise"),
            threads=self._threads(run),
        )
        # Timings vary run to run; agreement.json is the reproducible output
        writer.write_json("agreement.json", report.agreement_summary())
        writer.write_rows(
            "bench.csv",
            ("n", "p", "t_soft", "t_lasso", "ratio"),
            (
                (str(n), str(p), f"{t_soft:.6g}", f"{t_lasso:.6g}", f"{ratio:.6g}")
                for n, p, t_soft, t_lasso, ratio in report.rows()
            ),
        )
        self.renderer.console.print(self.renderer.render_bench(report))

    def _synth(self, run: RunConfig, writer: ResultWriter) -> None:
        n = int(run.option("n", 0))
        p = int(run.option("p", 0))
        kind = StructureKind(run.option("structure", StructureKind.IID_NORMAL))
        structure = Structure(
            kind=kind,
            blocks=int(run.option("blocks", 2)),
            within=float(run.option("within", 0.7)),
            between=float(run.option("between", 0.0)),
            strength=float(run.option("strength", 0.4)),
        )
        moment_matched = bool(run.option("moment_matched", False))
        data = synth_data(n, p, structure, seed=run.seed, moment_matched=moment_matched)
        writer.write_data_csv("synth.csv", data)
        summary = {
            "n": n,
            "p": p,
            "structure": str(kind),
            "blocks": structure.blocks,
            "within": structure.within,
            "between": structure.between,
            "strength": structure.strength,
            "moment_matched": moment_matched,
        }
        writer.write_json("synth.json", summary)
        self.renderer.print_diagnostics(summary, "Synthetic data")
