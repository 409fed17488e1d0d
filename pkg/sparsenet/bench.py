"""
Runtime benchmark: closed-form sparse cross-correlations vs numerical LASSO.

Both methods solve the same problems on the same synthetic data. A report
is only produced when their solutions agree; timings without matching
answers are rejected.

Also holds the vectorized form of the sparse cross-correlation problem,
one design column per node pair, assembled as a sparse matrix, and the
planted-group β₀ separation experiment.
"""

import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import sparse

from .data import DataMatrix, normalize, sample_correlation, sample_cross_correlation
from .errors import AgreementError, ValidationError
from .filtration import build_filtration
from .lasso import (
    DEFAULT_MAX_PASSES,
    LassoConvergenceError,
    coordinate_descent,
    reference_lasso,
)
from .logging import get_logger, log_performance_metrics
from .pipeline import TaskRunner
from .synth import DEFAULT_SEED, Structure, synth_data
from .thresholding import LambdaGrid, sparse_cross_correlation

logger = get_logger(__name__)

AGREEMENT_TOL = 1e-5
LASSO_TOL = 1e-10

Baseline = Literal["pairwise", "vectorized"]


class AgreementFailureError(AgreementError):
    """The two benchmarked methods returned different solutions."""

    def __init__(self, n: int, p: int, agreement: float, tolerance: float):
        self.n = n
        self.p = p
        self.agreement = agreement
        super().__init__(
            f"Methods disagree at n={n}, p={p}: max difference {agreement:.3g} "
            f"exceeds {tolerance:.3g}"
        )


class BenchConfigError(ValidationError):
    """Benchmark parameters are invalid."""

    pass


@dataclass(frozen=True)
class BenchCell:
    """Timings of both methods at one (n, p)."""

    n: int
    p: int
    t_soft: float
    t_lasso: float
    agreement: float

    @property
    def ratio(self) -> float:
        return self.t_lasso / max(self.t_soft, 1e-12)


@dataclass(frozen=True)
class BenchReport:
    """Benchmark outcome over an (n, p) grid.

    Attributes:
        methods: Names of the fast and the baseline method
        cells: One entry per (n, p)
        seed: Seed of the synthetic data
        grid_count: λ values solved per cell
        tolerance: Largest accepted max-norm difference
    """

    methods: tuple[str, str]
    cells: tuple[BenchCell, ...]
    seed: int
    grid_count: int
    tolerance: float = AGREEMENT_TOL

    @property
    def valid(self) -> bool:
        return all(cell.agreement <= self.tolerance for cell in self.cells)

    def rows(self) -> list[tuple[int, int, float, float, float]]:
        """``(n, p, t_soft, t_lasso, ratio)`` per cell."""
        return [(c.n, c.p, c.t_soft, c.t_lasso, c.ratio) for c in self.cells]

    def agreement_summary(self) -> dict[str, object]:
        """Timing-free summary; identical across runs with the same seed."""
        return {
            "methods": list(self.methods),
            "seed": self.seed,
            "grid_count": self.grid_count,
            "tolerance": self.tolerance,
            "valid": self.valid,
            "cells": [
                {"n": c.n, "p": c.p, "agreement": c.agreement} for c in self.cells
            ],
        }


def vectorized_cross_problem(
    x: DataMatrix, y: DataMatrix
) -> tuple[sparse.csc_array, np.ndarray]:
    """
    Sparse cross-correlation as one LASSO problem over all node pairs.

    Column ``k = i*p + j`` of the ``n·p² x p²`` design holds ``x_i`` in rows
    ``k*n`` to ``(k+1)*n``, and the matching slice of the target holds
    ``y_j``. The columns have disjoint supports, so the design is
    orthogonal; it is stored sparse, never dense.

    Returns:
        (design, target)
    """
    n, p = x.n, x.p
    if y.values.shape != (n, p):
        raise BenchConfigError("Paired data must have the same shape")
    size = n * p * p
    data = np.repeat(x.values.T, p, axis=0).ravel()
    indices = np.arange(size)
    indptr = np.arange(0, size + 1, n)
    design = sparse.csc_array((data, indices, indptr), shape=(size, p * p))
    target = np.tile(y.values.T, (p, 1)).ravel()
    return design, target


def solve_vectorized_cross(
    x: DataMatrix,
    y: DataMatrix,
    lam: float,
    tol: float = LASSO_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
) -> np.ndarray:
    """Numerical sparse cross-correlations ``β[i, j]`` from the vectorized problem."""
    design, target = vectorized_cross_problem(x, y)
    result = coordinate_descent(design, target, lam, tol=tol, max_passes=max_passes)
    if not result.converged:
        raise LassoConvergenceError(
            f"Vectorized cross-correlation LASSO stopped after {result.passes} passes",
            trace=result.objective_trace,
        )
    return result.coefficients.reshape(x.p, x.p)


def solve_pairwise_cross(
    x: DataMatrix, y: DataMatrix, lam: float, tol: float = LASSO_TOL
) -> np.ndarray:
    """Numerical sparse cross-correlations, one generic 1-D LASSO per pair."""
    p = x.p
    beta = np.zeros((p, p))
    for i in range(p):
        column = [x.values[:, i]]
        for j in range(p):
            beta[i, j] = reference_lasso(column, y.values[:, j], lam, tol=tol)[0]
    return beta


def paired_data(n: int, p: int, seed: int) -> tuple[DataMatrix, DataMatrix]:
    """Normalized standard-normal paired modalities drawn from one seed."""
    x = synth_data(n, p, seed=seed)
    y = synth_data(n, p, seed=seed + 1)
    return normalize(x), normalize(y)


def bench_sparse_cross(
    n_list: Sequence[int],
    p_list: Sequence[int],
    grid_count: int = 10,
    seed: int = DEFAULT_SEED,
    tolerance: float = AGREEMENT_TOL,
    lasso_tol: float = LASSO_TOL,
    baseline: Baseline = "pairwise",
    threads: int = 1,
) -> BenchReport:
    """
    Time soft-thresholding against coordinate-descent LASSO.

    For every (n, p) both methods solve the sparse cross-correlation problem
    at ``grid_count`` λ values spanning ``[0, max |cross-correlation|]``.

    Args:
        n_list: Observation counts
        p_list: Node counts
        grid_count: λ values per cell
        seed: Seed of the synthetic data
        tolerance: Largest accepted max-norm difference
        lasso_tol: KKT tolerance of the numerical solver
        baseline: ``"pairwise"`` (one 1-D problem per node pair) or
            ``"vectorized"`` (one problem over all pairs)
        threads: Cells timed concurrently. Keep 1 for stable timings

    Raises:
        AgreementFailureError: If any cell disagrees beyond ``tolerance``
    """
    if not n_list or not p_list:
        raise BenchConfigError("n and p lists must not be empty")
    if grid_count < 2:
        raise BenchConfigError("grid_count must be at least 2")
    if baseline not in ("pairwise", "vectorized"):
        raise BenchConfigError(f"Unknown baseline: {baseline}")

    def run_cell(shape: tuple[int, int]) -> BenchCell:
        n, p = shape
        x, y = paired_data(n, p, seed)
        cross = sample_cross_correlation(x, y)
        top = float(np.abs(cross.entries).max())
        grid = LambdaGrid.uniform(grid_count, top) if top > 0 else LambdaGrid((0.0,))

        t0 = time.perf_counter()
        soft = [sparse_cross_correlation(cross, lam) for lam in grid]
        t_soft = time.perf_counter() - t0

        t0 = time.perf_counter()
        if baseline == "pairwise":
            numeric = [solve_pairwise_cross(x, y, lam, lasso_tol) for lam in grid]
        else:
            numeric = [solve_vectorized_cross(x, y, lam, lasso_tol) for lam in grid]
        t_lasso = time.perf_counter() - t0

        agreement = max(
            float(np.abs(est.matrix.entries - beta).max())
            for est, beta in zip(soft, numeric, strict=True)
        )
        if agreement > tolerance:
            raise AgreementFailureError(n, p, agreement, tolerance)
        cell = BenchCell(n=n, p=p, t_soft=t_soft, t_lasso=t_lasso, agreement=agreement)
        logger.info(
            "Benchmark cell",
            n=n,
            p=p,
            t_soft=t_soft,
            t_lasso=t_lasso,
            ratio=cell.ratio,
            agreement=agreement,
        )
        return cell

    started = time.perf_counter()
    shapes = [(n, p) for n in n_list for p in p_list]
    cells = TaskRunner(threads).map_values(run_cell, shapes)

    log_performance_metrics(
        logger, "bench_sparse_cross", time.perf_counter() - started, len(cells)
    )
    return BenchReport(
        methods=("soft-threshold", f"lasso-{baseline}"),
        cells=tuple(cells),
        seed=seed,
        grid_count=grid_count,
        tolerance=tolerance,
    )


@dataclass(frozen=True)
class SeparationReport:
    """β₀ curves of two planted groups on a shared grid.

    Attributes:
        grid: λ values over [0, 1]
        curves_a: β₀ curve per seed, group A
        curves_b: β₀ curve per seed, group B
        mid_index: Grid position compared
        differences: ``β₀_B − β₀_A`` at ``mid_index``, per seed
        p: Node count
    """

    grid: LambdaGrid
    curves_a: tuple[tuple[int, ...], ...]
    curves_b: tuple[tuple[int, ...], ...]
    mid_index: int
    differences: tuple[int, ...] = field(default=())
    p: int = 0

    @property
    def min_difference(self) -> int:
        return min(self.differences)

    @property
    def separated(self) -> bool:
        """Whether every seed separates the groups by at least p/4 components."""
        return all(d >= self.p / 4 for d in self.differences)


def beta0_separation(
    n: int = 100,
    p: int = 20,
    within_a: float = 0.7,
    within_b: float = 0.3,
    blocks: int = 2,
    seeds: Sequence[int] = tuple(range(10)),
    grid_count: int = 21,
) -> SeparationReport:
    """
    Compare the correlation β₀ curves of two planted-block groups.

    Both groups share block layout and zero between-block correlation and
    differ only in within-block correlation. Filtrations use a fixed grid
    over [0, 1] so curves from different seeds line up.
    """
    grid = LambdaGrid.uniform(grid_count, 1.0)
    mid = grid_count // 2
    curves_a: list[tuple[int, ...]] = []
    curves_b: list[tuple[int, ...]] = []
    for seed in seeds:
        for within, curves in ((within_a, curves_a), (within_b, curves_b)):
            data = synth_data(n, p, Structure.planted(blocks, within), seed=seed)
            corr = sample_correlation(normalize(data))
            curves.append(build_filtration(corr, grid).beta0)
    differences = tuple(b[mid] - a[mid] for a, b in zip(curves_a, curves_b, strict=True))
    report = SeparationReport(
        grid=grid,
        curves_a=tuple(curves_a),
        curves_b=tuple(curves_b),
        mid_index=mid,
        differences=differences,
        p=p,
    )
    logger.info(
        "Group separation",
        lam=grid[mid],
        differences=list(differences),
        separated=report.separated,
    )
    return report
