"""
Graph filtrations over a grid of sparsity values.

Thresholding a matrix at increasing λ gives nested graphs: every edge
present at a larger λ is present at all smaller ones. The β₀ curve (number
of connected components per λ) and the component partitions are computed
incrementally: λ is processed from largest to smallest, edges are added as
the threshold falls, and one union-find is carried through the whole grid.

For graphical-LASSO estimates the fitted zero pattern has, at every λ, the
same components as thresholding the sample covariance at λ, even though
its edge sets need not be nested. ``glasso_filtration`` computes both and
compares them grid point by grid point.
"""

import time
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .data import DataMatrix, SymmetricMatrix, row_blocks, sample_covariance
from .errors import AgreementError, SparseNetError, ValidationError
from .glasso import DEFAULT_MAX_SWEEPS, DEFAULT_TOL, glasso_fit, glasso_fit_screened
from .graph import (
    ZERO_EPS,
    AdjacencyMatrix,
    AdjacencySource,
    GraphPartition,
    Symmetrize,
    UnionFind,
    connected_components,
    magnitude_block,
    threshold_adjacency,
    zero_pattern_adjacency,
)
from .logging import get_logger, log_performance_metrics
from .pipeline import TaskRunner
from .thresholding import LambdaGrid

logger = get_logger(__name__)

# Largest number of edges held in memory at once by the incremental builder
EDGE_BATCH = 5_000_000

Method = Literal["incremental", "scratch"]


class FiltrationError(ValidationError):
    """Base exception for filtration errors."""

    pass


class PartitionMismatchError(AgreementError):
    """Zero-pattern and thresholded-covariance partitions differ."""

    def __init__(self, indices: list[int]):
        self.indices = indices
        super().__init__(f"Partitions differ at grid indices {indices}")


@dataclass(frozen=True)
class FiltrationResult:
    """Components of a graph family along a λ grid.

    Attributes:
        grid: Sparsity values, ascending
        beta0: Component count at every grid value
        partitions: Component partition at every grid value
        edge_counts: Edge count at every grid value
        source: Adjacency rule behind the graphs
        adjacencies: Graphs at every grid value, when kept
    """

    grid: LambdaGrid
    beta0: tuple[int, ...]
    partitions: tuple[GraphPartition, ...]
    edge_counts: tuple[int, ...]
    source: AdjacencySource = AdjacencySource.THRESHOLD
    adjacencies: tuple[AdjacencyMatrix, ...] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        t = len(self.grid)
        lengths = {len(self.beta0), len(self.partitions), len(self.edge_counts)}
        if self.adjacencies is not None:
            lengths.add(len(self.adjacencies))
        if lengths != {t}:
            raise FiltrationError("Filtration fields must match the grid length")
        if any(b != part.kappa for b, part in zip(self.beta0, self.partitions, strict=True)):
            raise FiltrationError("beta0 must equal the component count of each partition")

    @classmethod
    def from_adjacencies(
        cls, grid: LambdaGrid, adjacencies: list[AdjacencyMatrix]
    ) -> "FiltrationResult":
        """Filtration from explicitly given graphs, one per grid value."""
        partitions = tuple(connected_components(a) for a in adjacencies)
        source = adjacencies[0].source if adjacencies else AdjacencySource.THRESHOLD
        return cls(
            grid=grid,
            beta0=tuple(p.kappa for p in partitions),
            partitions=partitions,
            edge_counts=tuple(a.n_edges for a in adjacencies),
            source=source,
            adjacencies=tuple(adjacencies),
        )

    def rows(self) -> Iterator[tuple[float, int, int]]:
        """Yield ``(lambda, beta0, edges)`` per grid value."""
        yield from zip(self.grid.values, self.beta0, self.edge_counts, strict=True)


@dataclass(frozen=True)
class NestednessReport:
    """Whether a filtration's node partitions and edge sets are nested.

    ``first_violation`` is the earliest grid index ``t`` at which the graph
    at ``t`` fails to nest inside the graph at ``t - 1``.
    """

    node_nested: bool
    edge_nested: bool
    node_violation: int | None = None
    edge_violation: int | None = None

    @property
    def first_violation(self) -> int | None:
        found = [v for v in (self.node_violation, self.edge_violation) if v is not None]
        return min(found) if found else None


def _buckets(grid: np.ndarray, magnitudes: np.ndarray) -> np.ndarray:
    """Number of grid values strictly below each magnitude.

    An entry with bucket ``k`` is an edge at grid index ``t`` iff ``t < k``.
    """
    return np.searchsorted(grid, magnitudes, side="left")


def _scan(
    m: SymmetricMatrix, grid: np.ndarray, symmetrize: Symmetrize, lo: int, hi: int
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(edges, buckets)`` per row block for buckets in ``[lo, hi]``."""
    p = m.dim
    cols = np.arange(p)
    for start, stop in row_blocks(p):
        buckets = _buckets(grid, magnitude_block(m, start, stop, symmetrize))
        upper = cols[None, :] > np.arange(start, stop)[:, None]
        mask = upper & (buckets >= lo) & (buckets <= hi)
        r, c = np.nonzero(mask)
        yield np.column_stack((r + start, c)), buckets[r, c]


def _histogram(
    m: SymmetricMatrix, grid: np.ndarray, symmetrize: Symmetrize
) -> np.ndarray:
    p, t = m.dim, grid.shape[0]
    hist = np.zeros(t + 1, dtype=np.int64)
    cols = np.arange(p)
    for start, stop in row_blocks(p):
        buckets = _buckets(grid, magnitude_block(m, start, stop, symmetrize))
        upper = cols[None, :] > np.arange(start, stop)[:, None]
        hist += np.bincount(buckets[upper], minlength=t + 1)
    return hist


def _incremental(
    m: SymmetricMatrix, grid: np.ndarray, symmetrize: Symmetrize
) -> tuple[list[np.ndarray], list[int]]:
    t_count = grid.shape[0]
    hist = _histogram(m, grid, symmetrize)
    # Edges at index t are the entries with bucket > t
    edge_counts = np.cumsum(hist[::-1])[::-1][1:].tolist()

    uf = UnionFind(m.dim)
    labels: list[np.ndarray | None] = [None] * t_count
    current = uf.labels()
    t = t_count - 1
    while t >= 0:
        if uf.count == 1:
            single = np.zeros(m.dim, dtype=np.int64)
            for rest in range(t, -1, -1):
                labels[rest] = single
            break

        hi = t + 1
        lo = hi
        total = int(hist[hi])
        while lo > 1 and total + int(hist[lo - 1]) <= EDGE_BATCH:
            lo -= 1
            total += int(hist[lo])

        if total > EDGE_BATCH:
            # One oversized bucket: stream it, order within a bucket is irrelevant
            for edges, _ in _scan(m, grid, symmetrize, hi, hi):
                uf.union_edges(edges)
                if uf.count == 1:
                    break
            current = uf.labels()
            labels[t] = current
            t -= 1
            continue

        parts = list(_scan(m, grid, symmetrize, lo, hi))
        edges = np.concatenate([e for e, _ in parts]) if parts else np.empty((0, 2), np.int64)
        buckets = np.concatenate([b for _, b in parts]) if parts else np.empty(0, np.int64)
        for bucket in range(hi, lo - 1, -1):
            chosen = edges[buckets == bucket]
            if chosen.size and uf.count > 1:
                uf.union_edges(chosen)
                current = uf.labels()
            labels[bucket - 1] = current
        t = lo - 2

    return [lab for lab in labels if lab is not None], edge_counts


def _scratch_point(
    m: SymmetricMatrix, lam: float, symmetrize: Symmetrize
) -> tuple[AdjacencyMatrix, GraphPartition]:
    adjacency = threshold_adjacency(m, lam, symmetrize)
    return adjacency, connected_components(adjacency)


def build_filtration(
    m: SymmetricMatrix,
    grid: LambdaGrid,
    method: Method = "incremental",
    symmetrize: Symmetrize = "max",
    keep_edges: bool = False,
    threads: int = 1,
) -> FiltrationResult:
    """
    Threshold filtration of ``m`` over ``grid``.

    Args:
        m: Matrix to threshold (correlation, covariance, cross-correlation)
        grid: Ascending λ values
        method: ``"incremental"`` (one union-find, descending λ) or
            ``"scratch"`` (independent graph and components per λ,
            parallel over grid points)
        symmetrize: Rule for asymmetric inputs, see threshold_adjacency
        keep_edges: Keep the graph at every grid value
        threads: Worker threads for the scratch method

    Returns:
        FiltrationResult with source ``threshold``
    """
    if m.dim < 1:
        raise FiltrationError("Cannot build a filtration on an empty matrix")
    started = time.perf_counter()

    if method == "scratch":
        points = TaskRunner(threads).map_values(
            lambda lam: _scratch_point(m, lam, symmetrize), list(grid.values)
        )
        adjacencies = [a for a, _ in points]
        partitions = tuple(part for _, part in points)
        edge_counts = [a.n_edges for a in adjacencies]
    elif method == "incremental":
        labels, edge_counts = _incremental(m, grid.as_array(), symmetrize)
        partitions = tuple(GraphPartition(lab) for lab in labels)
        adjacencies = (
            [threshold_adjacency(m, lam, symmetrize) for lam in grid.values]
            if keep_edges
            else []
        )
    else:
        raise FiltrationError(f"Unknown filtration method: {method}")

    result = FiltrationResult(
        grid=grid,
        beta0=tuple(part.kappa for part in partitions),
        partitions=partitions,
        edge_counts=tuple(int(c) for c in edge_counts),
        source=AdjacencySource.THRESHOLD,
        adjacencies=tuple(adjacencies) if keep_edges else None,
    )
    log_performance_metrics(
        logger,
        "build_filtration",
        time.perf_counter() - started,
        items_processed=len(grid),
        method=method,
        dim=m.dim,
    )
    return result


def _pair_codes(adjacency: AdjacencyMatrix) -> np.ndarray:
    return adjacency.edges[:, 0] * adjacency.dim + adjacency.edges[:, 1]


def verify_nestedness(f: FiltrationResult) -> NestednessReport:
    """
    Check that partitions refine and edge sets shrink along increasing λ.

    Threshold filtrations without stored graphs are edge-nested by
    construction.

    Raises:
        FiltrationError: With fewer than two grid points, or for a
            zero-pattern filtration whose graphs were not kept
    """
    if len(f.grid) < 2:
        raise FiltrationError("Nestedness needs at least two grid points")

    node_violation = None
    for t in range(1, len(f.partitions)):
        if not f.partitions[t].refines(f.partitions[t - 1]):
            node_violation = t
            break

    edge_violation = None
    if f.adjacencies is None:
        if f.source != AdjacencySource.THRESHOLD:
            raise FiltrationError("Edge nestedness needs the stored graphs")
    else:
        for t in range(1, len(f.adjacencies)):
            later = _pair_codes(f.adjacencies[t])
            earlier = _pair_codes(f.adjacencies[t - 1])
            if not np.all(np.isin(later, earlier)):
                edge_violation = t
                break

    return NestednessReport(
        node_nested=node_violation is None,
        edge_nested=edge_violation is None,
        node_violation=node_violation,
        edge_violation=edge_violation,
    )


@dataclass(frozen=True)
class GlassoFiltration:
    """Zero-pattern and thresholded-covariance filtrations on a shared grid.

    Attributes:
        zero_pattern: Components of the fitted precision zero pattern
        threshold: Components of ``|S|`` thresholded at each λ
        agreement: Whether the two partitions match, per kept grid value
        skipped: Indices into the requested grid that failed to fit
        nestedness: Nestedness of the zero-pattern filtration
    """

    zero_pattern: FiltrationResult
    threshold: FiltrationResult
    agreement: tuple[bool, ...]
    skipped: tuple[int, ...] = ()
    nestedness: NestednessReport | None = None

    @property
    def partitions_agree(self) -> bool:
        return all(self.agreement)

    def mismatches(self) -> list[int]:
        """Positions in the kept grid where the partitions differ."""
        return [t for t, ok in enumerate(self.agreement) if not ok]


def glasso_filtration(
    data: DataMatrix,
    grid: LambdaGrid,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    penalize_diagonal: bool = True,
    eps: float = ZERO_EPS,
    screened: bool = False,
    threads: int = 1,
    strict: bool = False,
) -> GlassoFiltration:
    """
    Fit the graphical LASSO at every grid value and compare partitions.

    Grid values whose fit fails (for instance λ = 0 with a singular sample
    covariance) are skipped with a warning; both filtrations cover the
    remaining values. Edge nestedness of the zero-pattern filtration is
    logged, not enforced.

    Args:
        data: Data matrix; its sample covariance ``(1/n) XᵀX`` is used
        grid: Ascending λ values
        tol: Graphical-LASSO tolerance
        max_sweeps: Graphical-LASSO sweep limit
        penalize_diagonal: Penalize the precision diagonal
        eps: Zero tolerance for the fitted precision
        screened: Fit by screening blocks. Off by default so the comparison
            does not rely on the equivalence it checks
        threads: Grid points fitted in parallel
        strict: Raise when any partition pair differs

    Raises:
        FiltrationError: If every grid value fails
        PartitionMismatchError: If ``strict`` and partitions differ
    """
    s = sample_covariance(data)

    def fit(lam: float) -> AdjacencyMatrix:
        if screened:
            solution = glasso_fit_screened(s, lam, tol, max_sweeps, penalize_diagonal)
        else:
            solution = glasso_fit(s, lam, tol, max_sweeps, penalize_diagonal)
        adjacency = zero_pattern_adjacency(solution.precision, eps)
        return AdjacencyMatrix(
            adjacency.dim, adjacency.edges, lam, AdjacencySource.ZERO_PATTERN
        )

    outcomes = TaskRunner(threads).map(fit, list(grid.values))
    kept: list[int] = []
    adjacencies: list[AdjacencyMatrix] = []
    skipped: list[int] = []
    for outcome in outcomes:
        if outcome.error is not None:
            if not isinstance(outcome.error, SparseNetError):
                raise outcome.error
            skipped.append(outcome.index)
            logger.warning(
                "Skipping grid point",
                index=outcome.index,
                lam=grid[outcome.index],
                error=str(outcome.error),
            )
            continue
        assert outcome.value is not None
        kept.append(outcome.index)
        adjacencies.append(outcome.value)

    if not kept:
        raise FiltrationError("Graphical LASSO failed at every grid value")

    sub_grid = grid.subset(kept)
    zero_pattern = FiltrationResult.from_adjacencies(sub_grid, adjacencies)
    threshold = build_filtration(s, sub_grid)
    agreement = tuple(
        a == b
        for a, b in zip(zero_pattern.partitions, threshold.partitions, strict=True)
    )

    nestedness = verify_nestedness(zero_pattern) if len(sub_grid) > 1 else None
    if nestedness is not None:
        logger.info(
            "Zero-pattern filtration nestedness",
            node_nested=nestedness.node_nested,
            edge_nested=nestedness.edge_nested,
            first_violation=nestedness.first_violation,
        )

    result = GlassoFiltration(
        zero_pattern=zero_pattern,
        threshold=threshold,
        agreement=agreement,
        skipped=tuple(skipped),
        nestedness=nestedness,
    )
    if not result.partitions_agree:
        logger.error("Partitions differ", indices=result.mismatches())
        if strict:
            raise PartitionMismatchError(result.mismatches())
    return result
