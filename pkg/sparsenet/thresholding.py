"""
Closed-form sparse correlations and cross-correlations.

With centered unit-norm data the L1-penalized least-squares problems that
define sparse correlations and sparse cross-correlations are separable, one
coordinate per node pair, and each coordinate is solved by soft-thresholding
the sample (cross-)correlation. No iterative optimization is needed.
"""

import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from scipy import sparse

from .data import MatrixKind, NonFiniteError, SymmetricMatrix, row_blocks
from .errors import ValidationError
from .logging import get_logger

logger = get_logger(__name__)

# Estimates at or above this dimension are returned as coordinate triplets
DENSE_LIMIT = 2000
CROSS_BOUND_TOL = 1e-12


class ThresholdError(ValidationError):
    """Base exception for thresholding errors."""

    pass


class EmptyMatrixError(ThresholdError):
    """A matrix has too few nodes to define any pair."""

    pass


class GridError(ThresholdError):
    """A lambda grid is malformed."""

    pass


class EstimateSource(StrEnum):
    """Which sample matrix a sparse estimate was thresholded from."""

    CORRELATION = "correlation"
    CROSS_CORRELATION = "cross-correlation"


class GridOrigin(StrEnum):
    """How a lambda grid was produced."""

    EXPLICIT = "explicit"
    UNIFORM = "uniform"
    DATA_DRIVEN = "data-driven"


@dataclass(frozen=True)
class LambdaGrid:
    """Strictly increasing sparsity values, starting at or above zero."""

    values: tuple[float, ...]
    origin: GridOrigin = GridOrigin.EXPLICIT

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if not values:
            raise GridError("Lambda grid is empty")
        if not all(math.isfinite(v) for v in values):
            raise GridError("Lambda grid contains non-finite values")
        if values[0] < 0:
            raise GridError(f"Lambda grid starts below zero: {values[0]}")
        if any(b <= a for a, b in zip(values, values[1:], strict=False)):
            raise GridError("Lambda grid must be strictly increasing")
        object.__setattr__(self, "values", values)

    @classmethod
    def explicit(cls, values: Iterable[float]) -> "LambdaGrid":
        """Grid from caller-supplied values (sorted, duplicates rejected)."""
        return cls(tuple(sorted(float(v) for v in values)), GridOrigin.EXPLICIT)

    @classmethod
    def uniform(cls, count: int, maximum: float) -> "LambdaGrid":
        """``count`` evenly spaced values covering ``[0, maximum]``."""
        if count < 2:
            raise GridError(f"Uniform grid needs at least 2 points, got {count}")
        if maximum <= 0:
            raise GridError("Uniform grid maximum must be positive")
        return cls(tuple(np.linspace(0.0, maximum, count).tolist()), GridOrigin.UNIFORM)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

    def __getitem__(self, index: int) -> float:
        return self.values[index]

    def as_array(self) -> np.ndarray:
        """Grid values as a float array."""
        return np.asarray(self.values, dtype=np.float64)

    def subset(self, indices: Sequence[int]) -> "LambdaGrid":
        """Grid restricted to the given positions."""
        return LambdaGrid(tuple(self.values[i] for i in indices), self.origin)


@dataclass(frozen=True)
class SparseEstimate:
    """A soft-thresholded (cross-)correlation matrix.

    Exactly one of ``dense`` and ``triplets`` is set. Symmetric estimates
    keep only the strict upper triangle in ``triplets`` (the diagonal is 1);
    cross-correlation estimates keep every nonzero entry.

    Attributes:
        lam: Sparsity parameter the estimate was computed at
        source: Sample matrix the estimate came from
        dim: Number of nodes p
        nnz: Number of nonzero estimated entries. Off-diagonal entries (both
            triangles) for correlations, all p² entries for cross-correlations
    """

    lam: float
    source: EstimateSource
    dim: int
    nnz: int
    dense: np.ndarray | None = None
    triplets: sparse.coo_array | None = None

    @property
    def symmetric(self) -> bool:
        """Whether the estimate is a symmetric correlation estimate."""
        return self.source == EstimateSource.CORRELATION

    @property
    def matrix(self) -> SymmetricMatrix:
        """Dense view of the estimate (materializes triplet storage)."""
        if self.dense is not None:
            values = self.dense
        else:
            assert self.triplets is not None
            values = self.triplets.toarray()
            if self.symmetric:
                values = values + values.T
                np.fill_diagonal(values, 1.0)
        return SymmetricMatrix(
            values, MatrixKind.SPARSE_ESTIMATE, lam=self.lam, symmetric=self.symmetric
        )

    def edges(self, threshold: float = 0.0) -> Iterator[tuple[int, int, float]]:
        """Yield ``(i, j, value)`` for estimated entries with ``|value| > threshold``.

        Symmetric estimates report each pair once with ``i < j``.
        """
        if self.triplets is not None:
            coo = self.triplets
            rows, cols, vals = coo.row, coo.col, coo.data
            order = np.lexsort((cols, rows))
            rows, cols, vals = rows[order], cols[order], vals[order]
        else:
            assert self.dense is not None
            mask = np.abs(self.dense) > threshold
            if self.symmetric:
                mask = np.triu(mask, 1)
            rows, cols = np.nonzero(mask)
            vals = self.dense[rows, cols]
        for i, j, v in zip(rows.tolist(), cols.tolist(), vals.tolist(), strict=True):
            if abs(v) > threshold:
                yield i, j, v


def soft_threshold_scalar(r: float, lam: float) -> float:
    """Soft-threshold a single value.

    Returns ``r - lam`` if ``r > lam``, ``r + lam`` if ``r < -lam`` and 0
    otherwise; ties ``|r| == lam`` map to exactly 0.

    Raises:
        NonFiniteError: If ``r`` or ``lam`` is not finite
        ThresholdError: If ``lam`` is negative
    """
    if not (math.isfinite(r) and math.isfinite(lam)):
        raise NonFiniteError(f"soft_threshold_scalar got non-finite input ({r}, {lam})")
    _check_lambda(lam)
    if r > lam:
        return r - lam
    if r < -lam:
        return r + lam
    return 0.0


def soft_threshold(values: np.ndarray, lam: float) -> np.ndarray:
    """Elementwise soft-thresholding ``sign(x) * max(|x| - lam, 0)``."""
    out = np.sign(values) * np.maximum(np.abs(values) - lam, 0.0)
    # Drop negative zeros so exported values read as 0
    out[out == 0.0] = 0.0
    return out


def _check_lambda(lam: float) -> None:
    if not math.isfinite(lam):
        raise NonFiniteError(f"Lambda must be finite, got {lam}")
    if lam < 0:
        raise ThresholdError(f"Lambda must be non-negative, got {lam}")


def sparse_correlation(
    corr: SymmetricMatrix, lam: float, dense_limit: int = DENSE_LIMIT
) -> SparseEstimate:
    """Sparse correlation estimate at ``lam``.

    Off-diagonal entries are soft-thresholded sample correlations; the
    diagonal is excluded from the penalty and stays 1.

    Args:
        corr: Sample correlation matrix
        lam: Sparsity parameter, ``lam >= 0``
        dense_limit: Dimension from which triplet storage is used

    Returns:
        SparseEstimate with source ``correlation``
    """
    if corr.kind != MatrixKind.CORRELATION:
        raise ThresholdError(f"Expected a correlation matrix, got {corr.kind}")
    _check_lambda(lam)
    p = corr.dim

    if p < dense_limit:
        est = soft_threshold(corr.entries, lam)
        np.fill_diagonal(est, 1.0)
        nnz = int(np.count_nonzero(est)) - p
        return SparseEstimate(lam, EstimateSource.CORRELATION, p, nnz, dense=est)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    for start, stop in row_blocks(p):
        block = soft_threshold(corr.entries[start:stop], lam)
        r, c = np.nonzero(block)
        r = r + start
        upper = c > r
        rows.append(r[upper])
        cols.append(c[upper])
        vals.append(block[r[upper] - start, c[upper]])
    triplets = _coo(rows, cols, vals, p)
    logger.debug("Sparse correlation stored as triplets", dim=p, lam=lam)
    return SparseEstimate(
        lam, EstimateSource.CORRELATION, p, 2 * triplets.nnz, triplets=triplets
    )


def sparse_cross_correlation(
    cross: SymmetricMatrix, lam: float, dense_limit: int = DENSE_LIMIT
) -> SparseEstimate:
    """Sparse cross-correlation estimate at ``lam``.

    Every one of the p² entries, the diagonal included, is soft-thresholded.

    Args:
        cross: Sample cross-correlation matrix
        lam: Sparsity parameter, ``lam >= 0``
        dense_limit: Dimension from which triplet storage is used

    Returns:
        SparseEstimate with source ``cross-correlation``
    """
    if cross.kind != MatrixKind.CROSS_CORRELATION:
        raise ThresholdError(f"Expected a cross-correlation matrix, got {cross.kind}")
    _check_lambda(lam)
    bound = 1.0 + CROSS_BOUND_TOL
    if cross.entries.max() > bound or cross.entries.min() < -bound:
        raise ThresholdError("Cross-correlation entries must lie in [-1, 1]")
    p = cross.dim

    if p < dense_limit:
        est = soft_threshold(cross.entries, lam)
        return SparseEstimate(
            lam,
            EstimateSource.CROSS_CORRELATION,
            p,
            int(np.count_nonzero(est)),
            dense=est,
        )

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    for start, stop in row_blocks(p):
        block = soft_threshold(cross.entries[start:stop], lam)
        r, c = np.nonzero(block)
        rows.append(r + start)
        cols.append(c)
        vals.append(block[r, c])
    triplets = _coo(rows, cols, vals, p)
    return SparseEstimate(
        lam, EstimateSource.CROSS_CORRELATION, p, triplets.nnz, triplets=triplets
    )


def _coo(
    rows: list[np.ndarray], cols: list[np.ndarray], vals: list[np.ndarray], p: int
) -> sparse.coo_array:
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
    else:
        r = c = np.empty(0, dtype=np.int64)
        v = np.empty(0)
    return sparse.coo_array((v, (r, c)), shape=(p, p))


def sparse_correlation_path(
    corr: SymmetricMatrix, grid: LambdaGrid, dense_limit: int = DENSE_LIMIT
) -> list[SparseEstimate]:
    """Sparse correlation estimates at every value of ``grid``."""
    path = [sparse_correlation(corr, lam, dense_limit) for lam in grid]
    logger.info(
        "Computed sparse correlation path",
        points=len(path),
        nnz=[est.nnz for est in path],
    )
    return path


def lambda_grid_from_data(m: SymmetricMatrix, count: int) -> LambdaGrid:
    """Uniform grid from 0 to the largest off-diagonal magnitude of ``m``.

    The top value leaves no off-diagonal entry strictly above it, so the
    threshold graph at the last grid point is empty.

    Raises:
        EmptyMatrixError: If ``m`` has fewer than two nodes
        GridError: If ``count < 2``
    """
    if m.dim < 2:
        raise EmptyMatrixError("Need at least two nodes to build a lambda grid")
    if count < 2:
        raise GridError(f"Grid count must be at least 2, got {count}")
    top = m.max_off_diagonal()
    if top == 0.0:
        logger.warning(
            "All off-diagonal entries are zero; using degenerate grid", dim=m.dim
        )
        return LambdaGrid((0.0,), GridOrigin.DATA_DRIVEN)
    values = np.linspace(0.0, top, count)
    values[-1] = top
    return LambdaGrid(tuple(values.tolist()), GridOrigin.DATA_DRIVEN)
