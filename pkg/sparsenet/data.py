"""
Data matrices and the sample correlation structure computed from them.

A data matrix holds n observations (rows, subjects) of p nodes (columns).
Normalization centers every column and scales it to unit Euclidean norm, so
that inner products of columns are sample correlations.
"""

from collections.abc import Iterator
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import scipy.linalg

from .errors import ValidationError
from .logging import get_logger

logger = get_logger(__name__)

CENTER_TOL = 1e-10
NORM_TOL = 1e-10
CORRELATION_TOL = 1e-12
CONSTANT_NORM = 1e-12

# Rows per block when scanning large p x p matrices; keeps temporaries small
BLOCK_ELEMENTS = 4_000_000


class DataError(ValidationError):
    """Base exception for data-matrix errors."""

    pass


class NonFiniteError(DataError):
    """Input contains NaN or infinite values."""

    pass


class ConstantColumnError(DataError):
    """One or more columns have zero variance and cannot be normalized."""

    def __init__(self, columns: list[int]):
        self.columns = columns
        super().__init__(
            f"Constant column(s) {columns} cannot be scaled to unit norm; "
            "use --drop-constant to remove them"
        )


class NotNormalizedError(DataError):
    """A data matrix lacks the normalization an operation requires."""

    pass


class ShapeMismatchError(DataError):
    """Paired data matrices have different shapes."""

    pass


class MatrixError(ValidationError):
    """A matrix violates the invariants of its kind."""

    pass


class Normalization(StrEnum):
    """Normalization state of a data matrix."""

    RAW = "raw"
    CENTERED = "centered"
    UNIT_NORM = "centered-unit-norm"


class MatrixKind(StrEnum):
    """What a square matrix represents."""

    COVARIANCE = "covariance"
    CORRELATION = "correlation"
    CROSS_CORRELATION = "cross-correlation"
    PRECISION = "precision"
    SPARSE_ESTIMATE = "sparse-estimate"


def row_blocks(p: int, width: int | None = None) -> Iterator[tuple[int, int]]:
    """Yield ``(start, stop)`` row ranges covering ``p`` rows of a wide matrix."""
    width = width if width is not None else p
    step = max(1, BLOCK_ELEMENTS // max(width, 1))
    for start in range(0, p, step):
        yield start, min(start + step, p)


@dataclass(frozen=True)
class DataMatrix:
    """An n x p matrix of observations.

    Attributes:
        values: Observations, rows are subjects and columns are nodes
        normalization: Normalization state the values satisfy
        node_names: Optional column names
        column_index: Original column positions, set when columns were dropped
    """

    values: np.ndarray
    normalization: Normalization = Normalization.RAW
    node_names: tuple[str, ...] | None = None
    column_index: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise DataError(f"Data matrix must be 2-D, got {values.ndim}-D")
        n, p = values.shape
        if n < 2 or p < 1:
            raise DataError(f"Need n >= 2 and p >= 1, got n={n}, p={p}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("Data matrix contains non-finite entries")
        if self.node_names is not None and len(self.node_names) != p:
            raise DataError(
                f"Got {len(self.node_names)} node names for {p} columns"
            )
        if self.column_index is not None and len(self.column_index) != p:
            raise DataError("Column index map does not match column count")

        if self.normalization != Normalization.RAW:
            sums = np.abs(values.sum(axis=0))
            if np.any(sums > CENTER_TOL * n):
                raise NotNormalizedError("Columns are not centered")
        if self.normalization == Normalization.UNIT_NORM:
            norms = np.einsum("ij,ij->j", values, values)
            if np.any(np.abs(norms - 1.0) > NORM_TOL):
                raise NotNormalizedError("Columns do not have unit norm")

        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        """Number of observations."""
        return int(self.values.shape[0])

    @property
    def p(self) -> int:
        """Number of nodes."""
        return int(self.values.shape[1])

    def column(self, j: int) -> np.ndarray:
        """Measurement vector of node ``j``."""
        return self.values[:, j]

    def names(self) -> tuple[str, ...]:
        """Node names, defaulting to the column positions."""
        if self.node_names is not None:
            return self.node_names
        return tuple(str(j) for j in range(self.p))


@dataclass(frozen=True)
class SymmetricMatrix:
    """A dense p x p matrix of a given kind.

    For every kind except cross-correlation the upper triangle is
    authoritative and the lower triangle is mirrored from it on construction.
    Sparse cross-correlation estimates pass ``symmetric=False``.
    """

    entries: np.ndarray
    kind: MatrixKind
    lam: float | None = None
    symmetric: bool | None = field(default=None)

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=np.float64, copy=True)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise MatrixError(f"Expected a square matrix, got {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise NonFiniteError(f"{self.kind} matrix contains non-finite entries")

        symmetric = self.symmetric
        if symmetric is None:
            symmetric = self.kind != MatrixKind.CROSS_CORRELATION
        if symmetric:
            _mirror_upper(entries)

        if self.kind == MatrixKind.CORRELATION:
            diag = np.diagonal(entries)
            if np.any(np.abs(diag - 1.0) > CORRELATION_TOL):
                raise MatrixError("Correlation matrix diagonal must be 1")
            bound = 1.0 + CORRELATION_TOL
            if entries.max() > bound or entries.min() < -bound:
                raise MatrixError("Correlation entries must lie in [-1, 1]")

        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "symmetric", symmetric)

    @property
    def dim(self) -> int:
        """Matrix dimension p."""
        return int(self.entries.shape[0])

    def max_off_diagonal(self) -> float:
        """Largest off-diagonal magnitude, scanned block by block."""
        best = 0.0
        for start, stop in row_blocks(self.dim):
            block = np.abs(self.entries[start:stop])
            rows = np.arange(stop - start)
            block[rows, rows + start] = 0.0
            best = max(best, float(block.max(initial=0.0)))
        return best


def _mirror_upper(a: np.ndarray) -> None:
    """Copy the upper triangle of ``a`` onto its lower triangle in place."""
    p = a.shape[0]
    for start, stop in row_blocks(p):
        a[start:stop, :start] = a[:start, start:stop].T
        diag_block = a[start:stop, start:stop]
        a[start:stop, start:stop] = np.triu(diag_block) + np.triu(diag_block, 1).T


@dataclass(frozen=True)
class RankReport:
    """Numerical rank of a matrix."""

    rank: int
    deficient: bool
    tol: float
    singular_values: np.ndarray


def center(data: DataMatrix) -> DataMatrix:
    """Subtract the column means.

    Args:
        data: Data matrix in any normalization state

    Returns:
        Centered data matrix with the same column order
    """
    if data.normalization != Normalization.RAW:
        return data
    centered = data.values - data.values.mean(axis=0)
    return DataMatrix(
        centered,
        Normalization.CENTERED,
        node_names=data.node_names,
        column_index=data.column_index,
    )


def normalize(data: DataMatrix, drop_constant: bool = False) -> DataMatrix:
    """Center every column and scale it to unit Euclidean norm.

    Args:
        data: Data matrix to normalize
        drop_constant: Remove zero-variance columns instead of failing

    Returns:
        Centered unit-norm data matrix; when columns were dropped,
        ``column_index`` maps the kept columns to their original positions

    Raises:
        ConstantColumnError: If a column has zero variance and
            ``drop_constant`` is False
    """
    centered = data.values - data.values.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", centered, centered))
    constant = np.flatnonzero(norms < CONSTANT_NORM)

    keep = np.arange(data.p)
    if constant.size:
        if not drop_constant or constant.size == data.p:
            raise ConstantColumnError(constant.tolist())
        keep = np.flatnonzero(norms >= CONSTANT_NORM)
        logger.warning(
            "Dropping constant columns",
            dropped=constant.tolist(),
            kept=int(keep.size),
        )

    scaled = centered[:, keep] / norms[keep]
    # A second centering pass removes the rounding left by the first
    scaled -= scaled.mean(axis=0)
    scaled /= np.sqrt(np.einsum("ij,ij->j", scaled, scaled))

    original = data.column_index if data.column_index is not None else range(data.p)
    original = tuple(original)
    column_index = None
    node_names = data.node_names
    if constant.size:
        column_index = tuple(original[j] for j in keep)
        if node_names is not None:
            node_names = tuple(node_names[j] for j in keep)
    elif data.column_index is not None:
        column_index = data.column_index

    return DataMatrix(
        scaled,
        Normalization.UNIT_NORM,
        node_names=node_names,
        column_index=column_index,
    )


def sample_correlation(data: DataMatrix) -> SymmetricMatrix:
    """Sample correlation matrix ``XᵀX`` of normalized data.

    Raises:
        NotNormalizedError: If the data is not centered with unit-norm columns
    """
    if data.normalization != Normalization.UNIT_NORM:
        raise NotNormalizedError(
            "sample_correlation needs centered unit-norm data; call normalize()"
        )
    x = data.values
    corr = x.T @ x
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    return SymmetricMatrix(corr, MatrixKind.CORRELATION)


def sample_covariance(data: DataMatrix) -> SymmetricMatrix:
    """Maximum-likelihood covariance ``(1/n) JᵀJ`` of centered data.

    Raw data is centered first. Normalized data yields the correlation
    matrix divided by n.
    """
    centered = center(data)
    x = centered.values
    cov = (x.T @ x) / centered.n
    return SymmetricMatrix(cov, MatrixKind.COVARIANCE)


def sample_cross_correlation(x: DataMatrix, y: DataMatrix) -> SymmetricMatrix:
    """Cross-correlations ``x(v_i)ᵀ y(v_j)`` of paired normalized data.

    Args:
        x: First modality, centered unit-norm
        y: Second modality, same shape as ``x``

    Returns:
        Full p x p cross-correlation matrix, generally asymmetric

    Raises:
        ShapeMismatchError: If the two matrices differ in shape
        NotNormalizedError: If either matrix is not normalized
    """
    if x.values.shape != y.values.shape:
        raise ShapeMismatchError(
            f"Paired data shapes differ: {x.values.shape} vs {y.values.shape}"
        )
    for name, data in (("x", x), ("y", y)):
        if data.normalization != Normalization.UNIT_NORM:
            raise NotNormalizedError(f"{name} must be centered unit-norm data")
    cross = x.values.T @ y.values
    np.clip(cross, -1.0, 1.0, out=cross)
    return SymmetricMatrix(cross, MatrixKind.CROSS_CORRELATION)


def rank_diagnostic(m: SymmetricMatrix, tol: float | None = None) -> RankReport:
    """Numerical rank of a matrix from its singular values.

    Args:
        m: Matrix to inspect
        tol: Singular values above this count toward the rank. Defaults to
            ``dim * eps * largest singular value``

    Returns:
        RankReport with the rank and whether it is below the dimension
    """
    if m.symmetric:
        singular = np.sort(np.abs(scipy.linalg.eigvalsh(m.entries)))[::-1]
    else:
        singular = scipy.linalg.svdvals(m.entries)
    largest = float(singular[0]) if singular.size else 0.0
    if tol is None:
        tol = m.dim * np.finfo(np.float64).eps * largest
    elif tol <= 0:
        raise MatrixError("Rank tolerance must be positive")
    rank = int(np.count_nonzero(singular > tol))
    report = RankReport(
        rank=rank, deficient=rank < m.dim, tol=float(tol), singular_values=singular
    )
    if report.deficient:
        logger.info("Matrix is rank deficient", rank=rank, dim=m.dim, kind=m.kind)
    return report
