"""
Partial correlation networks.

Three routes are provided:

* from a precision matrix, ``ρ_ij = −θ_ij / √(θ_ii θ_jj)``;
* from least-squares node-wise regressions, correlating the residuals;
* from L1-penalized node-wise regressions when n is too small for least
  squares, symmetrizing the two coefficients of every node pair.

The residual route reports ``ρ_ij = −corr(r_i, r_j)``, where ``r_i`` is the
residual of node i regressed on all other nodes. The sign makes it agree
with the precision route exactly: residuals of full node-wise regressions
have covariance proportional to ``D Θ D`` with ``D = diag(1/θ_ii)``.
"""

import math
from collections.abc import Iterator
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Literal

import numpy as np
import scipy.linalg

from .data import DataMatrix, MatrixKind, Normalization, NotNormalizedError, SymmetricMatrix
from .errors import ValidationError
from .lasso import (
    DEFAULT_MAX_PASSES,
    DEFAULT_TOL,
    LassoConvergenceError,
    coordinate_descent,
)
from .logging import get_logger
from .pipeline import TaskRunner
from .thresholding import LambdaGrid

logger = get_logger(__name__)

RHO_TOL = 1e-9
RESIDUAL_NORM = 1e-12

Rule = Literal["and", "or"]


class PartialError(ValidationError):
    """Base exception for partial-correlation errors."""

    pass


class NonPositiveDiagonalError(PartialError):
    """A precision matrix has a non-positive diagonal entry."""

    pass


class UnderdeterminedError(PartialError):
    """Least-squares node-wise regression needs more observations than nodes."""

    pass


class PartialMethod(StrEnum):
    """How a partial correlation matrix was estimated."""

    PRECISION = "precision"
    RESIDUAL = "residual"
    SPARSE = "sparse"


@dataclass(frozen=True)
class PartialCorrelationMatrix:
    """Symmetric matrix of partial correlations with unit diagonal.

    Attributes:
        rho: p x p partial correlations
        method: Estimation route
        lam: Penalty for the sparse route
        failed_nodes: Nodes whose regression failed (their rows are empty)
        precision: Precision matrix the values came from, for that route
        coefficients: Node-wise coefficient matrix ``B[j, k] = β_jk``
    """

    rho: np.ndarray
    method: PartialMethod
    lam: float | None = None
    failed_nodes: tuple[int, ...] = ()
    precision: SymmetricMatrix | None = None
    coefficients: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        rho = np.array(self.rho, dtype=np.float64, copy=True)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise PartialError(f"Partial correlations must be square, got {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise PartialError("Partial correlations contain non-finite values")
        if np.abs(rho).max(initial=0.0) > 1.0 + RHO_TOL:
            raise PartialError("Partial correlations must lie in [-1, 1]")
        rho = np.triu(rho, 1)
        rho = rho + rho.T
        np.fill_diagonal(rho, 1.0)
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return int(self.rho.shape[0])

    def edges(
        self, threshold: float = 0.0, positive_only: bool = False
    ) -> Iterator[tuple[int, int, float]]:
        """Yield ``(i, j, ρ_ij)`` with ``i < j`` for ``|ρ_ij| > threshold``."""
        values = self.rho if not positive_only else np.where(self.rho > 0, self.rho, 0.0)
        rows, cols = np.nonzero(np.triu(np.abs(values) > threshold, 1))
        for i, j in zip(rows.tolist(), cols.tolist(), strict=True):
            yield i, j, float(self.rho[i, j])

    def n_edges(self) -> int:
        return sum(1 for _ in self.edges())


@dataclass(frozen=True)
class NodewiseRegression:
    """Regression of one node on all the others.

    ``coefficients`` has length p with a 0 at ``node``;
    ``residual = x_node − Σ_k coefficients[k] x_k``.
    """

    node: int
    coefficients: np.ndarray
    residual: np.ndarray
    lam: float = 0.0
    passes: int = 0
    rank_deficient: bool = False

    @property
    def support(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.coefficients).tolist())


def partial_from_precision(precision: SymmetricMatrix) -> PartialCorrelationMatrix:
    """Partial correlations ``−θ_ij / √(θ_ii θ_jj)`` of a precision matrix.

    Raises:
        NonPositiveDiagonalError: If any ``θ_ii <= 0``
    """
    theta = precision.entries
    diag = np.diagonal(theta)
    if np.any(diag <= 0):
        bad = np.flatnonzero(diag <= 0).tolist()
        raise NonPositiveDiagonalError(f"Precision diagonal is non-positive at {bad}")
    scale = 1.0 / np.sqrt(diag)
    rho = -theta * np.outer(scale, scale)
    rho[rho == 0.0] = 0.0
    return PartialCorrelationMatrix(
        rho, PartialMethod.PRECISION, lam=precision.lam, precision=precision
    )


def _require_centered(data: DataMatrix) -> None:
    if data.normalization == Normalization.RAW:
        raise NotNormalizedError("Node-wise regression needs centered data")


def _check_node(data: DataMatrix, node: int) -> None:
    if not 0 <= node < data.p:
        raise PartialError(f"Node {node} outside [0, {data.p})")


def _lse_from_gram(
    data: DataMatrix, gram: np.ndarray, node: int
) -> NodewiseRegression:
    p = data.p
    others = np.r_[0:node, node + 1 : p]
    g = gram[np.ix_(others, others)]
    b = gram[others, node]
    rank_deficient = False
    try:
        factor = scipy.linalg.cho_factor(g, lower=True, check_finite=False)
        beta = scipy.linalg.cho_solve(factor, b)
    except scipy.linalg.LinAlgError:
        rank_deficient = True
        beta = scipy.linalg.pinvh(g) @ b
        logger.warning("Rank-deficient regressors, using pseudo-inverse", node=node)
    coefficients = np.zeros(p)
    coefficients[others] = beta
    residual = data.values[:, node] - data.values[:, others] @ beta
    return NodewiseRegression(
        node=node,
        coefficients=coefficients,
        residual=residual,
        rank_deficient=rank_deficient,
    )


def _check_determined(data: DataMatrix, force_pinv: bool) -> None:
    if data.n <= data.p and not force_pinv:
        raise UnderdeterminedError(
            f"n={data.n} <= p={data.p}: least squares is underdetermined; "
            "use the L1-penalized node-wise regression (--lambda) or --force-pinv"
        )


def nodewise_lse(
    data: DataMatrix, node: int, force_pinv: bool = False
) -> NodewiseRegression:
    """
    Least-squares regression of ``node`` on every other node.

    Args:
        data: Centered data
        node: Response node j
        force_pinv: Allow ``n <= p`` and solve with a pseudo-inverse

    Returns:
        NodewiseRegression with ``lam = 0``; ``rank_deficient`` is set when
        the pseudo-inverse fallback was used

    Raises:
        UnderdeterminedError: If ``n <= p`` and ``force_pinv`` is False
    """
    _require_centered(data)
    _check_node(data, node)
    _check_determined(data, force_pinv)
    x = data.values
    return _lse_from_gram(data, x.T @ x, node)


def partial_from_residuals(
    data: DataMatrix, force_pinv: bool = False, threads: int = 1
) -> PartialCorrelationMatrix:
    """Partial correlations from the residuals of least-squares node-wise fits.

    Raises:
        UnderdeterminedError: If ``n <= p`` and ``force_pinv`` is False
    """
    _require_centered(data)
    _check_determined(data, force_pinv)
    x = data.values
    gram = x.T @ x
    fits = TaskRunner(threads).map_values(
        lambda j: _lse_from_gram(data, gram, j), list(range(data.p))
    )
    residuals = np.column_stack([fit.residual for fit in fits])
    norms = np.sqrt(np.einsum("ij,ij->j", residuals, residuals))
    degenerate = np.flatnonzero(norms < RESIDUAL_NORM)
    if degenerate.size:
        logger.warning(
            "Nodes are exactly explained by the others", nodes=degenerate.tolist()
        )
    safe = np.where(norms < RESIDUAL_NORM, np.inf, norms)
    unit = residuals / safe
    rho = -(unit.T @ unit)
    np.clip(rho, -1.0, 1.0, out=rho)
    rho[rho == 0.0] = 0.0
    return PartialCorrelationMatrix(
        rho,
        PartialMethod.RESIDUAL,
        failed_nodes=tuple(degenerate.tolist()),
        coefficients=np.vstack([fit.coefficients for fit in fits]),
    )


def nodewise_lasso(
    data: DataMatrix,
    node: int,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
    init: np.ndarray | None = None,
) -> NodewiseRegression:
    """
    L1-penalized regression of ``node`` on every other node.

    Minimizes ``½‖x_j − X_{−j}β‖² + λ‖β‖₁`` by cyclic coordinate descent.

    Args:
        data: Centered unit-norm data
        node: Response node j
        lam: Penalty, ``lam > 0``
        tol: KKT tolerance
        max_passes: Maximum coordinate passes
        init: Warm-start coefficients of length p

    Raises:
        LassoConvergenceError: If the KKT tolerance is not reached
    """
    if data.normalization != Normalization.UNIT_NORM:
        raise NotNormalizedError("nodewise_lasso needs centered unit-norm data")
    _check_node(data, node)
    if not math.isfinite(lam) or lam <= 0:
        raise PartialError(f"Lambda must be positive, got {lam}")
    others = np.r_[0:node, node + 1 : data.p]
    start = None if init is None else np.asarray(init, dtype=np.float64)[others]
    result = coordinate_descent(
        data.values[:, others],
        data.values[:, node],
        lam,
        tol=tol,
        max_passes=max_passes,
        init=start,
    )
    if not result.converged:
        raise LassoConvergenceError(
            f"Node {node} regression did not converge in {result.passes} passes",
            trace=result.objective_trace,
        )
    coefficients = np.zeros(data.p)
    coefficients[others] = result.coefficients
    return NodewiseRegression(
        node=node,
        coefficients=coefficients,
        residual=result.residual,
        lam=float(lam),
        passes=result.passes,
    )


def nodewise_lasso_path(
    data: DataMatrix,
    node: int,
    grid: LambdaGrid,
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
) -> list[NodewiseRegression]:
    """Node-wise LASSO fits along a grid, largest λ first with warm starts.

    Grid values of 0 are skipped. Results follow the grid's ascending order.
    """
    fits: dict[float, NodewiseRegression] = {}
    init: np.ndarray | None = None
    for lam in reversed(grid.values):
        if lam <= 0:
            continue
        fit = nodewise_lasso(data, node, lam, tol, max_passes, init=init)
        fits[lam] = fit
        init = fit.coefficients
    return [fits[lam] for lam in grid.values if lam in fits]


def symmetrize_coefficients(
    coefficients: np.ndarray, rule: Rule = "and", positive_only: bool = False
) -> np.ndarray:
    """
    Combine the two node-wise coefficients of every pair into one edge weight.

    With the AND rule a pair is linked only when both ``β_ij`` and ``β_ji``
    are nonzero; with the OR rule either suffices. A linked pair with two
    nonzero coefficients gets ``s·√|β_ij β_ji|``, where ``s`` is the sign of
    the larger-magnitude coefficient; with one nonzero coefficient (OR rule)
    that coefficient is used. Weights are clamped to [-1, 1].
    """
    if rule not in ("and", "or"):
        raise PartialError(f"Unknown symmetrization rule: {rule}")
    b = np.asarray(coefficients, dtype=np.float64)
    bt = b.T
    both = (b != 0) & (bt != 0)
    dominant = np.where(np.abs(b) >= np.abs(bt), b, bt)
    weight = np.where(both, np.sign(dominant) * np.sqrt(np.abs(b * bt)), 0.0)
    if rule == "or":
        weight = np.where(both, weight, b + bt)
    np.clip(weight, -1.0, 1.0, out=weight)
    if positive_only:
        weight = np.where(weight > 0, weight, 0.0)
    np.fill_diagonal(weight, 1.0)
    weight[weight == 0.0] = 0.0
    return weight


def sparse_partial_network(
    data: DataMatrix,
    lam: float,
    rule: Rule = "and",
    positive_only: bool = False,
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
    threads: int = 1,
) -> PartialCorrelationMatrix:
    """
    Sparse partial correlation network from node-wise LASSO fits.

    A pair is linked only where its coefficients are nonzero, so a zero
    coefficient (under the AND rule) always means a missing edge. Nodes
    whose regression fails are reported in ``failed_nodes`` and contribute
    all-zero coefficient rows.

    Args:
        data: Centered unit-norm data
        lam: Penalty, ``lam > 0``
        rule: ``"and"`` or ``"or"`` pair symmetrization
        positive_only: Keep only positive edges
        tol: KKT tolerance per regression
        max_passes: Maximum coordinate passes per regression
        threads: Regressions solved in parallel

    Returns:
        PartialCorrelationMatrix with method ``sparse``
    """
    if data.normalization != Normalization.UNIT_NORM:
        raise NotNormalizedError("sparse_partial_network needs centered unit-norm data")
    if not math.isfinite(lam) or lam <= 0:
        raise PartialError(f"Lambda must be positive, got {lam}")

    outcomes = TaskRunner(threads).map(
        lambda j: nodewise_lasso(data, j, lam, tol, max_passes),
        list(range(data.p)),
    )
    coefficients = np.zeros((data.p, data.p))
    failed: list[int] = []
    for outcome in outcomes:
        if outcome.error is not None or outcome.value is None:
            failed.append(outcome.index)
            logger.error(
                "Node-wise regression failed",
                node=outcome.index,
                error=str(outcome.error),
            )
            continue
        coefficients[outcome.index] = outcome.value.coefficients

    weight = symmetrize_coefficients(coefficients, rule, positive_only)
    result = PartialCorrelationMatrix(
        weight,
        PartialMethod.SPARSE,
        lam=float(lam),
        failed_nodes=tuple(failed),
        coefficients=coefficients,
    )
    logger.info(
        "Sparse partial network",
        lam=lam,
        rule=rule,
        edges=result.n_edges(),
        failed_nodes=failed,
    )
    return result


def precision_from_data(data: DataMatrix) -> SymmetricMatrix:
    """Inverse of the sample covariance ``XᵀX / n`` of centered data.

    Raises:
        UnderdeterminedError: If the sample covariance is singular
    """
    _require_centered(data)
    x = data.values
    cov = (x.T @ x) / data.n
    try:
        factor = scipy.linalg.cho_factor(cov, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as e:
        raise UnderdeterminedError("Sample covariance is singular") from e
    return SymmetricMatrix(
        scipy.linalg.cho_solve(factor, np.eye(data.p)), MatrixKind.PRECISION
    )
