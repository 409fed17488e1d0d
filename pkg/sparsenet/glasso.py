"""
Sparse inverse covariance by L1-penalized maximum likelihood.

Maximizes ``log det Θ − tr(ΘS) − λ‖Θ‖₁`` over positive definite Θ by block
coordinate descent over columns. Each column update solves a box-constrained
quadratic program, the dual of the column LASSO, by cyclic coordinate
descent. Working on Θ directly keeps every iterate positive definite and
the objective non-decreasing from sweep to sweep.

Thresholding ``|S|`` at λ partitions the nodes exactly as the fitted zero
pattern does, so the problem splits into independent blocks that can be
solved separately and in parallel (``glasso_fit_screened``).
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .data import MatrixKind, SymmetricMatrix
from .errors import ConvergenceError, ValidationError
from .graph import (
    GraphPartition,
    connected_components,
    threshold_adjacency,
    zero_pattern_adjacency,
)
from .logging import get_logger, log_solver_progress
from .pipeline import TaskRunner
from .thresholding import LambdaGrid

logger = get_logger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_SWEEPS = 200
INNER_MAX_PASSES = 1000
# Allowed relative objective decrease between sweeps before warning
MONOTONE_SLACK = 1e-10

ScreeningPartition = GraphPartition


class GlassoInputError(ValidationError):
    """Graphical-LASSO inputs are malformed."""

    pass


class NotPositiveDefiniteError(ValidationError):
    """A matrix required to be positive definite is not."""

    pass


class GlassoError(ConvergenceError):
    """A graphical-LASSO solve failed."""

    def __init__(self, message: str, lam: float | None = None, blocks: Sequence[int] = ()):
        super().__init__(message)
        self.lam = lam
        self.blocks = tuple(blocks)


@dataclass(frozen=True)
class GlassoSolution:
    """Fitted sparse precision matrix and its diagnostics.

    Attributes:
        precision: Estimated inverse covariance Θ
        covariance: Its inverse W
        lam: Sparsity parameter
        objective: Penalized log-likelihood at the returned Θ
        iterations: Outer sweeps performed (largest over blocks when screened)
        converged: Whether the stopping rule was met
        kkt_residual: Largest optimality-condition violation
        objective_trace: Objective after every sweep
        penalize_diagonal: Whether the diagonal was penalized
        kappa: Connected components of the fitted zero pattern
    """

    precision: SymmetricMatrix
    covariance: SymmetricMatrix
    lam: float
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float
    objective_trace: tuple[float, ...] = field(default=())
    penalize_diagonal: bool = True
    kappa: int = 0

    def diagnostics(self) -> dict[str, float | int | bool]:
        """Summary suitable for JSON export."""
        return {
            "lambda": self.lam,
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "kkt_residual": self.kkt_residual,
            "kappa": self.kappa,
            "penalize_diagonal": self.penalize_diagonal,
        }


def _cholesky(matrix: np.ndarray, what: str) -> tuple[np.ndarray, bool]:
    try:
        return scipy.linalg.cho_factor(matrix, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(f"{what} is not positive definite") from e


def _l1(theta: np.ndarray, penalize_diagonal: bool) -> float:
    total = float(np.abs(theta).sum())
    if not penalize_diagonal:
        total -= float(np.abs(np.diagonal(theta)).sum())
    return total


def _loglik(
    theta: np.ndarray, s: np.ndarray, lam: float, penalize_diagonal: bool
) -> float:
    factor, _ = _cholesky(theta, "Precision matrix")
    logdet = 2.0 * float(np.log(np.diagonal(factor)).sum())
    return logdet - float(np.einsum("ij,ji->", theta, s)) - lam * _l1(
        theta, penalize_diagonal
    )


def penalized_loglik(
    precision: SymmetricMatrix,
    s: SymmetricMatrix,
    lam: float,
    penalize_diagonal: bool = True,
) -> float:
    """
    Penalized Gaussian log-likelihood ``log det Θ − tr(ΘS) − λ‖Θ‖₁``.

    Args:
        precision: Positive definite Θ
        s: Sample covariance
        lam: Penalty weight
        penalize_diagonal: Include the diagonal of Θ in the L1 norm

    Raises:
        NotPositiveDefiniteError: If the Cholesky factorization of Θ fails
    """
    return _loglik(precision.entries, s.entries, lam, penalize_diagonal)


def _kkt(
    theta: np.ndarray,
    w: np.ndarray,
    s: np.ndarray,
    lam: float,
    penalize_diagonal: bool,
) -> float:
    gap = w - s
    active = theta != 0
    violation = np.where(
        active,
        np.abs(gap - lam * np.sign(theta)),
        np.maximum(np.abs(gap) - lam, 0.0),
    )
    diag = np.abs(np.diagonal(gap) - (lam if penalize_diagonal else 0.0))
    np.fill_diagonal(violation, diag)
    return float(violation.max(initial=0.0))


def kkt_residual(
    precision: SymmetricMatrix,
    covariance: SymmetricMatrix,
    s: SymmetricMatrix,
    lam: float,
    penalize_diagonal: bool = True,
) -> float:
    """Largest violation of the optimality conditions at ``(Θ, W)``.

    Nonzero entries of Θ need ``W_ij − S_ij = λ·sign(Θ_ij)``; zero entries
    need ``|W_ij − S_ij| <= λ``. The diagonal needs ``W_ii = S_ii + λ``, or
    ``W_ii = S_ii`` when it is not penalized.
    """
    return _kkt(
        precision.entries, covariance.entries, s.entries, lam, penalize_diagonal
    )


def _validate(s: SymmetricMatrix, lam: float, penalize_diagonal: bool) -> None:
    if not s.symmetric:
        raise GlassoInputError("Graphical LASSO needs a symmetric matrix")
    if not math.isfinite(lam) or lam < 0:
        raise GlassoInputError(f"Lambda must be finite and non-negative, got {lam}")
    diag = np.diagonal(s.entries)
    if np.any(diag < 0):
        raise GlassoInputError("Covariance diagonal must be non-negative")
    if not penalize_diagonal and np.any(diag <= 0):
        raise GlassoInputError(
            "An unpenalized diagonal needs a strictly positive covariance diagonal"
        )


def _solve_column(
    a: np.ndarray,
    s12: np.ndarray,
    gamma: np.ndarray,
    lam: float,
    tol: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize ``½(s12 + γ)ᵀ A (s12 + γ)`` over ``‖γ‖∞ <= λ``.

    Returns the optimal ``γ`` and the gradient ``A (s12 + γ)``.
    """
    gamma = np.clip(gamma, -lam, lam)
    grad = a @ (s12 + gamma)
    diag = np.diagonal(a)
    m = gamma.shape[0]
    for _ in range(INNER_MAX_PASSES):
        for k in range(m):
            old = gamma[k]
            new = min(max(old - grad[k] / diag[k], -lam), lam)
            if new != old:
                grad += (new - old) * a[:, k]
                gamma[k] = new
        violation = np.where(
            gamma >= lam,
            np.maximum(grad, 0.0),
            np.where(gamma <= -lam, np.maximum(-grad, 0.0), np.abs(grad)),
        )
        if violation.max(initial=0.0) <= tol:
            break
    return gamma, grad


def _fit_dense(
    s: np.ndarray,
    lam: float,
    tol: float,
    max_sweeps: int,
    penalize_diagonal: bool,
    init: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray, int, bool, float, list[float]]:
    p = s.shape[0]
    w_diag = np.diagonal(s) + (lam if penalize_diagonal else 0.0)

    if init is None:
        theta = np.diag(1.0 / w_diag)
        w = np.diag(w_diag)
    else:
        theta = np.array(init, dtype=np.float64)
        factor = _cholesky(theta, "Initial precision")
        w = scipy.linalg.cho_solve(factor, np.eye(p))
    gamma = np.clip(w - s, -lam, lam)

    scale = float(np.abs(np.diagonal(s)).mean()) or 1.0
    inner_tol = min(tol * 1e-3, 1e-10) * scale
    trace: list[float] = []
    previous = _loglik(theta, s, lam, penalize_diagonal)
    converged = False
    sweeps = 0
    kkt = math.inf

    for sweeps in range(1, max_sweeps + 1):
        for j in range(p):
            others = np.r_[0:j, j + 1 : p]
            a = theta[np.ix_(others, others)]
            s12 = s[others, j]
            g, grad = _solve_column(a, s12, gamma[others, j], lam, inner_tol)
            theta12 = -grad / w_diag[j]
            # Coordinates strictly inside the box have zero precision entries
            theta12[np.abs(g) < lam] = 0.0
            theta22 = (1.0 - float((s12 + g) @ theta12)) / w_diag[j]
            theta[others, j] = theta12
            theta[j, others] = theta12
            theta[j, j] = theta22
            gamma[others, j] = g
            gamma[j, others] = g

        try:
            factor = scipy.linalg.cho_factor(theta, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError as e:
            raise GlassoError(
                f"Precision lost positive definiteness at sweep {sweeps}", lam=lam
            ) from e
        w_new = scipy.linalg.cho_solve(factor, np.eye(p))
        change = float(np.abs(w_new - w).max()) / scale
        w = w_new

        objective = _loglik(theta, s, lam, penalize_diagonal)
        trace.append(objective)
        if objective < previous - MONOTONE_SLACK * max(1.0, abs(previous)):
            logger.warning(
                "Objective decreased between sweeps",
                sweep=sweeps,
                previous=previous,
                objective=objective,
            )
        previous = objective

        kkt = _kkt(theta, w, s, lam, penalize_diagonal)
        log_solver_progress(logger, "glasso", sweeps, objective, change, kkt=kkt)
        if change < tol and kkt <= tol * max(1.0, scale):
            converged = True
            break

    return theta, w, sweeps, converged, kkt, trace


def _solution(
    theta: np.ndarray,
    w: np.ndarray,
    s: SymmetricMatrix,
    lam: float,
    iterations: int,
    converged: bool,
    trace: Sequence[float],
    penalize_diagonal: bool,
) -> GlassoSolution:
    precision = SymmetricMatrix(theta, MatrixKind.PRECISION, lam=lam)
    covariance = SymmetricMatrix(w, MatrixKind.COVARIANCE, lam=lam)
    kappa = connected_components(zero_pattern_adjacency(precision)).kappa
    return GlassoSolution(
        precision=precision,
        covariance=covariance,
        lam=float(lam),
        objective=penalized_loglik(precision, s, lam, penalize_diagonal),
        iterations=iterations,
        converged=converged,
        kkt_residual=kkt_residual(precision, covariance, s, lam, penalize_diagonal),
        objective_trace=tuple(trace),
        penalize_diagonal=penalize_diagonal,
        kappa=kappa,
    )


def glasso_fit(
    s: SymmetricMatrix,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    penalize_diagonal: bool = True,
    init: SymmetricMatrix | None = None,
) -> GlassoSolution:
    """
    Fit a sparse precision matrix to a sample covariance.

    Columns are swept in ascending order. A sweep ends the solve once the
    largest change in W, relative to the mean diagonal of S, falls below
    ``tol`` and the KKT residual is within ``tol`` (scaled the same way).

    Args:
        s: Sample covariance; may be singular when ``lam > 0``
        lam: Penalty weight. 0 is accepted only for positive definite S
        tol: Relative convergence tolerance
        max_sweeps: Maximum number of outer sweeps
        penalize_diagonal: Include the diagonal of Θ in the penalty
        init: Positive definite warm start

    Returns:
        GlassoSolution. If ``max_sweeps`` runs out, the last iterate is
        returned with ``converged=False`` and a warning carrying the
        objective trace is logged

    Raises:
        GlassoInputError: On invalid inputs
        NotPositiveDefiniteError: If ``lam == 0`` and S is singular
    """
    _validate(s, lam, penalize_diagonal)
    if tol <= 0 or max_sweeps < 1:
        raise GlassoInputError("tol must be positive and max_sweeps at least 1")

    if lam == 0:
        factor = _cholesky(s.entries, "Sample covariance at lambda = 0")
        theta = scipy.linalg.cho_solve(factor, np.eye(s.dim))
        theta = (theta + theta.T) / 2
        return _solution(
            theta, s.entries.copy(), s, 0.0, 0, True, (), penalize_diagonal
        )

    theta, w, sweeps, converged, kkt, trace = _fit_dense(
        s.entries,
        lam,
        tol,
        max_sweeps,
        penalize_diagonal,
        None if init is None else init.entries,
    )
    if not converged:
        logger.warning(
            "Graphical LASSO reached max sweeps",
            lam=lam,
            sweeps=sweeps,
            kkt_residual=kkt,
            objective_trace=trace,
        )
    else:
        logger.debug("Graphical LASSO converged", lam=lam, sweeps=sweeps, kkt=kkt)
    return _solution(theta, w, s, lam, sweeps, converged, trace, penalize_diagonal)


def screen_partition(s: SymmetricMatrix, lam: float) -> ScreeningPartition:
    """Components of the graph linking ``i != j`` whenever ``|s_ij| > lam``."""
    return connected_components(threshold_adjacency(s, lam))


def glasso_fit_screened(
    s: SymmetricMatrix,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    penalize_diagonal: bool = True,
    threads: int = 1,
) -> GlassoSolution:
    """
    Fit block by block over the screening partition of ``|S|`` at ``lam``.

    Singleton blocks have the closed form ``1 / (s_ii + lam)``. Larger
    blocks are fitted independently, in parallel when ``threads > 1``, and
    assembled into a block-diagonal precision with exact zeros between
    blocks. A single block falls through to ``glasso_fit``.

    Raises:
        GlassoError: If any block fails; ``blocks`` lists the failed block
            positions
    """
    _validate(s, lam, penalize_diagonal)
    partition = screen_partition(s, lam)
    if partition.kappa == 1:
        return glasso_fit(s, lam, tol, max_sweeps, penalize_diagonal)

    p = s.dim
    offset = lam if penalize_diagonal else 0.0
    theta = np.zeros((p, p))
    w = np.zeros((p, p))
    blocks = partition.blocks
    singletons = [b[0] for b in blocks if len(b) == 1]
    if singletons:
        idx = np.array(singletons)
        diag = s.entries[idx, idx] + offset
        if np.any(diag <= 0):
            raise NotPositiveDefiniteError(
                "Singleton block with zero variance and lambda = 0"
            )
        theta[idx, idx] = 1.0 / diag
        w[idx, idx] = diag

    large = [b for b in blocks if len(b) > 1]

    def fit_block(nodes: list[int]) -> GlassoSolution:
        sub = s.entries[np.ix_(nodes, nodes)]
        return glasso_fit(
            SymmetricMatrix(sub, MatrixKind.COVARIANCE),
            lam,
            tol,
            max_sweeps,
            penalize_diagonal,
        )

    outcomes = TaskRunner(threads).map(fit_block, large)
    failed = [o.index for o in outcomes if not o.success]
    if failed:
        for o in outcomes:
            if o.error is not None:
                logger.error(
                    "Screened block failed",
                    block=o.index,
                    nodes=large[o.index],
                    error=str(o.error),
                )
        raise GlassoError(
            f"{len(failed)} of {len(large)} screened blocks failed", lam=lam, blocks=failed
        )

    iterations = 0
    converged = True
    for nodes, outcome in zip(large, outcomes, strict=True):
        block = outcome.value
        assert block is not None
        index = np.ix_(nodes, nodes)
        theta[index] = block.precision.entries
        w[index] = block.covariance.entries
        iterations = max(iterations, block.iterations)
        converged = converged and block.converged

    logger.debug(
        "Screened graphical LASSO",
        lam=lam,
        kappa=partition.kappa,
        largest_block=max(len(b) for b in blocks),
    )
    solution = _solution(
        theta, w, s, lam, iterations, converged, (), penalize_diagonal
    )
    return GlassoSolution(
        precision=solution.precision,
        covariance=solution.covariance,
        lam=solution.lam,
        objective=solution.objective,
        iterations=solution.iterations,
        converged=solution.converged,
        kkt_residual=solution.kkt_residual,
        objective_trace=(solution.objective,),
        penalize_diagonal=penalize_diagonal,
        kappa=solution.kappa,
    )


def glasso_path(
    s: SymmetricMatrix,
    grid: LambdaGrid,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    penalize_diagonal: bool = True,
) -> list[GlassoSolution]:
    """
    Fit every grid value, largest first, each warm-started from the last.

    Returns:
        Solutions in the grid's ascending order
    """
    solutions: dict[float, GlassoSolution] = {}
    init: SymmetricMatrix | None = None
    for lam in reversed(grid.values):
        solution = glasso_fit(s, lam, tol, max_sweeps, penalize_diagonal, init=init)
        solutions[lam] = solution
        init = solution.precision
    logger.info(
        "Computed graphical LASSO path",
        points=len(grid),
        sweeps=[solutions[lam].iterations for lam in grid.values],
    )
    return [solutions[lam] for lam in grid.values]
