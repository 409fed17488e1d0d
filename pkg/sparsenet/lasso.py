"""
Cyclic coordinate-descent LASSO.

Minimizes ``½‖t − Xβ‖² + λ‖β‖₁`` over β with a fixed ascending cycle order.
This is the generic numerical solver: node-wise partial-correlation
regressions run on it, and it serves as the optimization baseline the
closed-form soft-thresholding estimators are checked and timed against.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ConvergenceError, ValidationError
from .logging import get_logger, log_solver_progress

logger = get_logger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_PASSES = 10_000


class LassoInputError(ValidationError):
    """LASSO inputs are malformed."""

    pass


class LassoConvergenceError(ConvergenceError):
    """Coordinate descent did not reach its KKT tolerance."""

    def __init__(self, message: str, trace: Sequence[float] = ()):
        super().__init__(message)
        self.trace = tuple(trace)


@dataclass(frozen=True)
class LassoResult:
    """Outcome of a coordinate-descent solve.

    Attributes:
        coefficients: Final iterate β
        residual: ``t − Xβ`` at the final iterate
        lam: Penalty weight
        passes: Full coordinate cycles performed
        converged: Whether the KKT residual reached the tolerance
        kkt_residual: Largest subgradient-condition violation
        objective_trace: Objective after every pass
    """

    coefficients: np.ndarray
    residual: np.ndarray
    lam: float
    passes: int
    converged: bool
    kkt_residual: float
    objective_trace: tuple[float, ...] = field(default=())

    @property
    def objective(self) -> float:
        return lasso_objective_from_residual(self.residual, self.coefficients, self.lam)


def lasso_objective_from_residual(
    residual: np.ndarray, coefficients: np.ndarray, lam: float
) -> float:
    return 0.5 * float(residual @ residual) + lam * float(np.abs(coefficients).sum())


def lasso_objective(
    design: np.ndarray | sparse.sparray, target: np.ndarray, beta: np.ndarray, lam: float
) -> float:
    """``½‖target − design·β‖² + lam‖β‖₁``."""
    residual = target - design @ beta
    return lasso_objective_from_residual(residual, beta, lam)


def lasso_kkt_residual(gradient: np.ndarray, beta: np.ndarray, lam: float) -> float:
    """Largest violation of the LASSO subgradient conditions.

    ``gradient`` is ``Xᵀ(t − Xβ)``. Active coordinates need
    ``gradient = lam·sign(β)``; inactive ones need ``|gradient| <= lam``.
    """
    if beta.size == 0:
        return 0.0
    active = beta != 0
    violation = np.where(
        active,
        np.abs(gradient - lam * np.sign(beta)),
        np.maximum(np.abs(gradient) - lam, 0.0),
    )
    return float(violation.max())


def _column_views(
    design: np.ndarray | sparse.sparray,
) -> list[tuple[np.ndarray | slice, np.ndarray]]:
    """Per-column (row indices, values) pairs; dense columns use a full slice."""
    if sparse.issparse(design):
        csc = sparse.csc_array(design)
        csc.sort_indices()
        return [
            (
                csc.indices[csc.indptr[k] : csc.indptr[k + 1]],
                csc.data[csc.indptr[k] : csc.indptr[k + 1]],
            )
            for k in range(csc.shape[1])
        ]
    dense = np.asarray(design, dtype=np.float64)
    return [(slice(None), np.ascontiguousarray(dense[:, k])) for k in range(dense.shape[1])]


def coordinate_descent(
    design: np.ndarray | sparse.sparray,
    target: np.ndarray,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
    init: np.ndarray | None = None,
) -> LassoResult:
    """
    Solve a LASSO problem by cyclic coordinate descent.

    Coordinates are updated in ascending order. After every full pass the
    KKT residual is recomputed from scratch and the solve stops once it is
    at most ``tol``.

    Args:
        design: n x m design matrix, dense or scipy sparse
        target: Length-n response
        lam: Penalty weight, ``lam >= 0``
        tol: KKT tolerance, ``tol > 0``
        max_passes: Maximum number of full passes
        init: Starting coefficients (zeros by default)

    Returns:
        LassoResult; ``converged`` is False when ``max_passes`` ran out
    """
    target = np.asarray(target, dtype=np.float64)
    n = target.shape[0]
    if design.shape[0] != n:
        raise LassoInputError(
            f"Design has {design.shape[0]} rows but target has length {n}"
        )
    if not math.isfinite(lam) or lam < 0:
        raise LassoInputError(f"Lambda must be finite and non-negative, got {lam}")
    if not tol > 0:
        raise LassoInputError(f"Tolerance must be positive, got {tol}")
    if not np.all(np.isfinite(target)):
        raise LassoInputError("Target contains non-finite values")

    columns = _column_views(design)
    m = len(columns)
    norms = np.array([float(vals @ vals) for _, vals in columns])
    if not np.all(np.isfinite(norms)):
        raise LassoInputError("Design contains non-finite values")

    beta = np.zeros(m) if init is None else np.array(init, dtype=np.float64)
    residual = target - design @ beta if np.any(beta) else target.copy()

    trace: list[float] = []
    kkt = math.inf
    passes = 0
    for passes in range(1, max_passes + 1):
        for k, (rows, vals) in enumerate(columns):
            norm = norms[k]
            if norm == 0.0:
                beta[k] = 0.0
                continue
            old = beta[k]
            rho = float(vals @ residual[rows]) + norm * old
            if rho > lam:
                new = (rho - lam) / norm
            elif rho < -lam:
                new = (rho + lam) / norm
            else:
                new = 0.0
            if new != old:
                residual[rows] -= (new - old) * vals
                beta[k] = new

        gradient = np.array([float(vals @ residual[rows]) for rows, vals in columns])
        kkt = lasso_kkt_residual(gradient, beta, lam)
        objective = lasso_objective_from_residual(residual, beta, lam)
        trace.append(objective)
        if passes % 100 == 0:
            log_solver_progress(logger, "lasso", passes, objective, kkt)
        if kkt <= tol:
            break

    converged = kkt <= tol
    if not converged:
        logger.warning(
            "LASSO did not converge", passes=passes, kkt_residual=kkt, tol=tol
        )
    return LassoResult(
        coefficients=beta,
        residual=residual,
        lam=float(lam),
        passes=passes,
        converged=converged,
        kkt_residual=kkt,
        objective_trace=tuple(trace),
    )


def reference_lasso(
    columns: Sequence[np.ndarray],
    target: np.ndarray,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
) -> np.ndarray:
    """
    Generic LASSO solve over a list of design columns.

    Args:
        columns: Design columns, each of the target's length
        target: Response vector
        lam: Penalty weight
        tol: KKT tolerance
        max_passes: Maximum number of full passes

    Returns:
        Coefficient vector, one entry per column

    Raises:
        LassoConvergenceError: If the KKT tolerance is not reached; the error
            carries the per-pass objective trace
    """
    target = np.asarray(target, dtype=np.float64)
    if columns:
        design = np.column_stack([np.asarray(c, dtype=np.float64) for c in columns])
    else:
        design = np.empty((target.shape[0], 0))
    result = coordinate_descent(design, target, lam, tol=tol, max_passes=max_passes)
    if not result.converged:
        raise LassoConvergenceError(
            f"Reference LASSO stopped after {result.passes} passes with KKT "
            f"residual {result.kkt_residual:.3g} > {tol:.3g}",
            trace=result.objective_trace,
        )
    return result.coefficients
