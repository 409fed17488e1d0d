"""
Synthetic data with known network structure.

Draws are reproducible from a seed through ``numpy.random.default_rng``.
Moment-matched draws additionally make the sample covariance equal the
model covariance exactly, for noise-free recovery checks.
"""

from dataclasses import dataclass
from enum import StrEnum

import numpy as np
import scipy.linalg

from .data import DataMatrix
from .errors import ValidationError
from .logging import get_logger

logger = get_logger(__name__)

DEFAULT_SEED = 42


class InvalidStructureParamsError(ValidationError):
    """Structure parameters do not define a valid covariance."""

    pass


class StructureKind(StrEnum):
    """Kinds of planted structure."""

    IID_NORMAL = "iid-normal"
    PLANTED_BLOCKS = "planted-blocks"
    CHAIN_PRECISION = "chain-precision"


@dataclass(frozen=True)
class Structure:
    """Planted structure to sample from.

    Attributes:
        kind: Structure family
        blocks: Number of blocks (planted-blocks)
        within: Correlation between nodes of the same block
        between: Correlation between nodes of different blocks
        strength: Partial correlation of consecutive chain nodes
    """

    kind: StructureKind = StructureKind.IID_NORMAL
    blocks: int = 2
    within: float = 0.7
    between: float = 0.0
    strength: float = 0.4

    @classmethod
    def iid(cls) -> "Structure":
        return cls(StructureKind.IID_NORMAL)

    @classmethod
    def planted(cls, blocks: int, within: float, between: float = 0.0) -> "Structure":
        return cls(StructureKind.PLANTED_BLOCKS, blocks=blocks, within=within, between=between)

    @classmethod
    def chain(cls, strength: float = 0.4) -> "Structure":
        return cls(StructureKind.CHAIN_PRECISION, strength=strength)


def block_assignment(p: int, blocks: int) -> np.ndarray:
    """Contiguous, near-equal block labels for ``p`` nodes."""
    if not 1 <= blocks <= p:
        raise InvalidStructureParamsError(f"Need 1 <= blocks <= p, got {blocks} for p={p}")
    labels = np.empty(p, dtype=np.int64)
    for label, nodes in enumerate(np.array_split(np.arange(p), blocks)):
        labels[nodes] = label
    return labels


def planted_block_covariance(
    p: int, blocks: int, within: float, between: float = 0.0
) -> np.ndarray:
    """Unit-diagonal covariance with constant within- and between-block correlation.

    Raises:
        InvalidStructureParamsError: If the implied matrix is not positive definite
    """
    if not (-1.0 < within < 1.0 and -1.0 < between < 1.0):
        raise InvalidStructureParamsError("Correlations must lie in (-1, 1)")
    labels = block_assignment(p, blocks)
    same = labels[:, None] == labels[None, :]
    cov = np.where(same, within, between)
    np.fill_diagonal(cov, 1.0)
    _require_positive_definite(cov, "Planted block covariance")
    return cov


def chain_precision(p: int, strength: float = 0.4) -> np.ndarray:
    """Tridiagonal precision with unit diagonal and ``-strength`` on the chain.

    The partial correlation of consecutive nodes is ``strength``.
    """
    if p < 2:
        raise InvalidStructureParamsError("A chain needs at least two nodes")
    off = np.full(p - 1, -strength)
    theta = np.diag(np.ones(p)) + np.diag(off, 1) + np.diag(off, -1)
    _require_positive_definite(theta, "Chain precision")
    return theta


def _require_positive_definite(matrix: np.ndarray, what: str) -> None:
    try:
        scipy.linalg.cholesky(matrix, lower=True)
    except scipy.linalg.LinAlgError as e:
        raise InvalidStructureParamsError(f"{what} is not positive definite") from e


def structure_covariance(p: int, structure: Structure) -> np.ndarray:
    """Model covariance of ``structure`` on ``p`` nodes."""
    if structure.kind == StructureKind.IID_NORMAL:
        return np.eye(p)
    if structure.kind == StructureKind.PLANTED_BLOCKS:
        return planted_block_covariance(
            p, structure.blocks, structure.within, structure.between
        )
    theta = chain_precision(p, structure.strength)
    return scipy.linalg.inv(theta)


def _whitened(rng: np.random.Generator, n: int, p: int) -> np.ndarray:
    """Centered draw with ``ZᵀZ = n·I`` exactly."""
    if n <= p:
        raise InvalidStructureParamsError(
            f"Moment matching needs n > p, got n={n}, p={p}"
        )
    g = rng.standard_normal((n, p))
    g -= g.mean(axis=0)
    q, _ = np.linalg.qr(g)
    return q * np.sqrt(n)


def synth_data(
    n: int,
    p: int,
    structure: Structure | None = None,
    seed: int = DEFAULT_SEED,
    moment_matched: bool = False,
) -> DataMatrix:
    """
    Draw an n x p Gaussian data matrix with planted structure.

    Args:
        n: Observations, at least 2
        p: Nodes, at least 2
        structure: Structure to plant (iid standard normal by default)
        seed: Random seed
        moment_matched: Make the centered sample covariance equal the model
            covariance exactly (needs ``n > p``)

    Returns:
        Raw DataMatrix; identical seeds give identical values

    Raises:
        InvalidStructureParamsError: If the structure is invalid
    """
    if n < 2 or p < 2:
        raise InvalidStructureParamsError(f"Need n >= 2 and p >= 2, got n={n}, p={p}")
    structure = structure or Structure.iid()
    rng = np.random.default_rng(seed)

    if structure.kind == StructureKind.IID_NORMAL and not moment_matched:
        values = rng.standard_normal((n, p))
    else:
        cov = structure_covariance(p, structure)
        factor = scipy.linalg.cholesky(cov, lower=True)
        z = _whitened(rng, n, p) if moment_matched else rng.standard_normal((n, p))
        values = z @ factor.T

    logger.debug(
        "Generated synthetic data",
        n=n,
        p=p,
        structure=structure.kind,
        seed=seed,
        moment_matched=moment_matched,
    )
    return DataMatrix(values)
