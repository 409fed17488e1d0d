"""
Graphs induced by sparse estimates: adjacency, components and block layouts.

Two adjacency rules are supported. A threshold graph links nodes whose
matrix entry exceeds a value in magnitude (strictly); a zero-pattern graph
links nodes whose estimated entry is nonzero up to a small tolerance.
Components are found with union-find and labelled canonically by their
smallest node index, so partitions compare by plain array equality.
"""

import math
from collections.abc import Iterable
from dataclasses import dataclass
from enum import StrEnum
from typing import Literal

import numpy as np

from .data import SymmetricMatrix, row_blocks
from .errors import ValidationError
from .logging import get_logger
from .thresholding import SparseEstimate

logger = get_logger(__name__)

ZERO_EPS = 1e-8

Symmetrize = Literal["max", "min"]


class GraphError(ValidationError):
    """Base exception for graph construction errors."""

    pass


class AdjacencySource(StrEnum):
    """Rule that produced an adjacency matrix."""

    ZERO_PATTERN = "zero-pattern"
    THRESHOLD = "threshold"


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Undirected simple graph on ``dim`` nodes.

    Attributes:
        dim: Number of nodes
        edges: ``(m, 2)`` array of pairs ``i < j``, sorted, without duplicates
        lam: Threshold or tolerance the graph was built at
        source: Adjacency rule that produced the graph
    """

    dim: int
    edges: np.ndarray
    lam: float | None = None
    source: AdjacencySource = AdjacencySource.THRESHOLD

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise GraphError(f"Graph needs at least one node, got {self.dim}")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.dim:
                raise GraphError(f"Edge endpoint outside [0, {self.dim})")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise GraphError("Self-loops are not allowed")
            edges = np.sort(edges, axis=1)
            edges = np.unique(edges, axis=0)
        edges.flags.writeable = False
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_pairs(
        cls,
        dim: int,
        pairs: Iterable[tuple[int, int]],
        lam: float | None = None,
        source: AdjacencySource = AdjacencySource.THRESHOLD,
    ) -> "AdjacencyMatrix":
        """Build a graph from unordered node pairs."""
        return cls(dim, np.array(list(pairs), dtype=np.int64), lam, source)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def edge_set(self) -> frozenset[tuple[int, int]]:
        """Edges as a set of ``(i, j)`` tuples with ``i < j``."""
        return frozenset(map(tuple, self.edges.tolist()))  # type: ignore[arg-type]

    def to_dense(self) -> np.ndarray:
        """Symmetric boolean adjacency matrix."""
        dense = np.zeros((self.dim, self.dim), dtype=bool)
        dense[self.edges[:, 0], self.edges[:, 1]] = True
        dense[self.edges[:, 1], self.edges[:, 0]] = True
        return dense


def magnitude_block(
    m: SymmetricMatrix, start: int, stop: int, symmetrize: Symmetrize
) -> np.ndarray:
    block = np.abs(m.entries[start:stop])
    if not m.symmetric:
        mirrored = np.abs(m.entries[:, start:stop]).T
        block = (
            np.maximum(block, mirrored)
            if symmetrize == "max"
            else np.minimum(block, mirrored)
        )
    return block


def _upper_edges(mask: np.ndarray, start: int) -> np.ndarray:
    rows, cols = np.nonzero(mask)
    rows = rows + start
    upper = cols > rows
    return np.column_stack((rows[upper], cols[upper]))


def threshold_adjacency(
    m: SymmetricMatrix, lam: float, symmetrize: Symmetrize = "max"
) -> AdjacencyMatrix:
    """Graph with an edge wherever ``|m_ij| > lam`` off the diagonal.

    Asymmetric inputs such as cross-correlations are first symmetrized
    entrywise by the larger (``"max"``) or smaller (``"min"``) of
    ``|m_ij|`` and ``|m_ji|``.

    Args:
        m: Square matrix
        lam: Threshold, ``lam >= 0``. Entries equal to it are not edges
        symmetrize: Rule for asymmetric inputs

    Returns:
        AdjacencyMatrix with source ``threshold``
    """
    if not math.isfinite(lam) or lam < 0:
        raise GraphError(f"Threshold must be finite and non-negative, got {lam}")
    if symmetrize not in ("max", "min"):
        raise GraphError(f"Unknown symmetrize rule: {symmetrize}")
    parts = [
        _upper_edges(magnitude_block(m, start, stop, symmetrize) > lam, start)
        for start, stop in row_blocks(m.dim)
    ]
    edges = np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)
    return AdjacencyMatrix(m.dim, edges, lam, AdjacencySource.THRESHOLD)


def zero_pattern_adjacency(
    estimate: SymmetricMatrix | SparseEstimate, eps: float = ZERO_EPS
) -> AdjacencyMatrix:
    """Graph with an edge wherever an estimated off-diagonal entry is nonzero.

    An entry counts as nonzero when ``|entry| > eps``. Asymmetric estimates
    link ``i`` and ``j`` if either direction is nonzero.

    Args:
        estimate: Precision matrix, sparse estimate or other square matrix
        eps: Zero tolerance, ``eps >= 0``

    Returns:
        AdjacencyMatrix with source ``zero-pattern``
    """
    if not math.isfinite(eps) or eps < 0:
        raise GraphError(f"Zero tolerance must be finite and non-negative, got {eps}")

    if isinstance(estimate, SparseEstimate) and estimate.triplets is not None:
        coo = estimate.triplets
        keep = np.abs(coo.data) > eps
        pairs = np.column_stack((coo.row[keep], coo.col[keep]))
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        return AdjacencyMatrix(estimate.dim, pairs, eps, AdjacencySource.ZERO_PATTERN)

    matrix = estimate.matrix if isinstance(estimate, SparseEstimate) else estimate
    adjacency = threshold_adjacency(matrix, eps, symmetrize="max")
    return AdjacencyMatrix(
        adjacency.dim, adjacency.edges, eps, AdjacencySource.ZERO_PATTERN
    )


class UnionFind:
    """Disjoint sets over ``0..size-1`` with path compression and union by rank."""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size
        self.count = size

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        """Merge the sets holding ``a`` and ``b``; return whether they differed."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        self.count -= 1
        return True

    def union_edges(self, edges: np.ndarray) -> None:
        """Union every ``(i, j)`` row of ``edges``, stopping once one set remains."""
        for i, j in edges.tolist():
            self.union(i, j)
            if self.count == 1:
                break

    def labels(self) -> np.ndarray:
        """Canonical labels: each node maps to the smallest node in its set."""
        size = len(self.parent)
        roots = np.fromiter((self.find(i) for i in range(size)), np.int64, size)
        smallest = np.full(size, size, dtype=np.int64)
        np.minimum.at(smallest, roots, np.arange(size))
        return smallest[roots]


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel an arbitrary component labelling by smallest member index."""
    labels = np.asarray(labels)
    size = labels.shape[0]
    _, inverse = np.unique(labels, return_inverse=True)
    inverse = inverse.reshape(-1)
    smallest = np.full(inverse.max(initial=-1) + 1, size, dtype=np.int64)
    np.minimum.at(smallest, inverse, np.arange(size))
    return smallest[inverse]


@dataclass(frozen=True, eq=False)
class GraphPartition:
    """Partition of the nodes into connected components.

    ``labels[i]`` is the smallest node index in the component of node ``i``.
    Any labelling passed in is canonicalized on construction.
    """

    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = canonical_labels(np.asarray(self.labels, dtype=np.int64))
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GraphPartition):
            return NotImplemented
        return bool(np.array_equal(self.labels, other.labels))

    __hash__ = None  # type: ignore[assignment]

    @property
    def dim(self) -> int:
        return int(self.labels.shape[0])

    @property
    def kappa(self) -> int:
        """Number of components."""
        return int(np.count_nonzero(self.labels == np.arange(self.dim)))

    @property
    def components(self) -> list[list[int]]:
        """Components as sorted node lists, ordered by smallest node."""
        order = np.argsort(self.labels, kind="stable")
        sorted_labels = self.labels[order]
        cuts = np.flatnonzero(np.diff(sorted_labels)) + 1
        return [group.tolist() for group in np.split(order, cuts)]

    @property
    def blocks(self) -> list[list[int]]:
        return self.components

    def component_edges(self, adjacency: AdjacencyMatrix) -> list[np.ndarray]:
        """Edges of ``adjacency`` grouped by the component holding them."""
        owners = self.labels[adjacency.edges[:, 0]]
        return [adjacency.edges[owners == comp[0]] for comp in self.components]

    def refines(self, other: "GraphPartition") -> bool:
        """Whether every component here lies inside one component of ``other``."""
        if other.dim != self.dim:
            raise GraphError("Partitions cover different node counts")
        pairs = np.unique(np.column_stack((self.labels, other.labels)), axis=0)
        return int(pairs.shape[0]) == self.kappa


def connected_components(a: AdjacencyMatrix) -> GraphPartition:
    """Connected components of ``a`` by union-find.

    The result does not depend on the order edges were added in.
    """
    uf = UnionFind(a.dim)
    uf.union_edges(a.edges)
    return GraphPartition(uf.labels())


@dataclass(frozen=True)
class BlockPermutation:
    """Node ordering that lays a graph out block-diagonally.

    Attributes:
        perm: ``perm[k]`` is the original node placed at position ``k``
        blocks: Component partition the ordering groups by
        sizes: Block sizes in layout order
    """

    perm: np.ndarray
    blocks: GraphPartition
    sizes: tuple[int, ...]

    @property
    def position(self) -> np.ndarray:
        """Inverse permutation: new position of each original node."""
        inverse = np.empty_like(self.perm)
        inverse[self.perm] = np.arange(self.perm.shape[0])
        return inverse

    def permute(self, matrix: np.ndarray) -> np.ndarray:
        """Reorder rows and columns of a square matrix, ``P A Pᵀ``."""
        return matrix[np.ix_(self.perm, self.perm)]


def block_permutation(a: AdjacencyMatrix) -> BlockPermutation:
    """Order nodes so the adjacency matrix becomes block diagonal.

    Components are laid out by size descending, ties by smallest node index;
    nodes within a component keep ascending order.
    """
    partition = connected_components(a)
    components = sorted(partition.components, key=lambda c: (-len(c), c[0]))
    perm = np.fromiter(
        (node for comp in components for node in comp), np.int64, a.dim
    )
    return BlockPermutation(perm, partition, tuple(len(c) for c in components))
