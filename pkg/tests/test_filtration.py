"""Tests for threshold and graphical-LASSO filtrations."""

import numpy as np
import pytest
from scipy import sparse
from scipy.sparse.csgraph import connected_components as scipy_components

from sparsenet import filtration as filtration_module
from sparsenet.data import (
    DataMatrix,
    MatrixKind,
    SymmetricMatrix,
    normalize,
    sample_correlation,
    sample_cross_correlation,
)
from sparsenet.filtration import (
    FiltrationError,
    FiltrationResult,
    PartitionMismatchError,
    build_filtration,
    glasso_filtration,
    verify_nestedness,
)
from sparsenet.graph import AdjacencyMatrix, AdjacencySource, threshold_adjacency
from sparsenet.synth import Structure, synth_data
from sparsenet.thresholding import LambdaGrid, lambda_grid_from_data

EXAMPLE = np.array(
    [
        [1.0, 0.8, 0.1, 0.0],
        [0.8, 1.0, 0.0, 0.2],
        [0.1, 0.0, 1.0, 0.9],
        [0.0, 0.2, 0.9, 1.0],
    ]
)


@pytest.fixture
def correlation() -> SymmetricMatrix:
    return sample_correlation(normalize(synth_data(5, 30, seed=13)))


def zero_pattern(dim: int, *edge_sets: list[tuple[int, int]]) -> FiltrationResult:
    grid = LambdaGrid.explicit([float(t) for t in range(len(edge_sets))])
    graphs = [
        AdjacencyMatrix.from_pairs(dim, pairs, source=AdjacencySource.ZERO_PATTERN)
        for pairs in edge_sets
    ]
    return FiltrationResult.from_adjacencies(grid, graphs)


class TestBuildFiltration:
    """Test threshold filtrations."""

    def test_example_curve(self) -> None:
        """Test β₀ on the four-node example at hand-picked thresholds."""
        m = SymmetricMatrix(EXAMPLE, MatrixKind.CORRELATION)
        grid = LambdaGrid.explicit([0.0, 0.15, 0.5, 0.85, 0.95])
        result = build_filtration(m, grid)
        assert result.beta0 == (1, 1, 2, 3, 4)
        assert result.edge_counts == (4, 3, 2, 1, 0)
        assert result.partitions[2].components == [[0, 1], [2, 3]]

    def test_grid_value_equal_to_entry(self) -> None:
        """Test an entry equal to a grid value is not an edge there."""
        m = SymmetricMatrix(EXAMPLE, MatrixKind.CORRELATION)
        result = build_filtration(m, LambdaGrid.explicit([0.19, 0.2, 0.21]))
        assert result.edge_counts == (3, 2, 2)

    def test_incremental_matches_scratch(self, correlation: SymmetricMatrix) -> None:
        """Test the incremental builder gives the from-scratch partitions."""
        grid = lambda_grid_from_data(correlation, 25)
        incremental = build_filtration(correlation, grid)
        scratch = build_filtration(correlation, grid, method="scratch", threads=2)
        assert incremental.beta0 == scratch.beta0
        assert incremental.partitions == scratch.partitions
        assert incremental.edge_counts == scratch.edge_counts

    def test_small_edge_batches(
        self, correlation: SymmetricMatrix, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test batching edges in tiny chunks does not change the result."""
        grid = lambda_grid_from_data(correlation, 25)
        expected = build_filtration(correlation, grid)
        monkeypatch.setattr(filtration_module, "EDGE_BATCH", 3)
        batched = build_filtration(correlation, grid)
        assert batched.partitions == expected.partitions
        assert batched.edge_counts == expected.edge_counts

    def test_matches_breadth_first_search(self, correlation: SymmetricMatrix) -> None:
        """Test β₀ equals scipy's component count at every grid value."""
        grid = lambda_grid_from_data(correlation, 15)
        result = build_filtration(correlation, grid)
        for lam, beta0 in zip(grid.values, result.beta0, strict=True):
            dense = threshold_adjacency(correlation, lam).to_dense()
            count, _ = scipy_components(dense, directed=False)
            assert beta0 == count

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(50))
    def test_random_matrices(self, seed: int) -> None:
        """Test incremental against scratch on random correlations over 50 points."""
        rng = np.random.default_rng(seed)
        p = int(rng.integers(2, 201))
        n = int(rng.integers(3, 31))
        corr = sample_correlation(normalize(synth_data(n, p, seed=seed)))
        grid = lambda_grid_from_data(corr, 50)
        incremental = build_filtration(corr, grid)
        scratch = build_filtration(corr, grid, method="scratch")
        assert incremental.beta0 == scratch.beta0
        assert incremental.partitions == scratch.partitions
        assert list(incremental.beta0) == sorted(incremental.beta0)
        assert incremental.beta0[-1] == p

    @pytest.mark.slow
    def test_ten_thousand_nodes(self) -> None:
        """Test a p = 10000, n = 10 correlation filtration over 50 points."""
        corr = sample_correlation(normalize(synth_data(10, 10000, seed=2)))
        grid = lambda_grid_from_data(corr, 50)
        result = build_filtration(corr, grid)
        assert len(result.beta0) == 50
        assert list(result.beta0) == sorted(result.beta0)
        assert result.beta0[-1] == 10000
        # Sparse end of the grid, where few pairs are linked
        for t in range(45, 50):
            edges = threshold_adjacency(corr, grid[t]).edges
            graph = sparse.coo_array(
                (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(10000, 10000)
            )
            count, _ = scipy_components(graph, directed=False)
            assert result.beta0[t] == count

    def test_beta0_non_decreasing(self, correlation: SymmetricMatrix) -> None:
        """Test β₀ never falls and ends at p above the largest entry."""
        grid = lambda_grid_from_data(correlation, 30)
        result = build_filtration(correlation, grid)
        assert list(result.beta0) == sorted(result.beta0)
        assert result.beta0[-1] == correlation.dim
        assert result.edge_counts[-1] == 0

    def test_cross_correlation_symmetrized(self) -> None:
        """Test asymmetric inputs follow the max and min rules."""
        rng = np.random.default_rng(4)
        x = normalize(DataMatrix(rng.standard_normal((6, 8))))
        y = normalize(DataMatrix(rng.standard_normal((6, 8))))
        cross = sample_cross_correlation(x, y)
        grid = LambdaGrid.uniform(10, 1.0)
        for rule in ("max", "min"):
            result = build_filtration(cross, grid, symmetrize=rule)  # type: ignore[arg-type]
            expected = [
                threshold_adjacency(cross, lam, rule).n_edges  # type: ignore[arg-type]
                for lam in grid.values
            ]
            assert list(result.edge_counts) == expected

    def test_keep_edges(self) -> None:
        """Test stored graphs match direct thresholding."""
        m = SymmetricMatrix(EXAMPLE, MatrixKind.CORRELATION)
        grid = LambdaGrid.explicit([0.0, 0.5])
        result = build_filtration(m, grid, keep_edges=True)
        assert result.adjacencies is not None
        assert result.adjacencies[1].edge_set() == {(0, 1), (2, 3)}

    def test_unknown_method(self, correlation: SymmetricMatrix) -> None:
        """Test an unknown method is rejected."""
        with pytest.raises(FiltrationError):
            build_filtration(correlation, LambdaGrid.uniform(3, 1.0), method="bfs")  # type: ignore[arg-type]

    def test_rows(self) -> None:
        """Test rows pair each λ with its β₀ and edge count."""
        m = SymmetricMatrix(EXAMPLE, MatrixKind.CORRELATION)
        result = build_filtration(m, LambdaGrid.explicit([0.5, 0.95]))
        assert list(result.rows()) == [(0.5, 2, 2), (0.95, 4, 0)]

    @pytest.mark.slow
    def test_many_nodes(self) -> None:
        """Test a 2000-node correlation filtration against scipy."""
        corr = sample_correlation(normalize(synth_data(5, 2000, seed=1)))
        grid = LambdaGrid.uniform(6, 1.0)
        result = build_filtration(corr, grid)
        for lam, beta0 in zip(grid.values, result.beta0, strict=True):
            adjacency = threshold_adjacency(corr, lam)
            count, _ = scipy_components(adjacency.to_dense(), directed=False)
            assert beta0 == count


class TestNestedness:
    """Test nestedness checks."""

    def test_threshold_filtration_nested(self, correlation: SymmetricMatrix) -> None:
        """Test threshold filtrations are nested in nodes and edges."""
        result = build_filtration(correlation, lambda_grid_from_data(correlation, 10))
        report = verify_nestedness(result)
        assert report.node_nested and report.edge_nested
        assert report.first_violation is None

    def test_edges_not_nested_but_partitions_are(self) -> None:
        """Test a pattern that swaps edges while its components still refine."""
        result = zero_pattern(3, [(0, 1), (1, 2)], [(0, 2)])
        report = verify_nestedness(result)
        assert report.node_nested
        assert not report.edge_nested
        assert report.edge_violation == 1

    def test_partitions_not_nested(self) -> None:
        """Test components that regroup are reported at the first offending index."""
        result = zero_pattern(3, [(0, 1)], [(0, 1)], [(0, 2)])
        report = verify_nestedness(result)
        assert report.node_violation == 2
        assert report.first_violation == 2

    def test_needs_two_points(self) -> None:
        """Test a single grid value cannot be checked."""
        with pytest.raises(FiltrationError):
            verify_nestedness(zero_pattern(2, [(0, 1)]))

    def test_result_validation(self) -> None:
        """Test mismatched field lengths are rejected."""
        single = zero_pattern(2, [(0, 1)])
        with pytest.raises(FiltrationError):
            FiltrationResult(
                grid=LambdaGrid.uniform(2, 1.0),
                beta0=single.beta0,
                partitions=single.partitions,
                edge_counts=single.edge_counts,
            )


class TestGlassoFiltration:
    """Test zero-pattern versus thresholded-covariance filtrations."""

    def test_partitions_agree(self) -> None:
        """Test both filtrations have the same components at every λ."""
        data = synth_data(200, 9, Structure.planted(3, 0.6, 0.05), moment_matched=True)
        grid = LambdaGrid.explicit([0.02, 0.1, 0.2, 0.4, 0.7])
        result = glasso_filtration(data, grid, tol=1e-9, max_sweeps=1000, strict=True)
        assert result.partitions_agree
        assert result.zero_pattern.beta0 == result.threshold.beta0
        assert result.threshold.beta0[2] == 3
        assert result.threshold.beta0[-1] == 9
        assert result.skipped == ()

    def test_singular_lambda_zero_skipped(self) -> None:
        """Test λ = 0 with n < p is skipped and the rest still compared."""
        data = synth_data(6, 8, seed=5)
        grid = LambdaGrid.explicit([0.0, 0.1, 0.3])
        result = glasso_filtration(data, grid, tol=1e-9, max_sweeps=1000)
        assert result.skipped == (0,)
        assert result.zero_pattern.grid.values == (0.1, 0.3)
        assert len(result.agreement) == 2
        assert result.partitions_agree

    def test_screened_fits_agree(self) -> None:
        """Test screened fits give the same zero-pattern components."""
        data = synth_data(6, 8, seed=5)
        grid = LambdaGrid.explicit([0.1, 0.3])
        plain = glasso_filtration(data, grid, tol=1e-9, max_sweeps=1000)
        screened = glasso_filtration(data, grid, tol=1e-9, max_sweeps=1000, screened=True)
        assert plain.zero_pattern.partitions == screened.zero_pattern.partitions

    def test_all_points_fail(self) -> None:
        """Test a grid where nothing fits is an error."""
        with pytest.raises(FiltrationError):
            glasso_filtration(synth_data(6, 8, seed=5), LambdaGrid.explicit([0.0]))

    def test_mismatch_error(self) -> None:
        """Test the mismatch error lists indices and exits with code 4."""
        error = PartitionMismatchError([1, 3])
        assert error.indices == [1, 3]
        assert error.exit_code == 4
        assert "[1, 3]" in str(error)
