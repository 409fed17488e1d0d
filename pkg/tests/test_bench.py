"""Tests for the sparse cross-correlation benchmark and group separation."""

import numpy as np
import pytest

from sparsenet.bench import (
    AgreementFailureError,
    BenchConfigError,
    bench_sparse_cross,
    beta0_separation,
    paired_data,
    solve_pairwise_cross,
    solve_vectorized_cross,
    vectorized_cross_problem,
)
from sparsenet.data import sample_cross_correlation
from sparsenet.thresholding import sparse_cross_correlation


class TestVectorizedProblem:
    """Test the all-pairs LASSO formulation."""

    def test_design_shape_and_norms(self) -> None:
        """Test n·p² rows, p² unit-norm columns with disjoint supports."""
        x, y = paired_data(5, 3, seed=1)
        design, target = vectorized_cross_problem(x, y)
        assert design.shape == (45, 9)
        assert target.shape == (45,)
        gram = (design.T @ design).toarray()
        np.testing.assert_allclose(gram, np.eye(9), atol=1e-12)

    def test_column_products_are_cross_correlations(self) -> None:
        """Test column k = i·p + j against the target gives x_iᵀ y_j."""
        x, y = paired_data(6, 4, seed=2)
        design, target = vectorized_cross_problem(x, y)
        np.testing.assert_allclose(
            (design.T @ target).reshape(4, 4),
            sample_cross_correlation(x, y).entries,
            atol=1e-12,
        )

    @pytest.mark.parametrize("lam", [0.0, 0.2, 0.5])
    def test_numerical_solutions_match_closed_form(self, lam: float) -> None:
        """Test both numerical baselines reproduce soft-thresholding."""
        x, y = paired_data(5, 4, seed=3)
        closed = sparse_cross_correlation(sample_cross_correlation(x, y), lam)
        expected = closed.matrix.entries
        np.testing.assert_allclose(solve_vectorized_cross(x, y, lam), expected, atol=1e-8)
        np.testing.assert_allclose(solve_pairwise_cross(x, y, lam), expected, atol=1e-8)


class TestBenchSparseCross:
    """Test the benchmark harness."""

    def test_small_grid(self) -> None:
        """Test one cell per (n, p), each within the agreement tolerance."""
        report = bench_sparse_cross([5], [2, 4], grid_count=4, seed=7)
        assert [(c.n, c.p) for c in report.cells] == [(5, 2), (5, 4)]
        assert report.valid
        assert all(c.agreement <= 1e-5 for c in report.cells)
        assert report.methods == ("soft-threshold", "lasso-pairwise")
        assert len(report.rows()[0]) == 5

    def test_summary_is_reproducible(self) -> None:
        """Test the timing-free summary is identical across runs."""
        first = bench_sparse_cross([5], [3], grid_count=3, baseline="vectorized")
        second = bench_sparse_cross([5], [3], grid_count=3, baseline="vectorized")
        assert first.agreement_summary() == second.agreement_summary()
        assert "t_soft" not in str(first.agreement_summary())

    def test_threads_keep_order(self) -> None:
        """Test concurrent cells come back in grid order."""
        report = bench_sparse_cross([5, 6], [2, 3], grid_count=3, threads=2)
        assert [(c.n, c.p) for c in report.cells] == [(5, 2), (5, 3), (6, 2), (6, 3)]

    def test_disagreement_rejects_report(self) -> None:
        """Test a failed agreement check raises instead of reporting timings."""
        with pytest.raises(AgreementFailureError) as exc_info:
            bench_sparse_cross([5], [2], grid_count=2, tolerance=-1.0)
        assert exc_info.value.exit_code == 4
        assert (exc_info.value.n, exc_info.value.p) == (5, 2)

    def test_invalid_parameters(self) -> None:
        """Test empty lists, short grids and unknown baselines are rejected."""
        with pytest.raises(BenchConfigError):
            bench_sparse_cross([], [2])
        with pytest.raises(BenchConfigError):
            bench_sparse_cross([5], [2], grid_count=1)
        with pytest.raises(BenchConfigError):
            bench_sparse_cross([5], [2], baseline="dense")  # type: ignore[arg-type]

    @pytest.mark.slow
    def test_closed_form_is_much_faster(self) -> None:
        """Test the closed form beats the pairwise LASSO by at least 100x."""
        report = bench_sparse_cross([10], [100], grid_count=10)
        assert report.valid
        assert report.cells[0].ratio >= 100


class TestBeta0Separation:
    """Test planted-group separation by β₀."""

    def test_groups_separate(self) -> None:
        """Test weaker within-block correlation leaves more components on ten seeds."""
        report = beta0_separation(n=100, p=20, seeds=range(10))
        assert report.grid[report.mid_index] == pytest.approx(0.5)
        assert len(report.curves_a) == len(report.curves_b) == 10
        assert all(len(curve) == 21 for curve in report.curves_a)
        assert report.separated
        assert report.min_difference >= 5
