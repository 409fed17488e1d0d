"""
Tests for the controller module.

Each command runs end to end on small CSV inputs and the written files are
checked.
"""

import csv
import json
from io import StringIO
from pathlib import Path

import numpy as np
import pytest
from rich.console import Console

from sparsenet.config import ConfigLoader
from sparsenet.controller import (
    ControllerError,
    IncompleteSolutionError,
    NetworkController,
)
from sparsenet.filtration import PartitionMismatchError
from sparsenet.models import Command, RunConfig, SparseNetConfig
from sparsenet.partial import UnderdeterminedError
from sparsenet.persistence import TIMING_FILE, load_data_csv
from sparsenet.renderer import NetworkRenderer
from sparsenet.synth import Structure, StructureKind, synth_data

GOLDEN = Path(__file__).parent / "golden"


def write_csv(path: Path, values: np.ndarray, header: bool = True) -> Path:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        if header:
            writer.writerow([f"node{j}" for j in range(values.shape[1])])
        writer.writerows(values.tolist())
    return path


def read_json(path: Path) -> dict:
    return json.loads(path.read_text())


def read_rows(path: Path) -> list[list[str]]:
    with open(path, newline="") as f:
        return list(csv.reader(f))


@pytest.fixture
def config(tmp_path: Path) -> SparseNetConfig:
    return ConfigLoader(tmp_path / "missing.toml").load()


@pytest.fixture
def console_output() -> StringIO:
    return StringIO()


@pytest.fixture
def controller(config: SparseNetConfig, console_output: StringIO) -> NetworkController:
    console = Console(file=console_output, width=120, color_system=None)
    return NetworkController(config, NetworkRenderer(console))


@pytest.fixture
def wide_csv(tmp_path: Path) -> Path:
    """5 subjects, 8 nodes."""
    rng = np.random.default_rng(11)
    return write_csv(tmp_path / "wide.csv", rng.standard_normal((5, 8)))


@pytest.fixture
def tall_csv(tmp_path: Path) -> Path:
    """40 subjects, 5 nodes."""
    rng = np.random.default_rng(12)
    return write_csv(tmp_path / "tall.csv", rng.standard_normal((40, 5)))


@pytest.fixture
def paired_csvs(tmp_path: Path) -> tuple[Path, Path]:
    rng = np.random.default_rng(13)
    x = rng.standard_normal((6, 4))
    y = x + 0.5 * rng.standard_normal((6, 4))
    return write_csv(tmp_path / "x.csv", x), write_csv(tmp_path / "y.csv", y)


@pytest.fixture
def planted_csv(tmp_path: Path) -> Path:
    data = synth_data(
        200,
        9,
        Structure(StructureKind.PLANTED_BLOCKS, blocks=3, within=0.6, between=0.05),
        seed=3,
        moment_matched=True,
    )
    return write_csv(tmp_path / "planted.csv", data.values)


def run_command(
    controller: NetworkController,
    command: Command,
    inputs: tuple[Path, ...],
    out: Path,
    **kwargs,
) -> list[Path]:
    return controller.run(RunConfig(command, inputs=inputs, output_dir=out, **kwargs))


class TestNetworkController:
    """Test command dispatch and shared behavior."""

    def test_every_command_has_a_handler(self, controller: NetworkController) -> None:
        """Test every CLI command is dispatched."""
        assert set(controller._handlers) == set(Command)

    def test_timing_written(
        self, controller: NetworkController, wide_csv: Path, tmp_path: Path
    ) -> None:
        """Test the wall-clock time goes to timing.json, last."""
        written = run_command(controller, Command.CORR, (wide_csv,), tmp_path / "out")

        assert written[-1].name == TIMING_FILE
        timing = read_json(written[-1])
        assert timing["command"] == "corr"
        assert timing["seconds"] >= 0
        assert "seed" not in timing

    def test_missing_input(self, controller: NetworkController, tmp_path: Path) -> None:
        """Test too few inputs raise ControllerError with exit code 2."""
        with pytest.raises(ControllerError) as exc_info:
            run_command(controller, Command.CROSS_CORR, (), tmp_path / "out")
        assert exc_info.value.exit_code == 2

    def test_outputs_are_reproducible(
        self, controller: NetworkController, wide_csv: Path, tmp_path: Path
    ) -> None:
        """Test two runs write byte-identical result files."""
        first = run_command(
            controller, Command.SPARSE_CORR, (wide_csv,), tmp_path / "a", lam=0.3
        )
        second = run_command(
            controller, Command.SPARSE_CORR, (wide_csv,), tmp_path / "b", lam=0.3
        )

        for a, b in zip(first, second, strict=True):
            if a.name != TIMING_FILE:
                assert a.read_bytes() == b.read_bytes()


class TestGoldenOutputs:
    """Test result files against the checked-in samples under tests/golden."""

    @pytest.mark.parametrize(
        ("command", "kwargs"),
        [
            (Command.NORMALIZE, {}),
            (Command.CORR, {}),
            (Command.SPARSE_CORR, {"lam": 0.25}),
            (Command.FILTRATION, {"grid_count": 3}),
        ],
    )
    def test_matches_golden(
        self, controller: NetworkController, tmp_path: Path, command: Command, kwargs: dict
    ) -> None:
        """Test every file except the timings is byte-identical at seed 7."""
        written = run_command(
            controller, command, (GOLDEN / "input.csv",), tmp_path, seed=7, **kwargs
        )

        expected = GOLDEN / str(command)
        produced = {path.name for path in written if path.name != TIMING_FILE}
        assert produced == {path.name for path in expected.iterdir()}
        for name in produced:
            assert (tmp_path / name).read_bytes() == (expected / name).read_bytes(), name


class TestDataCommands:
    """Test normalize, corr, cross-corr and rank."""

    def test_normalize(
        self, controller: NetworkController, tall_csv: Path, tmp_path: Path
    ) -> None:
        """Test normalized columns are centered with unit norm."""
        out = tmp_path / "out"
        run_command(controller, Command.NORMALIZE, (tall_csv,), out)

        data = load_data_csv(out / "normalized.csv")
        assert data.node_names == tuple(f"node{j}" for j in range(5))
        np.testing.assert_allclose(data.values.sum(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose((data.values**2).sum(axis=0), 1.0)
        summary = read_json(out / "normalize.json")
        assert (summary["n"], summary["p"]) == (40, 5)
        assert summary["dropped"] == []

    def test_normalize_drops_constant(
        self, controller: NetworkController, tmp_path: Path
    ) -> None:
        """Test constant columns are dropped on request and reported."""
        values = np.column_stack([[1.0, 2.0, 4.0], [5.0, 5.0, 5.0], [0.0, 1.0, 0.5]])
        path = write_csv(tmp_path / "const.csv", values)
        out = tmp_path / "out"

        run_command(
            controller,
            Command.NORMALIZE,
            (path,),
            out,
            options={"drop_constant": True},
        )

        summary = read_json(out / "normalize.json")
        assert summary["p"] == 2
        assert summary["dropped"] == [1]
        assert summary["column_index"] == [0, 2]

    def test_corr(
        self, controller: NetworkController, wide_csv: Path, tmp_path: Path
    ) -> None:
        """Test the correlation matrix has a unit diagonal and a header."""
        out = tmp_path / "out"
        run_command(controller, Command.CORR, (wide_csv,), out)

        rows = read_rows(out / "correlation.csv")
        assert rows[0][0] == "node0"
        matrix = np.array(rows[1:], dtype=float)
        assert matrix.shape == (8, 8)
        np.testing.assert_allclose(np.diagonal(matrix), 1.0)
        np.testing.assert_allclose(matrix, matrix.T)
        assert read_json(out / "correlation.json")["max_off_diagonal"] <= 1.0

    def test_cross_corr(
        self,
        controller: NetworkController,
        paired_csvs: tuple[Path, Path],
        tmp_path: Path,
    ) -> None:
        """Test the cross-correlation matrix of two paired files."""
        out = tmp_path / "out"
        run_command(controller, Command.CROSS_CORR, paired_csvs, out)

        matrix = np.array(read_rows(out / "cross_correlation.csv")[1:], dtype=float)
        assert matrix.shape == (4, 4)
        assert np.all(np.abs(matrix) <= 1.0 + 1e-12)
        assert read_json(out / "cross_correlation.json")["p"] == 4

    def test_rank_of_wide_data(
        self, controller: NetworkController, wide_csv: Path, tmp_path: Path
    ) -> None:
        """Test centered data with n < p has rank at most n − 1."""
        out = tmp_path / "out"
        run_command(controller, Command.RANK, (wide_csv,), out)

        summary = read_json(out / "rank.json")
        assert summary["deficient"] is True
        assert summary["rank"] <= 4
        assert len(summary["largest"]) == 8
        assert summary["largest"] == sorted(summary["largest"], reverse=True)


class TestSparseCorr:
    """Test the sparse-corr command."""

    def test_single_lambda(
        self, controller: NetworkController, wide_csv: Path, tmp_path: Path
    ) -> None:
        """Test edges are the correlations shrunk by λ."""
        out = tmp_path / "out"
        run_command(controller, Command.SPARSE_CORR, (wide_csv,), out, lam=0.3)

        corr = np.array(read_rows(_corr_file(controller, wide_csv, tmp_path))[1:], dtype=float)
        rows = read_rows(out / "sparse_corr_edges.csv")
        assert rows[0] == ["i", "j", "value"]
        for i, j, value in rows[1:]:
            r = corr[int(i), int(j)]
            assert int(i) < int(j)
            assert float(value) == pytest.approx(np.sign(r) * (abs(r) - 0.3))
        expected = int(np.count_nonzero(np.abs(corr[np.triu_indices(8, 1)]) > 0.3))
        assert len(rows) - 1 == expected

        summary = read_json(out / "sparse_corr.json")
        assert summary["lambda"] == 0.3
        assert summary["nnz"] == 2 * expected
        assert summary["seed"] == 42

    def test_grid(
        self, controller: NetworkController, wide_csv: Path, tmp_path: Path
    ) -> None:
        """Test one edge file per grid value and a path summary."""
        out = tmp_path / "out"
        run_command(controller, Command.SPARSE_CORR, (wide_csv,), out, grid_count=5)

        assert sorted(p.name for p in out.glob("sparse_corr_edges_*.csv")) == [
            f"sparse_corr_edges_{t:03d}.csv" for t in range(5)
        ]
        path = read_json(out / "sparse_corr.json")["path"]
        nnz = [point["nnz"] for point in path]
        assert nnz == sorted(nnz, reverse=True)
        assert nnz[-1] == 0

    def test_two_inputs_give_cross_estimate(
        self,
        controller: NetworkController,
        paired_csvs: tuple[Path, Path],
        tmp_path: Path,
    ) -> None:
        """Test two inputs threshold the cross-correlation matrix."""
        out = tmp_path / "out"
        run_command(controller, Command.SPARSE_CORR, paired_csvs, out, lam=0.1)

        assert read_json(out / "sparse_corr.json")["source"] == "cross-correlation"


def _corr_file(controller: NetworkController, csv_path: Path, tmp_path: Path) -> Path:
    out = tmp_path / "corr"
    run_command(controller, Command.CORR, (csv_path,), out)
    return out / "correlation.csv"


class TestGlasso:
    """Test the glasso command."""

    def test_single_lambda(
        self, controller: NetworkController, planted_csv: Path, tmp_path: Path
    ) -> None:
        """Test precision edges and converged diagnostics."""
        out = tmp_path / "out"
        run_command(controller, Command.GLASSO, (planted_csv,), out, lam=0.3)

        diagnostics = read_json(out / "glasso.json")
        assert diagnostics["converged"] is True
        assert diagnostics["lambda"] == 0.3
        assert diagnostics["kappa"] == 3
        for i, j, _ in read_rows(out / "precision_edges.csv")[1:]:
            assert int(i) // 3 == int(j) // 3

    def test_screened_matches(
        self, controller: NetworkController, planted_csv: Path, tmp_path: Path
    ) -> None:
        """Test screened and unscreened fits give the same edges."""
        run_command(controller, Command.GLASSO, (planted_csv,), tmp_path / "a", lam=0.3)
        run_command(
            controller,
            Command.GLASSO,
            (planted_csv,),
            tmp_path / "b",
            lam=0.3,
            options={"screened": True},
        )

        a = read_rows(tmp_path / "a" / "precision_edges.csv")
        b = read_rows(tmp_path / "b" / "precision_edges.csv")
        assert [row[:2] for row in a] == [row[:2] for row in b]

    def test_path_skips_zero(
        self, controller: NetworkController, planted_csv: Path, tmp_path: Path
    ) -> None:
        """Test the path covers the positive grid values only."""
        out = tmp_path / "out"
        run_command(controller, Command.GLASSO, (planted_csv,), out, grid_count=4)

        path = read_json(out / "glasso.json")["path"]
        assert len(path) == 3
        assert all(point["lambda"] > 0 for point in path)
        assert len(list(out.glob("precision_edges_*.csv"))) == 3

    def test_diagonal_covariance_path(
        self, controller: NetworkController, tmp_path: Path
    ) -> None:
        """Test orthogonal columns give a one-point path at lambda = 0."""
        columns = np.array([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]])
        orthogonal = write_csv(tmp_path / "orthogonal.csv", columns)
        out = tmp_path / "out"
        run_command(controller, Command.GLASSO, (orthogonal,), out, grid_count=5)

        (point,) = read_json(out / "glasso.json")["path"]
        assert point["lambda"] == 0.0
        assert point["converged"] is True
        assert point["kappa"] == 2
        assert read_rows(out / "precision_edges_000.csv") == [["i", "j", "value"]]

    def test_unconverged_fit_is_convergence_failure(
        self, controller: NetworkController, tall_csv: Path, tmp_path: Path
    ) -> None:
        """Test a fit that runs out of sweeps still writes its diagnostics, then fails."""
        controller.config.glasso.max_sweeps = 1
        out = tmp_path / "out"
        with pytest.raises(IncompleteSolutionError) as exc_info:
            run_command(controller, Command.GLASSO, (tall_csv,), out, lam=0.01, tol=1e-14)

        assert exc_info.value.exit_code == 3
        assert read_json(out / "glasso.json")["converged"] is False
        assert (out / TIMING_FILE).exists()

    def test_unconverged_path_point(
        self, controller: NetworkController, tall_csv: Path, tmp_path: Path
    ) -> None:
        """Test one stalled grid point fails the whole path run."""
        controller.config.glasso.max_sweeps = 1
        out = tmp_path / "out"
        with pytest.raises(IncompleteSolutionError):
            run_command(controller, Command.GLASSO, (tall_csv,), out, grid_count=3, tol=1e-14)

        path = read_json(out / "glasso.json")["path"]
        assert not all(point["converged"] for point in path)


class TestPartial:
    """Test the partial command."""

    def test_residual_route_by_default(
        self, controller: NetworkController, tall_csv: Path, tmp_path: Path
    ) -> None:
        """Test no λ gives the least-squares residual estimate."""
        out = tmp_path / "out"
        run_command(controller, Command.PARTIAL, (tall_csv,), out)

        summary = read_json(out / "partial.json")
        assert summary["method"] == "residual"
        assert summary["edges"] == len(read_rows(out / "partial_edges.csv")) - 1

    def test_sparse_route(
        self, controller: NetworkController, tall_csv: Path, tmp_path: Path
    ) -> None:
        """Test λ selects node-wise LASSO with the configured rule."""
        out = tmp_path / "out"
        run_command(
            controller,
            Command.PARTIAL,
            (tall_csv,),
            out,
            lam=0.05,
            options={"rule": "or"},
        )

        summary = read_json(out / "partial.json")
        assert summary["method"] == "sparse"
        assert summary["lambda"] == 0.05
        assert summary["failed_nodes"] == []

    def test_failed_nodes_are_convergence_failure(
        self, controller: NetworkController, tall_csv: Path, tmp_path: Path
    ) -> None:
        """Test failed node-wise regressions are reported and exit with code 3."""
        controller.config.partial.max_passes = 1
        out = tmp_path / "out"
        with pytest.raises(IncompleteSolutionError) as exc_info:
            run_command(controller, Command.PARTIAL, (tall_csv,), out, lam=0.01, tol=1e-14)

        assert exc_info.value.exit_code == 3
        assert read_json(out / "partial.json")["failed_nodes"] != []

    def test_positive_only(
        self, controller: NetworkController, tall_csv: Path, tmp_path: Path
    ) -> None:
        """Test positive-only export drops negative edges."""
        out = tmp_path / "out"
        run_command(
            controller,
            Command.PARTIAL,
            (tall_csv,),
            out,
            options={"positive_only": True},
        )

        assert all(float(row[2]) > 0 for row in read_rows(out / "partial_edges.csv")[1:])

    def test_lse_with_lambda_rejected(
        self, controller: NetworkController, tall_csv: Path, tmp_path: Path
    ) -> None:
        """Test --lse and --lambda together raise ControllerError."""
        with pytest.raises(ControllerError):
            run_command(
                controller,
                Command.PARTIAL,
                (tall_csv,),
                tmp_path / "out",
                lam=0.1,
                options={"lse": True},
            )

    def test_unknown_rule(
        self, controller: NetworkController, tall_csv: Path, tmp_path: Path
    ) -> None:
        """Test rules other than and/or are rejected."""
        with pytest.raises(ControllerError):
            run_command(
                controller,
                Command.PARTIAL,
                (tall_csv,),
                tmp_path / "out",
                lam=0.1,
                options={"rule": "xor"},
            )

    def test_underdetermined(
        self, controller: NetworkController, wide_csv: Path, tmp_path: Path
    ) -> None:
        """Test the residual route refuses n <= p with exit code 2."""
        with pytest.raises(UnderdeterminedError) as exc_info:
            run_command(controller, Command.PARTIAL, (wide_csv,), tmp_path / "out")
        assert exc_info.value.exit_code == 2


class TestFiltration:
    """Test the filtration command."""

    def test_correlation_filtration(
        self, controller: NetworkController, wide_csv: Path, tmp_path: Path
    ) -> None:
        """Test the β₀ curve, partitions and permuted layout."""
        out = tmp_path / "out"
        run_command(
            controller,
            Command.FILTRATION,
            (wide_csv,),
            out,
            grid_count=6,
            options={"permuted": [0.5]},
        )

        rows = read_rows(out / "beta0.csv")
        assert rows[0] == ["lambda", "beta0", "edges"]
        assert len(rows) == 7
        beta0 = [int(row[1]) for row in rows[1:]]
        assert beta0 == sorted(beta0)
        assert beta0[-1] == 8

        partitions = read_json(out / "partitions.json")["partitions"]
        assert [part["kappa"] for part in partitions] == beta0

        layout = read_json(out / "permuted_00.json")
        assert sorted(layout["perm"]) == list(range(8))
        assert sum(layout["sizes"]) == 8
        dense = np.array(read_rows(out / "permuted_00.csv")[1:], dtype=int)
        assert dense.shape == (8, 8)

    def test_scratch_matches_incremental(
        self, controller: NetworkController, wide_csv: Path, tmp_path: Path
    ) -> None:
        """Test both construction methods write the same curve."""
        run_command(
            controller, Command.FILTRATION, (wide_csv,), tmp_path / "a", grid_count=6
        )
        run_command(
            controller,
            Command.FILTRATION,
            (wide_csv,),
            tmp_path / "b",
            grid_count=6,
            options={"scratch": True, "threads": 2},
        )

        assert (tmp_path / "a" / "beta0.csv").read_bytes() == (
            tmp_path / "b" / "beta0.csv"
        ).read_bytes()

    def test_cross_filtration(
        self,
        controller: NetworkController,
        paired_csvs: tuple[Path, Path],
        tmp_path: Path,
    ) -> None:
        """Test the min rule never connects more than the max rule."""
        for rule in ("max", "min"):
            run_command(
                controller,
                Command.FILTRATION,
                paired_csvs,
                tmp_path / rule,
                grid_count=5,
                options={"symmetrize": rule},
            )

        beta_max = [int(r[1]) for r in read_rows(tmp_path / "max" / "beta0.csv")[1:]]
        beta_min = [int(r[1]) for r in read_rows(tmp_path / "min" / "beta0.csv")[1:]]
        assert all(lo >= hi for lo, hi in zip(beta_min, beta_max, strict=True))

    def test_glasso_filtration(
        self, controller: NetworkController, planted_csv: Path, tmp_path: Path
    ) -> None:
        """Test zero-pattern and threshold curves agree on planted blocks."""
        out = tmp_path / "out"
        run_command(
            controller,
            Command.FILTRATION,
            (planted_csv,),
            out,
            grid_count=5,
            options={"method": "glasso"},
        )

        agreement = read_json(out / "agreement.json")
        assert all(agreement["agreement"])
        assert agreement["skipped"] == []
        assert agreement["node_nested"] is True
        zero_pattern = [row[:2] for row in read_rows(out / "beta0.csv")]
        threshold = [row[:2] for row in read_rows(out / "beta0_threshold.csv")]
        assert zero_pattern == threshold

    def test_unknown_method(
        self, controller: NetworkController, wide_csv: Path, tmp_path: Path
    ) -> None:
        """Test an unknown method raises ControllerError."""
        with pytest.raises(ControllerError):
            run_command(
                controller,
                Command.FILTRATION,
                (wide_csv,),
                tmp_path / "out",
                options={"method": "spectral"},
            )

    def test_mismatch_error_is_agreement_failure(self) -> None:
        """Test partition disagreement exits with code 4."""
        assert PartitionMismatchError([1]).exit_code == 4


class TestBenchAndSynth:
    """Test the bench and synth commands."""

    def test_bench(self, controller: NetworkController, tmp_path: Path) -> None:
        """Test timings go to bench.csv and agreement to agreement.json."""
        out = tmp_path / "out"
        run_command(
            controller,
            Command.BENCH,
            (),
            out,
            grid_count=3,
            options={"n": [5], "p": [2, 3]},
        )

        rows = read_rows(out / "bench.csv")
        assert rows[0] == ["n", "p", "t_soft", "t_lasso", "ratio"]
        assert [row[:2] for row in rows[1:]] == [["5", "2"], ["5", "3"]]
        agreement = read_json(out / "agreement.json")
        assert agreement["valid"] is True
        assert agreement["grid_count"] == 3

    def test_separation(self, controller: NetworkController, tmp_path: Path) -> None:
        """Test the separation experiment over ten seeds."""
        out = tmp_path / "out"
        run_command(
            controller, Command.BENCH, (), out, seed=0, options={"separation": True}
        )

        report = read_json(out / "separation.json")
        assert len(report["differences"]) == 10
        assert report["separated"] is True
        assert report["seed"] == 0

    def test_synth(self, controller: NetworkController, tmp_path: Path) -> None:
        """Test the written data reloads with the requested shape."""
        out = tmp_path / "out"
        run_command(
            controller,
            Command.SYNTH,
            (),
            out,
            seed=5,
            options={"n": 12, "p": 4, "structure": "planted-blocks", "blocks": 2},
        )

        data = load_data_csv(out / "synth.csv")
        assert (data.n, data.p) == (12, 4)
        summary = read_json(out / "synth.json")
        assert summary["structure"] == "planted-blocks"
        assert summary["seed"] == 5

    def test_synth_reproducible(
        self, controller: NetworkController, tmp_path: Path
    ) -> None:
        """Test equal seeds write equal data."""
        for name in ("a", "b"):
            run_command(
                controller, Command.SYNTH, (), tmp_path / name, options={"n": 6, "p": 3}
            )

        assert (tmp_path / "a" / "synth.csv").read_bytes() == (
            tmp_path / "b" / "synth.csv"
        ).read_bytes()
