"""Tests for the bounded-concurrency task runner."""

import threading
import time

import pytest

from sparsenet.pipeline import PipelineError, TaskOutcome, TaskRunner


def square(x: int) -> int:
    return x * x


def fail_on_three(x: int) -> int:
    if x == 3:
        raise ValueError("three")
    return x


class TestTaskOutcome:
    """Test TaskOutcome class."""

    def test_successful_outcome(self) -> None:
        """Test an outcome without error is a success."""
        outcome = TaskOutcome(index=0, value=4)
        assert outcome.success is True

    def test_failed_outcome(self) -> None:
        """Test an outcome carrying an error is a failure."""
        outcome: TaskOutcome[int] = TaskOutcome(index=1, error=ValueError("bad"))
        assert outcome.success is False
        assert outcome.value is None


class TestTaskRunner:
    """Test TaskRunner class."""

    def test_rejects_zero_threads(self) -> None:
        """Test at least one thread is required."""
        with pytest.raises(PipelineError):
            TaskRunner(0)

    @pytest.mark.parametrize("threads", [1, 4])
    def test_map_keeps_input_order(self, threads: int) -> None:
        """Test outcomes come back in input order."""
        outcomes = TaskRunner(threads).map(square, list(range(10)))
        assert [o.index for o in outcomes] == list(range(10))
        assert [o.value for o in outcomes] == [x * x for x in range(10)]

    @pytest.mark.parametrize("threads", [1, 3])
    def test_map_collects_errors(self, threads: int) -> None:
        """Test a failing task does not stop the others."""
        outcomes = TaskRunner(threads).map(fail_on_three, [1, 2, 3, 4])
        assert [o.success for o in outcomes] == [True, True, False, True]
        assert isinstance(outcomes[2].error, ValueError)
        assert outcomes[3].value == 4

    def test_map_values_reraises(self) -> None:
        """Test map_values raises the first task error."""
        with pytest.raises(ValueError, match="three"):
            TaskRunner(2).map_values(fail_on_three, [1, 3, 5])
        assert TaskRunner(2).map_values(square, [2, 3]) == [4, 9]

    def test_single_thread_runs_inline(self) -> None:
        """Test threads=1 runs every task on the calling thread."""
        caller = threading.get_ident()
        seen = TaskRunner(1).map_values(lambda _: threading.get_ident(), [0, 1, 2])
        assert seen == [caller] * 3

    def test_concurrency_is_bounded(self) -> None:
        """Test no more than ``threads`` tasks run at once."""
        lock = threading.Lock()
        active = 0
        peak = 0

        def task(_: int) -> None:
            nonlocal active, peak
            with lock:
                active += 1
                peak = max(peak, active)
            time.sleep(0.02)
            with lock:
                active -= 1

        TaskRunner(2).map(task, list(range(8)))
        assert 1 <= peak <= 2

    def test_empty_input(self) -> None:
        """Test no items gives no outcomes."""
        assert TaskRunner(3).map(square, []) == []
