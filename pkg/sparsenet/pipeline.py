"""
Bounded-concurrency runner for independent numerical tasks.

Screened glasso blocks, node-wise regressions and from-scratch filtration
grid points are independent of each other. This module runs such tasks on
worker threads, at most ``threads`` at a time, and returns their outcomes in
input order.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import partial
from typing import Generic, TypeVar

import anyio
import anyio.to_thread

from .errors import SparseNetError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class PipelineError(SparseNetError):
    """Base exception for task-runner errors."""

    pass


@dataclass
class TaskOutcome(Generic[R]):
    """Result of running one task.

    Exactly one of ``value`` and ``error`` is meaningful: ``error`` holds the
    exception the task raised, if any.
    """

    index: int
    value: R | None = None
    error: Exception | None = None

    @property
    def success(self) -> bool:
        return self.error is None


class TaskRunner:
    """Run a function over many inputs with bounded thread parallelism."""

    def __init__(self, threads: int = 1):
        """
        Initialize the runner.

        Args:
            threads: Maximum number of tasks running at once. 1 runs every
                task inline on the calling thread, in order
        """
        if threads < 1:
            raise PipelineError(f"threads must be at least 1, got {threads}")
        self.threads = threads

    def map(self, func: Callable[[T], R], items: Sequence[T]) -> list[TaskOutcome[R]]:
        """
        Apply ``func`` to every item.

        Args:
            func: Function to run on each item
            items: Task inputs

        Returns:
            One TaskOutcome per item, in input order
        """
        if self.threads == 1 or len(items) <= 1:
            return [self._run_one(func, i, item) for i, item in enumerate(items)]
        return anyio.run(self._run_all, func, items)

    def map_values(self, func: Callable[[T], R], items: Sequence[T]) -> list[R]:
        """Like map(), but re-raise the first task error instead of collecting it."""
        values: list[R] = []
        for outcome in self.map(func, items):
            if outcome.error is not None:
                raise outcome.error
            values.append(outcome.value)  # type: ignore[arg-type]
        return values

    @staticmethod
    def _run_one(func: Callable[[T], R], index: int, item: T) -> TaskOutcome[R]:
        try:
            return TaskOutcome(index=index, value=func(item))
        except Exception as e:
            logger.debug(f"Task {index} failed: {e}")
            return TaskOutcome(index=index, error=e)

    async def _run_all(
        self, func: Callable[[T], R], items: Sequence[T]
    ) -> list[TaskOutcome[R]]:
        limiter = anyio.CapacityLimiter(self.threads)
        outcomes: list[TaskOutcome[R] | None] = [None] * len(items)

        async def run(index: int, item: T) -> None:
            outcomes[index] = await anyio.to_thread.run_sync(
                partial(self._run_one, func, index, item), limiter=limiter
            )

        logger.debug(f"Running {len(items)} tasks on {self.threads} threads")
        async with anyio.create_task_group() as tg:
            for index, item in enumerate(items):
                tg.start_soon(run, index, item)

        failed = sum(1 for o in outcomes if o is not None and not o.success)
        if failed:
            logger.info(f"{failed}/{len(items)} tasks failed")
        return [o for o in outcomes if o is not None]
