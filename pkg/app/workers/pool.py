"""
Ordered worker pool: fan work out over threads, get results back in input
order.

Every stage that parallelizes (chunk extraction, community summaries, route
fan-out, benchmark items) goes through run_ordered(). Outcomes come back as a
list aligned with the inputs, each holding either a value or the exception
that item raised, so callers decide per item whether a failure is fatal.
Callers commit results in that order, which keeps outputs independent of the
worker count.

workers=1 runs inline on the calling thread (no executor), which keeps
tracebacks simple when debugging.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Generic, Optional, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class Outcome(Generic[R]):
    index: int
    value: Optional[R] = None
    error: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def unwrap(self) -> R:
        """Return the value or re-raise the captured exception."""
        if self.error is not None:
            raise self.error
        return self.value  # type: ignore[return-value]


def _capture(fn: Callable[[T], R], index: int, item: T) -> Outcome[R]:
    try:
        return Outcome(index=index, value=fn(item))
    except Exception as exc:
        return Outcome(index=index, error=exc)


def run_ordered(
    fn: Callable[[T], R],
    items: Sequence[T],
    workers: int = 1,
    label: str = "work",
) -> list[Outcome[R]]:
    """Apply fn to every item on up to `workers` threads; outcomes in input order."""
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if not items:
        return []

    if workers == 1 or len(items) == 1:
        outcomes = [_capture(fn, i, item) for i, item in enumerate(items)]
    else:
        with ThreadPoolExecutor(
            max_workers=min(workers, len(items)), thread_name_prefix=label
        ) as pool:
            futures = [pool.submit(_capture, fn, i, item) for i, item in enumerate(items)]
            outcomes = [future.result() for future in futures]

    failed = sum(1 for outcome in outcomes if not outcome.ok)
    if failed:
        logger.warning("%s: %d/%d items failed", label, failed, len(items))
    return outcomes


def unwrap_all(outcomes: list[Outcome[R]]) -> list[R]:
    """Values in order; the first captured error is re-raised."""
    return [outcome.unwrap() for outcome in outcomes]
