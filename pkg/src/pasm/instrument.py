"""Operation counters for the arithmetic paths.

Wrap a region in ``count_ops()`` to tally how many hardware-level multiplies,
adds, and bin writes the enclosed calls performed.  Counting is thread-local,
so concurrent workers never see each other's tallies; nesting is allowed and
every active counter on the current thread receives the increments.
"""
from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator

_local = threading.local()


@dataclass
class OpCounts:
    multiplies: int = 0
    adds: int = 0
    bin_writes: int = 0


def _stack() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


@contextmanager
def count_ops() -> Iterator[OpCounts]:
    """Collect operation counts for everything executed inside the block."""
    counts = OpCounts()
    stack = _stack()
    stack.append(counts)
    try:
        yield counts
    finally:
        stack.pop()


def tally(multiplies: int = 0, adds: int = 0, bin_writes: int = 0) -> None:
    """Record operations against every active counter on this thread."""
    stack = getattr(_local, "stack", None)
    if not stack:
        return
    for counts in stack:
        counts.multiplies += multiplies
        counts.adds += adds
        counts.bin_writes += bin_writes
