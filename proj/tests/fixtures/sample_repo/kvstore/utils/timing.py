"""Timing helpers for benchmarks and logs."""

import time
from contextlib import contextmanager


@contextmanager
def timed(label, sink=print):
    """Context manager that reports elapsed wall time."""
    start = time.perf_counter()
    try:
        yield
    finally:
        sink(f"{label}: {time.perf_counter() - start:.3f}s")


class RateLimiter:
    """Token bucket limiting calls per second."""

    def __init__(self, rate: float):
        self.rate = rate
        self._allowance = rate
        self._last = time.monotonic()

    def allow(self) -> bool:
        now = time.monotonic()
        self._allowance = min(self.rate, self._allowance + (now - self._last) * self.rate)
        self._last = now
        if self._allowance < 1.0:
            return False
        self._allowance -= 1.0
        return True
