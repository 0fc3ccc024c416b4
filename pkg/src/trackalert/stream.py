"""Frame-ordered preprocessing of bounded quality streams."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence


def check_unit(value: float, what: str = "metric value") -> float:
    """Return ``value`` as float, raising ValueError unless it lies in [0, 1]."""
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{what} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class MetricSample:
    """One per-frame quality value. Frames are 1-based."""

    t: int
    value: float

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"frame index must be >= 1, got {self.t}")
        check_unit(self.value)


def as_samples(values: Iterable[float], start: int = 1) -> list[MetricSample]:
    return [MetricSample(start + i, float(v)) for i, v in enumerate(values)]


def check_ordered(samples: Sequence[MetricSample]) -> None:
    for prev, cur in zip(samples, samples[1:]):
        if cur.t <= prev.t:
            raise ValueError(
                f"frame indices must be strictly increasing (frame {cur.t} after {prev.t})"
            )


class EmaSmoother:
    """Exponential moving average; the first value passes through unchanged."""

    def __init__(self, factor: float = 0.25):
        if not (0.0 < factor <= 1.0):
            raise ValueError(f"smoothing factor must lie in (0, 1], got {factor!r}")
        self.factor = float(factor)
        self.state: Optional[float] = None

    def __call__(self, m: float) -> float:
        return self.smooth(m)

    def smooth(self, m: float) -> float:
        m = check_unit(m)
        if self.state is None:
            self.state = m
        else:
            self.state = self.factor * m + (1.0 - self.factor) * self.state
        return self.state

    def reset(self) -> None:
        self.state = None


def smooth_values(values: Iterable[float], factor: float = 0.25) -> list[float]:
    smoother = EmaSmoother(factor)
    return [smoother(v) for v in values]


class RecencyBuffer:
    """FIFO of recent values; ``capacity=None`` keeps the full history.

    The unbounded mode keeps running moments instead of the values themselves so
    long streams cost O(1) memory.
    """

    def __init__(self, capacity: Optional[int] = None):
        if capacity is not None and capacity < 1:
            raise ValueError(f"capacity must be >= 1 or None, got {capacity!r}")
        self.capacity = capacity
        self._values: deque[float] = deque(maxlen=capacity)
        self._n = 0
        self._mean = 0.0
        self._m2 = 0.0

    def push(self, value: float) -> None:
        value = float(value)
        if self.capacity is None:
            # Welford-style accumulators for the unbounded history.
            self._n += 1
            delta = value - self._mean
            self._mean += delta / self._n
            self._m2 += delta * (value - self._mean)
        else:
            self._values.append(value)

    def __len__(self) -> int:
        return self._n if self.capacity is None else len(self._values)

    def values(self) -> list[float]:
        if self.capacity is None:
            raise TypeError("unbounded buffer does not retain individual values")
        return list(self._values)

    def clear(self) -> None:
        self._values.clear()
        self._n = 0
        self._mean = 0.0
        self._m2 = 0.0


def window_stats(buf: RecencyBuffer) -> tuple[float, float, int]:
    """Population mean and variance of the buffered values.

    Returns ``(0.0, 0.0, 0)`` for an empty buffer.
    """
    n = len(buf)
    if n == 0:
        return 0.0, 0.0, 0
    if buf.capacity is None:
        return buf._mean, max(buf._m2 / n, 0.0), n
    vals = buf._values
    mean = math.fsum(vals) / n
    var = math.fsum((v - mean) ** 2 for v in vals) / n
    return mean, var, n
