"""Unsupervised confidence proxies computed from tracker response maps."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ResponseMap:
    """Dense correlation grid with values in [0, 1].

    Use :meth:`from_raw` with ``normalize=True`` for raw tracker responses that
    fall outside the unit interval.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"response map must be 2-D, got shape {arr.shape}")
        if arr.size < 2:
            raise ValueError("response map needs at least two cells")
        if not np.all(np.isfinite(arr)):
            raise ValueError("response map contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                f"response map values must lie in [0, 1], got range [{arr.min()}, {arr.max()}]"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_raw(cls, data, rows: int | None = None, cols: int | None = None,
                 normalize: bool = False) -> "ResponseMap":
        arr = np.asarray(data, dtype=float)
        if rows is not None and cols is not None:
            if arr.size != rows * cols:
                raise ValueError(f"expected {rows * cols} values for a {rows}x{cols} map, got {arr.size}")
            arr = arr.reshape(rows, cols)
        if normalize:
            lo, hi = float(arr.min()), float(arr.max())
            arr = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
        return cls(arr)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def peak_correlation(cmap: ResponseMap) -> float:
    return float(cmap.values.max())


def apce(cmap: ResponseMap) -> float:
    """Average peak-to-correlation energy.

    Squared peak-minus-minimum over the mean squared deviation from the
    minimum. A constant map has no peak and scores 0.
    """
    v = cmap.values
    lo = v.min()
    peak = v.max()
    if peak == lo:
        return 0.0
    # Scaling by the peak-to-minimum range first avoids underflow on tiny spreads.
    rel = (v - lo) / (peak - lo)
    return float(1.0 / np.mean(rel * rel))


class WindowedNormalizer:
    """Ratio of the current score to the mean of the last ``window_size`` scores.

    The current score must be pushed before calling :meth:`gain`; it takes part
    in the window mean.
    """

    def __init__(self, window_size: int = 10):
        if window_size < 1:
            raise ValueError(f"window_size must be >= 1, got {window_size!r}")
        self.window_size = int(window_size)
        self.buffer: deque[float] = deque(maxlen=self.window_size)

    def push(self, score: float) -> None:
        self.buffer.append(float(score))

    def window_mean(self) -> float:
        if not self.buffer:
            raise ValueError("normalizer is empty; push the current score first")
        return sum(self.buffer) / len(self.buffer)

    def gain(self, current: float) -> float:
        mean = self.window_mean()
        if mean == 0.0:
            # Only reachable when every windowed score, the current one included, is 0.
            return 1.0
        return min(1.0, current / mean)

    def update(self, score: float) -> float:
        self.push(score)
        return self.gain(score)

    def reset(self) -> None:
        self.buffer.clear()


def certainty_gain(pc_now: float, normalizer: WindowedNormalizer) -> float:
    """Peak correlation relative to its recent mean, clipped at 1."""
    return normalizer.gain(pc_now)


def sharpness_gain(apce_now: float, normalizer: WindowedNormalizer) -> float:
    """APCE relative to its recent mean, clipped at 1."""
    return normalizer.gain(apce_now)


class ResponseMetric:
    """Turns a sequence of response maps into one of the unit-interval metrics.

    ``kind`` is ``"pc"``, ``"cg"`` or ``"sg"``; ``sigma`` sets the
    normalization window for the two gain metrics.
    """

    KINDS = ("pc", "cg", "sg")

    def __init__(self, kind: str = "sg", sigma: int = 10):
        if kind not in self.KINDS:
            raise ValueError(f"unknown response metric {kind!r}; expected one of {self.KINDS}")
        self.kind = kind
        self.normalizer = WindowedNormalizer(sigma)

    def __call__(self, cmap: ResponseMap) -> float:
        if self.kind == "pc":
            return peak_correlation(cmap)
        score = peak_correlation(cmap) if self.kind == "cg" else apce(cmap)
        return self.normalizer.update(score)
