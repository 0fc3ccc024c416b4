"""Synthetic metric streams and response maps with a controlled failure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .response import ResponseMap
from .stream import MetricSample


@dataclass(frozen=True)
class StreamSpec:
    """Stream of length ``length`` whose mean moves from ``null_mean`` to
    ``post_failure_mean`` at frame ``failure_at``, optionally along a linear
    ramp of ``transition_frames`` frames. Values are uniform on
    ``[mean - spread, mean + spread]`` clipped to [0, 1].
    """

    length: int
    null_mean: float = 0.8
    null_spread: float = 0.0
    failure_at: Optional[int] = None
    post_failure_mean: float = 0.2
    transition_frames: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be >= 0")
        for name in ("null_mean", "post_failure_mean"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if self.null_spread < 0:
            raise ValueError("null_spread must be >= 0")
        if self.transition_frames < 0:
            raise ValueError("transition_frames must be >= 0")
        if self.failure_at is not None and not (1 <= self.failure_at <= max(self.length, 1)):
            raise ValueError(f"failure_at must lie in [1, {self.length}], got {self.failure_at!r}")


def failure_progress(spec: StreamSpec) -> np.ndarray:
    """Per-frame fraction of the way into failure, 0 before and 1 once fully failed."""
    t = np.arange(1, spec.length + 1, dtype=float)
    if spec.failure_at is None:
        return np.zeros(spec.length)
    if spec.transition_frames == 0:
        return (t >= spec.failure_at).astype(float)
    # Ramp completes transition_frames after failure_at.
    return np.clip((t - spec.failure_at) / spec.transition_frames, 0.0, 1.0)


def mean_profile(spec: StreamSpec) -> np.ndarray:
    """Per-frame mean of the stream (index 0 is frame 1)."""
    frac = failure_progress(spec)
    return spec.null_mean + frac * (spec.post_failure_mean - spec.null_mean)


def generate_values(spec: StreamSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    means = mean_profile(spec)
    noise = rng.uniform(-spec.null_spread, spec.null_spread, size=spec.length)
    return np.clip(means + noise, 0.0, 1.0)


def generate_stream(spec: StreamSpec) -> list[MetricSample]:
    return [MetricSample(i + 1, float(v)) for i, v in enumerate(generate_values(spec))]


def generate_ensemble(spec: StreamSpec, n: int) -> np.ndarray:
    """``n`` streams drawn with seeds ``spec.seed + j``, stacked as rows."""
    out = np.empty((n, spec.length))
    for j in range(n):
        out[j] = generate_values(_with_seed(spec, spec.seed + j))
    return out


def _with_seed(spec: StreamSpec, seed: int) -> StreamSpec:
    return StreamSpec(spec.length, spec.null_mean, spec.null_spread, spec.failure_at,
                      spec.post_failure_mean, spec.transition_frames, seed)


def gaussian_bump(rows: int, cols: int, amplitude: float, width: float,
                  center: Optional[tuple[float, float]] = None) -> np.ndarray:
    if center is None:
        center = ((rows - 1) / 2.0, (cols - 1) / 2.0)
    r = np.arange(rows, dtype=float)[:, None] - center[0]
    c = np.arange(cols, dtype=float)[None, :] - center[1]
    return amplitude * np.exp(-(r * r + c * c) / (2.0 * width * width))


def generate_response_maps(spec: StreamSpec, rows: int, cols: int,
                           width: float = 1.5, failed_width: float = 4.0) -> list[ResponseMap]:
    """Gaussian-bump maps: peak amplitude follows the stream, bump widens after failure.

    The bump width moves from ``width`` to ``failed_width`` along the same
    profile as the mean, so post-failure maps are flatter (lower APCE).
    """
    if rows * cols < 2:
        raise ValueError("maps need at least two cells")
    amps = generate_values(spec)
    progress = failure_progress(spec)
    maps = []
    for amp, p in zip(amps, progress):
        wdt = width + p * (failed_width - width)
        grid = np.clip(gaussian_bump(rows, cols, amp, wdt), 0.0, 1.0)
        maps.append(ResponseMap(grid))
    return maps
