"""Predictable betting rates learned from past metric values.

Two strategies are provided, both clipped to ``[0, lambda_max]``:

* ``"agrapa"``: closed-form rate from the windowed mean and variance of past
  values.
* ``"sfogd"``: scale-free online gradient descent on the per-frame log-loss
  ``-log(1 + lam * (eps - m))``.

A third strategy, ``"fixed"``, keeps a constant rate and exists for testing
and closed-form checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .stream import RecencyBuffer, window_stats

STRATEGIES = ("agrapa", "sfogd", "fixed")

_ALIASES = {"agrapa": "agrapa", "sfogd": "sfogd", "sf-ogd": "sfogd", "fixed": "fixed"}


def default_lambda_max(epsilon: float) -> float:
    """Largest rate used by default for tolerance ``epsilon``.

    ``1/(2 eps)`` alone lets ``1 + lam * (eps - 1)`` reach zero once
    ``eps < 1/3``; the second term keeps every factor strictly positive.
    """
    return min(1.0 / (2.0 * epsilon), 0.999 / (1.0 - epsilon))


@dataclass(frozen=True)
class BettingConfig:
    strategy: str = "agrapa"
    epsilon: float = 0.55
    learning_rate: float = 0.1
    lambda_max: Optional[float] = None
    fixed_lambda: float = 0.0

    def __post_init__(self):
        strategy = _ALIASES.get(str(self.strategy).lower())
        if strategy is None:
            raise ValueError(f"unknown betting strategy {self.strategy!r}; expected one of {STRATEGIES}")
        object.__setattr__(self, "strategy", strategy)
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if not self.learning_rate > 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if self.lambda_max is None:
            object.__setattr__(self, "lambda_max", default_lambda_max(self.epsilon))
        lam_max = self.lambda_max
        if not (0.0 < lam_max <= 1.0 / (2.0 * self.epsilon)):
            raise ValueError(
                f"lambda_max must lie in (0, 1/(2*epsilon)] = (0, {1.0 / (2.0 * self.epsilon):.6g}], got {lam_max!r}"
            )
        if lam_max * (1.0 - self.epsilon) >= 1.0:
            raise ValueError(
                f"lambda_max={lam_max!r} allows a non-positive factor for epsilon={self.epsilon!r}"
            )
        if self.strategy == "fixed" and not (0.0 <= self.fixed_lambda <= lam_max):
            raise ValueError(f"fixed_lambda must lie in [0, {lam_max!r}], got {self.fixed_lambda!r}")


@dataclass
class BettingState:
    lam: float = 0.0
    grad_norm_sq_sum: float = 0.0
    history: RecencyBuffer = field(default_factory=RecencyBuffer)


def clip(value: float, lo: float, hi: float) -> float:
    return min(max(value, lo), hi)


def agrapa_rate(mean: float, var: float, epsilon: float) -> float:
    """Unclipped closed-form rate; 0 when the denominator vanishes."""
    gap = epsilon - mean
    denom = var + gap * gap
    if denom == 0.0:
        return 0.0
    return gap / denom


def agrapa_update(state: BettingState, cfg: BettingConfig) -> float:
    """Set ``state.lam`` from the buffered history (frames before the current one)."""
    mean, var, n = window_stats(state.history)
    if n == 0:
        lam = 0.0
    else:
        lam = clip(agrapa_rate(mean, var, cfg.epsilon), 0.0, cfg.lambda_max)
    state.lam = lam
    return lam


def log_loss(m: float, lam: float, epsilon: float) -> float:
    return -math.log1p(lam * (epsilon - m))


def log_loss_grad(m: float, lam: float, epsilon: float) -> float:
    """Derivative of :func:`log_loss` with respect to the rate."""
    gap = epsilon - m
    return -gap / (1.0 + lam * gap)


def sfogd_update(state: BettingState, m_prev: float, cfg: BettingConfig) -> float:
    """Advance ``state.lam`` after observing ``m_prev`` under the current rate.

    The squared gradient is accumulated before normalizing, so the first
    non-zero step has magnitude exactly ``learning_rate``. A zero gradient
    leaves both the rate and the accumulator untouched.
    """
    g = log_loss_grad(m_prev, state.lam, cfg.epsilon)
    if g == 0.0:
        return state.lam
    state.grad_norm_sq_sum += g * g
    step = cfg.learning_rate * g / math.sqrt(state.grad_norm_sq_sum)
    state.lam = clip(state.lam - step, 0.0, cfg.lambda_max)
    return state.lam


class Bettor:
    """Predict-then-observe wrapper around one stream's betting state.

    Call :meth:`predict` before revealing frame ``t`` and :meth:`observe` with
    that frame's value afterwards.
    """

    def __init__(self, cfg: BettingConfig, window: Optional[int] = None):
        self.cfg = cfg
        lam0 = cfg.fixed_lambda if cfg.strategy == "fixed" else 0.0
        self.state = BettingState(lam=lam0, history=RecencyBuffer(window))

    def predict(self) -> float:
        if self.cfg.strategy == "agrapa":
            return agrapa_update(self.state, self.cfg)
        return self.state.lam

    def observe(self, m: float) -> None:
        self.state.history.push(m)
        if self.cfg.strategy == "sfogd":
            sfogd_update(self.state, m, self.cfg)
