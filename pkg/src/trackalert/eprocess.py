"""Sequential test for quality degradation in a bounded metric stream.

The e-process is the running product of ``1 + lam_t * (eps - m_t)`` over
frames, starting at 1, with ``lam_t`` chosen from frames before ``t``. The
monitor alerts the first time the product reaches ``1/alpha``; under the
null hypothesis (conditional mean of every frame at least ``eps``) that
happens with probability at most ``alpha``, whenever one chooses to stop.

The product is accumulated in log space. :class:`Monitor` processes one
frame at a time; :func:`run_batch` advances many independent streams in
lockstep with numpy and is meant for Monte-Carlo ensembles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Iterable, Optional, Sequence

import numpy as np

from .betting import BettingConfig, Bettor
from .stream import EmaSmoother, MetricSample, check_ordered, check_unit


@dataclass(frozen=True)
class MonitorConfig:
    """Fixed parameters of one sequential test.

    ``betting`` defaults to aGRAPA at the same tolerance; if given, its
    epsilon must match ``epsilon``. ``recency_window=None`` feeds the betting
    rate with the full history.
    """

    epsilon: float = 0.55
    alpha: float = 0.1
    betting: Optional[BettingConfig] = None
    smoothing_factor: float = 0.25
    recency_window: Optional[int] = 10
    halt_on_alert: bool = True

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not (0.0 < self.smoothing_factor <= 1.0):
            raise ValueError(f"smoothing_factor must lie in (0, 1], got {self.smoothing_factor!r}")
        if self.recency_window is not None and self.recency_window < 1:
            raise ValueError(f"recency_window must be >= 1 or None, got {self.recency_window!r}")
        if self.betting is None:
            object.__setattr__(self, "betting", BettingConfig(epsilon=self.epsilon))
        elif self.betting.epsilon != self.epsilon:
            raise ValueError(
                f"betting epsilon {self.betting.epsilon!r} differs from monitor epsilon {self.epsilon!r}"
            )

    @property
    def threshold(self) -> float:
        return 1.0 / self.alpha

    @property
    def log_threshold(self) -> float:
        return -math.log(self.alpha)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betting"] = asdict(self.betting)
        return d


@dataclass(frozen=True)
class StepEvent:
    t: int
    m_raw: float
    m_smoothed: float
    lam: float
    factor: float
    x: float
    log_x: float
    alert: bool

    def to_record(self) -> dict:
        return {
            "t": self.t,
            "m": self.m_smoothed,
            "lambda": self.lam,
            "factor": self.factor,
            "x": self.x,
            "alert": self.alert,
        }


@dataclass
class MonitorState:
    t: int = 0
    log_x: float = 0.0
    lambda_last: float = 0.0
    alerted: bool = False
    stopping_time: Optional[int] = None

    @property
    def x(self) -> float:
        return math.exp(self.log_x)


class MonitorHalted(RuntimeError):
    """Raised when stepping a monitor that already alerted in halt mode."""


class Monitor:
    """Single-stream sequential test, advanced one frame at a time."""

    def __init__(self, cfg: MonitorConfig):
        self.cfg = cfg
        self.state = MonitorState()
        self.smoother = EmaSmoother(cfg.smoothing_factor)
        self.bettor = Bettor(cfg.betting, cfg.recency_window)

    @property
    def halted(self) -> bool:
        return self.state.alerted and self.cfg.halt_on_alert

    def step(self, m: float, t: Optional[int] = None) -> StepEvent:
        """Process one frame's metric value.

        ``t`` labels the frame; it defaults to the number of frames seen.
        """
        if self.halted:
            raise MonitorHalted(f"monitor alerted at frame {self.state.stopping_time}")
        m = check_unit(m)
        st = self.state
        lam = self.bettor.predict()
        ms = self.smoother(m)
        factor = 1.0 + lam * (self.cfg.epsilon - ms)
        if not factor > 0.0:
            raise ArithmeticError(
                f"non-positive e-process factor {factor!r} (lambda={lam!r}, m={ms!r})"
            )
        st.log_x += math.log(factor)
        self.bettor.observe(ms)
        st.t += 1
        st.lambda_last = lam
        label = st.t if t is None else t
        if not st.alerted and st.log_x >= self.cfg.log_threshold:
            st.alerted = True
            st.stopping_time = label
        return StepEvent(label, m, ms, lam, factor, st.x, st.log_x, st.alerted)


@dataclass
class MonitorResult:
    stopping_time: Optional[int]
    trajectory: list[StepEvent] = field(default_factory=list)

    @property
    def alerted(self) -> bool:
        return self.stopping_time is not None

    @property
    def final_x(self) -> float:
        return self.trajectory[-1].x if self.trajectory else 1.0


def run_monitor(stream: Sequence[MetricSample] | Iterable[float], cfg: MonitorConfig) -> MonitorResult:
    """Run a fresh monitor over a whole stream.

    Accepts :class:`MetricSample` objects or bare values (numbered from 1).
    In halt mode the trajectory ends at the alerting frame.
    """
    samples = list(stream)
    if samples and not isinstance(samples[0], MetricSample):
        samples = [MetricSample(i + 1, float(v)) for i, v in enumerate(samples)]
    check_ordered(samples)
    mon = Monitor(cfg)
    events = []
    for s in samples:
        events.append(mon.step(s.value, s.t))
        if mon.halted:
            break
    return MonitorResult(mon.state.stopping_time, events)


def e_values(values, epsilon: float) -> np.ndarray:
    """Per-frame e-values ``1 + eps - m``."""
    return 1.0 + epsilon - np.asarray(values, dtype=float)


def wealth_trajectory(lams, evalues) -> np.ndarray:
    """Wealth of the betting game ``prod((1 - lam_i) + lam_i * E_i)`` after each frame."""
    lams = np.asarray(lams, dtype=float)
    return np.cumprod((1.0 - lams) + lams * np.asarray(evalues, dtype=float))


@dataclass
class BatchResult:
    """Outcome of :func:`run_batch`; ``stopping_times`` uses 0 for "no alert"."""

    stopping_times: np.ndarray
    final_log_x: np.ndarray
    max_log_x: np.ndarray

    @property
    def alerted(self) -> np.ndarray:
        return self.stopping_times > 0

    @property
    def final_x(self) -> np.ndarray:
        return np.exp(self.final_log_x)


def run_batch(values: np.ndarray, cfg: MonitorConfig, halt: Optional[bool] = None) -> BatchResult:
    """Run independent monitors over the rows of ``values`` (shape ``(n, T)``).

    Matches :class:`Monitor` frame for frame. With ``halt`` (default
    ``cfg.halt_on_alert``) each row's process is frozen at its alert, so
    ``final_log_x`` is the stopped value; otherwise it is the value at ``T``.
    """
    vals = np.atleast_2d(np.asarray(values, dtype=float))
    if vals.size and (vals.min() < 0.0 or vals.max() > 1.0 or not np.all(np.isfinite(vals))):
        raise ValueError("metric values must lie in [0, 1]")
    halt = cfg.halt_on_alert if halt is None else halt
    n, T = vals.shape
    eps = cfg.epsilon
    bet = cfg.betting
    a = cfg.smoothing_factor
    w = cfg.recency_window
    log_thr = cfg.log_threshold

    log_x = np.zeros(n)
    max_log_x = np.zeros(n)
    stop = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    smoothed = np.empty(n)
    lam = np.full(n, bet.fixed_lambda if bet.strategy == "fixed" else 0.0)
    grad_sq = np.zeros(n)
    if w is None:
        h_n = 0
        h_mean = np.zeros(n)
        h_m2 = np.zeros(n)
    else:
        ring = np.zeros((n, w))

    for t in range(T):
        # Rate for frame t+1 from frames 1..t.
        if bet.strategy == "agrapa":
            if t == 0:
                lam = np.zeros(n)
            else:
                if w is None:
                    mean, var = h_mean, np.maximum(h_m2 / h_n, 0.0)
                else:
                    k = min(t, w)
                    win = ring[:, :k]
                    mean = win.sum(axis=1) / k
                    var = ((win - mean[:, None]) ** 2).sum(axis=1) / k
                gap = eps - mean
                denom = var + gap * gap
                with np.errstate(divide="ignore", invalid="ignore"):
                    raw = np.where(denom == 0.0, 0.0, gap / denom)
                lam = np.clip(raw, 0.0, bet.lambda_max)

        m = vals[:, t]
        smoothed = m.copy() if t == 0 else a * m + (1.0 - a) * smoothed
        gap = eps - smoothed
        factor = 1.0 + lam * gap
        if np.any(factor <= 0.0):
            raise ArithmeticError("non-positive e-process factor")
        step_log = np.log(factor)
        log_x = np.where(active, log_x + step_log, log_x)
        max_log_x = np.maximum(max_log_x, log_x)

        crossed = (stop == 0) & (log_x >= log_thr)
        stop[crossed] = t + 1
        if halt:
            active &= ~crossed

        if w is None:
            h_n += 1
            delta = smoothed - h_mean
            h_mean = h_mean + delta / h_n
            h_m2 = h_m2 + delta * (smoothed - h_mean)
        else:
            ring[:, t % w] = smoothed

        if bet.strategy == "sfogd":
            g = -gap / (1.0 + lam * gap)
            nz = g != 0.0
            grad_sq = grad_sq + g * g
            with np.errstate(divide="ignore", invalid="ignore"):
                stepped = lam - bet.learning_rate * g / np.sqrt(grad_sq)
            lam = np.where(nz, np.clip(stepped, 0.0, bet.lambda_max), lam)

    return BatchResult(stop, log_x, max_log_x)
