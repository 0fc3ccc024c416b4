"""Ground-truth failure times, noise-randomized trials and FPR/ADD aggregation."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .eprocess import MonitorConfig, run_batch
from .stream import MetricSample, as_samples, check_ordered, smooth_values

FALSE_POSITIVE = "false_positive"
TRUE_POSITIVE = "true_positive"
MISS = "miss"
CORRECT_NEGATIVE = "correct_negative"
OUTCOMES = (FALSE_POSITIVE, TRUE_POSITIVE, MISS, CORRECT_NEGATIVE)


@dataclass(frozen=True)
class OracleConfig:
    epsilon: float = 0.55
    w_gt: int = 10

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if self.w_gt < 1:
            raise ValueError(f"w_gt must be >= 1, got {self.w_gt!r}")


@dataclass(frozen=True)
class TrialConfig:
    n_trials: int = 50
    noise_sigma: float = 0.01
    base_seed: int = 0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials!r}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma!r}")
        if self.base_seed < 0:
            raise ValueError(f"base_seed must be non-negative, got {self.base_seed!r}")


def ground_truth_failure(stream: Sequence[MetricSample], cfg: OracleConfig) -> int:
    """First frame opening a run of ``w_gt`` consecutive values below epsilon.

    Returns the last frame label when no such run exists.
    """
    if not stream:
        raise ValueError("ground truth needs a non-empty stream")
    run = 0
    for i, s in enumerate(stream):
        run = run + 1 if s.value < cfg.epsilon else 0
        if run == cfg.w_gt:
            return stream[i - cfg.w_gt + 1].t
    return stream[-1].t


@dataclass(frozen=True)
class TrialResult:
    trial: int
    tau_hat: Optional[int]
    outcome: str
    delay: Optional[int] = None


@dataclass
class VideoResult:
    video_id: str
    tau_gt: int
    length: int
    trials: list[TrialResult] = field(default_factory=list)


def classify(tau_hat: Optional[int], tau: int, last: int) -> tuple[str, Optional[int]]:
    if tau_hat is None:
        return (MISS if tau < last else CORRECT_NEGATIVE), None
    if tau_hat < tau:
        return FALSE_POSITIVE, None
    return TRUE_POSITIVE, tau_hat - tau


def perturb(values: np.ndarray, trial_cfg: TrialConfig) -> np.ndarray:
    """One noisy copy of ``values`` per trial; trial ``j`` draws from seed ``base_seed + j``."""
    values = np.asarray(values, dtype=float)
    out = np.empty((trial_cfg.n_trials, values.size))
    for j in range(trial_cfg.n_trials):
        if trial_cfg.noise_sigma == 0:
            out[j] = values
            continue
        rng = np.random.default_rng(trial_cfg.base_seed + j)
        out[j] = np.clip(values + rng.normal(0.0, trial_cfg.noise_sigma, values.size), 0.0, 1.0)
    return out


def _prepare(video, monitor_cfg: MonitorConfig, oracle_cfg: OracleConfig, video_id: str):
    samples = list(video)
    if samples and not isinstance(samples[0], MetricSample):
        samples = as_samples(samples)
    check_ordered(samples)
    if not samples:
        raise ValueError(f"video {video_id!r} is empty")
    labels = [s.t for s in samples]
    raw = np.array([s.value for s in samples])
    smoothed = smooth_values(raw, monitor_cfg.smoothing_factor)
    tau = ground_truth_failure([MetricSample(t, v) for t, v in zip(labels, smoothed)], oracle_cfg)
    return labels, raw, tau


def _collect(video_id: str, labels: list[int], tau: int, stops: np.ndarray) -> VideoResult:
    result = VideoResult(video_id, tau, len(labels))
    for j, stop in enumerate(stops):
        tau_hat = labels[stop - 1] if stop > 0 else None
        outcome, delay = classify(tau_hat, tau, labels[-1])
        result.trials.append(TrialResult(j, tau_hat, outcome, delay))
    return result


def run_trials(video: Sequence[MetricSample], monitor_cfg: MonitorConfig,
               oracle_cfg: OracleConfig, trial_cfg: TrialConfig,
               video_id: str = "") -> VideoResult:
    """Run the noise-randomized trials of one video against its oracle failure time.

    The oracle sees the unperturbed stream after the monitor's smoothing, so
    test and oracle judge the same signal.
    """
    labels, raw, tau = _prepare(video, monitor_cfg, oracle_cfg, video_id)
    batch = run_batch(perturb(raw, trial_cfg), monitor_cfg, halt=True)
    return _collect(video_id, labels, tau, batch.stopping_times)


@dataclass
class EvaluationReport:
    per_video: list[VideoResult]
    fpr: float
    tp_rate: float
    miss_rate: float
    correct_negative_rate: float
    add_mean: Optional[float]
    add_std: Optional[float]
    n_videos: int
    n_trials: int

    @property
    def delays(self) -> list[int]:
        return [tr.delay for v in self.per_video for tr in v.trials if tr.outcome == TRUE_POSITIVE]

    def summary(self) -> dict:
        return {
            "n_videos": self.n_videos,
            "n_trials": self.n_trials,
            "fpr": self.fpr,
            "tp_rate": self.tp_rate,
            "miss_rate": self.miss_rate,
            "correct_negative_rate": self.correct_negative_rate,
            "add_mean": self.add_mean,
            "add_std": self.add_std,
            "n_true_positives": len(self.delays),
        }


def aggregate(results: Sequence[VideoResult]) -> EvaluationReport:
    """Pool all video x trial pairs.

    FPR is the fraction of premature alerts over all pairs. ADD mean and
    population std cover true positives only and are ``None`` without any.
    """
    if not results:
        raise ValueError("aggregate needs at least one video")
    counts = dict.fromkeys(OUTCOMES, 0)
    delays = []
    for v in results:
        for tr in v.trials:
            counts[tr.outcome] += 1
            if tr.outcome == TRUE_POSITIVE:
                delays.append(tr.delay)
    total = sum(counts.values())
    if total == 0:
        raise ValueError("no trials to aggregate")
    n_trials = {len(v.trials) for v in results}
    add_mean = add_std = None
    if delays:
        d = np.asarray(delays, dtype=float)
        add_mean = float(d.mean())
        add_std = float(math.sqrt(np.mean((d - add_mean) ** 2)))
    return EvaluationReport(
        per_video=list(results),
        fpr=counts[FALSE_POSITIVE] / total,
        tp_rate=counts[TRUE_POSITIVE] / total,
        miss_rate=counts[MISS] / total,
        correct_negative_rate=counts[CORRECT_NEGATIVE] / total,
        add_mean=add_mean,
        add_std=add_std,
        n_videos=len(results),
        n_trials=n_trials.pop() if len(n_trials) == 1 else max(n_trials),
    )


def _run_group(args):
    monitor_cfg, trial_cfg, group = args
    rows = np.concatenate([perturb(raw, trial_cfg) for _, _, raw, _ in group])
    stops = run_batch(rows, monitor_cfg, halt=True).stopping_times
    k = trial_cfg.n_trials
    return [_collect(vid, labels, tau, stops[i * k:(i + 1) * k])
            for i, (vid, labels, _, tau) in enumerate(group)]


def run_videos(videos: Sequence[tuple[str, Sequence[float]]], monitor_cfg: MonitorConfig,
               oracle_cfg: OracleConfig, trial_cfg: TrialConfig, jobs: int = 1,
               chunk: int = 256) -> list[VideoResult]:
    """Run trials for every ``(video_id, values)`` pair, returning results in input order.

    Videos of equal length are stacked into shared batches of at most
    ``chunk`` videos; batches run in parallel when ``jobs > 1``. Output does
    not depend on scheduling.
    """
    prepared = []
    for vid, vals in videos:
        labels, raw, tau = _prepare(vals, monitor_cfg, oracle_cfg, vid)
        prepared.append((vid, labels, raw, tau))
    by_length: dict[int, list[int]] = {}
    for i, p in enumerate(prepared):
        by_length.setdefault(len(p[1]), []).append(i)
    groups = []
    for idx in by_length.values():
        for start in range(0, len(idx), chunk):
            groups.append(idx[start:start + chunk])
    tasks = [(monitor_cfg, trial_cfg, [prepared[i] for i in g]) for g in groups]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_group, tasks))
    else:
        outputs = [_run_group(t) for t in tasks]
    results: list[Optional[VideoResult]] = [None] * len(prepared)
    for g, out in zip(groups, outputs):
        for i, res in zip(g, out):
            results[i] = res
    return results


def evaluate(videos: Sequence[tuple[str, Sequence[float]]], monitor_cfg: MonitorConfig,
             oracle_cfg: OracleConfig, trial_cfg: TrialConfig, jobs: int = 1) -> EvaluationReport:
    return aggregate(run_videos(videos, monitor_cfg, oracle_cfg, trial_cfg, jobs))
