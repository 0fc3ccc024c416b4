"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the summary block at the end of
the run lists every criterion with its measured value.
"""

import math

import numpy as np
import pytest

from trackalert.betting import BettingConfig, BettingState, agrapa_update, default_lambda_max, log_loss, log_loss_grad
from trackalert.boxes import BoundingBox, giou, iou
from trackalert.cli import main
from trackalert.eprocess import MonitorConfig, e_values, run_batch, run_monitor
from trackalert.evaluation import OracleConfig, TrialConfig, evaluate
from trackalert.simulator import StreamSpec, generate_ensemble
from trackalert.stream import RecencyBuffer

EPS, ALPHA = 0.55, 0.1
STRATEGIES = ("agrapa", "sfogd")


# --- criteria 1 and 2: null ensemble -------------------------------------------

N_NULL, T_NULL = 10_000, 500
FPR_LIMIT = ALPHA + 0.009


@pytest.fixture(scope="module")
def null_values():
    return generate_ensemble(StreamSpec(T_NULL, EPS, 0.2, seed=1), N_NULL)


def _null_config(strategy, smoothing):
    return MonitorConfig(EPS, ALPHA, BettingConfig(strategy, EPS), smoothing_factor=smoothing,
                         recency_window=10, halt_on_alert=False)


@pytest.fixture(scope="module")
def null_runs(null_values):
    # The guarantee covers the stream the test consumes, so smoothing is off; see README.
    return {s: run_batch(null_values, _null_config(s, 1.0)) for s in STRATEGIES}


def test_c01_ville_false_alarm_rate(null_runs, null_values, verdict):
    rates = {s: float(np.mean(r.stopping_times > 0)) for s, r in null_runs.items()}
    ok = all(r <= FPR_LIMIT for r in rates.values())
    smoothed = {s: float(np.mean(run_batch(null_values, _null_config(s, 0.25)).stopping_times > 0))
                for s in STRATEGIES}
    detail = (", ".join(f"{s} FPR={r:.4f}" for s, r in rates.items()) + f" (limit {FPR_LIMIT:.3f}); "
              + "info, EMA 0.25 on null input: " + ", ".join(f"{s} {r:.4f}" for s, r in smoothed.items()))
    assert verdict(1, "Ville / FPR guarantee", ok, detail), detail


def test_c02_supermartingale_mean(null_runs, verdict):
    parts, ok = [], True
    for s, r in null_runs.items():
        x_final = np.exp(r.final_log_x)
        mean, se = x_final.mean(), x_final.std(ddof=1) / math.sqrt(x_final.size)
        ok &= mean <= 1 + 3 * se
        parts.append(f"{s} mean X_T={mean:.4f} (bound {1 + 3 * se:.4f})")
    detail = ", ".join(parts)
    assert verdict(2, "supermartingale check", ok, detail), detail


# --- criteria 3 and 4: detection power, delay and window ablation ---------------

N_FAIL, T_FAIL, TAU = 1000, 500, 200


def _failure_report(ramp, strategy, window):
    spec = StreamSpec(T_FAIL, 0.8, 0.1, failure_at=TAU, post_failure_mean=0.2, transition_frames=ramp)
    videos = [(f"v{j}", row) for j, row in enumerate(generate_ensemble(spec, N_FAIL))]
    cfg = MonitorConfig(EPS, ALPHA, BettingConfig(strategy, EPS), recency_window=window)
    return evaluate(videos, cfg, OracleConfig(EPS, 10), TrialConfig(1, 0.0, 0))


@pytest.fixture(scope="module")
def failure_reports():
    return {(ramp, s, w): _failure_report(ramp, s, w)
            for ramp in (0, 100)
            for s, w in (("agrapa", 10), ("agrapa", None), ("sfogd", 10))}


def test_c03_detection_power_and_delay(failure_reports, verdict):
    parts, ok = [], True
    for s in STRATEGIES:
        abrupt, ramped = failure_reports[(0, s, 10)], failure_reports[(100, s, 10)]
        alert_rate = abrupt.tp_rate + abrupt.fpr
        ok &= alert_rate >= 0.95 and abrupt.add_mean is not None and math.isfinite(abrupt.add_mean)
        ok &= ramped.add_mean is not None and ramped.add_mean > abrupt.add_mean
        parts.append(f"{s} alert rate={alert_rate:.3f} ADD abrupt={abrupt.add_mean:.1f} "
                     f"ramp={ramped.add_mean if ramped.add_mean is None else round(ramped.add_mean, 1)}")
    detail = "; ".join(parts)
    assert verdict(3, "detection power and delay", ok, detail), detail


def test_c04_window_ablation(failure_reports, verdict):
    small, full = failure_reports[(100, "agrapa", 10)], failure_reports[(100, "agrapa", None)]
    ok = small.add_mean <= full.add_mean and small.fpr <= FPR_LIMIT and full.fpr <= FPR_LIMIT
    detail = (f"ADD w=10 {small.add_mean:.1f} vs unbounded {full.add_mean:.1f}; "
              f"FPR {small.fpr:.3f} / {full.fpr:.3f}")
    assert verdict(4, "window-size ablation direction", ok, detail), detail


# --- criteria 5 to 9: closed forms and algebra ---------------------------------

def test_c05_fixed_rate_crossing(verdict):
    cfg = MonitorConfig(EPS, ALPHA, BettingConfig("fixed", EPS, fixed_lambda=0.5), smoothing_factor=1.0)
    t = run_monitor([0.2] * 100, cfg).stopping_time
    ok = t == 15 == math.ceil(math.log(10) / math.log(1.175))
    assert verdict(5, "closed-form fixed-rate crossing", ok, f"alert at t={t}"), t


def _raster_scores(a, b, size=64):
    def mask(box):
        m = np.zeros((size, size), dtype=bool)
        m[int(box.y):int(box.y2), int(box.x):int(box.x2)] = True
        return m
    ma, mb = mask(a), mask(b)
    inter, union = int((ma & mb).sum()), int((ma | mb).sum())
    hull_mask = np.zeros((size, size), dtype=bool)
    hull_mask[int(min(a.y, b.y)):int(max(a.y2, b.y2)), int(min(a.x, b.x)):int(max(a.x2, b.x2))] = True
    hull = int(hull_mask.sum())
    return inter / union, inter / union - (hull - union) / hull


def test_c06_giou_oracle(verdict):
    rng = np.random.default_rng(6)

    def box():
        x, y = rng.integers(0, 64, 2)
        return BoundingBox(int(x), int(y), int(rng.integers(1, 65 - x)), int(rng.integers(1, 65 - y)))

    mismatches = 0
    for _ in range(1000):
        a, b = box(), box()
        if (iou(a, b), giou(a, b)) != _raster_scores(a, b):
            mismatches += 1
    a, b = BoundingBox(0, 0, 2, 2), BoundingBox(1, 1, 2, 2)
    worked = abs(iou(a, b) - 1 / 7) <= 1e-12 and abs(giou(a, b) - (1 / 7 - 2 / 9)) <= 1e-12
    ok = mismatches == 0 and worked
    detail = f"{mismatches} mismatches in 1000 pairs; worked values {'match' if worked else 'differ'}"
    assert verdict(6, "GIoU oracle equivalence", ok, detail), detail


def test_c07_gradient_check(verdict):
    rng = np.random.default_rng(7)
    worst, h = 0.0, 1e-6
    for _ in range(10_000):
        eps = rng.uniform(0.05, 0.95)
        lam = rng.uniform(0.0, default_lambda_max(eps))
        m = rng.uniform(0.0, 1.0)
        fd = (log_loss(m, lam + h, eps) - log_loss(m, lam - h, eps)) / (2 * h)
        g = log_loss_grad(m, lam, eps)
        worst = max(worst, abs(g - fd) / abs(g) if g else abs(fd))
    ok = worst < 1e-6
    assert verdict(7, "SF-OGD gradient check", ok, f"max relative error {worst:.2e} over 10^4 points"), worst


def test_c08_agrapa_algebra(verdict):
    cfg = BettingConfig("agrapa", EPS)

    def rate(values):
        buf = RecencyBuffer()
        for v in values:
            buf.push(v)
        return agrapa_update(BettingState(history=buf), cfg)

    got = (rate([0.5, 0.7]), rate([0.3, 0.5]), rate([]))
    ok = got == (0.0, cfg.lambda_max, 0.0)
    assert verdict(8, "aGRAPA algebra", ok, f"rates {got}, lambda_max {cfg.lambda_max:.6f}"), got


def test_c09_betting_form_equivalence(verdict):
    rng = np.random.default_rng(9)
    worst = 0.0
    for k in range(100):
        strategy = STRATEGIES[k % 2]
        cfg = MonitorConfig(EPS, ALPHA, BettingConfig(strategy, EPS), halt_on_alert=False)
        T = int(rng.integers(50, 500))
        vals = np.clip(rng.uniform(0.2, 0.9, T) - np.linspace(0, rng.uniform(0, 0.5), T), 0, 1)
        traj = run_monitor(vals, cfg).trajectory
        lam = np.array([ev.lam for ev in traj])
        m = np.array([ev.m_smoothed for ev in traj])
        bet_form = np.cumprod((1 - lam) + lam * e_values(m, EPS))
        direct = np.cumprod(1 + lam * (EPS - m))
        monitor = np.array([ev.x for ev in traj])
        worst = max(worst, float(np.max(np.abs(bet_form / direct - 1))),
                    float(np.max(np.abs(monitor / direct - 1))))
    ok = worst <= 1e-12
    assert verdict(9, "betting-form equivalence", ok, f"max relative gap {worst:.2e} over 100 streams"), worst


# --- criterion 10: determinism --------------------------------------------------

def test_c10_evaluate_determinism(tmp_path, verdict):
    assert main(["simulate", str(tmp_path / "v"), "--videos", "20", "--length", "300",
                 "--failure-at", "150", "--ramp", "50", "--spread", "0.15", "--seed", "10"]) == 0
    for run in ("a", "b"):
        assert main(["evaluate", str(tmp_path / "v"), "--metric", "raw", "--epsilon", str(EPS),
                     "--trials", "50", "--seed", "123", "--out", str(tmp_path / run)]) == 0
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in ("summary.json", "trials.csv"))
    assert verdict(10, "determinism", same, "summary.json and trials.csv byte-identical" if same
                   else "reports differ"), same
