import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trackalert.betting import (
    BettingConfig,
    BettingState,
    Bettor,
    agrapa_update,
    default_lambda_max,
    log_loss,
    log_loss_grad,
    sfogd_update,
)
from trackalert.stream import RecencyBuffer

unit = st.floats(0.0, 1.0, allow_nan=False)


def state_with(values, window=None, lam=0.0):
    buf = RecencyBuffer(window)
    for v in values:
        buf.push(v)
    return BettingState(lam=lam, history=buf)


def test_default_lambda_max():
    assert BettingConfig(epsilon=0.55).lambda_max == pytest.approx(1 / 1.1)
    # Table of tolerances in use: 1/(2 eps) is the binding term for all of them.
    for eps in (0.5, 0.55, 0.9, 0.95):
        assert default_lambda_max(eps) == 1 / (2 * eps)
    # Small tolerances: the positivity term binds.
    assert default_lambda_max(0.1) == pytest.approx(0.999 / 0.9)


def test_config_validation():
    with pytest.raises(ValueError):
        BettingConfig(strategy="grapa")
    with pytest.raises(ValueError):
        BettingConfig(epsilon=1.0)
    with pytest.raises(ValueError):
        BettingConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        BettingConfig(epsilon=0.55, lambda_max=1.0)
    with pytest.raises(ValueError):
        BettingConfig(epsilon=0.1, lambda_max=4.0)
    with pytest.raises(ValueError):
        BettingConfig(strategy="fixed", epsilon=0.55, fixed_lambda=0.95)
    assert BettingConfig(strategy="SF-OGD").strategy == "sfogd"


def test_agrapa_examples():
    cfg = BettingConfig("agrapa", 0.55)
    # mean 0.6, var 0.01 -> raw -4.0
    assert agrapa_update(state_with([0.5, 0.7]), cfg) == 0.0
    # mean 0.4, var 0.01 -> raw 0.15 / 0.0325
    assert agrapa_update(state_with([0.3, 0.5]), cfg) == cfg.lambda_max
    assert agrapa_update(state_with([]), cfg) == 0.0


def test_agrapa_unclipped_value():
    cfg = BettingConfig("agrapa", 0.55)
    # mean 0.5, var 0.09 -> 0.05 / (0.09 + 0.0025)
    lam = agrapa_update(state_with([0.2, 0.8]), cfg)
    assert lam == pytest.approx(0.05 / 0.0925, abs=1e-12)


def test_agrapa_zero_denominator():
    cfg = BettingConfig("agrapa", 0.5)
    assert agrapa_update(state_with([0.5, 0.5]), cfg) == 0.0


@given(st.lists(unit, min_size=1, max_size=50), st.floats(0.05, 0.95))
def test_agrapa_sign(values, eps):
    cfg = BettingConfig("agrapa", eps)
    lam = agrapa_update(state_with(values), cfg)
    assert 0.0 <= lam <= cfg.lambda_max
    mean = np.mean(values)
    if mean >= eps + 1e-12:
        assert lam == 0.0
    elif mean < eps - 1e-12:
        assert lam > 0.0


def test_sfogd_example():
    cfg = BettingConfig("sfogd", 0.55, learning_rate=0.1)
    st_ = BettingState(lam=0.5)
    lam = sfogd_update(st_, 0.35, cfg)
    assert log_loss_grad(0.35, 0.5, 0.55) == pytest.approx(-0.2 / 1.1)
    assert lam == pytest.approx(0.6, abs=1e-12)
    assert st_.grad_norm_sq_sum == pytest.approx((0.2 / 1.1) ** 2)


def test_sfogd_zero_gradient_is_noop():
    cfg = BettingConfig("sfogd", 0.55)
    st_ = BettingState(lam=0.3, grad_norm_sq_sum=2.0)
    assert sfogd_update(st_, 0.55, cfg) == 0.3
    assert st_.grad_norm_sq_sum == 2.0


def test_sfogd_clips_to_lambda_max():
    cfg = BettingConfig("sfogd", 0.55, learning_rate=5.0)
    st_ = BettingState(lam=0.5)
    assert sfogd_update(st_, 0.0, cfg) == cfg.lambda_max
    st_ = BettingState(lam=0.5)
    assert sfogd_update(st_, 1.0, cfg) == 0.0


@given(st.floats(0.0, 0.9), unit, st.floats(0.05, 0.95), st.floats(1e-3, 2.0))
def test_sfogd_first_step_has_magnitude_gamma(lam, m, eps, gamma):
    cfg = BettingConfig("sfogd", eps, learning_rate=gamma, lambda_max=min(0.9, default_lambda_max(eps)))
    lam = min(lam, cfg.lambda_max)
    st_ = BettingState(lam=lam)
    new = sfogd_update(st_, m, cfg)
    g = log_loss_grad(m, lam, eps)
    if g == 0:
        assert new == lam
    else:
        unclipped = lam - gamma * math.copysign(1.0, g)
        assert new == pytest.approx(min(max(unclipped, 0.0), cfg.lambda_max), abs=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 2000:
        eps = rng.uniform(0.05, 0.95)
        lam = rng.uniform(0.0, default_lambda_max(eps))
        m = rng.uniform(0.0, 1.0)
        if 1 + lam * (eps - m) <= 0.05:
            continue
        h = 1e-6
        fd = (log_loss(m, lam + h, eps) - log_loss(m, lam - h, eps)) / (2 * h)
        g = log_loss_grad(m, lam, eps)
        assert abs(g - fd) <= 1e-6 * abs(g)
        checked += 1


@pytest.mark.parametrize("strategy", ["agrapa", "sfogd"])
def test_bettor_rate_is_predictable(strategy):
    rng = np.random.default_rng(3)
    vals = rng.uniform(0, 1, 80)
    cfg = BettingConfig(strategy, 0.55)
    b = Bettor(cfg, window=10)
    lams = []
    for v in vals:
        lams.append(b.predict())
        b.observe(v)
    for t in range(len(vals)):
        replay = Bettor(cfg, window=10)
        for v in vals[:t]:
            replay.predict()
            replay.observe(v)
        assert replay.predict() == lams[t]
    assert all(0.0 <= lam <= cfg.lambda_max for lam in lams)
