import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pantolab import (
    ModelSpec,
    ValidationError,
    check_martingale,
    escape_series_profile,
    estimate_escape_pathwise,
    estimate_escape_series,
    estimate_ruin,
    sample_eta,
    two_point_law,
)
from pantolab.estimate import bridge_hits_zero, bridge_minimum
from pantolab.model import Discrete, LogNormal

import oracles


def test_ruin_from_nonpositive_start(half_double):
    r = estimate_ruin(half_double, -0.5, 100, 50, seed=1)
    assert (r.value, r.std_error, r.censored_fraction) == (1.0, 0.0, 0.0)
    assert estimate_ruin(half_double, 0.0, 100, 50, seed=1).value == 1.0


def test_ruin_critical_model_lower_bound_grows(half_double):
    short = estimate_ruin(half_double, 1.0, 1_000, 2_000, seed=3)
    long = estimate_ruin(half_double, 1.0, 10_000, 2_000, seed=3)
    assert long.value >= 0.9
    assert long.value >= short.value
    assert long.censored_fraction <= short.censored_fraction
    assert short.value + short.censored_fraction == pytest.approx(1.0)


def test_ruin_monotone_in_start(half_double):
    vals = [estimate_ruin(half_double, x, 2_000, 1_000, seed=5).value for x in (0.5, 1.0, 2.0, 5.0)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_ruin_not_certain_when_K_positive(e_model):
    r = estimate_ruin(e_model, 50.0, 10_000, 2_000, seed=2)
    assert r.value < 1 - 3 * r.std_error


def test_degenerate_law_refused():
    m = ModelSpec(0.0, 1.0, 1.0, Discrete(((1.0, 1.0),), allow_degenerate=True))
    with pytest.raises(ValidationError):
        estimate_ruin(m, 1.0, 10, 10, seed=0)


@given(
    st.floats(1e-3, 10), st.floats(1e-3, 10), st.floats(1e-3, 10), st.floats(0.1, 3), st.floats(1e-12, 1 - 1e-12)
)
def test_bridge_rule_matches_minimum(a, b, tau, kappa, u):
    m = float(bridge_minimum(a, b, tau, kappa, u))
    assert m <= min(a, b) + 1e-12
    if abs(m) > 1e-9 * (a + b):
        assert bool(bridge_hits_zero(a, b, tau, kappa, u)) == (m <= 0)


def test_bridge_hit_frequency():
    a, b, tau, kappa = 0.7, 1.1, 2.0, 0.9
    u = np.random.default_rng(0).random(200_000)
    p = math.exp(-2 * a * b / (kappa**2 * tau))
    freq = np.mean(bridge_hits_zero(a, b, tau, kappa, u))
    assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / len(u))
    # discretised bridge oracle; its grid misses some crossings, so it sits slightly below
    rng = np.random.default_rng(1)
    n_steps, n = 2000, 4000
    dt = tau / n_steps
    w = np.cumsum(rng.normal(0, kappa * math.sqrt(dt), size=(n, n_steps)), axis=1)
    t = np.arange(1, n_steps + 1) * dt
    paths = a + w - (t / tau) * (w[:, -1:] - (b - a))
    disc = np.mean(paths.min(axis=1) <= 0)
    assert p - 0.04 < disc <= p + 3 * math.sqrt(p * (1 - p) / n)


def test_ruin_with_diffusion_exceeds_drift_only():
    law = LogNormal(0.4, 0.3)
    drift = estimate_ruin(ModelSpec(0.0, 0.2, 1.0, law), 1.0, 200, 2_000, seed=4)
    diff = estimate_ruin(ModelSpec(0.8, 0.2, 1.0, law), 1.0, 200, 2_000, seed=4)
    assert diff.value > drift.value + 3 * math.hypot(drift.std_error, diff.std_error)


def test_series_examples(e_model):
    es = sample_eta(e_model, 2048, 20_000, seed=9)
    assert es.estimate(0.0).value == 0.0
    assert es.estimate(-3.0).value == 0.0
    neg = oracles.neg_eta_samples(((math.e, 0.75), (math.exp(-1), 0.25)), 1.0, 1.0, 2048, 20_000, seed=1)
    big = 10 * float(np.mean(neg))
    assert es.estimate(big).value > 0.95
    prof = es.profile(np.linspace(-5, 100, 50))
    vals = [r.value for r in prof]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    for r in prof:
        assert r.value <= r.upper


def test_series_agrees_with_independent_oracle(e_model):
    es = sample_eta(e_model, 2048, 20_000, seed=9)
    neg = oracles.neg_eta_samples(((math.e, 0.75), (math.exp(-1), 0.25)), 1.0, 1.0, 2048, 20_000, seed=2)
    for x in (2.0, 5.0, 10.0, 30.0):
        p_pkg = es.estimate(x)
        p_ref = np.mean(neg < x)
        se = math.hypot(p_pkg.std_error, math.sqrt(p_ref * (1 - p_ref) / len(neg)))
        assert abs(p_pkg.value - p_ref) < 4 * se


def test_series_refuses_nonpositive_K(half_double):
    with pytest.raises(ValidationError):
        estimate_escape_series(half_double, 1.0, 64, 10, seed=0)


def test_series_profile_matches_pointwise(e_model):
    xs = [1.0, 4.0]
    prof = escape_series_profile(e_model, xs, 256, 600, seed=3)
    for x, r in zip(xs, prof):
        assert r == estimate_escape_series(e_model, x, 256, 600, seed=3)


def test_pathwise_examples(e_model):
    assert estimate_escape_pathwise(e_model, 10.0, 10.0, 0.0, 100, 20, seed=1).value == 1.0
    assert estimate_escape_pathwise(e_model, -1.0, 100.0, -2.0, 1_000, 200, seed=1).value == 0.0
    with pytest.raises(ValidationError):
        estimate_escape_pathwise(e_model, 1.0, 0.0, 1.0, 10, 10, seed=1)


def test_pathwise_agrees_with_series(e_model):
    pw = estimate_escape_pathwise(e_model, 20.0, 1e6, 0.0, 10_000, 4_000, seed=6)
    se = estimate_escape_series(e_model, 20.0, 2048, 20_000, seed=6)
    assert abs(pw.value - se.value) < 3 * math.hypot(pw.std_error, se.std_error) + 0.02


def test_workers_do_not_change_results(e_model, half_double):
    a = sample_eta(e_model, 128, 700, seed=4, workers=1)
    b = sample_eta(e_model, 128, 700, seed=4, workers=2)
    assert np.array_equal(a.eta, b.eta) and np.array_equal(a.eta_half, b.eta_half)
    r1 = estimate_ruin(half_double, 1.0, 500, 300, seed=4, workers=1)
    r2 = estimate_ruin(half_double, 1.0, 500, 300, seed=4, workers=2)
    assert r1 == r2


def test_martingale_constant(half_double):
    m = check_martingale(half_double, lambda z: np.ones_like(z), 3.0, 2.0, 500, seed=1)
    assert m.residual == 0.0


def test_martingale_detects_nonharmonic_linear():
    model = ModelSpec(1.0, 0.0, 1.0, two_point_law(2.0))
    m = check_martingale(model, lambda z: z, 4.0, 1.0, 20_000, seed=3)
    assert m.residual > 5 * m.std_error
    expected = oracles.mean_of_linear(4.0, 1.0, 0.0, 1.0, 1.25)
    assert abs(m.mean - expected) < 4 * m.std_error


def test_martingale_linear_with_drift(half_double):
    m = check_martingale(half_double, lambda z: z, 3.0, 2.0, 20_000, seed=8)
    expected = oracles.mean_of_linear(3.0, 2.0, 1.0, 1.0, 1.25)
    assert abs(m.mean - expected) < 4 * m.std_error
