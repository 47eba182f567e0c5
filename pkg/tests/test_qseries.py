import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pantolab import AccuracyError, CancellationError, SeriesPoly, ValidationError
from pantolab.qseries import (
    characteristic,
    continue_phi,
    eval_phi,
    eval_with_error,
    functional_residual,
    growth_diagnostic,
    phi,
    recurrence_residuals,
    series_coefficients,
    shifted_residual,
    truncation_estimate,
)

import oracles


def test_first_coefficients():
    p = series_coefficients(2.0, 5)
    assert p.coeffs[0] == 1.0
    assert p.coeffs[1] == 4.0
    assert p.coeffs[2] == pytest.approx(32 / 9, rel=1e-15)
    assert series_coefficients(3.0, 0).coeffs == [1.0]


def test_q_one_rejected():
    with pytest.raises(ValidationError):
        series_coefficients(1.0, 5)
    with pytest.raises(ValidationError):
        series_coefficients(0.0, 5)
    with pytest.raises(ValidationError):
        series_coefficients(2.0, -1)


@pytest.mark.parametrize("q", [Fraction(3, 2), Fraction(2), Fraction(1, 2)])
def test_coefficients_match_exact_recurrence(q):
    p = series_coefficients(float(q), 200)
    exact = oracles.series_coefficients_exact(q, 200)
    for k in (1, 2, 10, 50, 120, 200):
        assert float(abs(p.exact(k) - exact[k]) / exact[k]) < 1e-13


@pytest.mark.parametrize("q", [1.5, 2.0, 0.5])
def test_recurrence_residual(q):
    assert recurrence_residuals(series_coefficients(q, 200)).max() < 1e-14


@settings(max_examples=40, deadline=None)
@given(st.one_of(st.floats(0.05, 0.98), st.floats(1.02, 20.0)))
def test_recurrence_residual_any_q(q):
    p = series_coefficients(q, 60)
    assert recurrence_residuals(p).max() < 1e-14
    assert all(c > 0 for c in p.coeffs if c != 0.0)
    assert all(m > 0 for m in p.mantissas)


def test_reciprocal_q_gives_same_series():
    a, b = series_coefficients(2.0, 100), series_coefficients(0.5, 100)
    assert a.mantissas == b.mantissas and a.exponents == b.exponents


def test_coefficient_ratio_tends_to_zero():
    p = series_coefficients(1.5, 200)
    log2 = p.log2_coeffs()
    steps = np.diff(log2)
    assert np.all(np.diff(steps) < 0)
    assert steps[-1] < -100


def test_eval_examples():
    p = series_coefficients(2.0, 200)
    assert eval_phi(p, 0.0) == 1.0
    assert shifted_residual(p, 0.1) < 1e-10
    assert functional_residual(p, 0.1) < 1e-10


def test_eval_against_high_precision():
    p = series_coefficients(2.0, 200)
    for s in (0.3, 2.0, 17.0, 50.0):
        assert eval_phi(p, s) == pytest.approx(oracles.phi_mpmath(2, s), rel=1e-13)


def test_accuracy_envelope():
    p = series_coefficients(2.0, 8)
    assert truncation_estimate(p, 0.1) < 1e-10
    with pytest.raises(AccuracyError):
        eval_phi(p, 50.0)
    assert continue_phi(p, 50.0, 0.5) == pytest.approx(
        eval_phi(series_coefficients(2.0, 200), 50.0), rel=1e-8
    )


def test_continuation_examples():
    p = series_coefficients(2.0, 200)
    assert continue_phi(p, 0.05, 0.1) == eval_phi(p, 0.05)
    stepped = continue_phi(p, 0.1 * 2**3, 0.1)
    assert stepped == pytest.approx(eval_phi(p, 0.8), rel=1e-8)
    with pytest.raises(ValidationError):
        continue_phi(p, -1.0, 0.1)


@pytest.mark.parametrize("q", [1.5, 0.5, 3.0])
def test_continuation_agrees_with_series(q):
    p = series_coefficients(q, 200)
    for s in np.geomspace(0.2, 40, 15):
        assert continue_phi(p, s, 0.25) == pytest.approx(eval_phi(p, s), rel=1e-8)


def test_cancellation_reported():
    # for q close to 1 stepping from a tiny base needs thousands of steps
    p = series_coefficients(1.001, 200)
    with pytest.raises(CancellationError) as info:
        continue_phi(p, 5000.0, 1e-6)
    assert info.value.step >= 1


@pytest.mark.parametrize("q", [1.5, 2.0, 0.5])
def test_functional_residuals_at_random_points(q):
    p = series_coefficients(q, 200)
    rng = np.random.default_rng(0)
    for s in rng.uniform(0.0, 50.0 / max(q, 1 / q) ** 2, 100):
        scale = 1 + abs(phi(p, s))
        assert functional_residual(p, s) < 1e-9 * scale
        assert shifted_residual(p, s) < 1e-9 * scale * (1 + abs(s))


def test_characteristic_double_root():
    for q in (0.5, 1.5, 2.0, 7.0):
        val, der = characteristic(q, 0.0)
        assert val == 0.0 and der == 0.0
        assert characteristic(q, 0.3)[0] > 0


def test_growth_constant():
    g = growth_diagnostic(SeriesPoly.constant(2.0, 10), 10.0, 25)
    assert np.all(g.M == 1.0)


def test_growth_q2():
    g = growth_diagnostic(series_coefficients(2.0, 200), 50.0, 200)
    assert np.all(np.diff(g.M) > 0)
    assert g.decreasing_from(1.0) is not None
    assert g.increasing_from_loglog() is not None
    ratios = [float(np.interp(2 * S, g.S, g.M) / np.interp(S, g.S, g.M)) for S in (2.0, 4.0, 8.0, 16.0)]
    assert all(r > 2 for r in ratios)


def test_eval_with_error_fields():
    r = eval_with_error(series_coefficients(2.0, 10), -3.0)
    assert r.abs_sum > abs(r.value)
    assert float(r) == r.value
