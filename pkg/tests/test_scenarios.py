import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scoopsim.core import WellSystem, mean_y_occupancy
from scoopsim.measurement import MeasurementProtocol
from scoopsim.scenarios import (FitError, RegimeError, adaptive_mutation_run,
                                alpha_decay_compare, fit_exponential_rate, late_window_slope,
                                log_survival_r2, reference_box_system, scoop_box_experiment,
                                unmeasured_transfer_proxy, zeno_scan)
from scoopsim.trace import KineticsTrace


def _trace(t, frac):
    t = np.asarray(t, dtype=float)
    frac = np.asarray(frac, dtype=float)
    zeros = np.zeros_like(t)
    return KineticsTrace(t, 1 - frac, zeros, frac, zeros)


@settings(max_examples=40)
@given(st.floats(1e-6, 10))
def test_fit_recovers_exponential_rate(k):
    t = np.linspace(0, 0.6 / k, 50)
    tr = _trace(t, -np.expm1(-k * t))
    assert fit_exponential_rate(tr) == pytest.approx(k, rel=1e-9)
    assert log_survival_r2(tr) == pytest.approx(1.0)


def test_fit_rejects_bad_traces():
    t = np.arange(20.0)
    with pytest.raises(FitError, match="samples"):
        fit_exponential_rate(_trace(t, np.linspace(0.6, 0.9, 20)))
    with pytest.raises(FitError, match="monotone"):
        fit_exponential_rate(_trace(t, 0.01 * np.sin(t) ** 2))
    with pytest.raises(FitError, match="no decay"):
        fit_exponential_rate(_trace(t, np.zeros(20)))


def test_reference_box_is_ten_per_million():
    s = reference_box_system()
    assert mean_y_occupancy(s.delta, s.epsilon) == pytest.approx(1e-5, rel=1e-12)


def test_scoop_box_default_protocol():
    trace = scoop_box_experiment(n=10**6)
    assert len(trace) == 1000
    assert trace.scoop_count[:100].mean() == pytest.approx(10.0, rel=0.01)
    custom = scoop_box_experiment(n=10, protocol=MeasurementProtocol.periodic(1.0, 5))
    assert len(custom) == 5
    with pytest.raises(ValueError):
        scoop_box_experiment(n=10, mode="exact")


@pytest.mark.parametrize("ratio", [2, 10, 100])
def test_ratio_law_deterministic(ratio):
    res = adaptive_mutation_run(0.01, 0.01 * ratio)
    assert res.enhancement == pytest.approx(ratio, rel=1e-3)
    assert res.predicted == pytest.approx(ratio)
    expected = 0.01 * mean_y_occupancy(1.0, reference_box_system().epsilon)
    assert res.rate_minus == pytest.approx(expected, rel=1e-3)


def test_ratio_law_regime_guard():
    with pytest.raises(RegimeError):
        adaptive_mutation_run(0.01, 30.0)
    with pytest.raises(ValueError):
        adaptive_mutation_run(0.0, 1.0)
    with pytest.raises(ValueError):
        adaptive_mutation_run(0.01, 0.1, minus_arm="frozen")


def test_reversible_minus_arm_never_mutates():
    res = adaptive_mutation_run(0.01, 0.1, t_max=20000.0, minus_arm="reversible")
    assert res.rate_minus == 0.0 and math.isinf(res.enhancement)
    assert np.all(res.traces["minus"].captured_fraction == 0)


def test_ratio_law_montecarlo():
    res = adaptive_mutation_run(0.01, 0.1, WellSystem(1.0, math.sqrt(499)), t_max=1e5,
                                n_particles=10**5, mode="montecarlo", seed=5)
    assert res.enhancement == pytest.approx(10, rel=0.1)


def test_zeno_limb_small_tau():
    s = WellSystem(1.0, 0.0)
    taus = np.array([1e-4, 1e-3, 1e-2])
    rows = zeno_scan(s, taus)
    np.testing.assert_allclose(rows[:, 0], taus)
    np.testing.assert_allclose(rows[:, 1], taus / 4, rtol=1e-4)
    with pytest.raises(ValueError):
        zeno_scan(s, [0.1, -1.0])


def test_inverse_zeno_peak_above_proxy():
    s = WellSystem(1.0, 10.0)
    rows = zeno_scan(s, np.logspace(-3, 1, 400))
    assert rows[:, 1].max() > unmeasured_transfer_proxy(s)
    peak_tau = rows[np.argmax(rows[:, 1]), 0]
    assert peak_tau == pytest.approx(2.33 / s.rabi_frequency, rel=0.05)


def test_alpha_decay_contrast_shapes():
    rev, absorb = alpha_decay_compare(WellSystem(1.0, 0.0), 0.5, t_max=60.0, samples=200)
    assert rev.pop_y[-1] == pytest.approx(0.5, abs=1e-3)
    assert abs(late_window_slope(rev)) < 1e-4
    assert np.all(np.diff(absorb.captured_fraction) >= 0)
    assert absorb.captured_fraction[-1] > 0.99
    assert np.all(rev.captured_fraction == 0)
    with pytest.raises(ValueError):
        alpha_decay_compare(WellSystem(1.0), 0.0, 10.0)


def test_late_window_slope_of_a_line():
    t = np.linspace(0, 10, 101)
    tr = KineticsTrace(t, 1 - 0.01 * t, 0.01 * t, np.zeros_like(t), np.zeros_like(t))
    assert late_window_slope(tr) == pytest.approx(0.01)
