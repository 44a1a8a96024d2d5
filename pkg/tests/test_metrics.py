import math

import numpy as np
import pytest

from hornsim import metrics
from hornsim.sensing import ContactEvent
from hornsim.simulate import ContactEpisode


def _series(t, theta, sp=None, q=None, **extra):
    t = np.asarray(t, dtype=float)
    d = {"t": t, "theta": np.asarray(theta, dtype=float),
         "pitch_sp": np.zeros_like(t) if sp is None else np.asarray(sp, dtype=float),
         "q": np.zeros_like(t) if q is None else np.asarray(q, dtype=float)}
    d.update(extra)
    return d


def _event(onset, release=None, horn="upper"):
    release = onset + 0.5 if release is None else release
    return ContactEvent(horn, onset, onset, 1.0, release)


T = np.arange(0.0, 10.0, 0.01)


def test_rmse_zero_when_tracking():
    s = _series(T, 0.1 * np.ones_like(T), sp=0.1 * np.ones_like(T))
    assert metrics.pitch_rmse(s, [_event(2.0)]) == [0.0]


def test_rmse_of_sinusoid():
    amp = math.radians(4.0)
    s = _series(T, amp * np.sin(2 * math.pi * T))
    # window [1.0, 3.0] spans two whole cycles
    (r,) = metrics.pitch_rmse(s, [_event(1.2)], window=(0.2, 1.8))
    # the inclusive window holds one extra zero sample: sqrt(200/201) off
    assert r == pytest.approx(4.0 / math.sqrt(2), rel=3e-3)


def test_rmse_needs_events():
    with pytest.raises(ValueError):
        metrics.pitch_rmse(_series(T, T * 0), [])


def test_run_rmse():
    s = _series(T, np.full_like(T, math.radians(2.0)))
    assert metrics.run_rmse(s) == pytest.approx(2.0)


def test_delay_from_sensed_events():
    up = [ContactEvent("upper", 0.9, 1.0, 5.0, 1.5)]
    low = [ContactEvent("lower", 1.08, 1.1, 3.0, 1.4)]
    assert metrics.contact_delay(up, low) == [pytest.approx(80.0)]


def test_delay_from_truth():
    truth = {"upper": [ContactEpisode("upper", 0.95, 1.0, 0.01, release_t=1.3)],
             "lower": [ContactEpisode("lower", 1.08, 1.1, 0.005, release_t=1.2)]}
    assert metrics.contact_delay([_event(1.0)], [], truth=truth) == [pytest.approx(80.0)]


def test_delay_uses_saturation_when_present():
    truth = {"upper": [ContactEpisode("upper", 0.95, 1.05, 0.04, saturation_t=1.0, release_t=1.3)],
             "lower": [ContactEpisode("lower", 1.08, 1.1, 0.005, release_t=1.2)]}
    assert metrics.contact_delay([_event(1.0)], [], truth=truth) == [pytest.approx(80.0)]


def test_delay_missing_without_lower_horn():
    truth = {"upper": [ContactEpisode("upper", 0.95, 1.0, 0.01, release_t=1.3)]}
    assert metrics.contact_delay([_event(1.0), _event(4.0)], [], truth=truth) == [None, None]
    assert metrics.contact_order([_event(1.0)], truth) == [None]


def test_contact_order():
    up = [ContactEpisode("upper", 1.0, 1.05, 0.01, release_t=1.3)]
    assert metrics.contact_order([_event(1.0)], {"upper": up, "lower": [ContactEpisode("lower", 1.02, 1.1, 0.005, release_t=1.2)]}) == [True]
    assert metrics.contact_order([_event(1.0)], {"upper": up, "lower": [ContactEpisode("lower", 0.99, 1.1, 0.005, release_t=1.2)]}) == [False]


def test_pitch_rate_signature():
    nose_up_rate = np.where((T > 2.0) & (T < 2.2), 1.0, 0.0) - np.where((T > 2.5) & (T < 2.8), 1.0, 0.0)
    s = _series(T, T * 0, q=-nose_up_rate)
    assert metrics.pitch_rate_signature(s, [_event(2.0)]) == [True]
    s = _series(T, T * 0, q=nose_up_rate)
    assert metrics.pitch_rate_signature(s, [_event(2.0)]) == [False]


def test_pitch_excursion_relative_to_pre_contact_setpoint():
    sp = np.where(T < 2.0, 0.2, 0.0)
    theta = np.where(T < 2.0, 0.2, 0.1)
    (x,) = metrics.pitch_excursion(_series(T, theta, sp=sp), [_event(2.0)])
    assert x == pytest.approx(math.degrees(-0.1), abs=1e-9)


def test_energy_absorbed_over_window():
    e = np.where(T < 2.0, 0.0, np.minimum(T - 2.0, 1.0))
    s = _series(T, T * 0, e_damping=e, e_friction=0.5 * e)
    assert metrics.energy_absorbed(s, [_event(2.0)]) == [pytest.approx(1.5)]


def test_impact_count_merges_close_episodes():
    eps = [ContactEpisode("upper", 1.0, 1.0, 0.01, release_t=1.2),
           ContactEpisode("lower", 1.05, 1.1, 0.01, release_t=1.15),
           ContactEpisode("upper", 1.3, 1.3, 0.001, release_t=1.35),
           ContactEpisode("upper", 3.0, 3.0, 0.01, release_t=3.2)]
    assert metrics.impact_count(eps, merge_gap=0.3) == 2
    assert metrics.impact_count(eps, merge_gap=0.05) == 3
    assert metrics.impact_count([]) == 0


def _push_series(theta_fn, force=1.0):
    t = np.arange(0.0, 12.0, 0.01)
    return _series(t, theta_fn(t), upper_f_n=np.full_like(t, force))


def test_pushing_stable():
    sp = math.radians(15.0)
    s = _push_series(lambda t: sp + math.radians(3.0) * np.sin(2 * t))
    st = metrics.pushing_stability(s, sp, (1.0, 11.0))
    assert st.verdict is metrics.Verdict.STABLE
    assert 11.9 < st.theta_min_deg < 12.1
    assert 17.9 < st.theta_max_deg < 18.1


def test_pushing_diverging():
    sp = math.radians(15.0)
    s = _push_series(lambda t: sp + math.radians(2.0) * t)
    st = metrics.pushing_stability(s, sp, (1.0, 11.0))
    assert st.verdict is metrics.Verdict.UNSTABLE
    assert st.onset_t == pytest.approx(3.5, abs=0.02)


def test_pushing_lost_contact():
    sp = math.radians(15.0)
    t = np.arange(0.0, 12.0, 0.01)
    s = _series(t, np.full_like(t, sp), upper_f_n=np.where(t < 6.0, 1.0, 0.0))
    st = metrics.pushing_stability(s, sp, (1.0, 11.0))
    assert st.verdict is metrics.Verdict.UNSTABLE
    assert st.onset_t == pytest.approx(6.0)


def test_pushing_not_evaluated_without_contact():
    s = _push_series(lambda t: t * 0, force=0.0)
    assert metrics.pushing_stability(s, 0.0, (1.0, 11.0)).verdict is metrics.Verdict.NOT_EVALUATED


def test_release_time_first_clear_instant():
    eps = {"upper": [ContactEpisode("upper", 1.0, 2.0, 0.01, release_t=10.3),
                     ContactEpisode("upper", 12.0, 12.1, 0.01, release_t=12.5)],
           "lower": [ContactEpisode("lower", 1.1, 2.0, 0.01, release_t=10.6)]}
    assert metrics.release_time(eps, 10.0) == pytest.approx(0.6)
    assert metrics.release_time({"upper": [ContactEpisode("upper", 1.0, 2.0, 0.01)]}, 10.0) == math.inf


def test_reduction():
    assert metrics.reduction(3.0, 3.0) == 0.0
    assert metrics.reduction(3.0, 6.0) == pytest.approx(50.0)
