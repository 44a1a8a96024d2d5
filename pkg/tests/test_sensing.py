import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hornsim.sensing import (AdcConfig, Branch, FlexSensorModel, OpenCircuitError, SensingConfig, SensorChain,
                             SensorSample, UnorderedSeriesError, adc_sample, deflection_to_resistance,
                             design_lowpass, detect_contact_events, divider_voltage, estimate_force,
                             filter_series, noise_gain, resistance_from_voltage, synthetic_calibration)

ADC = AdcConfig()


# -- flex sensor -----------------------------------------------------------

def test_neutral_reads_zero():
    m = FlexSensorModel()
    for _ in range(100):
        r, m = deflection_to_resistance(m, 0.0, 0.0, 0.0, 0.02)
        assert r == 0.0


def test_hysteresis_loop():
    m = FlexSensorModel(creep_gain=0.0)
    ramp = [0.03 * i / 50 for i in range(51)]
    up, down = [], []
    for d in ramp:
        r, m = deflection_to_resistance(m, d, 0.1, 0.0, 0.01)
        up.append(r)
    for d in reversed(ramp):
        r, m = deflection_to_resistance(m, d, -0.1, 0.0, 0.01)
        down.append(r)
    down.reverse()
    assert all(dn >= u for u, dn in zip(up, down))
    area = sum(dn - u for u, dn in zip(up, down))
    assert area > 0.0


def test_branch_held_when_still():
    m = FlexSensorModel(creep_gain=0.0)
    _, m = deflection_to_resistance(m, 0.02, -0.1, 0.0, 0.01)
    r, m = deflection_to_resistance(m, 0.02, 0.0, 0.0, 0.01)
    assert m.branch_state is Branch.UNLOADING
    assert r == pytest.approx(m.unloading_branch(0.02))


def test_creep_residual_decays():
    m = FlexSensorModel(creep_gain=2.0, creep_decay_tau=2.0)
    dt = 0.01
    for _ in range(500):
        _, m = deflection_to_resistance(m, 0.01, 0.0, 2.0, dt)
    r0, m = deflection_to_resistance(m, 0.0, -0.1, 0.0, dt)
    assert r0 > 0.0
    for _ in range(199):
        _, m = deflection_to_resistance(m, 0.0, 0.0, 0.0, dt)
    r2, m = deflection_to_resistance(m, 0.0, 0.0, 0.0, dt)
    assert r2 == pytest.approx(r0 * math.exp(-2.0 / 2.0), rel=1e-9)


def test_creep_under_constant_load():
    m = FlexSensorModel(creep_gain=2.0, creep_decay_tau=2.0)
    for _ in range(5000):
        _, m = deflection_to_resistance(m, 0.0, 0.0, 1.5, 0.01)
    assert m.creep_state == pytest.approx(2.0 * 1.5 * 2.0, rel=1e-6)


def test_flex_errors():
    with pytest.raises(ValueError):
        deflection_to_resistance(FlexSensorModel(), -0.01, 0.0, 0.0, 0.01)
    with pytest.raises(ValueError):
        deflection_to_resistance(FlexSensorModel(), 0.01, 0.0, 0.0, 0.0)


@given(st.floats(0.0, 0.06), st.floats(0.0, 0.06), st.sampled_from(list(Branch)))
def test_resistance_monotone_in_deflection(a, b, branch):
    m = FlexSensorModel(creep_gain=0.0, branch_state=branch)
    lo, hi = sorted((a, b))
    r_lo, _ = deflection_to_resistance(m, lo, 0.0, 0.0, 0.01)
    r_hi, _ = deflection_to_resistance(m, hi, 0.0, 0.0, 0.01)
    assert r_hi >= r_lo


# -- divider and ADC -------------------------------------------------------

@pytest.mark.parametrize("r, v", [(0.0, 3.3), (47_000.0, 1.65), (94_000.0, 1.1)])
def test_divider_examples(r, v):
    assert divider_voltage(r, ADC) == pytest.approx(v, abs=1e-12)


@pytest.mark.parametrize("v, r", [(1.65, 47_000.0), (3.3, 0.0)])
def test_inverse_examples(v, r):
    assert resistance_from_voltage(v, ADC) == pytest.approx(r, abs=1e-9)


def test_open_circuit():
    with pytest.raises(OpenCircuitError):
        resistance_from_voltage(0.0, ADC)
    with pytest.raises(ZeroDivisionError):
        resistance_from_voltage(0.0, ADC)


@given(st.floats(1.0, 1e6))
def test_divider_round_trip(r):
    assert resistance_from_voltage(divider_voltage(r, ADC), ADC) == pytest.approx(r, rel=1e-9)


def test_adc_examples():
    assert ADC.lsb == pytest.approx(0.002)
    assert adc_sample(0.0, ADC) == 0
    assert adc_sample(3.3, ADC) == 1650


@given(st.integers(0, 2000))
def test_adc_quantization(code):
    v = (code + 0.5) * ADC.lsb
    assert adc_sample(v, ADC) == adc_sample(v + ADC.lsb / 4, ADC)
    assert adc_sample(v + 2 * ADC.lsb, ADC) - adc_sample(v, ADC) == 2


def test_adc_saturates():
    assert adc_sample(10.0, ADC) == ADC.max_code


# -- filter ----------------------------------------------------------------

def test_dc_convergence():
    f = design_lowpass(2, 0.8, 50.0)
    out = filter_series(f, [3.0] * int(10 / 0.8 * 50))
    assert out[-1] == pytest.approx(3.0, abs=1e-6)


def test_magnitude_oracles():
    f = design_lowpass(2, 0.8, 50.0)
    db = lambda x: 20 * math.log10(x)
    assert abs(f.response(0.0)) == pytest.approx(1.0, abs=1e-6)
    assert abs(db(abs(f.response(0.8))) - db(1 / math.sqrt(2))) < 0.5
    assert abs(db(abs(f.response(5.0))) - db(1 / math.sqrt(1 + (5 / 0.8) ** 4))) < 0.5


def test_sinusoid_steady_state():
    f = design_lowpass(2, 0.8, 50.0)
    t = np.arange(0, 20, 1 / 50)
    out = np.array(filter_series(f, np.sin(2 * math.pi * 5 * t)))
    amp = np.abs(out[-250:]).max()
    assert abs(20 * math.log10(amp / 0.0256)) < 0.5


def test_filter_zero_and_impulse():
    f = design_lowpass(2, 0.8, 50.0)
    assert filter_series(f, [0.0] * 50) == [0.0] * 50
    h = filter_series(f, [1.0] + [0.0] * 999)
    assert abs(h[-1]) < 1e-6 * max(abs(v) for v in h)
    assert all(abs(p) < 1 for p in f.poles())


def test_white_noise_variance():
    f = design_lowpass(2, 0.8, 50.0)
    x = np.random.default_rng(0).standard_normal(50_000)
    out = np.array(filter_series(f, x))
    assert out[1000:].var() < 0.05
    assert noise_gain(f) < 0.05


def test_filter_causal():
    f = design_lowpass(2, 0.8, 50.0)
    a = filter_series(f, [1.0] * 20 + [0.0] * 20)
    b = filter_series(f, [1.0] * 20 + [5.0] * 20)
    assert a[:20] == b[:20]


def test_bilinear_exact_at_cutoff():
    f = design_lowpass(2, 0.8, 50.0, method="bilinear")
    assert abs(f.response(0.8)) == pytest.approx(1 / math.sqrt(2), abs=1e-9)
    assert abs(f.response(0.0)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("order", [1, 3, 4])
def test_other_orders_stable_unit_dc(order):
    f = design_lowpass(order, 0.8, 50.0)
    assert abs(f.response(0.0)) == pytest.approx(1.0, abs=1e-9)
    assert abs(f.response(0.8)) == pytest.approx(1 / math.sqrt(2), rel=0.06)
    assert all(abs(p) < 1 for p in f.poles())


@pytest.mark.parametrize("cutoff", [25.0, 30.0, 0.0])
def test_filter_rejects_bad_cutoff(cutoff):
    with pytest.raises(ValueError):
        design_lowpass(2, cutoff, 50.0)


# -- events ----------------------------------------------------------------

def _series(values, dt=0.02):
    return [SensorSample(i * dt, 0, v, v, "upper") for i, v in enumerate(values)]


def test_quiet_channel():
    assert detect_contact_events(_series([0.0] * 100), 10.0, 5.0) == []


def test_single_pulse():
    ev = detect_contact_events(_series([0.0] * 10 + [20.0] * 10 + [0.0] * 10), 10.0, 5.0)
    assert len(ev) == 1
    assert ev[0].onset_t == pytest.approx(0.2)
    assert ev[0].release_t == pytest.approx(0.4)
    assert ev[0].horn_id == "upper"


def test_peak_is_argmax():
    ev = detect_contact_events(_series([0, 12, 30, 18, 11, 0]), 10.0, 5.0, min_duration=0.0)
    assert ev[0].peak_t == pytest.approx(0.04)
    assert ev[0].peak_value == 30


def test_double_pulse():
    vals = [0.0] * 5 + [20.0] * 10 + [1.0] * 3 + [20.0] * 10 + [0.0] * 5
    assert len(detect_contact_events(_series(vals), 10.0, 5.0)) == 2


def test_hysteresis_bridges_small_dips():
    vals = [0.0] * 5 + [20.0] * 10 + [7.0] * 3 + [20.0] * 10 + [0.0] * 5
    assert len(detect_contact_events(_series(vals), 10.0, 5.0)) == 1


def test_short_pulse_dropped():
    vals = [0.0] * 5 + [20.0] * 2 + [0.0] * 5
    assert detect_contact_events(_series(vals), 10.0, 5.0, min_duration=0.06) == []


def test_unordered_rejected():
    s = _series([0.0, 1.0, 2.0])
    with pytest.raises(UnorderedSeriesError):
        detect_contact_events([s[1], s[0], s[2]], 10.0, 5.0)


def test_thresholds_validated():
    with pytest.raises(ValueError):
        detect_contact_events([], 5.0, 10.0)


# -- force estimate --------------------------------------------------------

def _calibration():
    m = FlexSensorModel()
    return m, synthetic_calibration(m, k_per_horn=300.0)


def test_force_zero():
    m, cal = _calibration()
    assert estimate_force(m, 0.0, Branch.LOADING, cal) == (0.0, False)


@pytest.mark.parametrize("force", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("branch", list(Branch))
def test_force_round_trip(force, branch):
    m, cal = _calibration()
    r = m.branch(branch)(force / 300.0)
    f, flag = estimate_force(m, r, branch, cal)
    assert abs(f - force) < 0.01 * 2.5
    assert not flag


def test_force_clamped():
    m, cal = _calibration()
    assert estimate_force(m, 1e6, Branch.LOADING, cal) == (2.5, True)


# -- chain -----------------------------------------------------------------

def _stream(seed, n=300):
    chain = SensorChain("upper", SensingConfig(), np.random.default_rng(seed))
    out = []
    for i in range(n):
        d = 0.01 if 100 <= i < 150 else 0.0
        out.append(chain.sample(i * 0.02, d, 0.0, 3.0 * d / 0.01))
    return out


def test_chain_deterministic():
    assert _stream(7) == _stream(7)
    assert _stream(7) != _stream(8)


def test_chain_detects_deflection_and_stays_quiet_otherwise():
    samples = _stream(3)
    cfg = SensingConfig()
    on, off = cfg.thresholds()
    events = detect_contact_events(samples, on, off, cfg.min_duration)
    assert len(events) == 1
    assert 2.0 <= events[0].onset_t <= 2.4


def test_noise_off_chain_is_silent_at_rest():
    chain = SensorChain("upper", SensingConfig(noise_sigma=0.0), None)
    samples = [chain.sample(i * 0.02) for i in range(200)]
    assert all(abs(s.filtered) < 1e-9 for s in samples)
    assert not any(s.in_event for s in samples)


def test_thresholds_scale_with_noise():
    cfg = SensingConfig()
    on, off = cfg.thresholds()
    assert on > off > 0
    assert SensingConfig(noise_sigma=40.0).thresholds()[0] > on
    assert SensingConfig(on_threshold=50.0, off_threshold=20.0).thresholds() == (50.0, 20.0)
