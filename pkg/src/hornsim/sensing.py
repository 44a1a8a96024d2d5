"""Synthetic tactile sensing: flex sensor, voltage divider, ADC, low-pass filter
and hysteresis-threshold contact detection.

Resistances downstream of the ADC are offsets from the calibrated neutral
(unbent) reading, in ohms.
"""
from __future__ import annotations

import bisect
import cmath
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

DEFAULT_NEUTRAL_OHM = 25_000.0
BRANCH_EPS = 1e-4  # m/s
CALIBRATION_MAX_FORCE = 2.5  # N per horn


class Branch(str, enum.Enum):
    LOADING = "loading"
    UNLOADING = "unloading"


class OpenCircuitError(ZeroDivisionError):
    """Divider output of 0 V: the flex sensor path is open."""


@dataclass(frozen=True)
class PiecewiseLinear:
    """Strictly increasing piecewise-linear map, extrapolated along its end segments."""
    xs: tuple
    ys: tuple

    def __post_init__(self):
        if len(self.xs) != len(self.ys) or len(self.xs) < 2:
            raise ValueError("need at least two matching breakpoints")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(b <= a for a, b in zip(self.ys, self.ys[1:])):
            raise ValueError("values must be strictly increasing")

    def __call__(self, x: float) -> float:
        xs, ys = self.xs, self.ys
        i = bisect.bisect_right(xs, x) - 1
        i = min(max(i, 0), len(xs) - 2)
        x0, x1 = xs[i], xs[i + 1]
        return ys[i] + (ys[i + 1] - ys[i]) * (x - x0) / (x1 - x0)

    def scaled(self, factor: float) -> "PiecewiseLinear":
        return PiecewiseLinear(self.xs, tuple(factor * y for y in self.ys))

    @property
    def y_max(self) -> float:
        return self.ys[-1]

    def inverse(self, y: float, tol: float = 1e-12) -> tuple[float, bool]:
        """Bisection inverse; clamps to the table range and reports whether it did."""
        if y <= self.ys[0]:
            return self.xs[0], y < self.ys[0]
        if y >= self.ys[-1]:
            return self.xs[-1], y > self.ys[-1]
        lo, hi = self.xs[0], self.xs[-1]
        while hi - lo > tol * max(1.0, abs(hi)):
            mid = 0.5 * (lo + hi)
            if self(mid) < y:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi), False


def power_law_table(full_scale_ohm: float = 800.0, full_deflection: float = 0.03,
                    exponent: float = 1.5, span: float = 0.06, n: int = 61) -> PiecewiseLinear:
    xs = tuple(span * i / (n - 1) for i in range(n))
    ys = tuple(full_scale_ohm * (x / full_deflection) ** exponent for x in xs)
    return PiecewiseLinear(xs, ys)


@dataclass(frozen=True)
class FlexSensorModel:
    loading_branch: PiecewiseLinear = field(default_factory=power_law_table)
    unloading_branch: PiecewiseLinear = field(default_factory=lambda: power_law_table().scaled(1.15))
    creep_gain: float = 2.0  # ohm per N*s
    creep_decay_tau: float = 2.0  # s
    noise_sigma: float = 10.0  # ohm
    branch_state: Branch = Branch.LOADING
    creep_state: float = 0.0

    def __post_init__(self):
        for br in (self.loading_branch, self.unloading_branch):
            if br.xs[0] != 0.0 or br.ys[0] != 0.0:
                raise ValueError("calibration branches must pass through (0, 0)")
        for x in self.loading_branch.xs[1:]:
            if self.unloading_branch(x) < self.loading_branch(x):
                raise ValueError("unloading branch must lie on or above the loading branch")
        if self.creep_decay_tau <= 0 or self.noise_sigma < 0 or self.creep_gain < 0:
            raise ValueError("invalid creep/noise parameters")

    def branch(self, which: Branch) -> PiecewiseLinear:
        return self.loading_branch if which is Branch.LOADING else self.unloading_branch


def deflection_to_resistance(model: FlexSensorModel, deflection: float, deflection_rate: float,
                             load: float, dt: float,
                             rng: Optional[np.random.Generator] = None) -> tuple[float, FlexSensorModel]:
    """Resistance offset (ohm) of a bent flex sensor and the model's next state.

    Noise is drawn from ``rng``; pass ``None`` for a noiseless reading.
    """
    if deflection < 0:
        raise ValueError("deflection must be non-negative")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if deflection_rate > BRANCH_EPS:
        branch = Branch.LOADING
    elif deflection_rate < -BRANCH_EPS:
        branch = Branch.UNLOADING
    else:
        branch = model.branch_state
    # zero-order-hold solution of dc/dt = gain*load - c/tau
    decay = math.exp(-dt / model.creep_decay_tau)
    creep = model.creep_state * decay + model.creep_gain * max(load, 0.0) * model.creep_decay_tau * (1.0 - decay)
    r = model.branch(branch)(deflection) + creep
    if rng is not None and model.noise_sigma > 0:
        r += model.noise_sigma * rng.standard_normal()
    return r, replace(model, branch_state=branch, creep_state=creep)


@dataclass(frozen=True)
class AdcConfig:
    bits: int = 12
    full_scale: float = 4.096
    sample_rate: float = 50.0
    v_in: float = 3.3
    r_fixed: float = 47_000.0

    def __post_init__(self):
        if not self.full_scale > self.v_in:
            raise ValueError("full_scale must exceed the supply voltage")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")

    @property
    def lsb(self) -> float:
        # single-ended use of a bipolar converter: one bit is the sign
        return self.full_scale / 2 ** (self.bits - 1)

    @property
    def max_code(self) -> int:
        return 2 ** (self.bits - 1) - 1


def divider_voltage(r_flex: float, cfg: AdcConfig) -> float:
    if r_flex < 0:
        raise ValueError("resistance must be non-negative")
    return cfg.v_in * cfg.r_fixed / (cfg.r_fixed + r_flex)


def resistance_from_voltage(v_measure: float, cfg: AdcConfig) -> float:
    if v_measure == 0:
        raise OpenCircuitError("0 V at the divider output (open circuit)")
    if not 0 < v_measure <= cfg.v_in:
        raise ValueError(f"measured voltage {v_measure} outside (0, {cfg.v_in}]")
    return cfg.r_fixed * (cfg.v_in - v_measure) / v_measure


def adc_sample(v: float, cfg: AdcConfig) -> int:
    if v < 0:
        raise ValueError("voltage must be non-negative")
    # the tolerance keeps exact code boundaries (3.3 V / 2 mV) from flooring one low
    return min(int(math.floor(v / cfg.lsb + 1e-9)), cfg.max_code)


def code_to_voltage(code: int, cfg: AdcConfig) -> float:
    return code * cfg.lsb


# -- low-pass filter -------------------------------------------------------

@dataclass(frozen=True)
class LowPassFilter:
    """Cascade of second-order sections in transposed direct form II.

    ``sos`` rows are (b0, b1, b2, 1, a1, a2); ``delay_state`` holds two
    values per section.
    """
    order: int
    cutoff: float
    sample_rate: float
    sos: tuple
    delay_state: tuple

    def reset(self) -> "LowPassFilter":
        return replace(self, delay_state=tuple((0.0, 0.0) for _ in self.sos))

    def response(self, f_hz: float) -> complex:
        z = cmath.exp(-2j * math.pi * f_hz / self.sample_rate)
        h = 1.0 + 0j
        for b0, b1, b2, _, a1, a2 in self.sos:
            h *= (b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z)
        return h

    def poles(self) -> list:
        out = []
        for *_, a1, a2 in self.sos:
            out.extend(np.roots([1.0, a1, a2]))
        return out


FILTER_METHODS = ("matched", "bilinear")


def design_lowpass(order: int = 2, cutoff: float = 0.8, sample_rate: float = 50.0,
                   method: str = "matched") -> LowPassFilter:
    """Digital Butterworth low-pass, unit DC gain.

    ``matched`` maps the analog poles through z = exp(sT) and gives each pole pair
    one zero at Nyquist; it tracks the analog magnitude within 0.2 dB up to 5 Hz
    at the default rates. ``bilinear`` prewarps at ``cutoff``: exact there, but
    about 0.6 dB low at 5 Hz.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if not 0 < cutoff < sample_rate / 2:
        raise ValueError(f"cutoff {cutoff} Hz must lie in (0, Nyquist={sample_rate / 2})")
    if method not in FILTER_METHODS:
        raise ValueError(f"unknown filter method {method!r}; use one of {FILTER_METHODS}")
    fs2 = 2.0 * sample_rate
    if method == "bilinear":
        wc = fs2 * math.tan(math.pi * cutoff / sample_rate)
    else:
        wc = 2.0 * math.pi * cutoff
    # left-half-plane analog poles, paired as conjugates
    analog = [wc * cmath.exp(1j * math.pi * (2 * k + order + 1) / (2 * order)) for k in range(order)]
    if method == "bilinear":
        digital = [(fs2 + p) / (fs2 - p) for p in analog]
    else:
        digital = [cmath.exp(p / sample_rate) for p in analog]
    sections = []
    used = [False] * order
    for i, p in enumerate(digital):
        if used[i]:
            continue
        used[i] = True
        if abs(p.imag) < 1e-12:
            a = (1.0, -p.real, 0.0)
            b = (1.0, 1.0, 0.0) if method == "bilinear" else (1.0, 0.0, 0.0)
        else:
            j = next(j for j in range(order) if not used[j] and abs(digital[j] - p.conjugate()) < 1e-9)
            used[j] = True
            a = (1.0, -2.0 * p.real, abs(p) ** 2)
            b = (1.0, 2.0, 1.0) if method == "bilinear" else (1.0, 1.0, 0.0)
        g = sum(a) / sum(b)  # unit DC gain per section
        sections.append((g * b[0], g * b[1], g * b[2]) + a)
    sos = tuple(sections)
    return LowPassFilter(order, cutoff, sample_rate, sos, tuple((0.0, 0.0) for _ in sos))


def filter_step(f: LowPassFilter, sample: float) -> tuple[float, LowPassFilter]:
    x = sample
    new_state = []
    for (b0, b1, b2, _, a1, a2), (s1, s2) in zip(f.sos, f.delay_state):
        y = b0 * x + s1
        new_state.append((b1 * x - a1 * y + s2, b2 * x - a2 * y))
        x = y
    return x, replace(f, delay_state=tuple(new_state))


def filter_series(f: LowPassFilter, samples: Sequence[float]) -> list:
    out = []
    for s in samples:
        y, f = filter_step(f, s)
        out.append(y)
    return out


def noise_gain(f: LowPassFilter, n: Optional[int] = None) -> float:
    """Output variance per unit-variance white input (sum of squared impulse response)."""
    n = n or int(50 * f.sample_rate / f.cutoff)
    h = filter_series(f.reset(), [1.0] + [0.0] * (n - 1))
    return float(sum(v * v for v in h))


# -- samples, events -------------------------------------------------------

@dataclass(frozen=True)
class SensorSample:
    t: float
    code: int
    resistance: float
    filtered: float
    horn_id: str = ""
    in_event: bool = False


@dataclass(frozen=True)
class ContactEvent:
    horn_id: str
    onset_t: float
    peak_t: float
    peak_value: float
    release_t: float

    def __post_init__(self):
        if not self.onset_t <= self.peak_t <= self.release_t:
            raise ValueError(f"event times out of order: {self}")

    @property
    def duration(self) -> float:
        return self.release_t - self.onset_t


class UnorderedSeriesError(ValueError):
    pass


def detect_contact_events(series: Sequence[SensorSample], on_threshold: float, off_threshold: float,
                          min_duration: float = 0.06, horn_id: Optional[str] = None) -> list:
    """Hysteresis thresholding on the filtered channel.

    An event opens on the first sample with ``filtered >= on_threshold`` and is
    released at the first later sample below ``off_threshold`` (or at the last
    sample if the series ends first).
    """
    if not on_threshold > off_threshold > 0:
        raise ValueError("need on_threshold > off_threshold > 0")
    events = []
    open_i = None
    peak_i = None
    prev_t = -math.inf
    for i, s in enumerate(series):
        if s.t <= prev_t:
            raise UnorderedSeriesError(f"timestamps not increasing at index {i}")
        prev_t = s.t
        if open_i is None:
            if s.filtered >= on_threshold:
                open_i = peak_i = i
        else:
            if s.filtered > series[peak_i].filtered:
                peak_i = i
            if s.filtered < off_threshold:
                events.append((open_i, peak_i, i))
                open_i = None
    if open_i is not None:
        events.append((open_i, peak_i, len(series) - 1))
    out = []
    for a, p, r in events:
        ev = ContactEvent(horn_id if horn_id is not None else series[a].horn_id,
                          series[a].t, series[p].t, series[p].filtered, series[r].t)
        if ev.duration >= min_duration - 1e-9:
            out.append(ev)
    return out


# -- force estimation ------------------------------------------------------

@dataclass(frozen=True)
class ForceCalibration:
    """Per-branch monotone tables force (N) -> resistance (ohm)."""
    loading: PiecewiseLinear
    unloading: PiecewiseLinear

    def table(self, branch: Branch) -> PiecewiseLinear:
        return self.loading if Branch(branch) is Branch.LOADING else self.unloading


def synthetic_calibration(model: FlexSensorModel, k_per_horn: float,
                          max_force: float = CALIBRATION_MAX_FORCE, n: int = 26) -> ForceCalibration:
    """Calibration tables a bench press against a linear horn spring would produce."""
    forces = tuple(max_force * i / (n - 1) for i in range(n))

    def build(branch: PiecewiseLinear) -> PiecewiseLinear:
        return PiecewiseLinear(forces, tuple(branch(f / k_per_horn) for f in forces))

    return ForceCalibration(build(model.loading_branch), build(model.unloading_branch))


def estimate_force(model: FlexSensorModel, resistance: float, branch: Branch,
                   force_calibration: ForceCalibration) -> tuple[float, bool]:
    """Invert a calibration branch; returns (force N, extrapolated flag)."""
    del model  # calibration tables already encode the sensor branches
    if resistance < 0:
        raise ValueError("resistance must be non-negative")
    return force_calibration.table(branch).inverse(resistance)


# -- full per-horn chain ---------------------------------------------------

@dataclass(frozen=True)
class SensingConfig:
    adc: AdcConfig = field(default_factory=AdcConfig)
    neutral_ohm: float = DEFAULT_NEUTRAL_OHM
    noise_sigma: float = 10.0
    creep_gain: float = 2.0
    creep_decay_tau: float = 2.0
    filter_order: int = 2
    cutoff: float = 0.8
    filter_method: str = "matched"
    on_sigma: float = 5.0
    off_sigma: float = 2.5
    min_duration: float = 0.06
    tare_samples: int = 50
    on_threshold: Optional[float] = None  # ohm; derived from noise when None
    off_threshold: Optional[float] = None

    def flex_model(self, full_deflection: float = 0.03) -> FlexSensorModel:
        """Sensor model whose table reaches its nominal full scale at ``full_deflection``."""
        load = power_law_table(full_deflection=full_deflection, span=2.0 * full_deflection)
        return FlexSensorModel(loading_branch=load, unloading_branch=load.scaled(1.15),
                               creep_gain=self.creep_gain, creep_decay_tau=self.creep_decay_tau,
                               noise_sigma=self.noise_sigma)

    def design_filter(self) -> LowPassFilter:
        return design_lowpass(self.filter_order, self.cutoff, self.adc.sample_rate, self.filter_method)

    def resistance_lsb(self) -> float:
        """Resistance step of one ADC code around the neutral reading."""
        v0 = divider_voltage(self.neutral_ohm, self.adc)
        return self.adc.r_fixed * self.adc.v_in / v0 ** 2 * self.adc.lsb

    def filtered_noise_sigma(self, nominal_sigma: Optional[float] = None) -> float:
        sigma = self.noise_sigma if nominal_sigma is None else nominal_sigma
        q = self.resistance_lsb()
        # noise well below one code toggles between two codes: variance up to q^2 / 4
        return math.sqrt((sigma ** 2 + q * q / 4.0) * noise_gain(self.design_filter()))

    def thresholds(self, nominal_sigma: Optional[float] = None) -> tuple[float, float]:
        s = self.filtered_noise_sigma(nominal_sigma)
        on = self.on_threshold if self.on_threshold is not None else self.on_sigma * s
        off = self.off_threshold if self.off_threshold is not None else self.off_sigma * s
        return on, off


class OnlineDetector:
    """Streaming counterpart of :func:`detect_contact_events` (no duration filter)."""

    def __init__(self, on_threshold: float, off_threshold: float):
        if not on_threshold > off_threshold > 0:
            raise ValueError("need on_threshold > off_threshold > 0")
        self.on = on_threshold
        self.off = off_threshold
        self.active = False
        self.last_release_t: Optional[float] = None

    def update(self, t: float, filtered: float) -> bool:
        if not self.active and filtered >= self.on:
            self.active = True
        elif self.active and filtered < self.off:
            self.active = False
            self.last_release_t = t
        return self.active


class SensorChain:
    """Flex sensor -> divider -> ADC -> baseline removal -> low-pass -> detector for one horn."""

    def __init__(self, horn_id: str, cfg: SensingConfig, rng: Optional[np.random.Generator],
                 thresholds: Optional[tuple] = None, full_deflection: float = 0.03):
        self.horn_id = horn_id
        self.cfg = cfg
        self.rng = rng
        self.model = cfg.flex_model(full_deflection)
        self._acc = 0.0
        self._n = 0
        self.filter = cfg.design_filter()
        on, off = thresholds if thresholds is not None else cfg.thresholds()
        self.detector = OnlineDetector(on, off)
        self.baseline = self.tare(cfg.tare_samples)
        self.samples: list = []

    def tare(self, n: int) -> float:
        """Mean neutral reading over ``n`` samples (the unbent-state calibration)."""
        total = 0.0
        for _ in range(max(n, 1)):
            r = self.cfg.neutral_ohm
            if self.rng is not None and self.model.noise_sigma > 0:
                r += self.model.noise_sigma * self.rng.standard_normal()
            total += self._reconstruct(adc_sample(divider_voltage(max(r, 0.0), self.cfg.adc), self.cfg.adc))
        return total / max(n, 1)

    def _reconstruct(self, code: int) -> float:
        return resistance_from_voltage(max(code_to_voltage(code, self.cfg.adc), self.cfg.adc.lsb), self.cfg.adc)

    def accumulate(self, deflection: float, deflection_rate: float, load: float, dt: float) -> None:
        """Feed one physics step; the next sample reads the window mean (integrating ADC)."""
        r, self.model = deflection_to_resistance(self.model, deflection, deflection_rate, load, dt)
        self._acc += r
        self._n += 1

    def sample(self, t: float, deflection: float = 0.0, deflection_rate: float = 0.0, load: float = 0.0,
               dt: float = 0.02) -> SensorSample:
        """Convert one reading; uses the accumulated window mean when steps were fed."""
        if self._n:
            offset = self._acc / self._n
            if self.rng is not None and self.model.noise_sigma > 0:
                offset += self.model.noise_sigma * self.rng.standard_normal()
            self._acc, self._n = 0.0, 0
        else:
            offset, self.model = deflection_to_resistance(self.model, deflection, deflection_rate, load, dt,
                                                          self.rng)
        r_flex = max(self.cfg.neutral_ohm + offset, 0.0)
        code = adc_sample(divider_voltage(r_flex, self.cfg.adc), self.cfg.adc)
        resistance = self._reconstruct(code) - self.baseline
        filtered, self.filter = filter_step(self.filter, resistance)
        active = self.detector.update(t, filtered)
        s = SensorSample(t, code, resistance, filtered, self.horn_id, active)
        self.samples.append(s)
        return s
