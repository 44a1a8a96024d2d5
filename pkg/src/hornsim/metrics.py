"""Flight-experiment metrics: pitch RMSE, contact delay, pitch-rate signature,
pitch excursion, absorbed energy and pushing stability.

Series arguments only need ``__getitem__`` returning arrays for the named
columns, so a :class:`~hornsim.simulate.TimeSeries` or a plain dict both work.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

DEFAULT_WINDOW = (0.2, 1.5)  # s before / after each upper-horn onset
DEFAULT_BAND_DEG = 7.0


def _col(series, name: str) -> np.ndarray:
    return np.asarray(series[name], dtype=float)


def _window_mask(t: np.ndarray, t0: float, t1: float) -> np.ndarray:
    return (t >= t0 - 1e-9) & (t <= t1 + 1e-9)


def pitch_rmse(series, events: Sequence, window: tuple = DEFAULT_WINDOW) -> list:
    """Per-event RMSE (deg) of pitch against the commanded setpoint.

    Each window is ``[onset - window[0], onset + window[1]]``.
    """
    if not events:
        raise ValueError("pitch_rmse needs at least one event")
    pre, post = window
    t, theta, sp = _col(series, "t"), _col(series, "theta"), _col(series, "pitch_sp")
    out = []
    for e in events:
        m = _window_mask(t, e.onset_t - pre, e.onset_t + post)
        if not m.any():
            raise ValueError(f"empty RMSE window around t={e.onset_t:g}")
        err = np.degrees(theta[m] - sp[m])
        out.append(float(np.sqrt(np.mean(err * err))))
    return out


def run_rmse(series) -> float:
    """Pitch RMSE (deg) over the whole series; used when nothing touched the wall."""
    theta, sp = _col(series, "theta"), _col(series, "pitch_sp")
    if theta.size == 0:
        raise ValueError("empty series")
    return float(np.sqrt(np.mean(np.degrees(theta - sp) ** 2)))


def _episode_for(episodes: Sequence, onset_t: float, lookback: float):
    """Earliest ground-truth episode starting within ``lookback`` before a sensed onset."""
    for ep in episodes:
        if onset_t - lookback <= ep.onset_t <= onset_t + 1e-9:
            return ep
    return None


def contact_delay(upper_events: Sequence, lower_events: Sequence, series=None,
                  truth: Optional[Mapping] = None, lookback: float = 0.5) -> list:
    """Per upper event: lower onset minus upper saturation/peak time, in ms (None when unpaired).

    With ``truth`` (horn id -> ground-truth contact episodes) the physical onsets
    are used; the sensed events then only identify the bumps. Without it the
    sensed event times are used directly.
    """
    out = []
    if truth is not None:
        ups, lows = truth.get("upper", []), truth.get("lower", [])
        for e in upper_events:
            ep = _episode_for(ups, e.onset_t, lookback)
            if ep is None:
                out.append(None)
                continue
            end = ep.onset_t + lookback
            low = next((lw for lw in lows if ep.onset_t - lookback <= lw.onset_t <= end), None)
            out.append(None if low is None else 1000.0 * (low.onset_t - ep.reference_t))
        return out
    for e in upper_events:
        low = next((lw for lw in lower_events if e.onset_t <= lw.onset_t <= e.release_t), None)
        out.append(None if low is None else 1000.0 * (low.onset_t - e.peak_t))
    return out


def contact_order(upper_events: Sequence, truth: Mapping, lookback: float = 0.5) -> list:
    """Per upper event: True when the upper horn touched strictly before the lower one.

    None when the bump has no lower contact (or no ground-truth upper episode).
    """
    ups, lows = truth.get("upper", []), truth.get("lower", [])
    out = []
    for e in upper_events:
        ep = _episode_for(ups, e.onset_t, lookback)
        if ep is None:
            out.append(None)
            continue
        low = next((lw for lw in lows if ep.onset_t - lookback <= lw.onset_t <= ep.onset_t + lookback), None)
        # a lower episode still open when the upper one starts also counts as a violation
        ongoing = any(lw.onset_t <= ep.onset_t and (lw.release_t is None or lw.release_t > ep.onset_t)
                      for lw in lows)
        out.append(False if ongoing else (None if low is None else low.onset_t > ep.onset_t))
    return out


def pitch_rate_signature(series, events: Sequence, window: tuple = DEFAULT_WINDOW) -> list:
    """Per event: nose-up rate shows a positive peak followed later by a negative one.

    The nose-up rate is ``-q`` because positive pitch leans the vehicle toward the wall.
    """
    pre, post = window
    t, q = _col(series, "t"), _col(series, "q")
    out = []
    for e in events:
        m = _window_mask(t, e.onset_t - pre, e.onset_t + post)
        r = -q[m]
        if r.size == 0:
            out.append(False)
            continue
        i_max, i_min = int(np.argmax(r)), int(np.argmin(r))
        out.append(bool(i_max < i_min and r[i_max] > 0 and r[i_min] < 0))
    return out


def pitch_excursion(series, events: Sequence, window: tuple = DEFAULT_WINDOW) -> list:
    """Per event: net pitch excursion (deg), the mean of pitch minus the pre-contact setpoint
    over ``[onset, onset + window[1]]``. The pre-contact setpoint is the one commanded at
    ``onset - window[0]``.
    """
    pre, post = window
    t, theta, sp = _col(series, "t"), _col(series, "theta"), _col(series, "pitch_sp")
    out = []
    for e in events:
        m = _window_mask(t, e.onset_t, e.onset_t + post)
        if not m.any():
            out.append(float("nan"))
            continue
        i_pre = int(np.clip(np.searchsorted(t, e.onset_t - pre), 0, t.size - 1))
        out.append(float(np.degrees(np.mean(theta[m] - sp[i_pre]))))
    return out


def energy_absorbed(series, events: Sequence, window: tuple = DEFAULT_WINDOW) -> list:
    """Per event: damping plus friction dissipation (J) over the bump window."""
    pre, post = window
    t = _col(series, "t")
    e_abs = _col(series, "e_damping") + _col(series, "e_friction")
    out = []
    for i, e in enumerate(events):
        t0 = e.onset_t - pre
        t1 = e.onset_t + post
        if i + 1 < len(events):
            t1 = min(t1, events[i + 1].onset_t - pre)
        m = _window_mask(t, t0, t1)
        out.append(float(e_abs[m][-1] - e_abs[m][0]) if m.any() else 0.0)
    return out


def impact_count(episodes: Sequence, merge_gap: float = 0.3) -> int:
    """Impacts: contact episodes (or sensed events) of any horn, merging those less than ``merge_gap`` apart."""
    n, last_end = 0, None
    for ep in sorted(episodes, key=lambda e: e.onset_t):
        if last_end is None or ep.onset_t - last_end >= merge_gap:
            n += 1
            last_end = -math.inf
        last_end = max(last_end, ep.release_t if ep.release_t is not None else math.inf)
    return n


class Verdict(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    NOT_EVALUATED = "NotEvaluated"


@dataclass(frozen=True)
class Stability:
    verdict: Verdict
    onset_t: Optional[float] = None
    theta_min_deg: Optional[float] = None
    theta_max_deg: Optional[float] = None
    mean_normal_force_n: Optional[float] = None
    span: Optional[tuple] = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.value, "onset_t": self.onset_t, "theta_min_deg": self.theta_min_deg,
                "theta_max_deg": self.theta_max_deg, "mean_normal_force_n": self.mean_normal_force_n,
                "span": list(self.span) if self.span is not None else None, "reason": self.reason}


def _normal_force(series, t: np.ndarray) -> Optional[np.ndarray]:
    names = [n for n in getattr(series, "columns", series).keys() if n.endswith("_f_n")]
    if not names:
        return None
    return np.sum([_col(series, n) for n in names], axis=0)


def pushing_stability(series, setpoint: float, contact_span: tuple, band_deg: float = DEFAULT_BAND_DEG,
                      min_contact: float = 2.0, block: float = 0.5) -> Stability:
    """Judge a sustained push.

    Stable iff pitch stays within ``setpoint +/- band_deg`` over the span and the
    total normal force has a positive mean over every ``block``-second slice.
    Needs at least ``min_contact`` seconds of contact inside the span.
    """
    t = _col(series, "t")
    t0, t1 = contact_span
    m = _window_mask(t, t0, t1)
    f_n = _normal_force(series, t)
    if not m.any() or f_n is None:
        return Stability(Verdict.NOT_EVALUATED, span=(t0, t1), reason="no samples or no force columns")
    tt, th, ff = t[m], _col(series, "theta")[m], f_n[m]
    step = float(np.median(np.diff(tt))) if tt.size > 1 else 0.0
    if np.count_nonzero(ff > 0) * step < min_contact:
        return Stability(Verdict.NOT_EVALUATED, span=(t0, t1), reason="contact shorter than required")
    err = np.degrees(th - setpoint)
    lo, hi = float(np.degrees(th.min())), float(np.degrees(th.max()))
    mean_f = float(ff.mean())
    exits = []
    out = np.nonzero(~np.isfinite(err) | (np.abs(err) > band_deg))[0]
    if out.size:
        exits.append(float(tt[out[0]]))
    for b0 in np.arange(t0, t1, block):
        bm = (tt >= b0 - 1e-9) & (tt < b0 + block - 1e-9)
        if bm.any() and not ff[bm].mean() > 0:
            exits.append(float(b0))
            break
    if exits:
        return Stability(Verdict.UNSTABLE, min(exits), lo, hi, mean_f, (t0, t1), "left band or lost contact")
    return Stability(Verdict.STABLE, None, lo, hi, mean_f, (t0, t1))


def release_time(episodes: Mapping, release_t: float) -> float:
    """Seconds from the release command until every horn is first off the wall (inf if never).

    Later re-contacts are not counted; they are new approaches.
    """
    spans = [(ep.onset_t, math.inf if ep.release_t is None else ep.release_t)
             for eps in episodes.values() for ep in eps]
    candidates = sorted({release_t} | {end for _, end in spans if release_t < end < math.inf})
    for c in candidates:
        if not any(on <= c < end for on, end in spans):
            return c - release_t
    return math.inf


def reduction(a: float, b: float) -> float:
    """Percentage reduction of ``a`` relative to ``b``."""
    return 100.0 * (1.0 - a / b)
