"""Pitch attitude PID, altitude hold and scripted pilot command profiles."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

from .dynamics import VehicleParams


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float
    output_limit: float
    integral_limit: float

    def __post_init__(self):
        if self.output_limit <= 0:
            raise ValueError("output_limit must be positive")
        if self.integral_limit < 0:
            raise ValueError("integral_limit must be non-negative")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0


# Tuned on the no-wall hover settling check; shared by every configuration.
DEFAULT_ATTITUDE_GAINS = PidGains(kp=0.45, ki=0.25, kd=0.06, output_limit=0.5, integral_limit=0.2)
DEFAULT_ALTITUDE_GAINS = PidGains(kp=8.0, ki=2.0, kd=5.0, output_limit=6.0, integral_limit=1.0)


def _clamp(v: float, lim: float) -> float:
    return max(-lim, min(lim, v))


def pid_step(gains: PidGains, setpoint: float, measured: float, measured_rate: float,
             dt: float, state: PidState = PidState()) -> tuple[float, PidState]:
    """One PID update with derivative on measurement.

    ``integral_limit`` clamps the integral *term* (ki * integral of error).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    e = setpoint - measured
    integral = state.integral + e * dt
    if gains.ki > 0:
        bound = gains.integral_limit / gains.ki
        integral = max(-bound, min(bound, integral))
    else:
        integral = 0.0
    u = gains.kp * e + gains.ki * integral - gains.kd * measured_rate
    return _clamp(u, gains.output_limit), PidState(integral)


def altitude_hold(gains: PidGains, z_sp: float, z: float, vz: float, params: VehicleParams,
                  theta: float, dt: float, state: PidState = PidState()) -> tuple[float, PidState]:
    """Collective thrust holding altitude, with tilt compensation."""
    u, state = pid_step(gains, z_sp, z, vz, dt, state)
    thrust = (params.hover_thrust + u) / max(math.cos(theta), 0.5)
    return min(max(thrust, 0.0), params.thrust_max), state


# -- pilot command profiles ------------------------------------------------

@dataclass(frozen=True)
class TouchAndGo:
    approach_pitch: float = math.radians(15.0)
    n_bumps: int = 3
    z_sp: float = 1.0
    separation_time: float = 0.3  # s with every horn quiet before re-approaching
    tail: float = 2.0  # s of hover kept after the last bump completes; the run ends there
    hover_time: float = 0.0  # s of level hover before the first approach

    def __post_init__(self):
        if self.n_bumps < 1:
            raise ValueError("n_bumps must be >= 1")
        if self.tail < 0 or self.hover_time < 0:
            raise ValueError("tail and hover_time must be non-negative")


@dataclass(frozen=True)
class Pushing:
    approach_pitch: float = math.radians(15.0)
    hold_duration: float = 10.0
    release_pitch: float = math.radians(-10.0)
    release_duration: float = 1.5
    z_sp: float = 1.0

    def __post_init__(self):
        if self.hold_duration <= 0:
            raise ValueError("hold_duration must be positive")
        if self.release_pitch >= 0:
            raise ValueError("release_pitch must be negative")


@dataclass(frozen=True)
class Scripted:
    """Zero-order hold over (t, pitch_sp, z_sp) knots."""
    points: tuple = ((0.0, 0.0, 1.0),)

    def __post_init__(self):
        ts = [p[0] for p in self.points]
        if not ts or any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("scripted knots must be non-empty and time-ordered")


CommandProfile = Union[TouchAndGo, Pushing, Scripted]


def command(profile: CommandProfile, t: float, first_contact_seen: bool, bumps_completed: int,
            contact_time: Optional[float] = None) -> tuple[float, float]:
    """Pitch and altitude setpoints the pilot would hold at time ``t``.

    For TouchAndGo, ``first_contact_seen`` refers to the bump in progress.
    For Pushing, ``contact_time`` is when the first contact was sensed.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if isinstance(profile, TouchAndGo):
        if bumps_completed >= profile.n_bumps or first_contact_seen or t < profile.hover_time:
            return 0.0, profile.z_sp
        return profile.approach_pitch, profile.z_sp
    if isinstance(profile, Pushing):
        if not first_contact_seen:
            return profile.approach_pitch, profile.z_sp
        since = t - (contact_time if contact_time is not None else t)
        if since < profile.hold_duration:
            return profile.approach_pitch, profile.z_sp
        if since < profile.hold_duration + profile.release_duration:
            return profile.release_pitch, profile.z_sp
        return 0.0, profile.z_sp
    if isinstance(profile, Scripted):
        ts = [p[0] for p in profile.points]
        i = max(bisect.bisect_right(ts, t) - 1, 0)
        return profile.points[i][1], profile.points[i][2]
    raise TypeError(f"unknown command profile {profile!r}")


@dataclass
class TouchAndGoPilot:
    """Tracks bump phases for :func:`command` from sensed contact flags."""
    profile: TouchAndGo
    bumps_completed: int = 0
    approaches_started: int = 1
    in_bump: bool = False
    quiet_since: Optional[float] = None

    def update(self, t: float, any_contact: bool) -> tuple[bool, int]:
        if any_contact:
            self.quiet_since = None
            if not self.in_bump and self.bumps_completed < self.profile.n_bumps:
                self.in_bump = True
        elif self.in_bump:
            if self.quiet_since is None:
                self.quiet_since = t
            elif t - self.quiet_since >= self.profile.separation_time - 1e-9:
                self.in_bump = False
                self.bumps_completed += 1
                self.quiet_since = None
                if self.bumps_completed < self.profile.n_bumps:
                    self.approaches_started += 1
        return self.in_bump, self.bumps_completed
