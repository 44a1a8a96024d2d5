"""Closed-loop simulation: dynamics + horns + sensing + pilot/controller.

Three clocks run off the physics step: the physics/controller at ``dt``
(1 kHz default), the state log at 100 Hz and the sensors at the ADC rate
(50 Hz default).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import control
from .control import PidState, Pushing, Scripted, TouchAndGo, TouchAndGoPilot
from .dynamics import VehicleParams, VehicleState, Wall, accelerations, rk4, state_from_tuple, wrap_angle
from .horns import HornConfiguration, horn_forces, make_configuration, update_damage, Wrench
from .sensing import SensingConfig, SensorChain

LOG_RATE = 100.0  # Hz

DEFAULT_VEHICLE = VehicleParams(drag=0.2)
DEFAULT_WALL = Wall(x_wall=0.58, mu=0.3)  # 0.5 m ahead of the horn tips at x = 0

# fixed column order of the exported time series (horn columns repeat per horn)
STATE_COLUMNS = ["t", "x", "z", "theta", "vx", "vz", "q", "pitch_sp", "z_sp", "thrust", "torque",
                 "e_damping", "e_friction", "e_drag", "w_thrust", "w_torque"]
HORN_COLUMNS = ["delta", "delta_rate", "f_n", "in_contact", "failed", "resistance", "filtered", "in_event"]


@dataclass
class TimeSeries:
    """Column-oriented log sampled at the 100 Hz state clock.

    Sensor columns hold the most recent 50 Hz sample. ``sensors`` keeps the raw
    per-horn SensorSample streams.
    """
    horn_ids: list
    columns: dict = field(default_factory=dict)
    sensors: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in self.column_names():
            self.columns.setdefault(name, [])
        for h in self.horn_ids:
            self.sensors.setdefault(h, [])

    def column_names(self) -> list:
        return STATE_COLUMNS + [f"{h}_{c}" for h in self.horn_ids for c in HORN_COLUMNS]

    def __len__(self) -> int:
        return len(self.columns["t"])

    def __getitem__(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name], dtype=float)

    def append(self, row: dict) -> None:
        for name in self.column_names():
            self.columns[name].append(row[name])

    def window(self, t0: float, t1: float) -> np.ndarray:
        t = self["t"]
        return (t >= t0 - 1e-9) & (t <= t1 + 1e-9)


@dataclass
class ContactEpisode:
    """Ground-truth contact interval of one horn, resolved at the physics step."""
    horn_id: str
    onset_t: float
    peak_t: float
    peak_deflection: float
    saturation_t: Optional[float] = None
    release_t: Optional[float] = None  # None while still in contact at the end of the run

    @property
    def reference_t(self) -> float:
        """Saturation time when the horn saturated, else the time of peak deflection."""
        return self.saturation_t if self.saturation_t is not None else self.peak_t


@dataclass
class SimResult:
    series: TimeSeries
    config: HornConfiguration
    diverged_at: Optional[float] = None
    approaches_started: int = 0
    first_contact_t: Optional[float] = None
    release_t: Optional[float] = None
    failed_by_bump: dict = field(default_factory=dict)
    thresholds: tuple = (0.0, 0.0)
    contacts: dict = field(default_factory=dict)  # horn id -> list of ContactEpisode


def _hold_inputs(params, att_gains, alt_gains, pitch_sp, z_sp, s, att_state, alt_state, dt):
    torque, att_state = control.pid_step(att_gains, pitch_sp, s[2], s[5], dt, att_state)
    thrust, alt_state = control.altitude_hold(alt_gains, z_sp, s[1], s[4], params, s[2], dt, alt_state)
    return thrust, torque, att_state, alt_state


def simulate(profile, config: HornConfiguration, *, params: VehicleParams = DEFAULT_VEHICLE,
             wall: Wall = DEFAULT_WALL, sensing: SensingConfig = SensingConfig(), dt: float = 1e-3,
             duration: float = 10.0, seed: int = 0, x0: float = 0.0,
             att_gains=control.DEFAULT_ATTITUDE_GAINS, alt_gains=control.DEFAULT_ALTITUDE_GAINS,
             noise: bool = True, damage: bool = True) -> SimResult:
    """Run one closed-loop experiment and return its time series."""
    if not (dt > 0 and duration > 0):
        raise ValueError("dt and duration must be positive")
    z_sp0 = control.command(profile, 0.0, False, 0)[1]
    y = (x0, z_sp0, 0.0, 0.0, 0.0, 0.0)
    energy = [0.0, 0.0, 0.0, 0.0, 0.0]  # damping, friction, drag, thrust work, torque work
    horns = list(config.horns)
    ids = [h.id for h in horns]
    thresholds = sensing.thresholds()
    chains = {}
    for i, h in enumerate(horns):
        rng = np.random.default_rng([seed, i]) if noise and sensing.noise_sigma > 0 else None
        chains[h.id] = SensorChain(h.id, sensing, rng, thresholds, h.max_deflection)
    series = TimeSeries(ids)
    result = SimResult(series, config, thresholds=thresholds)

    pilot = TouchAndGoPilot(profile) if isinstance(profile, TouchAndGo) else None
    contact_seen = False
    contact_t = None
    att_state, alt_state = PidState(), PidState()

    n_steps = int(round(duration / dt))
    log_every = max(int(round(1.0 / (LOG_RATE * dt))), 1)
    sense_every = max(int(round(1.0 / (sensing.adc.sample_rate * dt))), 1)
    sense_dt = sense_every * dt
    last_sample = {h: None for h in ids}
    episodes = {h: [] for h in ids}
    open_ep = {h: None for h in ids}
    wall_x, mu = wall.x_wall, wall.mu

    def contact_terms(yy):
        fx = fz = my = 0.0
        p_damp = p_fric = 0.0
        for h in horns:
            hfx, hfz, hmy, d, dd, f_n, f_t, tip_vz = horn_forces(h, yy, wall)
            if f_n > 0.0 or (d > 0.0 and not h.failed):
                fx += hfx
                fz += hfz
                my += hmy
                # power leaving the vehicle+spring system
                p_damp += f_n * dd - h.k * d * dd
                p_fric += -f_t * tip_vz
        return fx, fz, my, p_damp, p_fric

    pitch_sp, z_sp = control.command(profile, 0.0, False, 0)
    stop_at = math.inf  # set once a touch-and-go pilot has flown all its bumps
    for i in range(n_steps + 1):
        t = i * dt
        # -- sensing at the ADC clock
        if i % sense_every == 0:
            for h in horns:
                _, _, _, d, dd, f_n, _, _ = horn_forces(h, y, wall)
                last_sample[h.id] = chains[h.id].sample(t, d, dd, f_n, sense_dt)
            active = any(s.in_event for s in last_sample.values())
            if pilot is not None:
                contact_seen, bumps = pilot.update(t, active)
                if bumps >= profile.n_bumps and stop_at == math.inf:
                    stop_at = t + profile.tail
            else:
                bumps = 0
                if active and not contact_seen:
                    contact_seen, contact_t = True, t
            pitch_sp, z_sp = control.command(profile, t, contact_seen, bumps, contact_t)
        thrust, torque, att_state, alt_state = _hold_inputs(
            params, att_gains, alt_gains, pitch_sp, z_sp, y, att_state, alt_state, dt)

        # -- logging at 100 Hz
        if i % log_every == 0:
            row = dict(zip(("x", "z", "theta", "vx", "vz", "q"), y))
            row.update(t=t, pitch_sp=pitch_sp, z_sp=z_sp, thrust=thrust, torque=torque,
                       e_damping=energy[0], e_friction=energy[1], e_drag=energy[2],
                       w_thrust=energy[3], w_torque=energy[4])
            for h in horns:
                _, _, _, d, dd, f_n, _, _ = horn_forces(h, y, wall)
                s = last_sample[h.id]
                row.update({f"{h.id}_delta": d, f"{h.id}_delta_rate": dd, f"{h.id}_f_n": f_n,
                            f"{h.id}_in_contact": float(d > 0.0), f"{h.id}_failed": float(h.failed),
                            f"{h.id}_resistance": s.resistance, f"{h.id}_filtered": s.filtered,
                            f"{h.id}_in_event": float(s.in_event)})
            series.append(row)
        if i == n_steps or t >= stop_at - 1e-9:
            break

        def f(_t, yy, thrust=thrust, torque=torque):
            fx, fz, my, p_damp, p_fric = contact_terms(yy)
            ax, az, aq = accelerations(yy, params, thrust, torque, Wrench(fx, fz, my))
            p_thrust = thrust * (math.sin(yy[2]) * yy[3] + math.cos(yy[2]) * yy[4])
            p_drag = params.drag * (yy[3] * yy[3] + yy[4] * yy[4])
            return (yy[3], yy[4], yy[5], ax, az, aq, p_damp, p_fric, p_drag, p_thrust, torque * yy[5])

        z = rk4(f, t, tuple(y) + tuple(energy), dt)
        y, energy = z[:6], list(z[6:])
        if not all(math.isfinite(v) for v in y) or abs(y[2]) > math.pi / 2:
            result.diverged_at = t + dt
            break

        t_next = (i + 1) * dt
        for h in horns:
            _, _, _, d, dd, f_n, _, _ = horn_forces(h, y, wall)
            chains[h.id].accumulate(d, dd, f_n, dt)
            ep = open_ep[h.id]
            if d > 0.0:
                if ep is None:
                    ep = open_ep[h.id] = ContactEpisode(h.id, t_next, t_next, d)
                    episodes[h.id].append(ep)
                elif d > ep.peak_deflection:
                    ep.peak_t, ep.peak_deflection = t_next, d
                if ep.saturation_t is None and d >= h.max_deflection:
                    ep.saturation_t = t_next
            elif ep is not None:
                ep.release_t = t_next
                open_ep[h.id] = None

        if damage:
            for j, h in enumerate(horns):
                if h.failed or not math.isfinite(h.failure_energy):
                    continue
                _, _, _, d, dd, f_n, _, _ = horn_forces(h, y, wall)
                if f_n > 0.0:
                    horns[j] = update_damage(h, f_n, dd, dt)
                    if horns[j].failed:
                        done = pilot.bumps_completed if pilot is not None else 0
                        result.failed_by_bump[h.id] = done + 1

    result.config = config.with_horns(horns)
    result.approaches_started = pilot.approaches_started if pilot is not None else 0
    result.first_contact_t = contact_t
    if isinstance(profile, Pushing) and contact_t is not None:
        result.release_t = contact_t + profile.hold_duration
    result.contacts = episodes
    for h in ids:
        series.sensors[h] = chains[h].samples
    return result


def default_profile(name: str, **kw):
    name = name.lower().replace("_", "").replace("-", "")
    if name == "touchandgo":
        return TouchAndGo(**kw)
    if name == "pushing":
        return Pushing(**kw)
    if name == "scripted":
        return Scripted(**kw)
    raise ValueError(f"unknown scenario {name!r}")
