"""Experiment configuration, single runs, configuration comparisons and sweeps."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from . import metrics
from .control import DEFAULT_ALTITUDE_GAINS, DEFAULT_ATTITUDE_GAINS, PidGains, Pushing, Scripted, TouchAndGo
from .dynamics import VehicleParams, Wall
from .horns import ConfigName, Material, make_configuration, material_preset
from .sensing import SensingConfig, detect_contact_events
from .simulate import DEFAULT_VEHICLE, DEFAULT_WALL, SimResult, TimeSeries, simulate

SCENARIOS = ("TouchAndGo", "Pushing", "Scripted")
CONFIG_NAMES = tuple(c.value for c in ConfigName)


def scenario_name(name: str) -> str:
    """Canonical scenario name; accepts any case and ignores '-' and '_'."""
    key = name.lower().replace("_", "").replace("-", "")
    for s in SCENARIOS:
        if s.lower() == key:
            return s
    raise ValueError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")


def config_name(name: str) -> str:
    key = name.lower().replace("_", "").replace("-", "").replace("+", "")
    for c in CONFIG_NAMES:
        if c.lower() == key:
            return c
    raise ValueError(f"unknown horn configuration {name!r}; expected one of {', '.join(CONFIG_NAMES)}")


_SOFT, _HARD = material_preset(Material.SOFT), material_preset(Material.HARD)


@dataclass(frozen=True)
class HornSettings:
    """Horn geometry and per-physical-horn material constants."""
    tip_forward: float = 0.08
    tip_height: float = 0.09
    lower_forward: float = 0.07
    soft_k: float = _SOFT.k
    soft_c: float = _SOFT.c
    soft_max_deflection: float = _SOFT.max_deflection
    hard_k: float = _HARD.k
    hard_c: float = _HARD.c
    hard_max_deflection: float = _HARD.max_deflection
    hard_failure_energy: float = _HARD.failure_energy
    damage: bool = True

    def __post_init__(self):
        if not (self.soft_k > 0 and self.hard_k > 0 and self.soft_c >= 0 and self.hard_c >= 0):
            raise ValueError("horn stiffness must be positive and damping non-negative")
        if not (self.soft_max_deflection > 0 and self.hard_max_deflection > 0 and self.hard_failure_energy > 0):
            raise ValueError("max deflection and failure energy must be positive")
        if not (self.tip_forward > 0 and self.tip_height > 0 and self.lower_forward > 0):
            raise ValueError("tip offsets must be positive")

    def build(self, name: str):
        name = config_name(name)
        geo = dict(tip_forward=self.tip_forward, tip_height=self.tip_height, lower_forward=self.lower_forward)
        if name == ConfigName.FULL_HARD.value:
            return make_configuration(name, k=self.hard_k, c=self.hard_c, max_deflection=self.hard_max_deflection,
                                      failure_energy=self.hard_failure_energy, **geo)
        return make_configuration(name, k=self.soft_k, c=self.soft_c, max_deflection=self.soft_max_deflection, **geo)


@dataclass(frozen=True)
class ProfileSettings:
    """Pilot command profile parameters; ``script`` is ``t:pitch_deg:z_sp`` knots joined by ';'."""
    approach_pitch_deg: float = 15.0
    n_bumps: int = 3
    z_sp: float = 1.0
    separation_time: float = 0.3
    tail: float = 2.0
    hover_time: float = 0.0
    hold_duration: float = 10.0
    release_pitch_deg: float = -10.0
    release_duration: float = 1.5
    script: str = "0:0:1"

    def knots(self) -> tuple:
        out = []
        for part in self.script.split(";"):
            part = part.strip()
            if not part:
                continue
            t, p, z = (float(v) for v in part.split(":"))
            out.append((t, math.radians(p), z))
        return tuple(out)

    def build(self, scenario: str):
        scenario = scenario_name(scenario)
        if scenario == "TouchAndGo":
            return TouchAndGo(math.radians(self.approach_pitch_deg), self.n_bumps, self.z_sp,
                              self.separation_time, self.tail, self.hover_time)
        if scenario == "Pushing":
            return Pushing(math.radians(self.approach_pitch_deg), self.hold_duration,
                           math.radians(self.release_pitch_deg), self.release_duration, self.z_sp)
        return Scripted(self.knots())


@dataclass(frozen=True)
class MetricSettings:
    rmse_pre: float = metrics.DEFAULT_WINDOW[0]
    rmse_post: float = metrics.DEFAULT_WINDOW[1]
    band_deg: float = metrics.DEFAULT_BAND_DEG
    settle_time: float = 1.0  # s after the first sensed contact before the stability span opens
    min_contact: float = 2.0
    impact_merge_gap: float = 0.3

    @property
    def window(self) -> tuple:
        return (self.rmse_pre, self.rmse_post)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "TouchAndGo"
    configuration: str = "FullSoft"
    seed: int = 0
    dt: float = 1e-3
    duration: Optional[float] = None  # None: long enough for the scenario
    x0: float = 0.0
    noise: bool = True
    vehicle: VehicleParams = DEFAULT_VEHICLE
    wall: Wall = DEFAULT_WALL
    horns: HornSettings = field(default_factory=HornSettings)
    sensing: SensingConfig = field(default_factory=SensingConfig)
    profile: ProfileSettings = field(default_factory=ProfileSettings)
    attitude: PidGains = DEFAULT_ATTITUDE_GAINS
    altitude: PidGains = DEFAULT_ALTITUDE_GAINS
    metrics: MetricSettings = field(default_factory=MetricSettings)

    def __post_init__(self):
        object.__setattr__(self, "scenario", scenario_name(self.scenario))
        object.__setattr__(self, "configuration", config_name(self.configuration))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.duration is not None and not self.duration > 0:
            raise ValueError("duration must be positive")

    def run_duration(self) -> float:
        if self.duration is not None:
            return self.duration
        p = self.profile
        if self.scenario == "TouchAndGo":
            return p.hover_time + 5.0 * p.n_bumps + 2.0  # upper bound; the run ends ``tail`` after the last bump
        if self.scenario == "Pushing":
            return 3.0 + p.hold_duration + p.release_duration + 2.0
        knots = p.knots()
        return (knots[-1][0] if knots else 0.0) + 5.0


@dataclass
class MetricsReport:
    scenario: str
    configuration: str
    seed: int
    pitch_rmse_deg: list
    mean_pitch_rmse_deg: Optional[float]
    contact_delay_ms: list
    mean_contact_delay_ms: Optional[float]
    collision_count: int
    stability: metrics.Stability
    energy_absorbed_j: list
    pitch_excursion_deg: list = field(default_factory=list)
    pitch_rate_signature: list = field(default_factory=list)
    contact_order_ok: list = field(default_factory=list)
    approaches_started: int = 0
    impact_count: int = 0
    sensed_impact_count: int = 0
    release_disengage_s: Optional[float] = None
    diverged_at: Optional[float] = None
    failed_horns: dict = field(default_factory=dict)
    events: dict = field(default_factory=dict)
    thresholds_ohm: tuple = (0.0, 0.0)

    def to_dict(self) -> dict:
        from .export import SCHEMA_VERSION
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["stability"] = self.stability.to_dict()
        d["events"] = {h: [asdict(e) for e in evs] for h, evs in self.events.items()}
        for evs in d["events"].values():
            for e in evs:
                e.pop("horn_id", None)
        d["contact_order_ok"] = [None if v is None else bool(v) for v in self.contact_order_ok]
        d["thresholds_ohm"] = list(self.thresholds_ohm)
        d["schema_version"] = SCHEMA_VERSION
        return d


def _mean(values: Iterable) -> Optional[float]:
    vals = [v for v in values if v is not None and math.isfinite(v)]
    return float(np.mean(vals)) if vals else None


def build_report(cfg: ExperimentConfig, result: SimResult) -> MetricsReport:
    series = result.series
    on, off = result.thresholds
    md = cfg.sensing.min_duration
    events = {h: detect_contact_events(series.sensors[h], on, off, md, horn_id=h) for h in series.horn_ids}
    upper = events.get("upper", [])
    lower = events.get("lower", [])
    win = cfg.metrics.window
    if upper:
        rmse = metrics.pitch_rmse(series, upper, win)
        mean_rmse = _mean(rmse)
    else:
        rmse, mean_rmse = [], (metrics.run_rmse(series) if len(series) else None)
    delays = metrics.contact_delay(upper, lower, series, truth=result.contacts)
    stability = metrics.Stability(metrics.Verdict.NOT_EVALUATED, reason="not a pushing run")
    disengage = None
    if cfg.scenario == "Pushing":
        stability = pushing_verdict(cfg, result)
        if result.release_t is not None:
            disengage = metrics.release_time(result.contacts, result.release_t)
    if result.diverged_at is not None:
        stability = metrics.Stability(metrics.Verdict.UNSTABLE, result.diverged_at, reason="integration diverged")
    return MetricsReport(
        scenario=cfg.scenario, configuration=cfg.configuration, seed=cfg.seed,
        pitch_rmse_deg=rmse, mean_pitch_rmse_deg=mean_rmse,
        contact_delay_ms=delays, mean_contact_delay_ms=_mean(delays),
        collision_count=len(upper), stability=stability,
        energy_absorbed_j=metrics.energy_absorbed(series, upper, win),
        pitch_excursion_deg=metrics.pitch_excursion(series, upper, win),
        pitch_rate_signature=metrics.pitch_rate_signature(series, upper, win),
        contact_order_ok=metrics.contact_order(upper, result.contacts),
        approaches_started=result.approaches_started,
        impact_count=metrics.impact_count([ep for eps in result.contacts.values() for ep in eps],
                                          cfg.metrics.impact_merge_gap),
        sensed_impact_count=metrics.impact_count([e for evs in events.values() for e in evs],
                                                 cfg.metrics.impact_merge_gap),
        release_disengage_s=disengage, diverged_at=result.diverged_at,
        failed_horns=dict(result.failed_by_bump), events=events, thresholds_ohm=tuple(result.thresholds),
    )


def pushing_verdict(cfg: ExperimentConfig, result: SimResult) -> metrics.Stability:
    """Stability over the hold: from first sensed contact plus settling to the release command."""
    if result.first_contact_t is None or result.release_t is None:
        return metrics.Stability(metrics.Verdict.NOT_EVALUATED, reason="no sustained contact")
    span = (result.first_contact_t + cfg.metrics.settle_time, result.release_t)
    return metrics.pushing_stability(result.series, math.radians(cfg.profile.approach_pitch_deg), span,
                                     cfg.metrics.band_deg, cfg.metrics.min_contact)


def simulate_config(cfg: ExperimentConfig) -> SimResult:
    return simulate(cfg.profile.build(cfg.scenario), cfg.horns.build(cfg.configuration),
                    params=cfg.vehicle, wall=cfg.wall, sensing=cfg.sensing, dt=cfg.dt,
                    duration=cfg.run_duration(), seed=cfg.seed, x0=cfg.x0, att_gains=cfg.attitude,
                    alt_gains=cfg.altitude, noise=cfg.noise, damage=cfg.horns.damage)


def run_experiment(cfg: ExperimentConfig) -> tuple[TimeSeries, MetricsReport]:
    """Simulate one experiment and compute its metrics."""
    result = simulate_config(cfg)
    return result.series, build_report(cfg, result)


@dataclass
class Comparison:
    names: list
    seeds: list
    reports: dict  # (name, seed) -> MetricsReport
    series: dict = field(default_factory=dict)  # (name, seed) -> TimeSeries

    def bump_rmse(self, name: str) -> list:
        return [v for s in self.seeds for v in self.reports[(name, s)].pitch_rmse_deg]

    def mean_rmse(self, name: str) -> Optional[float]:
        return _mean(self.bump_rmse(name))

    def diverged(self) -> list:
        return [f"{n}/seed{s}" for (n, s), r in sorted(self.reports.items()) if r.diverged_at is not None]

    def reductions(self) -> dict:
        """Percentage RMSE reduction of each listed configuration relative to every other entry."""
        out = {}
        for i, a in enumerate(self.names):
            for j, b in enumerate(self.names):
                ma, mb = self.mean_rmse(a), self.mean_rmse(b)
                if i != j and ma is not None and mb:
                    out[f"{a}_vs_{b}"] = metrics.reduction(ma, mb)
        return out

    def to_dict(self) -> dict:
        from .export import SCHEMA_VERSION
        per = {}
        for n in self.names:
            per[n] = {"mean_pitch_rmse_deg": self.mean_rmse(n), "bump_rmse_deg": self.bump_rmse(n),
                      "n_bumps": len(self.bump_rmse(n)),
                      "mean_contact_delay_ms": _mean(d for s in self.seeds
                                                     for d in self.reports[(n, s)].contact_delay_ms)}
        return {"schema_version": SCHEMA_VERSION, "configurations": list(self.names), "seeds": list(self.seeds),
                "per_configuration": per, "reductions_pct": self.reductions(), "diverged": self.diverged()}


def _run_one(cfg: ExperimentConfig):
    return run_experiment(cfg)


def compare_configs(base: ExperimentConfig, names: Sequence[str], seeds: Sequence[int],
                    jobs: int = 1, keep_series: bool = False) -> Comparison:
    """Run every configuration over every seed; aggregation is keyed, so run order does not matter.

    A repeated name is run once and compared with itself.
    """
    names = [config_name(n) for n in names]
    if not names:
        raise ValueError("compare_configs needs at least one configuration")
    cfgs = {(n, s): replace(base, configuration=n, seed=s) for n in names for s in seeds}
    keys = sorted(cfgs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outs = dict(zip(keys, ex.map(_run_one, [cfgs[k] for k in keys])))
    else:
        outs = {k: _run_one(cfgs[k]) for k in keys}
    reports = {k: outs[k][1] for k in keys}
    series = {k: outs[k][0] for k in keys} if keep_series else {}
    return Comparison(list(names), list(seeds), reports, series)


def with_param(cfg: ExperimentConfig, dotted: str, value):
    """Copy of ``cfg`` with one field replaced; ``dotted`` is ``field`` or ``section.field``."""
    parts = dotted.split(".")
    if len(parts) == 1:
        return replace(cfg, **{parts[0]: value})
    if len(parts) == 2:
        section = getattr(cfg, parts[0])
        if parts[1] not in {f.name for f in fields(section)}:
            raise KeyError(dotted)
        return replace(cfg, **{parts[0]: replace(section, **{parts[1]: value})})
    raise KeyError(dotted)


def sweep(base: ExperimentConfig, param: str, values: Sequence, seeds: Sequence[int],
          jobs: int = 1, setter=None) -> list:
    """Run ``base`` for each value of one parameter and seed; returns one row dict per run.

    ``setter(cfg, param, value)`` applies a value (default :func:`with_param`).
    """
    setter = setter or with_param
    cfgs = [(v, s, replace(setter(base, param, v), seed=s)) for v in values for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outs = list(ex.map(_run_one, [c for _, _, c in cfgs]))
    else:
        outs = [_run_one(c) for _, _, c in cfgs]
    rows = []
    for (v, s, _), (_, rep) in zip(cfgs, outs):
        rows.append({"param": param, "value": v, "seed": s, "mean_pitch_rmse_deg": rep.mean_pitch_rmse_deg,
                     "collision_count": rep.collision_count, "mean_contact_delay_ms": rep.mean_contact_delay_ms,
                     "stability": rep.stability.verdict.value, "diverged_at": rep.diverged_at})
    return rows
