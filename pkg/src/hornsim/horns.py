"""Elastic horns as point-tip spring-dampers pressing on a vertical wall.

Each planar horn stands for a left/right pair of physical horns, so its
stiffness, damping and failure energy are twice the per-horn preset.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .dynamics import VehicleState, Wall, Wrench, generalized_moment

FRICTION_V_REG = 0.01  # m/s
DEFAULT_MAX_DEFLECTION = 0.03  # m
UPPER_TIP = (0.08, 0.09)
LOWER_TIP = (0.07, -0.09)


class Row(str, enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


class Material(str, enum.Enum):
    SOFT = "soft"  # TPU
    HARD = "hard"  # PLA


@dataclass(frozen=True)
class MaterialPreset:
    k: float
    c: float
    failure_energy: float
    max_deflection: float = DEFAULT_MAX_DEFLECTION


_PRESETS = {
    Material.SOFT: MaterialPreset(k=300.0, c=6.0, failure_energy=math.inf),
    Material.HARD: MaterialPreset(k=500.0, c=3.0, failure_energy=3.0),
}


def material_preset(material: Material) -> MaterialPreset:
    """Per-physical-horn constants for a material."""
    return _PRESETS[Material(material)]


@dataclass(frozen=True)
class Horn:
    id: str
    row: Row
    attach_body: tuple
    k: float
    c: float
    max_deflection: float = DEFAULT_MAX_DEFLECTION
    material: Material = Material.SOFT
    failure_energy: float = math.inf
    absorbed_energy: float = 0.0
    failed: bool = False

    def __post_init__(self):
        if not (self.k > 0 and self.c >= 0 and self.max_deflection > 0):
            raise ValueError(f"horn {self.id}: need k > 0, c >= 0, max_deflection > 0")
        pz = self.attach_body[1]
        if (self.row is Row.UPPER and pz <= 0) or (self.row is Row.LOWER and pz >= 0):
            raise ValueError(f"horn {self.id}: tip height {pz} inconsistent with row {self.row.value}")


class ConfigName(str, enum.Enum):
    FULL_SOFT = "FullSoft"
    HALF_SOFT = "HalfSoft"
    FULL_HARD = "FullHard"


@dataclass(frozen=True)
class HornConfiguration:
    name: ConfigName
    horns: tuple

    def __post_init__(self):
        rows = sorted(h.row.value for h in self.horns)
        expected = ["upper"] if self.name is ConfigName.HALF_SOFT else ["lower", "upper"]
        if rows != expected:
            raise ValueError(f"{self.name.value} needs rows {expected}, got {rows}")

    def horn(self, horn_id: str) -> Horn:
        for h in self.horns:
            if h.id == horn_id:
                return h
        raise KeyError(horn_id)

    def with_horns(self, horns: Sequence[Horn]) -> "HornConfiguration":
        return replace(self, horns=tuple(horns))

    @property
    def horn_ids(self) -> list:
        return [h.id for h in self.horns]


def make_horn(horn_id: str, row: Row, material: Material, tip: Optional[tuple] = None,
              k: Optional[float] = None, c: Optional[float] = None,
              max_deflection: Optional[float] = None, failure_energy: Optional[float] = None,
              pair: int = 2) -> Horn:
    """One planar horn standing for ``pair`` physical horns (constants given per physical horn)."""
    p = material_preset(material)
    if tip is None:
        tip = UPPER_TIP if row is Row.UPPER else LOWER_TIP
    return Horn(
        id=horn_id, row=row, attach_body=tuple(tip),
        k=pair * (p.k if k is None else k),
        c=pair * (p.c if c is None else c),
        max_deflection=p.max_deflection if max_deflection is None else max_deflection,
        material=Material(material),
        failure_energy=pair * (p.failure_energy if failure_energy is None else failure_energy),
    )


def make_configuration(name, tip_forward: float = UPPER_TIP[0], tip_height: float = UPPER_TIP[1],
                       material: Optional[Material] = None, k: Optional[float] = None,
                       c: Optional[float] = None, max_deflection: Optional[float] = None,
                       failure_energy: Optional[float] = None,
                       lower_forward: Optional[float] = LOWER_TIP[0]) -> HornConfiguration:
    """Build one of the three named morphologies.

    The lower tip mirrors the upper one in height and sits ``lower_forward`` ahead of the
    centre of mass (``None``: same as the upper tip). The default lower horn is shorter,
    so the upper row reaches the wall first. Unset constants come from the
    material preset; they are per physical horn.
    """
    name = ConfigName(name)
    if material is None:
        material = Material.HARD if name is ConfigName.FULL_HARD else Material.SOFT
    kw = dict(k=k, c=c, max_deflection=max_deflection, failure_energy=failure_energy)
    horns = [make_horn("upper", Row.UPPER, material, tip=(tip_forward, tip_height), **kw)]
    if name is not ConfigName.HALF_SOFT:
        horns.append(make_horn("lower", Row.LOWER, material, tip=(tip_forward if lower_forward is None else lower_forward, -tip_height), **kw))
    return HornConfiguration(name, tuple(horns))


@dataclass(frozen=True)
class HornContact:
    horn_id: str
    deflection: float = 0.0
    deflection_rate: float = 0.0
    normal_force: float = 0.0
    friction_force: float = 0.0
    tip_vz: float = 0.0
    in_contact: bool = False
    saturated: bool = False


@dataclass(frozen=True)
class ContactState:
    horns: tuple

    def __getitem__(self, horn_id: str) -> HornContact:
        for hc in self.horns:
            if hc.horn_id == horn_id:
                return hc
        raise KeyError(horn_id)

    @property
    def any_contact(self) -> bool:
        return any(hc.in_contact for hc in self.horns)


def _tip_kinematics(tip, x, z, theta, vx, vz, q):
    px, pz = tip
    c, s = math.cos(theta), math.sin(theta)
    rx = px * c + pz * s
    rz = -px * s + pz * c
    # tip velocity = v + q * d(r)/dtheta, with d(rx)/dtheta = rz and d(rz)/dtheta = -rx
    return rx, rz, x + rx, vx + q * rz, vz - q * rx


def compute_deflection(horn: Horn, state: VehicleState, wall: Wall) -> tuple[float, float]:
    """Penetration of the tip past the wall plane and its rate.

    The deflection is not clipped at ``max_deflection``; past it the spring keeps
    acting linearly and the contact is flagged as saturated instead.
    """
    _, _, tip_x, tip_vx, _ = _tip_kinematics(horn.attach_body, state.x, state.z,
                                             state.theta, state.vx, state.vz, state.q)
    d = tip_x - wall.x_wall
    if d <= 0.0:
        return 0.0, 0.0
    return d, tip_vx


def horn_forces(horn: Horn, y: Sequence[float], wall: Wall):
    """Fast path on a raw (x, z, theta, vx, vz, q) tuple.

    Returns (fx, fz, my, delta, delta_rate, f_n, f_t, tip_vz).
    """
    rx, rz, tip_x, tip_vx, tip_vz = _tip_kinematics(horn.attach_body, *y[:6])
    d = tip_x - wall.x_wall
    if horn.failed or d <= 0.0:
        return 0.0, 0.0, 0.0, max(d, 0.0), (tip_vx if d > 0 else 0.0), 0.0, 0.0, tip_vz
    f_n = horn.k * d + horn.c * tip_vx
    if f_n < 0.0:
        f_n = 0.0
    f_t = -wall.mu * f_n * math.tanh(tip_vz / FRICTION_V_REG) if wall.mu > 0 else 0.0
    fx, fz = -f_n, f_t
    return fx, fz, generalized_moment((rx, rz), fx, fz), d, tip_vx, f_n, f_t, tip_vz


def contact_wrench(config: HornConfiguration, state: VehicleState, wall: Wall) -> tuple[Wrench, ContactState]:
    y = state.as_tuple()
    fx = fz = my = 0.0
    out = []
    for horn in config.horns:
        hfx, hfz, hmy, d, dd, f_n, f_t, tip_vz = horn_forces(horn, y, wall)
        fx += hfx
        fz += hfz
        my += hmy
        out.append(HornContact(horn.id, d, dd, f_n, f_t, tip_vz, d > 0.0,
                               d >= horn.max_deflection))
    return Wrench(fx, fz, my), ContactState(tuple(out))


def wrench_fn(config: HornConfiguration, wall: Wall):
    """State -> Wrench callable suitable for ``dynamics.step``."""
    def f(state: VehicleState) -> Wrench:
        return contact_wrench(config, state, wall)[0]
    return f


def spring_energy(config: HornConfiguration, state: VehicleState, wall: Wall) -> float:
    e = 0.0
    for horn in config.horns:
        if horn.failed:
            continue
        d, _ = compute_deflection(horn, state, wall)
        e += 0.5 * horn.k * d * d
    return e


def update_damage(horn: Horn, f_n: float, deflection_rate: float, dt: float) -> Horn:
    """Accumulate compression work; Hard horns fail once it exceeds their budget."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    work = f_n * deflection_rate
    if f_n <= 0.0 or work <= 0.0:
        return horn
    absorbed = horn.absorbed_energy + work * dt
    failed = horn.failed or (horn.material is Material.HARD and absorbed > horn.failure_energy)
    return replace(horn, absorbed_energy=absorbed, failed=failed)
