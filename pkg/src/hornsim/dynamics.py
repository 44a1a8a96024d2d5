"""Planar (x, z, pitch) rigid-body dynamics of a quadrotor, integrated with RK4.

Sign convention: ``theta > 0`` leans the vehicle toward the wall (+x). The body
frame has +x pointing forward (toward the wall) and +z pointing up along the
thrust axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Union


class StateValidityError(ValueError):
    """Raised when a state or input carries non-finite values."""


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class VehicleState:
    t: float = 0.0
    x: float = 0.0
    z: float = 0.0
    theta: float = 0.0
    vx: float = 0.0
    vz: float = 0.0
    q: float = 0.0

    def as_tuple(self) -> tuple:
        return (self.x, self.z, self.theta, self.vx, self.vz, self.q)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.t,) + self.as_tuple())

    def check(self) -> "VehicleState":
        if not self.is_finite():
            raise StateValidityError(f"non-finite vehicle state: {self}")
        return self


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 0.7
    inertia_yy: float = 0.005
    gravity: float = 9.81
    thrust_max: float = 14.0
    pitch_torque_max: float = 0.5
    drag: float = 0.0  # N*s/m, linear translational (rotor) drag

    def __post_init__(self):
        if not (self.mass > 0 and self.inertia_yy > 0 and self.gravity > 0):
            raise ValueError("mass, inertia_yy and gravity must be positive")
        if self.thrust_max <= self.mass * self.gravity:
            raise ValueError("thrust_max must exceed the hover thrust m*g")
        if self.pitch_torque_max <= 0:
            raise ValueError("pitch_torque_max must be positive")
        if self.drag < 0:
            raise ValueError("drag must be non-negative")

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.gravity


@dataclass(frozen=True)
class Wrench:
    fx: float = 0.0
    fz: float = 0.0
    my: float = 0.0

    def __add__(self, other: "Wrench") -> "Wrench":
        return Wrench(self.fx + other.fx, self.fz + other.fz, self.my + other.my)


ZERO_WRENCH = Wrench()


@dataclass(frozen=True)
class Wall:
    x_wall: float = 0.45
    mu: float = 0.3

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("friction coefficient must be non-negative")


ExternalInput = Union[Wrench, Callable[[VehicleState], Wrench]]


def body_to_world(point_body: Sequence[float], state: VehicleState) -> tuple[float, float]:
    px, pz = point_body
    c, s = math.cos(state.theta), math.sin(state.theta)
    return (state.x + px * c + pz * s, state.z - px * s + pz * c)


def world_to_body(point_world: Sequence[float], state: VehicleState) -> tuple[float, float]:
    dx, dz = point_world[0] - state.x, point_world[1] - state.z
    c, s = math.cos(state.theta), math.sin(state.theta)
    return (dx * c - dz * s, dx * s + dz * c)


def point_velocity(point_body: Sequence[float], state: VehicleState) -> tuple[float, float]:
    """World-frame velocity of a body-fixed point."""
    px, pz = point_body
    c, s = math.cos(state.theta), math.sin(state.theta)
    # d/dtheta of the rotated lever, times q
    return (state.vx + state.q * (-px * s + pz * c), state.vz + state.q * (-px * c - pz * s))


def generalized_moment(lever_world: Sequence[float], fx: float, fz: float) -> float:
    """Pitch moment of a world force applied at ``lever_world`` from the centre of mass.

    This is the generalized force conjugate to ``theta`` under ``body_to_world``,
    so a force that pushes an upper point away from the wall lowers theta.
    """
    rx, rz = lever_world
    return rz * fx - rx * fz


def accelerations(y: Sequence[float], params: VehicleParams, thrust: float,
                  pitch_torque: float, w: Wrench) -> tuple[float, float, float]:
    theta = y[2]
    ax = (thrust * math.sin(theta) + w.fx - params.drag * y[3]) / params.mass
    az = (thrust * math.cos(theta) + w.fz - params.drag * y[4]) / params.mass - params.gravity
    aq = (pitch_torque + w.my) / params.inertia_yy
    return ax, az, aq


def rk4(f: Callable[[float, tuple], tuple], t: float, y: tuple, dt: float) -> tuple:
    """One classical Runge-Kutta step on a plain tuple state."""
    k1 = f(t, y)
    y2 = tuple(a + 0.5 * dt * b for a, b in zip(y, k1))
    k2 = f(t + 0.5 * dt, y2)
    y3 = tuple(a + 0.5 * dt * b for a, b in zip(y, k2))
    k3 = f(t + 0.5 * dt, y3)
    y4 = tuple(a + dt * b for a, b in zip(y, k3))
    k4 = f(t + dt, y4)
    return tuple(a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                 for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))


def state_from_tuple(t: float, y: Sequence[float]) -> VehicleState:
    return VehicleState(t, y[0], y[1], y[2], y[3], y[4], y[5])


def step(state: VehicleState, params: VehicleParams, thrust: float, pitch_torque: float,
         external: ExternalInput = ZERO_WRENCH, dt: float = 1e-3) -> VehicleState:
    """Advance ``state`` by one RK4 step.

    ``external`` is either a constant Wrench held over the step or a callable
    evaluated at every RK4 stage (needed for stiff state-dependent contact).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not all(math.isfinite(v) for v in (thrust, pitch_torque, dt)):
        raise StateValidityError("non-finite control input")
    state.check()
    if thrust < 0 or thrust > params.thrust_max + 1e-12:
        raise ValueError(f"thrust {thrust} outside [0, {params.thrust_max}]")
    if abs(pitch_torque) > params.pitch_torque_max + 1e-12:
        raise ValueError(f"|pitch_torque| {pitch_torque} exceeds {params.pitch_torque_max}")

    if callable(external):
        wrench_at = external
    else:
        if not all(math.isfinite(v) for v in (external.fx, external.fz, external.my)):
            raise StateValidityError("non-finite external wrench")
        wrench_at = lambda s: external  # noqa: E731

    def f(t, y):
        w = wrench_at(state_from_tuple(t, y))
        ax, az, aq = accelerations(y, params, thrust, pitch_torque, w)
        return (y[3], y[4], y[5], ax, az, aq)

    y = rk4(f, state.t, state.as_tuple(), dt)
    out = state_from_tuple(state.t + dt, y)
    if not out.is_finite():
        raise StateValidityError(f"integration diverged at t={out.t:.6f}")
    return replace(out, theta=wrap_angle(out.theta))


def total_energy(state: VehicleState, params: VehicleParams) -> float:
    return (0.5 * params.mass * (state.vx ** 2 + state.vz ** 2)
            + 0.5 * params.inertia_yy * state.q ** 2
            + params.mass * params.gravity * state.z)
