"""Fixed-wing kinematic model and closed-form maneuver propagation.

State of one vehicle: [px, py, heading, pz] with

    px_dot = v * cos(heading)
    py_dot = v * sin(heading)
    heading_dot = omega
    pz_dot = zeta

where v is airspeed, omega the turn rate and zeta the climb rate.
Headings are kept wrapped to (-pi, pi].  Constant-input trajectories have
exact solutions (circular arcs / straight lines) which are provided here
alongside a classical RK4 step for generic integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to the canonical interval (-pi, pi]."""
    w = (theta + math.pi) % TWO_PI - math.pi
    if w == -math.pi:
        w = math.pi
    return w


@dataclass(frozen=True)
class VehicleState:
    """Planar position, heading and altitude of one vehicle (SI units)."""

    px: float
    py: float
    heading: float
    pz: float = 0.0

    def __post_init__(self):
        for name in ("px", "py", "heading", "pz"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite state field {name!r}")
        object.__setattr__(self, "heading", wrap_angle(self.heading))


@dataclass(frozen=True)
class ControlInput:
    """Airspeed, turn rate and climb rate command."""

    speed: float
    turn_rate: float
    climb_rate: float = 0.0

    def __post_init__(self):
        for name in ("speed", "turn_rate", "climb_rate"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite control field {name!r}")


@dataclass(frozen=True)
class ActuatorLimits:
    """Box bounds on the control input: v in [v_min, v_max], |omega| <= omega_max,
    |zeta| <= zeta_max."""

    v_min: float
    v_max: float
    omega_max: float
    zeta_max: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.v_min <= self.v_max):
            raise ValueError("require 0 < v_min <= v_max")
        if self.omega_max <= 0.0:
            raise ValueError("require omega_max > 0")
        if self.zeta_max < 0.0:
            raise ValueError("require zeta_max >= 0")

    def contains(self, u: ControlInput, tol: float = 0.0) -> bool:
        return (
            self.v_min - tol <= u.speed <= self.v_max + tol
            and abs(u.turn_rate) <= self.omega_max + tol
            and abs(u.climb_rate) <= self.zeta_max + tol
        )


def derivative(state: VehicleState, u: ControlInput) -> tuple[float, float, float, float]:
    """Time derivative [px_dot, py_dot, heading_dot, pz_dot] of the state."""
    return (
        u.speed * math.cos(state.heading),
        u.speed * math.sin(state.heading),
        u.turn_rate,
        u.climb_rate,
    )


def step_rk4(state: VehicleState, u: ControlInput, dt: float) -> VehicleState:
    """One classical 4th-order Runge-Kutta step with the input held constant.

    Heading is re-wrapped after the step.  dt must be positive.
    """
    if not (dt > 0.0):
        raise ValueError("dt must be > 0")
    # heading evolves linearly (heading_dot = omega is state-independent),
    # so the RK4 stage headings are exact samples of the true heading.
    v, om, ze = u.speed, u.turn_rate, u.climb_rate
    th = state.heading
    th2 = th + 0.5 * dt * om
    th4 = th + dt * om

    k1x, k1y = v * math.cos(th), v * math.sin(th)
    k2x, k2y = v * math.cos(th2), v * math.sin(th2)
    k3x, k3y = k2x, k2y
    k4x, k4y = v * math.cos(th4), v * math.sin(th4)

    px = state.px + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    py = state.py + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    pz = state.pz + dt * ze
    return VehicleState(px, py, wrap_angle(th4), pz)


def propagate_turn(state: VehicleState, speed: float, turn_rate: float, tau: float) -> VehicleState:
    """Exact constant-rate-turn propagation over tau seconds.

    The trajectory is a circular arc of radius speed/turn_rate:

        p(tau) = p0 + (v/w) * [sin(th0 + w*tau) - sin(th0),
                               -cos(th0 + w*tau) + cos(th0)]

    turn_rate must be nonzero (use propagate_straight otherwise).
    """
    if turn_rate == 0.0:
        raise ValueError("turn_rate must be nonzero; use propagate_straight")
    if tau < 0.0:
        raise ValueError("tau must be >= 0")
    th0 = state.heading
    th1 = th0 + turn_rate * tau
    rr = speed / turn_rate
    return VehicleState(
        state.px + rr * (math.sin(th1) - math.sin(th0)),
        state.py + rr * (-math.cos(th1) + math.cos(th0)),
        wrap_angle(th1),
        state.pz,
    )


def propagate_straight(state: VehicleState, speed: float, climb_rate: float, tau: float) -> VehicleState:
    """Exact straight-line propagation over tau seconds (heading unchanged)."""
    if tau < 0.0:
        raise ValueError("tau must be >= 0")
    return VehicleState(
        state.px + tau * speed * math.cos(state.heading),
        state.py + tau * speed * math.sin(state.heading),
        state.heading,
        state.pz + tau * climb_rate,
    )


def clamp_input(u: ControlInput, limits: ActuatorLimits) -> ControlInput:
    """Componentwise projection of a control onto the actuator box."""
    return ControlInput(
        min(max(u.speed, limits.v_min), limits.v_max),
        min(max(u.turn_rate, -limits.omega_max), limits.omega_max),
        min(max(u.climb_rate, -limits.zeta_max), limits.zeta_max),
    )
