"""Declarative scenario configuration, builtin experiments, and run_scenario.

A scenario is a JSON-compatible description of vehicles (initial state plus
nominal controller), actuator limits, the barrier (maneuver + safety
parameters), sensor range, shaping, class-K gain, and integration settings.
parse/serialize round-trip exactly.

Builtin scenarios:

* example1  - two vehicles circle toward a head-on geometry they cannot
  sense in time; the raw straight-maneuver barrier starts safe yet the run
  reaches h = -ds.  Demonstrates that a barrier which varies outside the
  sensor set cannot guarantee safety.
* example2  - two vehicles approach head-on and first sense each other
  exactly at the range where the raw turn barrier is about to hit zero, so
  the filter slams in a full-authority turn in one step.  Demonstrates the
  actuation discontinuity that shaping removes.
* sweep     - the two-vehicle crossing experiment; min distance vs sensor
  range, meaningful for R above the minimum sensing range (~318.4 with the
  default parameters).
* circle20  - twenty vehicles on a 1250-radius circle with timed arrival at
  the origin, sensor range 350, shaped barrier, centralized filter.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

from .barrier import (
    BarrierConfig,
    LinearGain,
    SafetyParams,
    StraightManeuver,
    TurnManeuver,
)
from .dynamics import ActuatorLimits, VehicleState
from .safety_filter import FilterConfig
from .shaping import SensorModel, ShapingParams, make_quadratic_psi, xi_from_range
from .sim import (
    CircleController,
    Controller,
    GoalController,
    Metrics,
    Simulation,
    SimTrace,
    compute_metrics,
)

DEFAULT_V_MIN = 15.0
DEFAULT_V_MAX = 25.0
DEFAULT_OMEGA_MAX = math.radians(13.0)
DEFAULT_ZETA_MAX = 5.0
DEFAULT_LIMITS = ActuatorLimits(DEFAULT_V_MIN, DEFAULT_V_MAX, DEFAULT_OMEGA_MAX, DEFAULT_ZETA_MAX)

# evading turn of the headline experiments: v = 0.9*v_min + 0.1*v_max,
# w = 0.9*omega_max, sigma = 1, delta = 0.01, ds = 5
DEFAULT_EVADE_SPEED = 0.9 * DEFAULT_V_MIN + 0.1 * DEFAULT_V_MAX
DEFAULT_EVADE_RATE = 0.9 * DEFAULT_OMEGA_MAX
DEFAULT_TURN = TurnManeuver(sigma=1.0, speed=DEFAULT_EVADE_SPEED, turn_rate=DEFAULT_EVADE_RATE)
DEFAULT_SAFETY = SafetyParams(delta=0.01, ds=5.0)


@dataclass(frozen=True)
class VehicleSpec:
    state: VehicleState
    controller: dict[str, Any]  # JSON-shaped controller description


@dataclass(frozen=True)
class ScenarioConfig:
    vehicles: tuple[VehicleSpec, ...]
    limits: ActuatorLimits
    barrier: BarrierConfig
    sensor_range: float
    shaping_xi: float | str | None  # numeric, "auto", or None for the raw barrier
    shaping_beta: float
    alpha_slope: float
    dt: float
    duration: float
    mode: str
    seed: int = 42

    def __post_init__(self):
        if not self.vehicles:
            raise ValueError("at least one vehicle required")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.duration <= 0:
            raise ValueError("duration must be > 0")
        if self.mode not in ("centralized", "split", "off"):
            raise ValueError(f"unknown filter mode {self.mode!r}")
        if isinstance(self.shaping_xi, str) and self.shaping_xi != "auto":
            raise ValueError(f'shaping xi must be numeric, "auto", or null, got {self.shaping_xi!r}')
        # note: "auto" feasibility (R above the minimum sensing range) is
        # checked by resolve_shaping, before any run starts

    def resolve_shaping(self) -> ShapingParams | None:
        if self.shaping_xi is None:
            return None
        if self.shaping_xi == "auto":
            if self.barrier.kind != "turn":
                raise ValueError('shaping "auto" requires the turn barrier')
            xi = xi_from_range(self.sensor_range, self.barrier.maneuver, self.barrier.safety)
        else:
            xi = float(self.shaping_xi)
            if xi <= 0:
                raise ValueError("shaping xi must be > 0")
        return make_quadratic_psi(xi, self.shaping_beta)

    def filter_config(self) -> FilterConfig:
        return FilterConfig(
            barrier=self.barrier,
            sensor=SensorModel(self.sensor_range),
            limits=self.limits,
            gain=LinearGain(self.alpha_slope),
            shaping=self.resolve_shaping(),
        )

    def controllers(self) -> list[Controller]:
        return [build_controller(v.controller) for v in self.vehicles]

    @property
    def n_steps(self) -> int:
        return round(self.duration / self.dt)


def build_controller(spec: dict[str, Any]) -> Controller:
    kind = spec.get("type")
    if kind == "circle":
        return CircleController(
            center_x=spec["center"][0],
            center_y=spec["center"][1],
            radius=spec["radius"],
            direction=spec["direction"],
            speed=spec["speed"],
        )
    if kind == "goal":
        goal = spec["goal"]
        return GoalController(
            goal_x=goal[0],
            goal_y=goal[1],
            goal_z=goal[2] if len(goal) > 2 else 0.0,
            cruise_speed=spec.get("cruise_speed", 20.0),
            arrival_time=spec.get("arrival_time"),
        )
    raise ValueError(f"unknown controller type {kind!r}")


# ---------------------------------------------------------------------------
# JSON serialization


def config_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    man = cfg.barrier.maneuver
    if isinstance(man, TurnManeuver):
        barrier = {
            "kind": "turn",
            "sigma": man.sigma,
            "speed": man.speed,
            "turn_rate": man.turn_rate,
        }
    else:
        barrier = {
            "kind": "straight",
            "v1": man.v1,
            "v2": man.v2,
            "zeta1": man.zeta1,
            "zeta2": man.zeta2,
        }
    barrier["delta"] = cfg.barrier.safety.delta
    barrier["ds"] = cfg.barrier.safety.ds
    return {
        "vehicles": [
            {
                "state": [v.state.px, v.state.py, v.state.heading, v.state.pz],
                "controller": v.controller,
            }
            for v in cfg.vehicles
        ],
        "limits": {
            "v_min": cfg.limits.v_min,
            "v_max": cfg.limits.v_max,
            "omega_max": cfg.limits.omega_max,
            "zeta_max": cfg.limits.zeta_max,
        },
        "barrier": barrier,
        "sensor_range": cfg.sensor_range,
        "shaping": None
        if cfg.shaping_xi is None
        else {"xi": cfg.shaping_xi, "beta": cfg.shaping_beta},
        "alpha": {"kind": "linear", "slope": cfg.alpha_slope},
        "dt": cfg.dt,
        "duration": cfg.duration,
        "mode": cfg.mode,
        "seed": cfg.seed,
    }


def config_from_dict(d: dict[str, Any]) -> ScenarioConfig:
    b = d["barrier"]
    safety = SafetyParams(delta=b["delta"], ds=b["ds"])
    if b["kind"] == "turn":
        man = TurnManeuver(sigma=b["sigma"], speed=b["speed"], turn_rate=b["turn_rate"])
    elif b["kind"] == "straight":
        man = StraightManeuver(
            v1=b["v1"], v2=b["v2"], zeta1=b.get("zeta1", 0.0), zeta2=b.get("zeta2", 0.0)
        )
    else:
        raise ValueError(f"unknown barrier kind {b['kind']!r}")
    lim = d["limits"]
    shaping = d.get("shaping")
    alpha = d.get("alpha", {"kind": "linear", "slope": 1.0})
    if alpha.get("kind", "linear") != "linear":
        raise ValueError(f"unknown alpha kind {alpha.get('kind')!r}")
    return ScenarioConfig(
        vehicles=tuple(
            VehicleSpec(VehicleState(*v["state"]), v["controller"]) for v in d["vehicles"]
        ),
        limits=ActuatorLimits(lim["v_min"], lim["v_max"], lim["omega_max"], lim["zeta_max"]),
        barrier=BarrierConfig(man, safety),
        sensor_range=d["sensor_range"],
        shaping_xi=None if shaping is None else shaping["xi"],
        shaping_beta=0.9 if shaping is None else shaping.get("beta", 0.9),
        alpha_slope=alpha.get("slope", 1.0),
        dt=d["dt"],
        duration=d["duration"],
        mode=d.get("mode", "centralized"),
        seed=d.get("seed", 42),
    )


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def save_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# builtin scenarios


def scenario_example1(sensor_range: float = 100.0) -> ScenarioConfig:
    """Circling vehicles meet head-on exactly at sensing range with the raw
    straight barrier: starts safe, ends with h = -ds."""
    v1, v2 = 16.0, 20.0
    omega = DEFAULT_EVADE_RATE
    r1, r2 = v1 / omega, v2 / omega
    R = sensor_range
    vehicles = (
        VehicleSpec(
            VehicleState(r1 + R / 2, r1, -math.pi / 2, 0.0),
            {"type": "circle", "center": [R / 2, r1], "radius": r1, "direction": -1, "speed": v1},
        ),
        VehicleSpec(
            VehicleState(-r2 - R / 2, r2, -math.pi / 2, 0.0),
            {"type": "circle", "center": [-R / 2, r2], "radius": r2, "direction": 1, "speed": v2},
        ),
    )
    return ScenarioConfig(
        vehicles=vehicles,
        limits=DEFAULT_LIMITS,
        barrier=BarrierConfig(StraightManeuver(v1=v1, v2=v2), DEFAULT_SAFETY),
        sensor_range=R,
        shaping_xi=None,
        shaping_beta=0.9,
        alpha_slope=1.0,
        dt=0.01,
        duration=12.0,
        mode="centralized",
    )


def example2_geometry() -> tuple[float, float]:
    """(onset separation, turn radius) of the loss-of-smoothness demo.

    The separation is chosen so the raw turn barrier is just barely positive
    when the vehicles first sense each other: d = (ds + 2r)*cos(eta) + 4*delta
    with sin(eta) = r / (r + ds/2).
    """
    r = DEFAULT_V_MIN / DEFAULT_OMEGA_MAX
    ds, delta = DEFAULT_SAFETY.ds, DEFAULT_SAFETY.delta
    eta = math.asin(r / (r + ds / 2))
    return (ds + 2 * r) * math.cos(eta) + 4 * delta, r


def scenario_example2(epsilon: float = 1.0, dt: float = 0.01) -> ScenarioConfig:
    """Head-on approach that first senses exactly at the barely-safe
    separation; the raw turn barrier then demands a full-authority turn in a
    single step.

    epsilon = 1.0 with dt = 0.01 at cruise 25 m/s puts the sensing onset
    exactly on a step boundary (the pair closes 0.5 per step).  The sensor
    range carries half a step of slack so floating-point drift cannot delay
    the onset past the intended separation.
    """
    d_onset, _ = example2_geometry()
    vehicles = (
        VehicleSpec(
            VehicleState(d_onset / 2 + epsilon, 0.0, -math.pi, 0.0),
            {"type": "goal", "goal": [-1000.0, 0.0, 0.0], "cruise_speed": DEFAULT_V_MAX},
        ),
        VehicleSpec(
            VehicleState(-d_onset / 2 - epsilon, 0.0, 0.0, 0.0),
            {"type": "goal", "goal": [1000.0, 0.0, 0.0], "cruise_speed": DEFAULT_V_MAX},
        ),
    )
    evade = TurnManeuver(sigma=1.0, speed=DEFAULT_V_MIN, turn_rate=DEFAULT_OMEGA_MAX)
    return ScenarioConfig(
        vehicles=vehicles,
        limits=DEFAULT_LIMITS,
        barrier=BarrierConfig(evade, DEFAULT_SAFETY),
        sensor_range=d_onset + DEFAULT_V_MAX * dt / 2,
        shaping_xi=None,
        shaping_beta=0.9,
        alpha_slope=1.0,
        dt=dt,
        duration=12.0,
        mode="centralized",
    )


def scenario_sweep(sensor_range: float = 350.0) -> ScenarioConfig:
    """Two-vehicle crossing with the shaped turn barrier; min distance vs R."""
    vehicles = (
        VehicleSpec(
            VehicleState(-200.0, 0.0, 0.0, 0.0),
            {"type": "goal", "goal": [200.0, 0.0, 0.0], "cruise_speed": 20.0},
        ),
        VehicleSpec(
            VehicleState(200.0, 0.0, math.pi, 0.0),
            {"type": "goal", "goal": [-200.0, 0.0, 0.0], "cruise_speed": 20.0},
        ),
    )
    return ScenarioConfig(
        vehicles=vehicles,
        limits=DEFAULT_LIMITS,
        barrier=BarrierConfig(DEFAULT_TURN, DEFAULT_SAFETY),
        sensor_range=sensor_range,
        shaping_xi="auto",
        shaping_beta=0.9,
        alpha_slope=1.0,
        dt=0.01,
        duration=30.0,
        mode="centralized",
    )


def scenario_circle20(sensor_range: float = 350.0, start_radius: float = 1250.0) -> ScenarioConfig:
    """Twenty vehicles, equally spaced on a circle, headings at the origin,
    timed to arrive simultaneously; neighbors start outside sensing range."""
    n = 20
    cruise = 20.0
    arrival = start_radius / cruise
    vehicles = []
    for k in range(n):
        ang = 2 * math.pi * k / n
        vehicles.append(
            VehicleSpec(
                VehicleState(
                    start_radius * math.cos(ang),
                    start_radius * math.sin(ang),
                    ang + math.pi,  # wrapped toward the origin by VehicleState
                    0.0,
                ),
                {"type": "goal", "goal": [0.0, 0.0, 0.0], "arrival_time": arrival},
            )
        )
    return ScenarioConfig(
        vehicles=tuple(vehicles),
        limits=DEFAULT_LIMITS,
        barrier=BarrierConfig(DEFAULT_TURN, DEFAULT_SAFETY),
        sensor_range=sensor_range,
        shaping_xi="auto",
        shaping_beta=0.9,
        alpha_slope=1.0,
        dt=0.01,
        duration=80.0,
        mode="centralized",
    )


def builtin_scenarios(sweep_range: float = 350.0) -> dict[str, ScenarioConfig]:
    return {
        "example1": scenario_example1(),
        "example2": scenario_example2(),
        "sweep": scenario_sweep(sweep_range),
        "circle20": scenario_circle20(),
    }


def run_scenario(config: ScenarioConfig) -> tuple[SimTrace, Metrics]:
    """Run duration/dt closed-loop steps and summarize.

    Invalid configurations (including infeasible "auto" shaping) raise
    ValueError here, before any stepping.
    """
    sim = Simulation(
        states=[v.state for v in config.vehicles],
        controllers=config.controllers(),
        fconfig=config.filter_config(),
        mode=config.mode,
        dt=config.dt,
    )
    for _ in range(config.n_steps):
        sim.step()
    trace = sim.finalize()
    return trace, compute_metrics(trace, config.barrier.safety.ds)
