"""Shared fixtures: the headline experiment parameter set and pair samplers."""

import math

import pytest

from wingsafe.barrier import (
    BarrierConfig,
    DomainError,
    PairState,
    SafetyParams,
    StraightManeuver,
    TurnManeuver,
    h_value,
)
from wingsafe.dynamics import ActuatorLimits, VehicleState

# Experiment parameter set used by the headline scenarios: v_min = 15 m/s,
# v_max = 25 m/s, omega_max = 13 deg/s; evading turn at v = 0.9*v_min +
# 0.1*v_max and w = 0.9*omega_max; delta = 0.01 m^2, D_s = 5 m, sigma = 1.
V_MIN = 15.0
V_MAX = 25.0
OMEGA_MAX = math.radians(13.0)
EVADE_SPEED = 0.9 * V_MIN + 0.1 * V_MAX
EVADE_RATE = 0.9 * OMEGA_MAX
DELTA = 0.01
DS = 5.0


@pytest.fixture(scope="session")
def limits():
    return ActuatorLimits(v_min=V_MIN, v_max=V_MAX, omega_max=OMEGA_MAX, zeta_max=5.0)


@pytest.fixture(scope="session")
def turn_maneuver():
    return TurnManeuver(sigma=1.0, speed=EVADE_SPEED, turn_rate=EVADE_RATE)


@pytest.fixture(scope="session")
def safety():
    return SafetyParams(delta=DELTA, ds=DS)


@pytest.fixture(scope="session")
def turn_config(turn_maneuver, safety):
    return BarrierConfig(turn_maneuver, safety)


def random_state(rng, span=200.0):
    return VehicleState(
        rng.uniform(-span, span),
        rng.uniform(-span, span),
        rng.uniform(-math.pi, math.pi),
        rng.uniform(-50, 50),
    )


def random_valid_pair(rng, config, span=200.0, require_safe=False):
    """Sample a pair state inside the barrier domain (rejection sampling)."""
    while True:
        pair = PairState(random_state(rng, span), random_state(rng, span))
        try:
            val = h_value(pair, config)
        except DomainError:
            continue
        if require_safe and val.value < 0.0:
            continue
        return pair


def random_turn_config(rng):
    man = TurnManeuver(
        sigma=rng.uniform(0.2, 1.0),
        speed=rng.uniform(2.0, 25.0),
        turn_rate=rng.uniform(0.05, 1.0),
    )
    safety = SafetyParams(delta=rng.uniform(1e-4, 0.1), ds=rng.uniform(1.0, 10.0))
    return BarrierConfig(man, safety)


def random_straight_config(rng):
    v1 = rng.uniform(2.0, 25.0)
    v2 = rng.uniform(2.0, 25.0)
    while v2 == v1:
        v2 = rng.uniform(2.0, 25.0)
    man = StraightManeuver(v1=v1, v2=v2, zeta1=rng.uniform(-2, 2), zeta2=rng.uniform(-2, 2))
    safety = SafetyParams(delta=rng.uniform(1e-4, 0.1), ds=rng.uniform(1.0, 10.0))
    return BarrierConfig(man, safety)
