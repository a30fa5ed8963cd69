"""Assembly of per-pair barrier constraints and the minimal-deviation filter.

Each sensed pair contributes one linear constraint on the stacked control:

    Lg_shaped . u_pair + alpha(h_shaped) >= 0

where Lg_shaped = psi'(h) * Lg h below the shaping threshold and the zero
row on the plateau (vacuously satisfied there since alpha(psi(xi)) > 0).
Pairs outside the sensor set contribute nothing: for a sensor-compatible
barrier every control is admissible there, so no constraint needs to be
evaluated - which is the whole point, since h could not be computed without
sensing anyway.

Modes:

* centralized: one QP over all vehicles' stacked controls with one row per
  sensed pair.
* split: per-vehicle QPs.  A pair row is divided between its two vehicles:
  each enforces its own Lie-derivative share plus half the class-K offset,
  with a symmetrization term that charges the neighbor's contribution at the
  neighbor's evading-maneuver control.  Satisfying both halves implies the
  full pair row, and each half is always satisfiable by the vehicle's own
  evading control when the pair is safe.
* off: nominal controls pass through (clamped).

On QP infeasibility (or a barrier domain error) the affected vehicles fall
back to their evading-maneuver control, clamped into the actuator box; the
event is reported, never raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .barrier import (
    BarrierConfig,
    DomainError,
    LinearGain,
    PairState,
    h_value,
    lie_derivatives,
    maneuver_control_vector,
)
from .dynamics import ActuatorLimits, ControlInput, VehicleState, clamp_input
from .qp import ConstraintRow, QPInfeasibleError, QPProblem, solve_qp
from .shaping import SensorModel, ShapingParams, in_sensor_set, shape_grad, shape_h


@dataclass(frozen=True)
class FilterConfig:
    """Everything the filter needs besides the world state."""

    barrier: BarrierConfig
    sensor: SensorModel
    limits: ActuatorLimits
    gain: LinearGain = LinearGain(1.0)
    shaping: ShapingParams | None = None  # None = raw barrier (no reshaping)

    def __post_init__(self):
        # The barrier's guarantee is the evading maneuver; it must be an
        # actually flyable control, else the fallback silently stops being
        # the maneuver the barrier reasons about.
        for u in self.barrier.maneuver.controls():
            if clamp_input(ControlInput(*u), self.limits) != ControlInput(*u):
                raise ValueError(
                    f"evading maneuver control {u} lies outside the actuator box"
                )


@dataclass
class PairDiagnostics:
    """Per-pair record produced while filtering one step."""

    in_sensor: bool
    h: float = math.nan
    h_shaped: float = math.nan
    margin: float = math.nan  # pair-row margin of the filtered control


@dataclass
class FilterResult:
    controls: list[ControlInput]
    pair_data: dict[tuple[int, int], PairDiagnostics] = field(default_factory=dict)
    events: list[str] = field(default_factory=list)
    fallback: set[int] = field(default_factory=set)


def _shaped_row(pair: PairState, config: FilterConfig):
    """(h, h_shaped, lg_shaped, offset) of the pair constraint."""
    h = h_value(pair, config.barrier).value
    if config.shaping is None:
        _, lg = lie_derivatives(pair, config.barrier)
        return h, h, lg, config.gain(h)
    sh = shape_h(h, config.shaping)
    if h >= config.shaping.xi:
        lg = np.zeros(6)
    else:
        _, lg = lie_derivatives(pair, config.barrier)
        lg = shape_grad(h, lg, config.shaping)
    return h, sh, lg, config.gain(sh)


def assemble_pair_constraint(pair: PairState, config: FilterConfig) -> ConstraintRow | None:
    """Barrier constraint row over the pair's stacked control
    (v1, w1, zeta1, v2, w2, zeta2), or None when the pair is outside the
    sensor set.  Barrier domain errors propagate to the caller."""
    if not in_sensor_set(pair, config.sensor):
        return None
    _, _, lg, offset = _shaped_row(pair, config)
    return ConstraintRow(lg, offset)


def _box(limits: ActuatorLimits, n_vehicles: int):
    lo = np.tile([limits.v_min, -limits.omega_max, -limits.zeta_max], n_vehicles)
    hi = np.tile([limits.v_max, limits.omega_max, limits.zeta_max], n_vehicles)
    return lo, hi


def _pair_gamma(config: FilterConfig) -> np.ndarray:
    return maneuver_control_vector(config.barrier.maneuver)


def _fallback_control(i: int, pairs_of, config: FilterConfig) -> ControlInput:
    """Evading control for vehicle i: its role in the lowest-indexed sensed
    pair containing it (role 1 when it is the pair's first vehicle)."""
    u1, u2 = config.barrier.maneuver.controls()
    first = next(((a, b) for (a, b) in pairs_of if i in (a, b)), None)
    u = u1 if (first is not None and first[0] == i) else u2
    return clamp_input(ControlInput(*u), config.limits)


def filter_controls(
    world: list[VehicleState],
    nominal: list[ControlInput],
    config: FilterConfig,
    mode: str = "centralized",
) -> FilterResult:
    """Filter nominal controls through the barrier QP.

    Pair constraints are assembled in lexicographic (i < j) order; barrier
    values are recorded for every pair (the simulator is omniscient even
    where the vehicles are not), but only sensed pairs constrain the QP.
    """
    if mode not in ("centralized", "split", "off"):
        raise ValueError(f"unknown filter mode {mode!r}")
    n = len(world)
    if len(nominal) != n:
        raise ValueError("one nominal control per vehicle required")
    result = FilterResult(controls=[clamp_input(u, config.limits) for u in nominal])
    if n == 0:
        return result

    pairs: list[tuple[int, int]] = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rows: dict[tuple[int, int], tuple[np.ndarray, float]] = {}
    failed_pairs: list[tuple[int, int]] = []
    for i, j in pairs:
        pair = PairState(world[i], world[j])
        diag = PairDiagnostics(in_sensor=in_sensor_set(pair, config.sensor))
        result.pair_data[(i, j)] = diag
        try:
            h, sh, lg, offset = _shaped_row(pair, config)
        except DomainError as err:
            result.events.append(f"domain-error pair=({i},{j}) {err}")
            if diag.in_sensor:
                failed_pairs.append((i, j))
            continue
        diag.h, diag.h_shaped = h, sh
        if diag.in_sensor:
            rows[(i, j)] = (lg, offset)

    if mode == "off":
        return result

    sensed = sorted(rows)
    for i, j in failed_pairs:
        # cannot evaluate the constraint: treat both vehicles as conflicted
        result.fallback.update((i, j))

    if mode == "centralized":
        _filter_centralized(world, config, result, sensed, rows, n)
    else:
        _filter_split(world, config, result, sensed, rows, n)

    for i in sorted(result.fallback):
        pairs_of = [p for p in sensed if i in p] or [p for p in failed_pairs if i in p]
        result.controls[i] = _fallback_control(i, pairs_of, config)

    # record achieved pair margins under the final controls
    u_final = np.concatenate(
        [[c.speed, c.turn_rate, c.climb_rate] for c in result.controls]
    )
    for (i, j), (lg, offset) in rows.items():
        upair = np.concatenate([u_final[3 * i : 3 * i + 3], u_final[3 * j : 3 * j + 3]])
        result.pair_data[(i, j)].margin = float(lg @ upair) + offset
    return result


def _filter_centralized(world, config, result, sensed, rows, n):
    # drop plateau rows: zero coefficients with positive offset never bind
    binding = [(i, j) for (i, j) in sensed if rows[(i, j)][0].any()]
    if not binding:
        return
    u_hat = np.concatenate(
        [[c.speed, c.turn_rate, c.climb_rate] for c in result.controls]
    )
    lo, hi = _box(config.limits, n)
    stacked_rows = []
    for i, j in binding:
        lg, offset = rows[(i, j)]
        coeffs = np.zeros(3 * n)
        coeffs[3 * i : 3 * i + 3] = lg[:3]
        coeffs[3 * j : 3 * j + 3] = lg[3:]
        stacked_rows.append(ConstraintRow(coeffs, offset))
    problem = QPProblem(u_hat, stacked_rows, lo, hi)
    try:
        u_star, _ = solve_qp(problem)
    except QPInfeasibleError as err:
        result.events.append(f"qp-infeasible mode=centralized {err}")
        involved = {v for (i, j) in binding for v in (i, j)}
        result.fallback.update(involved)
        return
    for i in range(n):
        result.controls[i] = ControlInput(*u_star[3 * i : 3 * i + 3])


def _filter_split(world, config, result, sensed, rows, n):
    """Per-vehicle QPs with the pair rows divided half-and-half.

    For pair (i, j) with full row  lg_i . u_i + lg_j . u_j + off >= 0,
    vehicle i receives

        lg_i . u_i + off/2 + (lg_j . g_j - lg_i . g_i)/2 >= 0

    (g = the pair's evading controls).  Adding the two vehicle rows
    recovers exactly the full pair row, and each vehicle row evaluated at
    the vehicle's own evading control equals (lg . g + off)/2 >= 0 whenever
    the pair is safe, so the halves are individually satisfiable.
    """
    gamma = _pair_gamma(config)
    lo, hi = _box(config.limits, 1)
    for v in range(n):
        my_rows = []
        stuck = False
        for i, j in sensed:
            if v not in (i, j):
                continue
            lg, offset = rows[(i, j)]
            mine, theirs = (lg[:3], lg[3:]) if v == i else (lg[3:], lg[:3])
            g_mine, g_theirs = (gamma[:3], gamma[3:]) if v == i else (gamma[3:], gamma[:3])
            corr = 0.5 * (float(theirs @ g_theirs) - float(mine @ g_mine))
            half = 0.5 * offset + corr
            if mine.any():
                my_rows.append(ConstraintRow(mine, half))
            elif half < 0.0:
                # no actuation authority over a violated half-row
                result.events.append(f"qp-infeasible mode=split vehicle={v} zero row")
                result.fallback.add(v)
                stuck = True
                break
        if stuck or not my_rows:
            continue
        c = result.controls[v]
        problem = QPProblem(np.array([c.speed, c.turn_rate, c.climb_rate]), my_rows, lo, hi)
        try:
            u_star, _ = solve_qp(problem)
            result.controls[v] = ControlInput(*u_star)
        except QPInfeasibleError as err:
            result.events.append(f"qp-infeasible mode=split vehicle={v} {err}")
            result.fallback.add(v)
