"""Sensor model, barrier shaping, and sensor-compatibility verification.

With an omnidirectional sensor of range R, a pair state is observable iff
its squared planar distance is at most R^2.  A barrier h built without
sensing in mind generally varies outside that set, so its admissible-control
constraint cannot be evaluated there.  The fix is to reshape h with a
quadratic interpolant psi so the shaped barrier

    h_shaped = h           for h <= beta*xi
             = psi(h)      for beta*xi < h < xi
             = psi(xi)     for h >= xi

is a positive constant wherever h >= xi.  If every unobservable state has
h > xi (for the synchronized-turn barrier this holds whenever
R > 2*r1 + 2*r2 + sqrt(ds^2 + 4*delta)), the shaped barrier needs no sensing
outside range: the constraint is vacuous there.

The interpolant must satisfy psi(beta*xi) = beta*xi, psi'(beta*xi) = 1 and
psi'(xi) = 0 so the shaped barrier stays continuously differentiable; the
quadratic

    psi(e) = c1*e^2 + c2*e + c3,   c1 = -1/(2*xi*(1-beta)),
    c2 = -2*xi*c1,  c3 = beta*xi - c1*(beta*xi)^2 - c2*beta*xi

does exactly that, with psi' > 0 and psi'' < 0 on (beta*xi, xi).

alpha2(h) = psi'(h)^-1 * alpha(psi(h)) is the effective class-K gain under
which the raw barrier reproduces the shaped constraint's sign; it dominates
alpha pointwise, which is why shaping only enlarges the admissible control
set.  It is exposed for diagnostics; the filter always constrains with the
shaped barrier directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .barrier import (
    BarrierConfig,
    LinearGain,
    PairState,
    SafetyParams,
    TurnManeuver,
    h_batch,
    squared_planar_distance,
)
from .dynamics import VehicleState


@dataclass(frozen=True)
class SensorModel:
    """Omnidirectional sensor: a pair is observable iff their planar distance
    is at most range_m (boundary included)."""

    range_m: float

    def __post_init__(self):
        if self.range_m <= 0.0:
            raise ValueError("require range_m > 0")


def in_sensor_set(pair: PairState, sensor: SensorModel) -> bool:
    return squared_planar_distance(pair) <= sensor.range_m * sensor.range_m


@dataclass(frozen=True)
class ShapingParams:
    """Quadratic interpolant coefficients for given (xi, beta).

    Use make_quadratic_psi to construct; the stored coefficients are derived
    from xi and beta and are not independent degrees of freedom.
    """

    xi: float
    beta: float
    c1: float
    c2: float
    c3: float


def make_quadratic_psi(xi: float, beta: float) -> ShapingParams:
    """Quadratic interpolant satisfying the blending constraints at beta*xi
    and xi (see module docstring)."""
    if xi <= 0.0:
        raise ValueError("require xi > 0")
    if not (0.0 < beta < 1.0):
        raise ValueError("require 0 < beta < 1")
    c1 = -1.0 / (2.0 * xi * (1.0 - beta))
    c2 = -2.0 * xi * c1
    bx = beta * xi
    c3 = bx - c1 * bx * bx - c2 * bx
    return ShapingParams(xi=xi, beta=beta, c1=c1, c2=c2, c3=c3)


def psi_eval(eta: float, params: ShapingParams) -> float:
    """Interpolant value: identity up to beta*xi, quadratic beyond."""
    if eta <= params.beta * params.xi:
        return eta
    return (params.c1 * eta + params.c2) * eta + params.c3


def psi_deriv(eta: float, params: ShapingParams) -> float:
    """Interpolant slope: 1 up to beta*xi, 2*c1*eta + c2 beyond."""
    if eta <= params.beta * params.xi:
        return 1.0
    return 2.0 * params.c1 * eta + params.c2


def shape_h(h: float, params: ShapingParams) -> float:
    """Shaped barrier value: h, psi(h), or the plateau psi(xi)."""
    if h >= params.xi:
        return psi_eval(params.xi, params)
    return psi_eval(h, params)


def shape_h_batch(h: np.ndarray, params: ShapingParams) -> np.ndarray:
    """Vectorized shape_h (NaN passes through)."""
    bx = params.beta * params.xi
    e = np.minimum(h, params.xi)
    quad = (params.c1 * e + params.c2) * e + params.c3
    return np.where(e <= bx, e, quad)


def shape_grad(h: float, grad: np.ndarray, params: ShapingParams) -> np.ndarray:
    """Chain rule through the shaping: psi'(h) * grad below xi, zero on the
    plateau."""
    if h >= params.xi:
        return np.zeros_like(grad)
    return psi_deriv(h, params) * grad


def min_sensing_range(m: TurnManeuver, params: SafetyParams) -> float:
    """Smallest sensor range for which the shaped turn barrier can be made
    sensor compatible:  R_min = 2*r1 + 2*r2 + sqrt(ds^2 + 4*delta).

    Outside range the synchronized turn can shrink the planar distance by at
    most 2*r1 + 2*r2, so requiring
    sqrt((R - 2*r1 - 2*r2)^2 - 4*delta) - ds > 0 bounds the worst future
    safety value from below.
    """
    return 2.0 * m.r1 + 2.0 * m.r2 + math.sqrt(params.ds**2 + 4.0 * params.delta)


def xi_from_range(R: float, m: TurnManeuver, params: SafetyParams) -> float:
    """Largest provably valid shaping threshold for sensor range R:
    xi = sqrt((R - 2*r1 - 2*r2)^2 - 4*delta) - ds.

    Raises for R at or below min_sensing_range (no positive xi exists).
    """
    rmin = min_sensing_range(m, params)
    if R <= rmin:
        raise ValueError(f"no positive xi exists: R = {R} <= R_min = {rmin}")
    reach = R - 2.0 * m.r1 - 2.0 * m.r2
    return math.sqrt(reach * reach - 4.0 * params.delta) - params.ds


def alpha2(h: float, alpha: LinearGain, params: ShapingParams) -> float:
    """Effective gain (psi'(h))^-1 * alpha(psi(h)); defined for h < xi only."""
    if h >= params.xi:
        raise ValueError("alpha2 undefined for h >= xi (psi' = 0)")
    return alpha(psi_eval(h, params)) / psi_deriv(h, params)


@dataclass(frozen=True)
class CompatibilityReport:
    """Outcome of a sensor-compatibility check.

    ok requires both the sampled search to find no witness and, for the turn
    barrier, the analytic range condition R > R_min with xi <= xi(R).  A
    witness is a pair state outside the sensor set whose barrier value is not
    above xi (or is undefined), so the shaped barrier would not be constant
    there.
    """

    ok: bool
    kind: str
    samples: int
    analytic_ok: bool
    witness: PairState | None = None
    witness_h: float | None = None
    min_h_outside: float = math.inf


def _heading_grid_min(config: BarrierConfig, d: float, th1s, th2s):
    """Minimum of h over a heading-pair grid at separation d (vehicle 1 at the
    origin, vehicle 2 on the +x axis).  Returns (min_h, th1, th2); min_h is
    -inf when h is undefined somewhere on the grid."""
    g1, g2 = np.meshgrid(th1s, th2s, indexing="ij")
    g1, g2 = g1.ravel(), g2.ravel()
    zeros = np.zeros_like(g1)
    hs = h_batch((zeros, zeros, g1, np.full_like(g1, d), zeros, g2), config)
    bad = ~np.isfinite(hs)
    if np.any(bad):
        i = int(np.argmax(bad))
        return -math.inf, float(g1[i]), float(g2[i])
    i = int(np.argmin(hs))
    return float(hs[i]), float(g1[i]), float(g2[i])


def _worst_case_probe(config: BarrierConfig, R: float) -> tuple[float, PairState]:
    """Adversarial search for the lowest h just outside sensing range.

    Coarse heading-pair grid followed by one local refinement, at several
    separations approaching R from above.  Covers the head-on straight-line
    collision course as well as the near-tangent synchronized-turn worst
    case without kind-specific geometry.
    """
    best = (math.inf, 0.0, 0.0, R)
    coarse = np.linspace(-math.pi, math.pi, 90, endpoint=False)
    step = coarse[1] - coarse[0]
    for eps in (1e-9, 1e-3, 0.1):
        d = R * (1.0 + eps)
        h0, t1, t2 = _heading_grid_min(config, d, coarse, coarse)
        if math.isfinite(h0):
            fine1 = np.linspace(t1 - 1.5 * step, t1 + 1.5 * step, 60)
            fine2 = np.linspace(t2 - 1.5 * step, t2 + 1.5 * step, 60)
            hf, tf1, tf2 = _heading_grid_min(config, d, fine1, fine2)
            if hf < h0:
                h0, t1, t2 = hf, tf1, tf2
        if h0 < best[0]:
            best = (h0, t1, t2, d)
    h0, t1, t2, d = best
    pair = PairState(VehicleState(0.0, 0.0, t1, 0.0), VehicleState(d, 0.0, t2, 0.0))
    return h0, pair


def check_sensor_compatible(
    config: BarrierConfig,
    shaping: ShapingParams,
    sensor: SensorModel,
    sample_count: int = 100_000,
    seed: int = 42,
) -> CompatibilityReport:
    """Sampled verification that the shaped barrier is constant outside the
    sensor set: every sampled pair outside range must have h > xi.

    Random pairs are drawn just outside range (distances in (R, 2R]), where
    violations live if they exist, and a handful of adversarial worst-case
    geometries is always probed.  For the turn barrier the analytic bound
    R > R_min with xi <= xi(R) is also evaluated; the straight barrier can
    never pass it (a head-on pair outside range has h = -ds < 0 <= xi).
    """
    if sample_count < 1:
        raise ValueError("require sample_count >= 1")
    R = sensor.range_m
    kind = config.kind

    if kind == "turn":
        man = config.maneuver
        try:
            xi_max = xi_from_range(R, man, config.safety)
            analytic_ok = shaping.xi <= xi_max
        except ValueError:
            analytic_ok = False
    else:
        analytic_ok = False

    probe_h, probe_pair = _worst_case_probe(config, R)
    min_h = probe_h
    if not (probe_h > shaping.xi):  # also triggers on -inf (h undefined)
        return CompatibilityReport(False, kind, 0, analytic_ok, probe_pair, probe_h, min_h)

    rng = np.random.default_rng(seed)
    checked = 0
    batch = 20_000
    while checked < sample_count:
        n = min(batch, sample_count - checked)
        d = rng.uniform(R, 2.0 * R, n)
        ang = rng.uniform(-math.pi, math.pi, n)
        th1 = rng.uniform(-math.pi, math.pi, n)
        th2 = rng.uniform(-math.pi, math.pi, n)
        zeros = np.zeros(n)
        hs = h_batch((zeros, zeros, th1, d * np.cos(ang), d * np.sin(ang), th2), config)
        bad = ~(hs > shaping.xi)  # catches NaN (undefined h) as well
        if np.any(bad):
            i = int(np.argmax(bad))
            pair = PairState(
                VehicleState(0.0, 0.0, float(th1[i]), 0.0),
                VehicleState(
                    float(d[i] * math.cos(ang[i])),
                    float(d[i] * math.sin(ang[i])),
                    float(th2[i]),
                    0.0,
                ),
            )
            hv = float(hs[i]) if math.isfinite(hs[i]) else -math.inf
            finite = hs[np.isfinite(hs)]
            if finite.size:
                min_h = min(min_h, float(np.min(finite)))
            return CompatibilityReport(
                False, kind, checked + n, analytic_ok, pair, hv, min_h
            )
        min_h = min(min_h, float(np.min(hs)))
        checked += n

    return CompatibilityReport(analytic_ok, kind, checked, analytic_ok, None, None, min_h)
