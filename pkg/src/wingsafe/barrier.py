"""Pairwise safety functions, evading maneuvers, and worst-case barriers.

A barrier value for a vehicle pair is the worst (lowest) future value of a
safety function rho along the trajectory generated by a fixed evading
maneuver:

    h(x) = inf_{tau >= 0} rho(x_hat(tau))

Two maneuver/safety-function families are supported:

* straight: both vehicles hold heading at fixed speeds (v1 != v2) and the
  safety function is  rho = sqrt(d12) - D_s  with d12 the squared planar
  distance.  The infimum is the classical closest-point-of-approach (CPA)
  of two constant-velocity points.

* turn: both vehicles turn at the same rate w > 0 with speeds sigma*v and v
  (circle radii r1 = sigma*v/w, r2 = v/w) and the safety function carries a
  heading-dependent regularization:
  rho = sqrt(d12 - 2*delta + delta*sin(th1) - delta*cos(th1)) - D_s.
  Because both headings advance at the common rate w, the expression under
  the square root reduces to  A + M*cos(w*tau - phi)  (two same-frequency
  sinusoids combined by phasor addition), so the infimum is sqrt(A - M) - D_s.

Gradients are obtained with the envelope theorem: differentiate
rho(x_hat(tau*)) through the closed-form trajectory map holding the
minimizing time tau* fixed.  A brute-force oracle (dense time grid plus
golden-section refinement) provides an independent check of both closed
forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Union

import numpy as np

from .dynamics import VehicleState, propagate_straight, propagate_turn

BarrierKind = Literal["turn", "straight"]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DomainError(ValueError):
    """Raised when a pair state lies outside the barrier's domain
    (the radicand of the safety function is negative)."""


@dataclass(frozen=True)
class PairState:
    """States of the two vehicles of one pair; the (a, b) order fixes which
    vehicle plays role 1 / role 2 of the maneuver for the whole run."""

    a: VehicleState
    b: VehicleState


@dataclass(frozen=True)
class TurnManeuver:
    """Synchronized constant-rate turn: vehicle 1 flies at sigma*v, vehicle 2
    at v, both turning at rate turn_rate > 0 (climb rates zero)."""

    sigma: float
    speed: float
    turn_rate: float

    def __post_init__(self):
        if not (0.0 < self.sigma <= 1.0):
            raise ValueError("require 0 < sigma <= 1")
        if self.turn_rate <= 0.0:
            raise ValueError("require turn_rate > 0")
        if self.speed <= 0.0:
            raise ValueError("require speed > 0")

    @property
    def r1(self) -> float:
        return self.sigma * self.speed / self.turn_rate

    @property
    def r2(self) -> float:
        return self.speed / self.turn_rate

    def controls(self) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
        """Per-vehicle (speed, turn_rate, climb_rate) of the maneuver."""
        return (
            (self.sigma * self.speed, self.turn_rate, 0.0),
            (self.speed, self.turn_rate, 0.0),
        )


@dataclass(frozen=True)
class StraightManeuver:
    """Both vehicles hold heading; speeds must differ so the relative
    velocity can never vanish."""

    v1: float
    v2: float
    zeta1: float = 0.0
    zeta2: float = 0.0

    def __post_init__(self):
        if self.v1 == self.v2:
            raise ValueError("require v1 != v2")

    def controls(self) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
        return ((self.v1, 0.0, self.zeta1), (self.v2, 0.0, self.zeta2))


Maneuver = Union[TurnManeuver, StraightManeuver]


@dataclass(frozen=True)
class SafetyParams:
    """delta: regularization scalar (m^2) of the turn safety function;
    ds: minimum allowed inter-vehicle distance (m)."""

    delta: float
    ds: float

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError("require delta > 0")
        if self.ds <= 0.0:
            raise ValueError("require ds > 0")


@dataclass(frozen=True)
class LinearGain:
    """Linear extended class-K gain alpha(h) = slope * h.

    Linear gains have a non-increasing derivative everywhere, which is what
    the permissiveness comparison of the shaped barrier requires.
    """

    slope: float = 1.0

    def __post_init__(self):
        if self.slope <= 0.0:
            raise ValueError("require slope > 0")

    def __call__(self, value: float) -> float:
        return self.slope * value


@dataclass(frozen=True)
class BarrierConfig:
    """Maneuver plus safety parameters; the barrier kind is implied by the
    maneuver type."""

    maneuver: Maneuver
    safety: SafetyParams

    @property
    def kind(self) -> BarrierKind:
        return "turn" if isinstance(self.maneuver, TurnManeuver) else "straight"


class BarrierValue(NamedTuple):
    """Barrier value and the smallest nonnegative minimizing time."""

    value: float
    minimizer_tau: float


class BarrierGradient(NamedTuple):
    """Gradient over [p1x, p1y, th1, p1z, p2x, p2y, th2, p2z]; at_kink is set
    when the straight-kind CPA sits exactly on the tau = 0 boundary
    (p0 . dv == 0), where the returned gradient is the one-sided tau = 0 value."""

    grad: np.ndarray
    at_kink: bool


def squared_planar_distance(pair: PairState) -> float:
    """Squared planar distance between the two vehicles (altitude ignored)."""
    dx = pair.a.px - pair.b.px
    dy = pair.a.py - pair.b.py
    return dx * dx + dy * dy


def rho_straight(pair: PairState, ds: float) -> float:
    """sqrt(d12) - ds."""
    return math.sqrt(squared_planar_distance(pair)) - ds


def rho_turn(pair: PairState, params: SafetyParams) -> float:
    """sqrt(d12 - 2*delta + delta*sin(th1) - delta*cos(th1)) - ds.

    Raises DomainError when the radicand is negative (state outside the
    barrier domain).
    """
    d = squared_planar_distance(pair)
    th1 = pair.a.heading
    rad = d - 2.0 * params.delta + params.delta * math.sin(th1) - params.delta * math.cos(th1)
    if rad < 0.0:
        raise DomainError(f"negative radicand {rad} in turn safety function")
    return math.sqrt(rad) - params.ds


def _straight_relative(pair: PairState, m: StraightManeuver):
    """Relative planar position p0 and relative planar velocity dv under the
    straight maneuver."""
    p0x = pair.a.px - pair.b.px
    p0y = pair.a.py - pair.b.py
    dvx = m.v1 * math.cos(pair.a.heading) - m.v2 * math.cos(pair.b.heading)
    dvy = m.v1 * math.sin(pair.a.heading) - m.v2 * math.sin(pair.b.heading)
    return p0x, p0y, dvx, dvy


def h_straight(pair: PairState, m: StraightManeuver, ds: float) -> BarrierValue:
    """Closed-form straight-maneuver barrier via closest point of approach.

    tau* = max(0, -p0 . dv / |dv|^2), value = |p0 + tau* dv| - ds.
    """
    p0x, p0y, dvx, dvy = _straight_relative(pair, m)
    dv2 = dvx * dvx + dvy * dvy
    if dv2 == 0.0:
        raise ValueError("relative velocity vanishes (maneuver precondition violated)")
    tau = max(0.0, -(p0x * dvx + p0y * dvy) / dv2)
    return BarrierValue(math.hypot(p0x + tau * dvx, p0y + tau * dvy) - ds, tau)


def _turn_phasor(pair: PairState, m: TurnManeuver, params: SafetyParams):
    """Coefficients (A, P, Q) with  radicand(tau) = A + P*cos(w tau) + Q*sin(w tau).

    Writing each turn circle's center as c_i = p_i + r_i*(-sin th_i, cos th_i),
    the relative position is  dc + R(w tau) w  with the constant vector
    w = r1*(sin th1, -cos th1) - r2*(sin th2, -cos th2), and the heading terms
    of the safety function contribute their own same-frequency sinusoid.
    """
    th1, th2 = pair.a.heading, pair.b.heading
    r1, r2 = m.r1, m.r2
    s1, c1 = math.sin(th1), math.cos(th1)
    s2, c2 = math.sin(th2), math.cos(th2)
    wx = r1 * s1 - r2 * s2
    wy = -r1 * c1 + r2 * c2
    dcx = (pair.a.px - r1 * s1) - (pair.b.px - r2 * s2)
    dcy = (pair.a.py + r1 * c1) - (pair.b.py + r2 * c2)
    de = params.delta
    A = dcx * dcx + dcy * dcy + wx * wx + wy * wy - 2.0 * de
    P = 2.0 * (dcx * wx + dcy * wy) + de * (s1 - c1)
    Q = 2.0 * (wx * dcy - wy * dcx) + de * (c1 + s1)
    return A, P, Q


def h_turn(pair: PairState, m: TurnManeuver, params: SafetyParams) -> BarrierValue:
    """Closed-form synchronized-turn barrier via phasor reduction.

    The radicand is A + M*cos(w tau - phi) with M = hypot(P, Q); its infimum
    over tau >= 0 is A - M, attained first at tau* = ((phi + pi) mod 2pi)/w.
    """
    A, P, Q = _turn_phasor(pair, m, params)
    M = math.hypot(P, Q)
    rad = A - M
    if rad < 0.0:
        raise DomainError(f"negative radicand {rad} in turn barrier")
    if M == 0.0:
        tau = 0.0
    else:
        tau = math.atan2(Q, P) + math.pi
        tau = tau % (2.0 * math.pi) / m.turn_rate
    return BarrierValue(math.sqrt(rad) - params.ds, tau)


def h_value(pair: PairState, config: BarrierConfig) -> BarrierValue:
    """Dispatch to h_turn / h_straight according to the configured maneuver."""
    if isinstance(config.maneuver, TurnManeuver):
        return h_turn(pair, config.maneuver, config.safety)
    return h_straight(pair, config.maneuver, config.safety.ds)


# ---------------------------------------------------------------------------
# batch evaluation (used by the simulator and the compatibility sampler)


def h_turn_batch(
    apx: np.ndarray,
    apy: np.ndarray,
    ath: np.ndarray,
    bpx: np.ndarray,
    bpy: np.ndarray,
    bth: np.ndarray,
    m: TurnManeuver,
    params: SafetyParams,
) -> np.ndarray:
    """Vectorized h_turn over arrays of pair states.

    Returns NaN where the radicand is negative instead of raising.
    """
    r1, r2, de = m.r1, m.r2, params.delta
    s1, c1 = np.sin(ath), np.cos(ath)
    s2, c2 = np.sin(bth), np.cos(bth)
    wx = r1 * s1 - r2 * s2
    wy = -r1 * c1 + r2 * c2
    dcx = (apx - r1 * s1) - (bpx - r2 * s2)
    dcy = (apy + r1 * c1) - (bpy + r2 * c2)
    A = dcx * dcx + dcy * dcy + wx * wx + wy * wy - 2.0 * de
    P = 2.0 * (dcx * wx + dcy * wy) + de * (s1 - c1)
    Q = 2.0 * (wx * dcy - wy * dcx) + de * (c1 + s1)
    rad = A - np.hypot(P, Q)
    with np.errstate(invalid="ignore"):
        return np.where(rad < 0.0, np.nan, np.sqrt(np.maximum(rad, 0.0))) - params.ds


def h_straight_batch(
    apx: np.ndarray,
    apy: np.ndarray,
    ath: np.ndarray,
    bpx: np.ndarray,
    bpy: np.ndarray,
    bth: np.ndarray,
    m: StraightManeuver,
    ds: float,
) -> np.ndarray:
    """Vectorized h_straight over arrays of pair states."""
    p0x = apx - bpx
    p0y = apy - bpy
    dvx = m.v1 * np.cos(ath) - m.v2 * np.cos(bth)
    dvy = m.v1 * np.sin(ath) - m.v2 * np.sin(bth)
    dv2 = dvx * dvx + dvy * dvy
    tau = np.maximum(0.0, -(p0x * dvx + p0y * dvy) / dv2)
    return np.hypot(p0x + tau * dvx, p0y + tau * dvy) - ds


def h_batch(pair_arrays, config: BarrierConfig) -> np.ndarray:
    """Batch dispatch; pair_arrays = (apx, apy, ath, bpx, bpy, bth)."""
    if isinstance(config.maneuver, TurnManeuver):
        return h_turn_batch(*pair_arrays, config.maneuver, config.safety)
    return h_straight_batch(*pair_arrays, config.maneuver, config.safety.ds)


# ---------------------------------------------------------------------------
# brute-force oracle


def _rho_along(pair: PairState, config: BarrierConfig, tau: float) -> float:
    """Safety function evaluated on the maneuver trajectory at time tau,
    using the exact propagators (independent of the phasor/CPA reductions)."""
    man = config.maneuver
    if isinstance(man, TurnManeuver):
        a = propagate_turn(pair.a, man.sigma * man.speed, man.turn_rate, tau)
        b = propagate_turn(pair.b, man.speed, man.turn_rate, tau)
        return rho_turn(PairState(a, b), config.safety)
    a = propagate_straight(pair.a, man.v1, man.zeta1, tau)
    b = propagate_straight(pair.b, man.v2, man.zeta2, tau)
    return rho_straight(PairState(a, b), config.safety.ds)


def default_horizon(pair: PairState, config: BarrierConfig) -> float:
    """Search horizon guaranteed to contain the infimum: one full period for
    the turn maneuver, twice the CPA-time bound plus slack for the straight one."""
    man = config.maneuver
    if isinstance(man, TurnManeuver):
        return 2.0 * math.pi / man.turn_rate
    p0x, p0y, dvx, dvy = _straight_relative(pair, man)
    speed = math.hypot(dvx, dvy)
    if speed == 0.0:
        raise ValueError("relative velocity vanishes (maneuver precondition violated)")
    return 2.0 * (math.hypot(p0x, p0y) / speed + 1.0)


def _golden_section(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section minimization of f on [lo, hi] to interval width tol."""
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def h_oracle(
    pair: PairState,
    config: BarrierConfig,
    horizon: float | None = None,
    n: int = 4096,
    refine_tol: float = 1e-10,
) -> float:
    """Brute-force barrier value: dense n-point grid over [0, horizon] followed
    by golden-section refinement around the best grid cell.

    Domain errors from the safety function propagate.  The grid evaluation
    uses the batch closed-form trajectory only through the exact propagators,
    keeping the oracle independent of the CPA/phasor reductions it checks.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    min_h = default_horizon(pair, config)
    if horizon is None:
        horizon = min_h
    elif horizon < min_h:
        raise ValueError(f"horizon {horizon} below required {min_h}")

    man = config.maneuver
    taus = np.linspace(0.0, horizon, n)
    if isinstance(man, TurnManeuver):
        th1 = pair.a.heading + man.turn_rate * taus
        th2 = pair.b.heading + man.turn_rate * taus
        r1, r2 = man.r1, man.r2
        ax = pair.a.px + r1 * (np.sin(th1) - math.sin(pair.a.heading))
        ay = pair.a.py + r1 * (-np.cos(th1) + math.cos(pair.a.heading))
        bx = pair.b.px + r2 * (np.sin(th2) - math.sin(pair.b.heading))
        by = pair.b.py + r2 * (-np.cos(th2) + math.cos(pair.b.heading))
        d = (ax - bx) ** 2 + (ay - by) ** 2
        de = config.safety.delta
        rad = d - 2.0 * de + de * np.sin(th1) - de * np.cos(th1)
        if np.any(rad < 0.0):
            raise DomainError("negative radicand along evading trajectory")
        rho = np.sqrt(rad) - config.safety.ds
    else:
        ax = pair.a.px + taus * man.v1 * math.cos(pair.a.heading)
        ay = pair.a.py + taus * man.v1 * math.sin(pair.a.heading)
        bx = pair.b.px + taus * man.v2 * math.cos(pair.b.heading)
        by = pair.b.py + taus * man.v2 * math.sin(pair.b.heading)
        rho = np.hypot(ax - bx, ay - by) - config.safety.ds

    i = int(np.argmin(rho))
    lo = taus[max(0, i - 1)]
    hi = taus[min(n - 1, i + 1)]
    _, refined = _golden_section(lambda t: _rho_along(pair, config, t), lo, hi, refine_tol)
    return min(float(rho[i]), refined)


# ---------------------------------------------------------------------------
# gradients and Lie derivatives


def grad_h(pair: PairState, config: BarrierConfig) -> BarrierGradient:
    """Analytic barrier gradient over the stacked pair state (8-vector).

    Envelope theorem: the minimizing time tau* is stationary (interior
    minimizer) or locally constant (tau* = 0 with the distance diverging), so
    the gradient equals that of rho(x_hat(tau*)) with tau* held fixed.
    """
    man = config.maneuver
    ds = config.safety.ds
    g = np.zeros(8)
    if isinstance(man, StraightManeuver):
        p0x, p0y, dvx, dvy = _straight_relative(pair, man)
        dv2 = dvx * dvx + dvy * dvy
        if dv2 == 0.0:
            raise ValueError("relative velocity vanishes (maneuver precondition violated)")
        proj = p0x * dvx + p0y * dvy
        at_kink = proj == 0.0
        tau = max(0.0, -proj / dv2)
        dx = p0x + tau * dvx
        dy = p0y + tau * dvy
        dist = math.hypot(dx, dy)
        if dist == 0.0:
            raise DomainError("coincident closest approach; gradient undefined")
        nx, ny = dx / dist, dy / dist
        th1, th2 = pair.a.heading, pair.b.heading
        g[0], g[1] = nx, ny
        g[2] = tau * man.v1 * (-nx * math.sin(th1) + ny * math.cos(th1))
        g[4], g[5] = -nx, -ny
        g[6] = -tau * man.v2 * (-nx * math.sin(th2) + ny * math.cos(th2))
        return BarrierGradient(g, at_kink)

    val = h_turn(pair, man, config.safety)
    tau = val.minimizer_tau
    w = man.turn_rate
    v1, v2 = man.sigma * man.speed, man.speed
    th1, th2 = pair.a.heading, pair.b.heading
    th1p, th2p = th1 + w * tau, th2 + w * tau
    a1 = propagate_turn(pair.a, v1, w, tau)
    b1 = propagate_turn(pair.b, v2, w, tau)
    dx, dy = a1.px - b1.px, a1.py - b1.py
    de = config.safety.delta
    rad = dx * dx + dy * dy - 2.0 * de + de * math.sin(th1p) - de * math.cos(th1p)
    if rad <= 0.0:
        raise DomainError("gradient undefined at the domain boundary")
    s = math.sqrt(rad)
    nx, ny = dx / s, dy / s
    g[0], g[1] = nx, ny
    g[2] = (
        nx * (v1 / w) * (math.cos(th1p) - math.cos(th1))
        + ny * (v1 / w) * (math.sin(th1p) - math.sin(th1))
        + de * (math.cos(th1p) + math.sin(th1p)) / (2.0 * s)
    )
    g[4], g[5] = -nx, -ny
    g[6] = -(
        nx * (v2 / w) * (math.cos(th2p) - math.cos(th2))
        + ny * (v2 / w) * (math.sin(th2p) - math.sin(th2))
    )
    return BarrierGradient(g, False)


def lie_derivatives(pair: PairState, config: BarrierConfig) -> tuple[float, np.ndarray]:
    """(L_f h, L_g h) for the control-affine form of the pair dynamics.

    With the driftless factorization x_dot = g(x) u over the stacked control
    u = (v1, w1, zeta1, v2, w2, zeta2), L_f h = 0 and L_g h = grad_h . g(x).
    The zeta columns vanish because the safety functions are planar.
    """
    gr = grad_h(pair, config).grad
    th1, th2 = pair.a.heading, pair.b.heading
    lg = np.array(
        [
            gr[0] * math.cos(th1) + gr[1] * math.sin(th1),
            gr[2],
            gr[3],
            gr[4] * math.cos(th2) + gr[5] * math.sin(th2),
            gr[6],
            gr[7],
        ]
    )
    return 0.0, lg


def maneuver_control_vector(man: Maneuver) -> np.ndarray:
    """The evading maneuver as a stacked 6-vector (v1, w1, z1, v2, w2, z2)."""
    (u1, u2) = man.controls()
    return np.array([*u1, *u2])


def constraint_margin(
    pair: PairState,
    u: np.ndarray,
    config: BarrierConfig,
    alpha: LinearGain,
) -> float:
    """L_f h + L_g h . u + alpha(h); the control u (stacked 6-vector) is
    admissible at this pair state iff the result is >= 0."""
    lf, lg = lie_derivatives(pair, config)
    h = h_value(pair, config).value
    return lf + float(lg @ np.asarray(u)) + alpha(h)
