import math

import numpy as np
import pytest

from wingsafe.barrier import (
    BarrierConfig,
    LinearGain,
    PairState,
    SafetyParams,
    StraightManeuver,
    TurnManeuver,
    h_value,
    lie_derivatives,
)
from wingsafe.dynamics import VehicleState
from wingsafe.shaping import (
    SensorModel,
    alpha2,
    check_sensor_compatible,
    in_sensor_set,
    make_quadratic_psi,
    min_sensing_range,
    psi_deriv,
    psi_eval,
    shape_grad,
    shape_h,
    shape_h_batch,
    xi_from_range,
)

from conftest import DELTA, DS, random_valid_pair


class TestSensorSet:
    SENSOR = SensorModel(100.0)

    def pair(self, d):
        return PairState(VehicleState(0, 0, 0, 0), VehicleState(d, 0, 0, 0))

    def test_inside(self):
        assert in_sensor_set(self.pair(99.0), self.SENSOR)

    def test_outside(self):
        assert not in_sensor_set(self.pair(101.0), self.SENSOR)

    def test_boundary_included(self):
        assert in_sensor_set(self.pair(100.0), self.SENSOR)


class TestQuadraticPsi:
    def test_reference_coefficients(self):
        p = make_quadratic_psi(1.0, 0.5)
        assert (p.c1, p.c2, p.c3) == (-1.0, 2.0, -0.25)

    def test_blending_constraints(self):
        p = make_quadratic_psi(1.0, 0.5)
        assert psi_eval(0.5, p) == pytest.approx(0.5, abs=1e-15)
        assert psi_deriv(0.5 + 1e-15, p) == pytest.approx(1.0, abs=1e-12)
        assert psi_deriv(1.0, p) == pytest.approx(0.0, abs=1e-15)

    def test_plateau_value(self):
        p = make_quadratic_psi(1.0, 0.5)
        assert psi_eval(1.0, p) == pytest.approx(0.75, abs=1e-15)

    def test_constraints_random_parameters(self):
        # the three blending constraints, to 1e-12, over random (xi, beta)
        rng = np.random.default_rng(20)
        for _ in range(100):
            xi = rng.uniform(0.05, 500.0)
            beta = rng.uniform(0.05, 0.95)
            p = make_quadratic_psi(xi, beta)
            bx = beta * xi
            quad = lambda e: (p.c1 * e + p.c2) * e + p.c3
            dquad = lambda e: 2 * p.c1 * e + p.c2
            assert quad(bx) == pytest.approx(bx, rel=1e-12, abs=1e-12)
            assert dquad(bx) == pytest.approx(1.0, abs=1e-12)
            assert dquad(xi) == pytest.approx(0.0, abs=1e-12)
            # strictly increasing with negative curvature in between
            mid = rng.uniform(bx, xi)
            assert dquad(mid) > 0.0
            assert p.c1 < 0.0

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            make_quadratic_psi(-1.0, 0.5)
        with pytest.raises(ValueError):
            make_quadratic_psi(1.0, 1.0)
        with pytest.raises(ValueError):
            make_quadratic_psi(1.0, 0.0)


class TestPsiEval:
    P = make_quadratic_psi(1.0, 0.5)

    def test_identity_branch(self):
        assert psi_eval(0.3, self.P) == 0.3
        assert psi_deriv(0.3, self.P) == 1.0

    def test_quadratic_branch(self):
        assert psi_eval(0.75, self.P) == pytest.approx(0.6875, abs=1e-15)
        assert psi_deriv(0.75, self.P) == pytest.approx(0.5, abs=1e-15)

    def test_derivative_continuous_at_blend_point(self):
        left = psi_deriv(0.5 - 1e-12, self.P)
        right = psi_deriv(0.5 + 1e-12, self.P)
        assert left == pytest.approx(right, abs=1e-10)


class TestShapeH:
    P = make_quadratic_psi(1.0, 0.5)

    def test_pass_through(self):
        assert shape_h(0.3, self.P) == 0.3

    def test_quadratic(self):
        assert shape_h(0.75, self.P) == pytest.approx(0.6875, abs=1e-15)

    def test_plateau(self):
        assert shape_h(2.0, self.P) == pytest.approx(0.75, abs=1e-15)

    def test_batch_matches_scalar(self):
        hs = np.linspace(-2.0, 3.0, 101)
        got = shape_h_batch(hs, self.P)
        want = [shape_h(float(h), self.P) for h in hs]
        np.testing.assert_allclose(got, want, atol=1e-15)

    def test_continuously_differentiable(self):
        # one-sided difference quotients agree at both joints
        for joint in (0.5, 1.0):
            eps = 1e-7
            left = (shape_h(joint, self.P) - shape_h(joint - eps, self.P)) / eps
            right = (shape_h(joint + eps, self.P) - shape_h(joint, self.P)) / eps
            assert left == pytest.approx(right, abs=1e-6)

    def test_nondecreasing_positive_plateau(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            p = make_quadratic_psi(rng.uniform(0.1, 100), rng.uniform(0.1, 0.9))
            hs = np.linspace(-p.xi, 3 * p.xi, 301)
            vals = shape_h_batch(hs, p)
            assert np.all(np.diff(vals) >= -1e-12)
            assert shape_h(p.xi, p) > 0.0

    def test_shape_grad(self):
        g = np.arange(8.0)
        np.testing.assert_array_equal(shape_grad(0.3, g, self.P), g)
        np.testing.assert_array_equal(shape_grad(1.5, g, self.P), np.zeros(8))
        np.testing.assert_allclose(shape_grad(0.75, g, self.P), 0.5 * g, atol=1e-15)


class TestShapedGradientFiniteDifference:
    def test_fd_through_pipeline(self, turn_config):
        # d(shape_h(h(x)))/dx vs psi'(h)*grad_h away from the joints
        p = make_quadratic_psi(30.0, 0.5)
        rng = np.random.default_rng(22)
        checked = 0
        while checked < 40:
            pair = random_valid_pair(rng, turn_config, span=400.0)
            h = h_value(pair, turn_config).value
            bx = p.beta * p.xi
            if min(abs(h - bx), abs(h - p.xi)) < 0.5 or h > p.xi + 2.0:
                continue
            def shaped_value(pr):
                return shape_h(h_value(pr, turn_config).value, p)

            from wingsafe.barrier import grad_h

            analytic = shape_grad(h, grad_h(pair, turn_config).grad, p)
            base = [
                pair.a.px, pair.a.py, pair.a.heading, pair.a.pz,
                pair.b.px, pair.b.py, pair.b.heading, pair.b.pz,
            ]
            fd = np.zeros(8)
            step = 1e-5
            for i in range(8):
                hi, lo = list(base), list(base)
                hi[i] += step
                lo[i] -= step
                fd[i] = (
                    shaped_value(PairState(VehicleState(*hi[:4]), VehicleState(*hi[4:])))
                    - shaped_value(PairState(VehicleState(*lo[:4]), VehicleState(*lo[4:])))
                ) / (2 * step)
            np.testing.assert_allclose(analytic, fd, rtol=2e-5, atol=1e-5)
            checked += 1


class TestRangeFormulas:
    def test_headline_threshold(self, turn_maneuver, safety):
        assert min_sensing_range(turn_maneuver, safety) == pytest.approx(318.4, abs=0.1)

    def test_delta_limit(self):
        m = TurnManeuver(sigma=0.5, speed=10, turn_rate=0.25)
        s = SafetyParams(delta=1e-15, ds=5.0)
        want = 2 * m.r1 + 2 * m.r2 + 5.0
        assert min_sensing_range(m, s) == pytest.approx(want, abs=1e-6)

    def test_radius_linearity_in_speed(self):
        s = SafetyParams(delta=0.01, ds=5.0)
        m1 = TurnManeuver(sigma=0.5, speed=10, turn_rate=0.25)
        m2 = TurnManeuver(sigma=0.5, speed=20, turn_rate=0.25)
        tail = math.sqrt(s.ds**2 + 4 * s.delta)
        assert min_sensing_range(m2, s) - tail == pytest.approx(
            2 * (min_sensing_range(m1, s) - tail), rel=1e-12
        )

    def test_xi_headline_value(self, turn_maneuver, safety):
        assert xi_from_range(350.0, turn_maneuver, safety) == pytest.approx(31.59, abs=0.01)

    def test_xi_boundary(self, turn_maneuver, safety):
        rmin = min_sensing_range(turn_maneuver, safety)
        assert xi_from_range(rmin + 1e-9, turn_maneuver, safety) < 1e-3
        with pytest.raises(ValueError):
            xi_from_range(rmin, turn_maneuver, safety)
        with pytest.raises(ValueError):
            xi_from_range(300.0, turn_maneuver, safety)

    def test_xi_monotone_in_range(self, turn_maneuver, safety):
        rs = np.linspace(319, 600, 40)
        xs = [xi_from_range(r, turn_maneuver, safety) for r in rs]
        assert np.all(np.diff(xs) > 0)


class TestAlpha2:
    P = make_quadratic_psi(1.0, 0.5)

    def test_identity_branch(self):
        a = LinearGain(1.3)
        assert alpha2(0.2, a, self.P) == pytest.approx(a(0.2), abs=1e-15)

    def test_reference_value(self):
        a = LinearGain(1.0)
        assert alpha2(0.75, a, self.P) == pytest.approx(0.6875 / 0.5, abs=1e-12)
        assert alpha2(0.75, a, self.P) >= a(0.75)

    def test_undefined_on_plateau(self):
        with pytest.raises(ValueError):
            alpha2(1.0, LinearGain(1.0), self.P)

    def test_dominates_alpha(self):
        # alpha2 >= alpha on (0, xi) for any valid shaping and linear gain
        rng = np.random.default_rng(23)
        for _ in range(20):
            p = make_quadratic_psi(rng.uniform(0.1, 50), rng.uniform(0.1, 0.9))
            a = LinearGain(rng.uniform(0.1, 3.0))
            hs = rng.uniform(0.0, p.xi * (1 - 1e-12), 500)
            for h in hs:
                assert alpha2(float(h), a, p) >= a(float(h)) - 1e-12


class TestSignEquivalence:
    def test_shaped_margin_sign_matches_alpha2_form(self, turn_config):
        p = make_quadratic_psi(20.0, 0.6)
        a = LinearGain(1.0)
        rng = np.random.default_rng(24)
        checked = 0
        while checked < 200:
            pair = random_valid_pair(rng, turn_config, span=400.0)
            h = h_value(pair, turn_config).value
            if h >= p.xi:
                continue
            _, lg = lie_derivatives(pair, turn_config)
            u = rng.uniform(-1, 1, 6) * np.array([25, 0.23, 5, 25, 0.23, 5])
            lgu = float(lg @ u)
            shaped = psi_deriv(h, p) * lgu + a(shape_h(h, p))
            raw_a2 = lgu + alpha2(h, a, p)
            if abs(shaped) < 1e-12 or abs(raw_a2) < 1e-12:
                continue
            assert math.copysign(1, shaped) == math.copysign(1, raw_a2)
            checked += 1

    def test_admissible_set_containment(self, turn_config):
        # any control admissible under (h, alpha) stays admissible under the
        # shaped barrier with the same gain
        p = make_quadratic_psi(20.0, 0.6)
        a = LinearGain(1.0)
        rng = np.random.default_rng(25)
        checked = 0
        while checked < 500:
            pair = random_valid_pair(rng, turn_config, span=400.0)
            h = h_value(pair, turn_config).value
            if h >= p.xi:
                continue
            _, lg = lie_derivatives(pair, turn_config)
            u = rng.uniform(-1, 1, 6) * np.array([25, 0.23, 5, 25, 0.23, 5])
            lgu = float(lg @ u)
            if lgu + a(h) >= 0:
                assert psi_deriv(h, p) * lgu + a(shape_h(h, p)) >= -1e-12
                checked += 1


class TestSensorCompatibility:
    def test_turn_with_valid_xi_is_compatible(self, turn_config):
        R = 350.0
        xi = xi_from_range(R, turn_config.maneuver, turn_config.safety)
        rep = check_sensor_compatible(
            turn_config, make_quadratic_psi(xi, 0.9), SensorModel(R), sample_count=100_000
        )
        assert rep.ok and rep.analytic_ok and rep.witness is None
        assert rep.samples == 100_000
        assert rep.min_h_outside > xi

    def test_straight_head_on_witness(self):
        cfg = BarrierConfig(StraightManeuver(16.0, 20.0), SafetyParams(DELTA, DS))
        rep = check_sensor_compatible(
            cfg, make_quadratic_psi(1.0, 0.9), SensorModel(350.0), sample_count=1000
        )
        assert not rep.ok and rep.witness is not None
        assert rep.witness_h == pytest.approx(-DS, abs=1e-9)

    def test_turn_below_min_range_has_witness(self, turn_config):
        # R below R_min: near-tangent geometry just outside range undercuts xi
        rep = check_sensor_compatible(
            turn_config, make_quadratic_psi(1.0, 0.9), SensorModel(300.0), sample_count=1000
        )
        assert not rep.ok and not rep.analytic_ok
        assert rep.witness is not None

    def test_theorem_sampling_no_low_h_outside(self, turn_config):
        # with xi from the range formula, no sampled state outside the sensor
        # set has h <= xi
        R = 330.0
        xi = xi_from_range(R, turn_config.maneuver, turn_config.safety)
        rep = check_sensor_compatible(
            turn_config, make_quadratic_psi(xi, 0.9), SensorModel(R), sample_count=50_000
        )
        assert rep.ok
