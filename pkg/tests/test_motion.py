import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from omninav.core import Pose2D, VelocityCommand
from omninav.motion import (
    WheelGeometry,
    WheelSpeeds,
    circle_drive_headings,
    forward_kinematics,
    integrate_odometry,
    inverse_kinematics,
    tangency_error,
)

vel = st.floats(-2.0, 2.0)


class TestKinematics:
    def test_pure_rotation_equal_wheel_speeds_exact(self):
        ws = inverse_kinematics(VelocityCommand(0.0, 0.0, 1.0))
        assert ws.w_fl == ws.w_fr == ws.w_b == 1.0

    def test_forward_drive_wheel_split(self):
        # vx = 1: cos(150), cos(30), cos(270)
        ws = inverse_kinematics(VelocityCommand(1.0, 0.0, 0.0))
        assert ws.w_fl == pytest.approx(-math.sqrt(3) / 2)
        assert ws.w_fr == pytest.approx(math.sqrt(3) / 2)
        assert ws.w_b == pytest.approx(0.0, abs=1e-12)

    def test_left_translation_back_wheel_reverses(self):
        # vy = 1: sin(150), sin(30), sin(270)
        ws = inverse_kinematics(VelocityCommand(0.0, 1.0, 0.0))
        assert ws.w_fl == pytest.approx(0.5)
        assert ws.w_fr == pytest.approx(0.5)
        assert ws.w_b == pytest.approx(-1.0)

    @given(vel, vel, vel)
    def test_round_trip(self, vx, vy, wz):
        cmd = VelocityCommand(vx, vy, wz)
        back = forward_kinematics(inverse_kinematics(cmd))
        assert math.isclose(back.vx, vx, abs_tol=1e-9)
        assert math.isclose(back.vy, vy, abs_tol=1e-9)
        assert math.isclose(back.wz, wz, abs_tol=1e-9)

    def test_singular_geometry_rejected(self):
        geom = WheelGeometry(0.0, 0.0, math.pi)  # all drive axes collinear
        with pytest.raises(ValueError):
            forward_kinematics(WheelSpeeds(1.0, 1.0, 1.0), geom)

    def test_non_finite_wheel_speed_rejected(self):
        with pytest.raises(ValueError):
            WheelSpeeds(math.nan, 0.0, 0.0)


class TestOdometryIntegration:
    def test_straight_line(self):
        p = integrate_odometry(Pose2D(0, 0, math.pi / 2), VelocityCommand(1.0, 0.0, 0.0), 2.0)
        assert p.x == pytest.approx(0.0, abs=1e-12)
        assert p.y == pytest.approx(2.0)

    def test_half_circle_arc_exact(self):
        # vx = 1, wz = 1 for pi seconds: half a unit circle
        p = integrate_odometry(Pose2D(), VelocityCommand(1.0, 0.0, 1.0), math.pi)
        assert p.x == pytest.approx(0.0, abs=1e-12)
        assert p.y == pytest.approx(2.0)
        assert p.theta == pytest.approx(math.pi)

    def test_lateral_velocity_integrates(self):
        p = integrate_odometry(Pose2D(), VelocityCommand(0.0, 1.0, 0.0), 1.0)
        assert (p.x, p.y) == (pytest.approx(0.0), pytest.approx(1.0))

    def test_substep_composition_matches_single_step(self):
        cmd = VelocityCommand(0.7, -0.2, 0.9)
        whole = integrate_odometry(Pose2D(1, 2, 0.3), cmd, 1.0)
        split = Pose2D(1, 2, 0.3)
        for _ in range(10):
            split = integrate_odometry(split, cmd, 0.1)
        assert split.x == pytest.approx(whole.x)
        assert split.y == pytest.approx(whole.y)
        assert split.theta == pytest.approx(whole.theta)

    def test_dt_must_be_positive(self):
        with pytest.raises(ValueError):
            integrate_odometry(Pose2D(), VelocityCommand(), 0.0)


class TestCircleDrive:
    def test_heading_tangent_to_path(self):
        samples = circle_drive_headings(1.0, math.pi / 2, 4.0, 0.01)
        assert tangency_error(samples) < 1e-6

    def test_full_circle_closes(self):
        samples = circle_drive_headings(1.0, math.pi / 2, 4.0, 0.01)
        first, last = samples[0][1], samples[-1][1]
        assert math.hypot(last.x - first.x, last.y - first.y) < 1e-3

    def test_zero_duration_single_sample(self):
        samples = circle_drive_headings(1.0, 1.0, 0.0, 0.01)
        assert len(samples) == 1 and samples[0][0] == 0.0

    def test_radius_matches_request(self):
        samples = circle_drive_headings(2.0, 1.0, 4.0 * math.pi, 0.02)
        xs = np.array([p.x for _, p in samples])
        ys = np.array([p.y for _, p in samples])
        # circle center for a start at the origin heading +x is (0, radius)
        r = np.hypot(xs - 0.0, ys - 2.0)
        assert np.allclose(r, 2.0, atol=1e-9)

    def test_invalid_arguments_rejected(self):
        with pytest.raises(ValueError):
            circle_drive_headings(0.0, 1.0, 1.0, 0.01)
        with pytest.raises(ValueError):
            circle_drive_headings(1.0, 1.0, 1.0, 0.0)
