import math

import pytest

from omninav import worlds
from omninav.core import Pose2D, normalize_angle
from omninav.navigate import NO_PATH, REACHED, Navigator
from omninav.planning import MarkerSpec
from omninav.sim import NoiseModel, Obstacle


def lab_navigator(seed=0, **kw):
    world = worlds.lab_world(noise=NoiseModel(rng_seed=seed))
    nav = Navigator(world, dict(worlds.MARKERS), map_grid=worlds.lab_nav_map(), **kw)
    return world, nav


class TestNavigator:
    def test_reaches_marker_within_tolerance(self):
        world, nav = lab_navigator()
        assert nav.navigate_to_marker("marker2") == REACHED
        goal = worlds.MARKERS["marker2"].goal
        assert math.hypot(world.robot.x - goal.x, world.robot.y - goal.y) <= 0.1
        assert abs(normalize_angle(world.robot.theta - goal.theta)) <= math.radians(5.0)

    def test_already_at_goal(self):
        world, nav = lab_navigator()
        world.robot = worlds.MARKERS["marker1"].goal
        assert nav.navigate_to_marker("marker1") == REACHED
        assert world.time == 0.0  # no motion needed

    def test_unknown_marker(self):
        _, nav = lab_navigator()
        with pytest.raises(KeyError):
            nav.navigate_to_marker("marker99")

    def test_goal_inside_wall_is_no_path(self):
        world, nav = lab_navigator()
        nav.markers["bad"] = MarkerSpec("bad", Pose2D(0.0, 0.0, 0.0), "in the wall")
        assert nav.navigate_to_marker("bad") == NO_PATH

    def test_log_rows_written(self):
        world, nav = lab_navigator()
        log = []
        nav.navigate_to_marker("marker2", log)
        assert log and log[-1].t == pytest.approx(world.time)

    def test_navigate_fn_adapter(self):
        world, nav = lab_navigator()
        world.robot = worlds.MARKERS["marker1"].goal
        fn = nav.navigate_fn()
        assert fn(world, "marker1", []) == REACHED

    def test_unmapped_obstacle_detoured(self):
        # a fresh disk dead ahead on the corridor, absent from the nav map:
        # the costmap must pick it up and the robot must route around it
        world, nav = lab_navigator()
        world.robot = Pose2D(4.0, 2.0, 0.0)
        world.obstacles.append(Obstacle("crate", "disk", (6.0, 2.0, 0.25)))
        nav.markers["past"] = MarkerSpec("past", Pose2D(9.0, 2.0, 0.0), "behind the crate")
        assert nav.navigate_to_marker("past") == REACHED
        assert math.hypot(world.robot.x - 9.0, world.robot.y - 2.0) <= 0.1

    def test_deterministic_across_runs(self):
        poses = []
        for _ in range(2):
            world, nav = lab_navigator(seed=12)
            nav.navigate_to_marker("marker2")
            poses.append((world.robot.x, world.robot.y, world.robot.theta, world.time))
        assert poses[0] == poses[1]
