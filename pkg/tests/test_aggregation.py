"""
Tests for the multi-robot aggregation simulation.

Run with: pytest tests/
"""
import math
from collections import defaultdict

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import BackendFailure
from app.models.models import RobotsConfig, SimTimingConfig, StrategyKind, StrategySpec
from app.services import aggregation
from app.services.aggregation import RobotState, controller_step, run_aggregation, trajectory_frame
from app.services.backends import BackendPool, StrategyBackend


def by_robot(samples):
    out = defaultdict(list)
    for s in samples:
        out[s.robot_id].append(s)
    return out


class TestControllerStep:
    """Test the proportional controller with a speed cap."""

    def test_fixed_point(self):
        """Test a robot on its target stays put."""
        state = RobotState(np.array([3.0, 4.0]), np.array([3.0, 4.0]))
        out = controller_step(state, k_p=1.0, v_max=5.0, dt=0.1)
        assert out.position.tolist() == [3.0, 4.0]
        assert out.velocity_command.tolist() == [0.0, 0.0]

    def test_saturation(self):
        """Test (0,0) towards (10,0) is capped at speed 5 and moves 0.5."""
        state = RobotState(np.array([0.0, 0.0]), np.array([10.0, 0.0]))
        out = controller_step(state, k_p=1.0, v_max=5.0, dt=0.1)
        assert out.velocity_command.tolist() == [5.0, 0.0]
        assert out.position.tolist() == [0.5, 0.0]

    def test_geometric_decay(self):
        """Test the error shrinks by (1 - k_p dt) per step without a speed cap."""
        state = RobotState(np.array([0.0, 0.0]), np.array([8.0, -6.0]))
        error = np.linalg.norm(state.target - state.position)
        for _ in range(20):
            state = controller_step(state, k_p=2.0, v_max=math.inf, dt=0.1)
            new_error = np.linalg.norm(state.target - state.position)
            assert new_error == pytest.approx(0.8 * error, rel=1e-9)
            error = new_error

    def test_speed_bounded(self):
        """Test the velocity command never exceeds v_max."""
        state = RobotState(np.array([0.0, 0.0]), np.array([300.0, -400.0]))
        out = controller_step(state, k_p=3.0, v_max=2.5, dt=0.1)
        assert np.linalg.norm(out.velocity_command) == pytest.approx(2.5)

    def test_dt_positive(self):
        """Test a non-positive step is rejected."""
        with pytest.raises(ValueError):
            controller_step(RobotState(np.zeros(2), np.ones(2)), 1.0, 5.0, 0.0)

    def test_finite_state(self):
        """Test robot states must be finite."""
        with pytest.raises(ValueError):
            RobotState(np.array([np.nan, 0.0]), np.zeros(2))


class TestTiming:
    """Test planner/controller timing validation."""

    def test_defaults(self):
        """Test the default periods."""
        timing = SimTimingConfig()
        assert (timing.steps_per_plan, timing.total_steps) == (20, 200)

    def test_not_a_multiple(self):
        """Test a controller period that does not divide the planner period is rejected."""
        with pytest.raises(ValidationError):
            SimTimingConfig(planner_period=2.0, controller_period=0.3)

    def test_planner_faster_than_controller(self):
        """Test the planner cannot run faster than the controller."""
        with pytest.raises(ValidationError):
            SimTimingConfig(planner_period=0.05, controller_period=0.1)


class TestRunAggregation:
    """Test the full planner/controller loop."""

    def test_converges_to_centroid(self):
        """Test four robots meet at the centroid of their starting points."""
        samples = run_aggregation(RobotsConfig())
        final = [s for s in samples if s.time == samples[-1].time]
        assert len(final) == 4
        for s in final:
            assert math.hypot(s.x - 50.0, s.y - 50.0) < 0.1

    def test_first_tick_targets_centroid(self):
        """Test every target equals the centroid after the first planner tick."""
        samples = run_aggregation(RobotsConfig())
        for s in samples[:4]:
            assert (s.target_x, s.target_y) == pytest.approx((50.0, 50.0), abs=1e-12)

    def test_time_grid(self):
        """Test samples fall exactly on multiples of the controller period."""
        config = RobotsConfig()
        samples = run_aggregation(config)
        times = sorted({s.time for s in samples})
        assert times == [k * 0.1 for k in range(201)]
        assert len(samples) == 201 * 4

    def test_targets_change_only_on_planner_ticks(self):
        """Test targets are piecewise constant with breakpoints on planner ticks."""
        config = RobotsConfig(initial_positions=[(0, 0), (100, 0), (30, 80), (90, 90)],
                              planner=StrategySpec(kind=StrategyKind.AVERAGE_EXCLUDE_SELF))
        for track in by_robot(run_aggregation(config)).values():
            for step in range(1, len(track)):
                changed = (track[step].target_x, track[step].target_y) != (track[step - 1].target_x,
                                                                          track[step - 1].target_y)
                if changed:
                    assert step % config.timing.steps_per_plan == 0

    def test_distance_non_increasing_between_ticks(self):
        """Test each robot closes in on its target between planner ticks."""
        config = RobotsConfig()
        for track in by_robot(run_aggregation(config)).values():
            for step in range(1, len(track)):
                if step % config.timing.steps_per_plan == 0:
                    continue
                prev, cur = track[step - 1], track[step]
                d_prev = math.hypot(prev.target_x - prev.x, prev.target_y - prev.y)
                d_cur = math.hypot(cur.target_x - cur.x, cur.target_y - cur.y)
                assert d_cur <= d_prev + 1e-12

    def test_single_robot_stays(self):
        """Test a lone robot targets its own position and never moves."""
        samples = run_aggregation(RobotsConfig(n_robots=1, initial_positions=[(12.0, 34.0)]))
        assert {(s.x, s.y, s.target_x, s.target_y) for s in samples} == {(12.0, 34.0, 12.0, 34.0)}

    def test_deterministic(self):
        """Test seeded runs repeat exactly."""
        config = RobotsConfig(planner=StrategySpec(noise_sigma=2.0), seed=6)
        assert run_aggregation(config) == run_aggregation(config)

    def test_planner_failure_keeps_target(self, monkeypatch):
        """Test a robot whose planner fails keeps its previous target."""

        class FlakyPlanner:
            name = "flaky"

            def __init__(self):
                self.calls = 0

            def act(self, obs):
                self.calls += 1
                if self.calls > 1:
                    raise BackendFailure("planner down", attempts=1)
                return StrategyBackend(StrategySpec(), np.random.default_rng(0), None).act(obs)

        def build(specs, seed, dimension, bounds, endpoint=None):
            rng = np.random.default_rng(0)
            return BackendPool([FlakyPlanner()] + [StrategyBackend(s, rng, bounds) for s in specs[1:]])

        monkeypatch.setattr(aggregation, "build_backends", build)
        samples = run_aggregation(RobotsConfig(initial_positions=[(0, 0), (100, 0), (30, 80), (90, 90)]))
        tracks = by_robot(samples)
        assert len({(s.target_x, s.target_y) for s in tracks[0]}) == 1
        assert len({(s.target_x, s.target_y) for s in tracks[1]}) > 1

    def test_timing_validation_in_config(self):
        """Test an invalid timing block fails config validation."""
        with pytest.raises(ValidationError):
            RobotsConfig(timing={"planner_period": 1.0, "controller_period": 0.3})

    def test_frame_columns(self):
        """Test the trajectory table layout."""
        frame = trajectory_frame(run_aggregation(RobotsConfig(timing={"t_end": 2.0})))
        assert list(frame.columns) == ["time", "robot_id", "x", "y", "target_x", "target_y"]
        assert len(frame) == 21 * 4
