"""
Multi-robot aggregation.

Single-integrator robots in the plane. A slow planner (any agent backend,
fed the robots' current positions as 2-D states) produces targets every
planner period; a fast proportional controller with a speed cap tracks the
current target every controller period. Simulated time stands still while the
planner is consulted.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List

import numpy as np
import pandas as pd
import structlog

from app.models.models import RobotsConfig, TrajectorySample
from app.services.backends import build_backends
from app.services.engine import collect_decisions, observe
from app.services.topology import build_topology

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class RobotState:
    position: np.ndarray
    target: np.ndarray
    velocity_command: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self) -> None:
        for name in ("position", "target", "velocity_command"):
            value = getattr(self, name)
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name} must be finite, got {value}")


def controller_step(state: RobotState, k_p: float, v_max: float, dt: float) -> RobotState:
    """v = k_p * (target - position) capped at v_max in magnitude; position += v * dt."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    v = k_p * (state.target - state.position)
    speed = float(np.linalg.norm(v))
    if speed > v_max:
        v = v * (v_max / speed)
    return replace(state, position=state.position + v * dt, velocity_command=v)


def run_aggregation(config: RobotsConfig) -> List[TrajectorySample]:
    """Simulate until t_end and return one sample per robot per controller tick, t = 0 included.

    Planner ticks fall on every multiple of the planner period before t_end.
    A robot whose planner fails keeps its previous target.
    """
    timing = config.timing
    dt = timing.controller_period
    n = config.n_robots
    topology = build_topology(config.topology, n)
    robots = [RobotState(np.array(p, dtype=float), np.array(p, dtype=float)) for p in config.initial_positions]
    samples: List[TrajectorySample] = []
    log = logger.bind(n_robots=n)
    log.info("aggregation_started", t_end=timing.t_end, steps=timing.total_steps)

    with build_backends(config.planner_specs(), config.seed, 2, None, config.llm_endpoint) as pool:
        for step in range(timing.total_steps + 1):
            time = step * dt
            if step < timing.total_steps and step % timing.steps_per_plan == 0:
                positions = np.vstack([r.position for r in robots])
                tick = step // timing.steps_per_plan
                results = collect_decisions(pool, observe(positions, topology, tick), config.parallelism)
                robots = [
                    r if err is not None else replace(r, target=np.asarray(res.state, dtype=float))
                    for r, (res, err) in zip(robots, results)
                ]
                log.debug("planner_tick", tick=tick, time=time)
            for k, r in enumerate(robots):
                samples.append(TrajectorySample(
                    time=time, robot_id=k,
                    x=float(r.position[0]), y=float(r.position[1]),
                    target_x=float(r.target[0]), target_y=float(r.target[1]),
                ))
            if step < timing.total_steps:
                robots = [controller_step(r, config.gains.k_p, config.gains.v_max, dt) for r in robots]

    final = np.vstack([r.position for r in robots])
    log.info("aggregation_finished", final_spread=float(np.max(final.max(axis=0) - final.min(axis=0))))
    return samples


def trajectory_frame(samples: List[TrajectorySample]) -> pd.DataFrame:
    columns = ["time", "robot_id", "x", "y", "target_x", "target_y"]
    return pd.DataFrame([s.model_dump() for s in samples], columns=columns)
