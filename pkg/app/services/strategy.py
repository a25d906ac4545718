"""Rule-based decision backends.

Each rule mirrors a behaviour seen in conversational agents negotiating a
common position: averaging (with or without the agent's own state), adopting
the majority position (suggestible), holding still (stubborn) and acting on a
fabricated target (erroneous). 2-D states go through the same rules
componentwise; the suggestible rule treats a 2-D point as a unit so its choice
is always an observed position.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from app.core.errors import InvalidObservationError
from app.models.models import STATE_BOUNDS, StrategyKind, StrategySpec

REASONING = {
    StrategyKind.AVERAGE_INCLUDE_SELF: "Moving to the average of all positions, including my own.",
    StrategyKind.AVERAGE_EXCLUDE_SELF: "Moving to the average of the other agents' positions.",
    StrategyKind.SUGGESTIBLE: "Moving to the position where most other agents are.",
    StrategyKind.STUBBORN: "Staying where I am; the others should come to me.",
    StrategyKind.ERRONEOUS: "Moving to the position I believe everyone is heading to.",
}


@dataclass(frozen=True)
class Observation:
    """What agent k sees at the start of a round: its own state and its observed neighbours' states."""
    self_state: np.ndarray
    neighbor_states: np.ndarray
    round: int = 0
    neighbor_ids: Tuple[int, ...] = field(default=())

    @classmethod
    def of(cls, self_state, neighbor_states: Sequence = (), round: int = 0,
           neighbor_ids: Sequence[int] = ()) -> "Observation":
        own = np.atleast_1d(np.asarray(self_state, dtype=float))
        others = np.asarray(neighbor_states, dtype=float).reshape(-1, own.shape[0])
        return cls(own, others, round, tuple(neighbor_ids))

    @property
    def dimension(self) -> int:
        return int(self.self_state.shape[0])

    def validate(self) -> None:
        if self.self_state.ndim != 1 or self.self_state.shape[0] not in (1, 2):
            raise InvalidObservationError(f"self_state must be 1-D or 2-D, got shape {self.self_state.shape}")
        if self.neighbor_states.ndim != 2 or self.neighbor_states.shape[1] != self.dimension:
            raise InvalidObservationError(
                f"neighbor_states shape {self.neighbor_states.shape} does not match dimension {self.dimension}"
            )
        if self.round < 0:
            raise InvalidObservationError(f"round must be >= 0, got {self.round}")
        if not (np.all(np.isfinite(self.self_state)) and np.all(np.isfinite(self.neighbor_states))):
            raise InvalidObservationError("observation contains non-finite states")


def mean_state(points: np.ndarray) -> np.ndarray:
    """Componentwise mean with exactly rounded sums, independent of the order of ``points``."""
    count = points.shape[0]
    return np.array([math.fsum(points[:, c]) / count for c in range(points.shape[1])])


def modal_state(candidates: np.ndarray, anchor: np.ndarray) -> np.ndarray:
    """Most frequent row; ties go to the row nearest ``anchor``, then to the smallest."""
    counts = Counter(tuple(float(v) for v in row) for row in candidates)
    top = max(counts.values())
    tied = [np.array(key) for key, cnt in counts.items() if cnt == top]
    best = min(tied, key=lambda p: (float(np.linalg.norm(p - anchor)), tuple(p)))
    return best.copy()


def _clamp(state: np.ndarray, bounds: Optional[Tuple[float, float]]) -> np.ndarray:
    if bounds is None:
        return state
    return np.clip(state, bounds[0], bounds[1])


def _add_noise(state: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma <= 0:
        return state
    return state + rng.normal(0.0, sigma, size=state.shape)


def _apply_rule(kind: StrategyKind, obs: Observation) -> np.ndarray:
    own = obs.self_state
    others = obs.neighbor_states
    if kind == StrategyKind.AVERAGE_INCLUDE_SELF:
        return mean_state(np.vstack([own, others]))
    if kind == StrategyKind.AVERAGE_EXCLUDE_SELF:
        return mean_state(others)
    if kind == StrategyKind.SUGGESTIBLE:
        return modal_state(others, own)
    raise InvalidObservationError(f"no deterministic rule for {kind.value}")


def decide(
    spec: StrategySpec,
    obs: Observation,
    rng: np.random.Generator,
    bounds: Optional[Tuple[float, float]] = STATE_BOUNDS,
) -> np.ndarray:
    """Next state of one agent under ``spec``.

    Noise is added after the rule and the result clamped to ``bounds``
    (pass None for the unbounded plane). Stubborn agents never move, so
    neither noise nor clamping touches them; isolated agents hold
    their state the same way.
    """
    obs.validate()
    kind = spec.kind
    if kind == StrategyKind.ERRONEOUS:
        if rng.random() < spec.hallucination_rate:
            lo, hi = bounds if bounds is not None else STATE_BOUNDS
            return rng.uniform(lo, hi, size=obs.dimension)
        kind = spec.wrapped_kind
    if kind == StrategyKind.STUBBORN or len(obs.neighbor_states) == 0:
        return obs.self_state.copy()
    nxt = _apply_rule(kind, obs)
    return _clamp(_add_noise(nxt, spec.noise_sigma, rng), bounds)


def reasoning_for(spec: StrategySpec) -> str:
    return REASONING[spec.kind]


@dataclass(frozen=True)
class StepResult:
    """Outcome of one agent's decision in one round."""
    state: np.ndarray
    reasoning: str
    attempts: int = 1
