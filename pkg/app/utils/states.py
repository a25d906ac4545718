"""Conversions between the (n, d) state arrays used in simulation and JSON states."""
from typing import List, Sequence

import numpy as np

from app.models.models import State


def to_json_state(vec: np.ndarray) -> State:
    arr = np.atleast_1d(vec)
    if arr.shape[0] == 1:
        return float(arr[0])
    return [float(v) for v in arr]


def to_json_states(states: np.ndarray) -> List[State]:
    return [to_json_state(row) for row in states]


def to_array(states: Sequence[State], dimension: int | None = None) -> np.ndarray:
    """(n, d) float array from JSON states; ``dimension`` is inferred when omitted."""
    if len(states) == 0:
        return np.zeros((0, dimension or 1))
    d = dimension or (len(states[0]) if isinstance(states[0], list) else 1)
    return np.asarray(states, dtype=float).reshape(len(states), d)


def spread(states: np.ndarray) -> float:
    """Largest per-axis max - min over the population."""
    if states.shape[0] == 0:
        return 0.0
    return float(np.max(states.max(axis=0) - states.min(axis=0)))
