"""
Post-hoc analysis of experiment records.

Consensus and convergence speed, bias of the final value against the initial
mean, period-2 oscillation, gap clustering of final states and Monte Carlo
summaries per group. Everything here is a pure function of the records.
"""
from __future__ import annotations

import math
from collections import defaultdict
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import networkx as nx
import numpy as np
import pandas as pd

from app.models.models import (
    Cluster,
    ClusterReport,
    ConvergenceReport,
    ExperimentRecord,
    GroupKey,
    MonteCarloSummary,
    OscillationReport,
    State,
)
from app.services.strategy import mean_state
from app.utils.states import spread, to_array, to_json_state

MIN_OSCILLATION_ROUNDS = 4


def state_history(record: ExperimentRecord) -> np.ndarray:
    """(rounds + 1, n, d) array: the initial states followed by the states after each round."""
    first = to_array(record.initial_states)
    d = first.shape[1]
    frames = [first] + [to_array(r.states_after, d) for r in record.rounds]
    return np.stack(frames)


def population_mean(states: np.ndarray) -> np.ndarray:
    # agreed states are returned as-is so an exact consensus has an exact mean
    if states.shape[0] and np.all(states == states[0]):
        return states[0].copy()
    return mean_state(states)


def detect_consensus(record: ExperimentRecord, eps: float) -> ConvergenceReport:
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    history = state_history(record)
    spreads = [spread(frame) for frame in history]
    consensus = spreads[-1] < eps
    convergence_round = None
    if consensus:
        convergence_round = len(spreads) - 1
        while convergence_round > 0 and spreads[convergence_round - 1] < eps:
            convergence_round -= 1
    final_mean = population_mean(history[-1])
    bias = final_mean - mean_state(history[0])
    return ConvergenceReport(
        experiment=record.experiment,
        consensus=consensus,
        consensus_value=to_json_state(final_mean) if consensus else None,
        convergence_round=convergence_round,
        final_spread=spreads[-1],
        bias=to_json_state(bias),
    )


def detect_oscillation(record: ExperimentRecord, window: int = 4, tolerance: float = 0.0) -> OscillationReport:
    """Flag agents whose trailing states alternate with period 2.

    Over the last ``window`` states every agent flagged satisfies
    x(t) == x(t-2) and x(t) != x(t-1), both within ``tolerance``.
    """
    if window < MIN_OSCILLATION_ROUNDS:
        raise ValueError(f"window must be >= {MIN_OSCILLATION_ROUNDS}, got {window}")
    history = state_history(record)
    if history.shape[0] < MIN_OSCILLATION_ROUNDS:
        return OscillationReport(experiment=record.experiment, oscillating=False)
    tail = history[-min(window, history.shape[0]):]

    def distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.max(np.abs(a - b), axis=-1)

    repeats = distance(tail[2:], tail[:-2]) <= tolerance
    moves = distance(tail[2:], tail[1:-1]) > tolerance
    flagged = np.all(repeats & moves, axis=0)
    participants = [int(k) for k in np.flatnonzero(flagged)]
    return OscillationReport(
        experiment=record.experiment,
        oscillating=bool(participants),
        period=2 if participants else None,
        participants=participants,
    )


def detect_clusters(states: Sequence[State], eps: float, gap: float) -> ClusterReport:
    """Single-linkage gap clustering of final states.

    1-D states are sorted and split wherever neighbours differ by at least
    ``gap``; 2-D states are linked when their Euclidean distance is below
    ``gap``. The representative of a cluster is its member mean.
    """
    if not eps < gap:
        raise ValueError(f"eps {eps} must be below gap {gap}")
    if len(states) == 0:
        return ClusterReport(clusters=[], gap=gap, eps=eps)
    points = to_array(states)
    if points.shape[1] == 1:
        order = np.argsort(points[:, 0], kind="stable")
        groups: List[List[int]] = [[int(order[0])]]
        for prev, cur in zip(order, order[1:]):
            if points[cur, 0] - points[prev, 0] >= gap:
                groups.append([])
            groups[-1].append(int(cur))
    else:
        g = nx.Graph()
        g.add_nodes_from(range(len(points)))
        for i in range(len(points)):
            for j in range(i + 1, len(points)):
                if np.linalg.norm(points[i] - points[j]) < gap:
                    g.add_edge(i, j)
        groups = [list(c) for c in nx.connected_components(g)]

    clusters = []
    for members in groups:
        members = sorted(members)
        rep = population_mean(points[members])
        clusters.append(Cluster(representative=to_json_state(rep), members=members, spread=spread(points[members])))
    clusters.sort(key=lambda c: tuple(np.atleast_1d(c.representative)))
    return ClusterReport(clusters=clusters, gap=gap, eps=eps)


def scalar_bias(bias: State) -> float:
    """Signed bias for 1-D runs, Euclidean magnitude for 2-D runs."""
    if isinstance(bias, list):
        return float(np.linalg.norm(bias))
    return float(bias)


def group_key(record: ExperimentRecord) -> GroupKey:
    if record.group is not None:
        return record.group
    return GroupKey(n_a=len(record.initial_states), noise_profile="none")


def group_records(records: Iterable[ExperimentRecord]) -> Dict[GroupKey, List[ExperimentRecord]]:
    grouped: Dict[GroupKey, List[ExperimentRecord]] = defaultdict(list)
    for record in records:
        grouped[group_key(record)].append(record)
    return dict(grouped)


EpsArg = Union[float, Callable[[GroupKey], float]]


def summarize(grouped: Mapping[GroupKey, Sequence[ExperimentRecord]], eps: EpsArg) -> List[MonteCarloSummary]:
    """One summary per group, ordered by (n_a, noise_profile). Variances are population variances."""
    summaries = []
    for key in sorted(grouped, key=lambda k: (k.n_a, k.noise_profile)):
        records = grouped[key]
        if not records:
            raise ValueError(f"group {key} has no records")
        group_eps = eps(key) if callable(eps) else eps
        reports = [detect_consensus(r, group_eps) for r in records]
        biases = np.array([scalar_bias(rep.bias) for rep in reports])
        rounds = [rep.convergence_round for rep in reports if rep.consensus]
        mean_bias = math.fsum(biases) / len(biases)
        summaries.append(
            MonteCarloSummary(
                n_a=key.n_a,
                noise_profile=key.noise_profile,
                trials=len(records),
                mean_bias=mean_bias,
                var_bias=math.fsum((biases - mean_bias) ** 2) / len(biases),
                consensus_rate=sum(rep.consensus for rep in reports) / len(reports),
                mean_round=(sum(rounds) / len(rounds)) if rounds else None,
            )
        )
    return summaries


def convergence_frame(records: Sequence[ExperimentRecord], reports: Sequence[ConvergenceReport]) -> pd.DataFrame:
    rows = []
    for record, rep in zip(records, reports):
        rows.append({
            "experiment": rep.experiment,
            "consensus": rep.consensus,
            "consensus_value": _cell(rep.consensus_value),
            "convergence_round": rep.convergence_round,
            "final_spread": rep.final_spread,
            "bias": _cell(rep.bias),
            "fallbacks": record.fallbacks,
        })
    frame = pd.DataFrame(rows, columns=["experiment", "consensus", "consensus_value", "convergence_round",
                                        "final_spread", "bias", "fallbacks"])
    return frame.astype({"convergence_round": "Int64"})


def summary_frame(summaries: Sequence[MonteCarloSummary]) -> pd.DataFrame:
    columns = ["n_a", "noise_profile", "trials", "mean_bias", "var_bias", "consensus_rate", "mean_round"]
    return pd.DataFrame([s.model_dump() for s in summaries], columns=columns)


def trajectory_frame(records: Sequence[ExperimentRecord]) -> pd.DataFrame:
    """Long format: one row per (experiment, round, agent); round 0 holds the initial states."""
    rows = []
    two_d = False
    for record in records:
        history = state_history(record)
        two_d = two_d or history.shape[2] == 2
        for t, frame in enumerate(history):
            for k, state in enumerate(frame):
                row = {"experiment": record.experiment, "round": t, "agent": k, "state": float(state[0])}
                if state.shape[0] == 2:
                    row["state_y"] = float(state[1])
                rows.append(row)
    columns = ["experiment", "round", "agent", "state"] + (["state_y"] if two_d else [])
    return pd.DataFrame(rows, columns=columns)


def _cell(value: Optional[State]) -> Optional[str | float]:
    if isinstance(value, list):
        return "[" + ", ".join(repr(v) for v in value) + "]"
    return value
