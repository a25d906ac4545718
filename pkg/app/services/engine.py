"""
Experiment engine.

Runs n_e experiments of n_a agents for n_r rounds. Within a round every agent
observes the same snapshot of the state vector, all decisions are collected
behind a barrier, and only then does the vector advance.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from app.core.errors import BackendFailure
from app.core.metrics import record_fallback
from app.models.models import Decision, ExperimentConfig, ExperimentRecord, RoundRecord
from app.services.backends import BackendPool, build_backends
from app.services.strategy import Observation, StepResult
from app.services.topology import ConnectivityMatrix, build_topology
from app.utils.seeding import experiment_seed, fingerprint, init_rng
from app.utils.states import spread, to_array, to_json_state, to_json_states

logger = structlog.get_logger(__name__)


def config_fingerprint(config: ExperimentConfig) -> str:
    return fingerprint([config.model_dump_json().encode()])


def observe(states: np.ndarray, topology: ConnectivityMatrix, round: int) -> List[Observation]:
    """Snapshot observations for every agent; neighbours in ascending index order."""
    observations = []
    for k in range(states.shape[0]):
        ids = topology.neighbors(k)
        observations.append(Observation(states[k].copy(), states[ids].copy(), round, tuple(ids)))
    return observations


def collect_decisions(
    pool: BackendPool,
    observations: Sequence[Observation],
    parallelism: int = 1,
    order: Optional[Sequence[int]] = None,
) -> List[Tuple[StepResult, Optional[str]]]:
    """Query every agent and return (result, error) pairs in agent-index order.

    A backend that fails holds its previous state; the error text is returned
    alongside. ``order`` only changes the evaluation order, never the result.
    """
    order = list(order) if order is not None else list(range(len(observations)))

    def one(k: int) -> Tuple[StepResult, Optional[str]]:
        obs = observations[k]
        try:
            return pool[k].act(obs), None
        except BackendFailure as e:
            record_fallback(pool[k].name)
            logger.warning("backend_fallback", agent=k, round=obs.round, error=str(e), attempts=e.attempts)
            return StepResult(state=obs.self_state.copy(), reasoning="", attempts=e.attempts), str(e)

    results: List[Optional[Tuple[StepResult, Optional[str]]]] = [None] * len(observations)
    if parallelism > 1 and len(order) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as executor:
            futures = {k: executor.submit(one, k) for k in order}
            for k, fut in futures.items():
                results[k] = fut.result()
    else:
        for k in order:
            results[k] = one(k)
    return results  # type: ignore[return-value]


def initial_states(config: ExperimentConfig, seed: int) -> np.ndarray:
    if config.init_states is not None:
        return to_array(config.init_states, config.dimension)
    lo, hi = config.init_range
    return init_rng(seed).uniform(lo, hi, size=(config.n_a, config.dimension))


def run_experiment(
    config: ExperimentConfig,
    experiment_index: int,
    evaluation_order: Optional[Sequence[int]] = None,
) -> ExperimentRecord:
    seed = experiment_seed(config.seed, experiment_index)
    topology = build_topology(config.topology, config.n_a)
    bounds = config.bounds()
    x = initial_states(config, seed)
    start = x.copy()
    rounds: List[RoundRecord] = []
    fallbacks = 0
    log = logger.bind(experiment=experiment_index, n_a=config.n_a)
    log.info("experiment_started", seed=seed, n_r=config.n_r)

    with build_backends(config.agents, seed, config.dimension, bounds, config.llm_endpoint) as pool:
        for r in range(config.n_r):
            results = collect_decisions(pool, observe(x, topology, r), config.parallelism, evaluation_order)
            nxt = np.vstack([res.state for res, _ in results])
            if bounds is not None:
                nxt = np.clip(nxt, bounds[0], bounds[1])
            decisions = [
                Decision(agent=k, state=to_json_state(nxt[k]), reasoning=res.reasoning,
                         error=err, attempts=res.attempts)
                for k, (res, err) in enumerate(results)
            ]
            fallbacks += sum(1 for _, err in results if err is not None)
            rounds.append(RoundRecord(round=r, states_before=to_json_states(x),
                                      decisions=decisions, states_after=to_json_states(nxt)))
            x = nxt
            log.debug("round_completed", round=r, spread=spread(x))
            if config.early_stop_eps is not None and spread(x) < config.early_stop_eps:
                log.info("early_stop", round=r)
                break

    log.info("experiment_finished", rounds=len(rounds), spread=spread(x), fallbacks=fallbacks)
    return ExperimentRecord(
        experiment=experiment_index,
        seed=seed,
        config_fingerprint=config_fingerprint(config),
        group=config.group,
        initial_states=to_json_states(start),
        rounds=rounds,
        final_states=to_json_states(x),
        fallbacks=fallbacks,
    )


def iter_batch(config: ExperimentConfig, jobs: int = 1) -> Iterator[ExperimentRecord]:
    """Records of all n_e experiments, yielded in index order whatever ``jobs`` is."""
    indices = range(config.n_e)
    if jobs <= 1:
        for i in indices:
            yield run_experiment(config, i)
        return
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        yield from executor.map(lambda i: run_experiment(config, i), indices)


def run_batch(config: ExperimentConfig, jobs: int = 1) -> List[ExperimentRecord]:
    return list(iter_batch(config, jobs))
