"""
Monte Carlo sweep over agent counts and temperature profiles.

A profile names a sampling temperature. LLM agents receive it as their
temperature; strategy agents translate it into Gaussian noise on the
averaging rule (``t0.0`` is noiseless, ``t0.7`` uses the calibrated sigma).
"""
from __future__ import annotations

from typing import Dict, List, Optional, Sequence

from app.core.settings import get_settings
from app.models.models import (
    ChatEndpointSpec,
    ExperimentConfig,
    GroupKey,
    LLMAgentSpec,
    StrategyKind,
    StrategySpec,
)
from app.utils.seeding import derive_seed

PROFILE_TEMPERATURES: Dict[str, float] = {"t0.0": 0.0, "t0.7": 0.7}
DEFAULT_AGENT_COUNTS = (2, 4, 6, 8)
DEFAULT_TRIALS = 300
SWEEP_NAMESPACE = 2


def profile_sigma(profile: str) -> float:
    if profile not in PROFILE_TEMPERATURES:
        raise ValueError(f"unknown noise profile {profile!r}; known: {sorted(PROFILE_TEMPERATURES)}")
    return 0.0 if PROFILE_TEMPERATURES[profile] == 0.0 else get_settings().noise_sigma_t07


def profile_eps(key: GroupKey) -> float:
    """Consensus threshold for a group: exact for noiseless profiles, loose otherwise."""
    settings = get_settings()
    return settings.eps_exact if PROFILE_TEMPERATURES.get(key.noise_profile) == 0.0 else settings.eps_noisy


def agent_for_profile(profile: str, backend: str = "strategy"):
    if backend == "llm":
        return LLMAgentSpec(temperature=PROFILE_TEMPERATURES[profile])
    return StrategySpec(kind=StrategyKind.AVERAGE_INCLUDE_SELF, noise_sigma=profile_sigma(profile))


def sweep_configs(
    agent_counts: Sequence[int] = DEFAULT_AGENT_COUNTS,
    profiles: Sequence[str] = tuple(PROFILE_TEMPERATURES),
    trials: int = DEFAULT_TRIALS,
    rounds: int = 9,
    seed: int = 0,
    backend: str = "strategy",
    llm_endpoint: Optional[ChatEndpointSpec] = None,
) -> List[ExperimentConfig]:
    """One batch config per (agent count, profile), each with its own derived seed and group tag."""
    configs = []
    for n_a in agent_counts:
        for p, profile in enumerate(profiles):
            spec = agent_for_profile(profile, backend)
            configs.append(
                ExperimentConfig(
                    n_e=trials,
                    n_a=n_a,
                    n_r=rounds,
                    agents=[spec] * n_a,
                    seed=derive_seed(seed, SWEEP_NAMESPACE, n_a, p),
                    llm_endpoint=llm_endpoint if backend == "llm" else None,
                    group=GroupKey(n_a=n_a, noise_profile=profile),
                )
            )
    return configs
