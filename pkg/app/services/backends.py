"""Agent backends behind a single ``act(observation)`` interface."""
from __future__ import annotations

import time
from typing import Callable, List, Optional, Protocol, Sequence, Tuple

import httpx
import numpy as np
import structlog

from app.chat.client import ChatEndpointClient
from app.chat.handler import LLMAgentBackend
from app.chat.session import AgentSession
from app.models.models import ChatEndpointSpec, LLMAgentSpec, StrategySpec
from app.services.strategy import Observation, StepResult, decide, reasoning_for
from app.utils.seeding import agent_rngs

logger = structlog.get_logger(__name__)


class AgentBackend(Protocol):
    name: str

    def act(self, obs: Observation) -> StepResult: ...


class StrategyBackend:
    """Rule-based agent with its own random stream."""

    def __init__(self, spec: StrategySpec, rng: np.random.Generator,
                 bounds: Optional[Tuple[float, float]]):
        self.spec = spec
        self.rng = rng
        self.bounds = bounds
        self.name = f"strategy:{spec.label()}"

    def act(self, obs: Observation) -> StepResult:
        state = decide(self.spec, obs, self.rng, self.bounds)
        return StepResult(state=state, reasoning=f"{reasoning_for(self.spec)} [{self.spec.label()}]")


def make_http_client(endpoint: ChatEndpointSpec) -> Optional[httpx.Client]:
    """HTTP client handed to the chat SDK; None lets the SDK build its own.

    This is the seam tests patch to route requests to the in-process mock app
    or a scripted transport instead of a real server.
    """
    return None


class BackendPool:
    """The backends of one experiment plus the shared endpoint client they talk through."""

    def __init__(self, backends: List[AgentBackend], client: Optional[ChatEndpointClient] = None):
        self.backends = backends
        self.client = client

    def __len__(self) -> int:
        return len(self.backends)

    def __getitem__(self, k: int) -> AgentBackend:
        return self.backends[k]

    def close(self) -> None:
        if self.client is not None:
            self.client.close()

    def __enter__(self) -> "BackendPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def build_backends(
    specs: Sequence[StrategySpec | LLMAgentSpec],
    seed: int,
    dimension: int,
    bounds: Optional[Tuple[float, float]],
    endpoint: Optional[ChatEndpointSpec] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> BackendPool:
    """Fresh backends for one experiment; LLM sessions start from the role prompt."""
    rngs = agent_rngs(seed, len(specs))
    client: Optional[ChatEndpointClient] = None
    backends: List[AgentBackend] = []
    for k, spec in enumerate(specs):
        if isinstance(spec, StrategySpec):
            backends.append(StrategyBackend(spec, rngs[k], bounds))
            continue
        if endpoint is None:
            raise ValueError("LLM agents need an llm_endpoint")
        if client is None:
            client = ChatEndpointClient(endpoint, http_client=make_http_client(endpoint))
        session = AgentSession.from_spec(k, spec, endpoint, dimension=dimension)
        backends.append(LLMAgentBackend(session, client, endpoint.backoff_base, sleep))
    return BackendPool(backends, client)
