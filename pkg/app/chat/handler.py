"""Drives one agent session through one negotiation round."""
import time
from typing import Callable

import structlog

from app.chat.client import ChatEndpointClient
from app.chat.parser import parse_position
from app.chat.prompts import clarification, render_round
from app.chat.session import AgentSession
from app.core.errors import BackendFailure, ChatRequestError, PositionParseError, TransientChatError
from app.core.metrics import record_retry
from app.services.strategy import Observation, StepResult
from app.utils.retry import retry

logger = structlog.get_logger(__name__)


def render_prompt(session: AgentSession, obs: Observation) -> str:
    return render_round(obs.self_state, obs.neighbor_states, obs.round, session.template)


def step_session(
    session: AgentSession,
    obs: Observation,
    client: ChatEndpointClient,
    backoff_base: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> StepResult:
    """Ask the agent for its next position.

    Every request counts against one budget of ``retry_limit + 1`` attempts,
    whether it failed on the wire or produced an unparsable reply. Transport
    failures back off exponentially; unparsable replies are answered with a
    request for the canonical "Position: <number>" form. A round that
    succeeds leaves exactly the round prompt and the accepted reply in the
    history, so clarification exchanges never pile up. When the budget runs
    out the session is rolled back to where the round started and
    BackendFailure is raised.
    """
    obs.validate()
    mark = len(session.messages)
    prompt = render_prompt(session, obs)
    session.add_user(prompt)
    budget = session.retry_limit + 1
    attempts = 0

    def call(_: int) -> str:
        nonlocal attempts
        attempts += 1
        return client.complete(session.window(), session.model, session.temperature)

    def on_retry(attempt: int, exc: BaseException, delay: float) -> None:
        record_retry("transport")
        logger.warning("llm_retry", agent=session.agent_index, attempt=attempts, error=str(exc), delay=round(delay, 3))

    while attempts < budget:
        try:
            reply = retry(call, attempts=budget - attempts, base=backoff_base,
                          jitter=0.0, retry_on=(TransientChatError,), on_retry=on_retry, sleep=sleep)
        except (TransientChatError, ChatRequestError) as e:
            session.rollback(mark)
            raise BackendFailure(f"agent {session.agent_index}: {e}", attempts) from e
        try:
            state = parse_position(reply, obs.dimension)
        except PositionParseError:
            session.add_assistant(reply)
            if attempts >= budget:
                break
            record_retry("parse")
            logger.info("llm_reask", agent=session.agent_index, attempt=attempts)
            session.add_user(clarification(obs.dimension))
            continue
        if attempts > 1:
            # keep one prompt and one reply per round
            session.rollback(mark)
            session.add_user(prompt)
        session.add_assistant(reply)
        return StepResult(state=state, reasoning=reply, attempts=attempts)

    session.rollback(mark)
    raise BackendFailure(f"agent {session.agent_index}: no position after {attempts} attempts", attempts)


class LLMAgentBackend:
    """Engine-facing backend backed by a chat session."""

    def __init__(self, session: AgentSession, client: ChatEndpointClient, backoff_base: float = 0.5,
                 sleep: Callable[[float], None] = time.sleep):
        self.session = session
        self.client = client
        self.backoff_base = backoff_base
        self.sleep = sleep
        self.name = f"llm:{session.personality.value}"

    def act(self, obs: Observation) -> StepResult:
        return step_session(self.session, obs, self.client, self.backoff_base, self.sleep)
