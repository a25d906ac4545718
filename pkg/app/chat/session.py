"""Per-agent chat sessions."""
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import structlog

from app.chat.prompts import DEFAULT_TEMPLATE, PromptTemplate, render_role
from app.models.models import ChatEndpointSpec, LLMAgentSpec, Personality

logger = structlog.get_logger(__name__)


@dataclass
class AgentSession:
    """Conversation state of one agent across the rounds of one experiment.

    ``messages[0]`` is always the rendered role prompt as the system message.
    Sessions are owned by a single agent and never shared between requests.
    """
    agent_index: int
    personality: Personality = Personality.NONE
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.7
    retry_limit: int = 3
    history_window: Optional[int] = None
    dimension: int = 1
    template: PromptTemplate = DEFAULT_TEMPLATE
    messages: List[Dict[str, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.messages:
            self.messages.append({"role": "system", "content": render_role(self.personality, self.template)})

    @classmethod
    def from_spec(cls, agent_index: int, spec: LLMAgentSpec, endpoint: ChatEndpointSpec,
                  dimension: int = 1) -> "AgentSession":
        session = cls(
            agent_index=agent_index,
            personality=spec.personality,
            model=spec.model or endpoint.model,
            temperature=spec.temperature,
            retry_limit=endpoint.retry_limit if spec.retry_limit is None else spec.retry_limit,
            history_window=spec.history_window,
            dimension=dimension,
        )
        logger.debug("agent_session_created", agent=agent_index, personality=spec.personality.value)
        return session

    def add_user(self, content: str) -> None:
        self.messages.append({"role": "user", "content": content})

    def add_assistant(self, content: str) -> None:
        self.messages.append({"role": "assistant", "content": content})

    def rollback(self, length: int) -> None:
        """Drop messages appended after ``length`` (a failed round leaves no trace)."""
        del self.messages[max(1, length):]

    def window(self) -> List[Dict[str, str]]:
        """Messages to send: the system prompt plus the most recent ``history_window`` messages."""
        if self.history_window is None or len(self.messages) - 1 <= self.history_window:
            return list(self.messages)
        return [self.messages[0]] + self.messages[-self.history_window:]

    @property
    def rounds_completed(self) -> int:
        return sum(1 for m in self.messages if m["role"] == "assistant")
