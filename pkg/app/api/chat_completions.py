"""
OpenAI-compatible chat-completions endpoint backed by the averaging rule.

The mock reads the agent's own position and the observed positions out of the
most recent round prompt and answers with their exact mean in the canonical
"Reasoning: ...\\nPosition: <value>" form, so a run against it reproduces the
average-including-self strategy run.
"""
import re
import time
import uuid
from typing import List, Optional, Tuple

import numpy as np
import structlog
from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, ConfigDict

from app.chat.parser import NUMBER
from app.chat.prompts import format_state
from app.services.strategy import mean_state

logger = structlog.get_logger(__name__)

router = APIRouter()

_STATE = rf"\[[^\]]*\]|{NUMBER}"
_OWN_RE = re.compile(rf"(?:[Yy]our position is: |moved to )({_STATE})")
_OTHERS_RE = re.compile(
    rf"(?:other agent's position is: |another agent is: |other people's positions are: |other agents are )"
    rf"(\[\[.*?\]\]|{_STATE})"
)
_NUMBER_RE = re.compile(NUMBER)

REASONING = "Reasoning: Moving to the average of my position and the positions I can see."


class ChatMessage(BaseModel):
    role: str
    content: Optional[str] = ""


class ChatCompletionRequest(BaseModel):
    model_config = ConfigDict(extra="allow")

    model: str
    messages: List[ChatMessage]
    temperature: float = 1.0


def _values(text: str) -> List[float]:
    return [float(v) for v in _NUMBER_RE.findall(text)]


def positions_in(prompt: str) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """(own, others) parsed from a round prompt, or None if it is not one."""
    own_match = _OWN_RE.search(prompt)
    others_match = _OTHERS_RE.search(prompt)
    if own_match is None or others_match is None:
        return None
    dimension = 2 if own_match.group(1).startswith("[") else 1
    own = np.array(_values(own_match.group(1)), dtype=float)
    others = np.array(_values(others_match.group(1)), dtype=float)
    if own.shape[0] != dimension or others.shape[0] == 0 or others.shape[0] % dimension:
        return None
    return own, others.reshape(-1, dimension)


def average_reply(messages: List[ChatMessage]) -> str:
    """Reply to the latest user message that carries positions; clarification requests fall through to it."""
    for message in reversed(messages):
        if message.role != "user":
            continue
        parsed = positions_in(message.content or "")
        if parsed is not None:
            own, others = parsed
            target = mean_state(np.vstack([own, others]))
            return f"{REASONING}\nPosition: {format_state(target)}"
    raise HTTPException(status_code=400, detail="no positions found in the conversation")


@router.post("/v1/chat/completions")
def chat_completions(request: ChatCompletionRequest):
    content = average_reply(request.messages)
    logger.debug("mock_completion", model=request.model, messages=len(request.messages))
    return {
        "id": f"chatcmpl-{uuid.uuid4().hex[:24]}",
        "object": "chat.completion",
        "created": int(time.time()),
        "model": request.model,
        "choices": [
            {
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": "stop",
            }
        ],
        "usage": {"prompt_tokens": 0, "completion_tokens": 0, "total_tokens": 0},
    }
