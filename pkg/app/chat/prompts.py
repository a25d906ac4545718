"""Prompt templates for conversational agents.

Slots use the ``[...]`` notation: the first slot takes the agent's own
position, the second the positions it observes. Texts are kept exactly as the
agents are meant to read them, quirks included.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from app.models.models import Personality

PERSONALITY_SLOT = "[Personality Description]"
VALUE_SLOT = "[...]"

PERSONALITY_TEXT = {
    Personality.NONE: "",
    Personality.STUBBORN: "You are an extremely stubborn person, prefer to remain stationary.",
    Personality.SUGGESTIBLE: "You are an extremely suggestible person, prefer to move to someone else's position.",
}


@dataclass(frozen=True)
class PromptTemplate:
    role_template: str
    round0_two_agent: str
    round0_multi_agent: str
    later_two_agent: str
    later_multi_agent: str


DEFAULT_TEMPLATE = PromptTemplate(
    role_template="You are an agent moving in a one-dimensional space. [Personality Description]",
    round0_two_agent=(
        "Another agent is present in the space, and you need to gather. "
        "Your position is: [...] and the other agent's position is: [...]."
        "\"You need to choose a position to move to in order to gather, "
        "and briefly explain the reasoning behind your decision."
    ),
    round0_multi_agent=(
        "There are many other agents in the space, you all need to gather at the same position, "
        "your position is: [...], other people's positions are: [...]."
        "You need to choose a position to move to in order to gather, "
        "and briefly explain the reasoning behind your decision."
    ),
    later_two_agent=(
        "You have moved to [...], and the latest position of another agent is: [...]., "
        "please choose the position you want to move to next."
    ),
    later_multi_agent=(
        "You have now moved to [...], the positions of other agents are [...], "
        "please choose the position you want to move to next"
    ),
)

CLARIFY_1D = 'Please state the position you want to move to in the form "Position: <number>".'
CLARIFY_2D = 'Please state the position you want to move to in the form "Position: [x, y]".'


def format_number(value: float) -> str:
    """Shortest text that parses back to exactly ``value``; integral values drop the decimal point."""
    x = float(value)
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def format_state(state) -> str:
    arr = np.atleast_1d(np.asarray(state, dtype=float))
    if arr.shape[0] == 1:
        return format_number(arr[0])
    return "[" + ", ".join(format_number(v) for v in arr) + "]"


def format_states(states: Iterable) -> str:
    return "[" + ", ".join(format_state(s) for s in states) + "]"


def render_role(personality: Personality, template: PromptTemplate = DEFAULT_TEMPLATE) -> str:
    text = template.role_template.replace(PERSONALITY_SLOT, PERSONALITY_TEXT[personality])
    return text.rstrip()


def render_round(
    own,
    others: np.ndarray,
    round: int,
    template: PromptTemplate = DEFAULT_TEMPLATE,
) -> str:
    """User prompt for one round; two-agent wording iff exactly one neighbour is observed."""
    two_agent = len(others) == 1
    if round == 0:
        body = template.round0_two_agent if two_agent else template.round0_multi_agent
    else:
        body = template.later_two_agent if two_agent else template.later_multi_agent
    others_text = format_state(others[0]) if two_agent else format_states(others)
    body = body.replace(VALUE_SLOT, format_state(own), 1)
    return body.replace(VALUE_SLOT, others_text, 1)


def clarification(dimension: int) -> str:
    return CLARIFY_2D if dimension == 2 else CLARIFY_1D

