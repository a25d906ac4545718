"""
Position parser for agent replies.

Replies are free text. The position is taken from the numbers following the
last mention of the word "position" ("Position: 50", "**Position**: [3, 4]",
"my new position is 42") that still has enough numbers after it; failing
that, from the last number (or last pair of numbers for 2-D states) in the
reply.
"""
import math
import re
from typing import List

import numpy as np
import structlog

from app.core.errors import PositionParseError

logger = structlog.get_logger(__name__)

NUMBER = r"(?<![\w.])[-+]?(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][-+]?\d+)?"
_NUMBER_RE = re.compile(NUMBER)
_LABEL_RE = re.compile(r"\bposition\b", re.IGNORECASE)


def _numbers(text: str) -> List[float]:
    return [float(m.group(0)) for m in _NUMBER_RE.finditer(text)]


def _finite(values: List[float], reply: str) -> np.ndarray:
    if not all(math.isfinite(v) for v in values):
        raise PositionParseError(reply)
    return np.array(values, dtype=float)


def parse_position(reply: str, dimension: int = 1) -> np.ndarray:
    """Extract a ``dimension``-sized state from ``reply`` or raise PositionParseError."""
    labels = list(_LABEL_RE.finditer(reply))
    for label in reversed(labels):
        after = _numbers(reply[label.end():])
        if len(after) >= dimension:
            return _finite(after[:dimension], reply)
    values = _numbers(reply)
    if len(values) < dimension:
        logger.debug("position_not_found", reply=reply[:120])
        raise PositionParseError(reply)
    return _finite(values[-dimension:], reply)
