"""Exception hierarchy shared by the simulator, the chat backend and the CLI."""
from typing import List, Optional


class ConsensusError(Exception):
    """Root of every error raised on purpose by this package."""


class InvalidSizeError(ConsensusError, ValueError):
    pass


class InvalidEdgeError(ConsensusError, ValueError):
    pass


class AgentIndexError(ConsensusError, IndexError):
    pass


class InvalidObservationError(ConsensusError, ValueError):
    pass


class StrategySpecError(ConsensusError, ValueError):
    pass


class TimingConfigError(ConsensusError, ValueError):
    pass


class PositionParseError(ConsensusError):
    """No usable position could be extracted from an agent reply."""

    def __init__(self, reply: str):
        super().__init__(f"no position found in reply: {reply[:80]!r}")
        self.reply = reply


class BackendFailure(ConsensusError):
    """An agent backend gave up after exhausting its retries."""

    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


class SchemaVersionError(ConsensusError):
    def __init__(self, found: object, expected: int):
        super().__init__(f"records schema version {found!r} is not supported (expected {expected})")
        self.found = found
        self.expected = expected


class ConfigError(ConsensusError):
    """Invalid experiment configuration, with one diagnostic per offending field."""

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or [message]

    @classmethod
    def from_validation(cls, exc: Exception, source: str = "config") -> "ConfigError":
        """Build from a pydantic ValidationError, one ``field.path: message`` line per error."""
        lines: List[str] = []
        errors = getattr(exc, "errors", None)
        if callable(errors):
            for err in errors():
                loc = ".".join(str(part) for part in err.get("loc", ())) or "<root>"
                lines.append(f"{loc}: {err.get('msg')}")
        if not lines:
            lines.append(str(exc))
        return cls(f"invalid {source}: {len(lines)} problem(s)", lines)


class TransientChatError(ConsensusError):
    """Network failure, timeout or retryable HTTP status from the chat endpoint."""

    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status


class ChatRequestError(ConsensusError):
    """The chat endpoint rejected the request; retrying will not help."""

    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status
