"""
Shared fixtures.

The mock chat-completions app is reached in-process: the HTTP client handed
to the OpenAI SDK is a FastAPI TestClient, so no socket is opened.
"""
import json
from typing import Callable, List

import httpx
import pytest
from fastapi.testclient import TestClient

from app.core import metrics
from app.main import create_app
from app.models.models import ChatEndpointSpec

MOCK_BASE_URL = "http://testserver/v1"


@pytest.fixture(autouse=True)
def reset_metrics():
    metrics.reset()
    yield
    metrics.reset()


@pytest.fixture
def mock_endpoint(monkeypatch) -> ChatEndpointSpec:
    """Route every chat client built by the engine to the in-process mock app."""
    monkeypatch.setattr("app.services.backends.make_http_client", lambda endpoint: TestClient(create_app()))
    return ChatEndpointSpec(base_url=MOCK_BASE_URL, retry_limit=2, backoff_base=0.0)


def completion(content: str) -> dict:
    return {
        "id": "chatcmpl-test",
        "object": "chat.completion",
        "created": 0,
        "model": "gpt-3.5-turbo",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": 0, "completion_tokens": 0, "total_tokens": 0},
    }


class ScriptedEndpoint:
    """httpx handler that plays back a list of outcomes, one per request.

    An outcome is a reply string, an int HTTP status, raw bytes sent as a
    plain-text 200 body, or an exception class raised as a transport
    failure. The last outcome repeats.
    """

    def __init__(self, outcomes: List):
        self.outcomes = outcomes
        self.requests: List[dict] = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(json.loads(request.content))
        outcome = self.outcomes[min(len(self.requests), len(self.outcomes)) - 1]
        if isinstance(outcome, type) and issubclass(outcome, Exception):
            raise outcome("scripted failure", request=request)
        if isinstance(outcome, int):
            return httpx.Response(outcome, json={"error": {"message": "scripted", "type": "server_error"}})
        if isinstance(outcome, bytes):
            return httpx.Response(200, content=outcome, headers={"content-type": "text/plain"})
        return httpx.Response(200, json=completion(outcome))

    def client(self) -> httpx.Client:
        return httpx.Client(transport=httpx.MockTransport(self))


@pytest.fixture
def scripted() -> Callable[[List], ScriptedEndpoint]:
    return ScriptedEndpoint


@pytest.fixture
def no_sleep() -> List[float]:
    """Collects backoff delays instead of sleeping; pass ``delays.append`` as ``sleep``."""
    return []
