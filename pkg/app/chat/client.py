"""
Chat-completions endpoint client.

Talks to any OpenAI-compatible server (a hosted model or the in-repo mock).
Retries are handled by the caller, so the SDK's own retry loop is disabled.
One client is shared by every LLM agent of an experiment; at most
``endpoint.parallelism`` requests are in flight through it at once.
"""
import os
import threading
import time
from typing import Dict, List, Optional

import httpx
import structlog
from openai import APIConnectionError, APIError, APIStatusError, OpenAI

from app.core.errors import ChatRequestError, TransientChatError
from app.core.metrics import record
from app.models.models import ChatEndpointSpec

logger = structlog.get_logger(__name__)

RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


class ChatEndpointClient:
    """Thin wrapper over the OpenAI SDK bound to one ChatEndpointSpec."""

    def __init__(self, endpoint: ChatEndpointSpec, http_client: Optional[httpx.Client] = None):
        self.endpoint = endpoint
        # the SDK refuses an empty key; unauthenticated local servers accept any value
        api_key = os.getenv(endpoint.api_key_env) or "unset"
        self._client = OpenAI(
            api_key=api_key,
            base_url=endpoint.base_url,
            timeout=endpoint.timeout_seconds,
            max_retries=0,
            http_client=http_client,
        )
        self._slots = threading.BoundedSemaphore(endpoint.parallelism)

    def complete(self, messages: List[Dict[str, str]], model: Optional[str] = None,
                 temperature: float = 0.7) -> str:
        """Send the full message list and return the first choice's content."""
        with self._slots:
            response = self._create(messages, model, temperature)
        try:
            content = response.choices[0].message.content
        except (AttributeError, IndexError, TypeError) as e:
            # non-JSON bodies come back from the SDK as plain text
            logger.warning("chat_malformed_response", body_type=type(response).__name__)
            raise TransientChatError("chat endpoint returned a malformed completion") from e
        return (content or "").strip()

    def _create(self, messages: List[Dict[str, str]], model: Optional[str], temperature: float):
        start = time.time()
        status = 200
        try:
            return self._client.chat.completions.create(
                model=model or self.endpoint.model,
                temperature=temperature,
                messages=messages,
            )
        except APIStatusError as e:
            status = e.status_code
            if status in RETRYABLE_STATUS:
                raise TransientChatError(f"chat endpoint returned {status}", status) from e
            raise ChatRequestError(f"chat endpoint rejected request with {status}", status) from e
        except APIConnectionError as e:
            status = 599
            raise TransientChatError(f"chat endpoint unreachable: {type(e).__name__}") from e
        except APIError as e:
            status = 502
            raise TransientChatError(f"chat endpoint sent an unreadable response: {type(e).__name__}") from e
        finally:
            record("chat.completions", int((time.time() - start) * 1000), status)

    def close(self) -> None:
        self._client.close()
