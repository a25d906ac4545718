import logging
import sys
import time
import uuid
from typing import Callable

import structlog
from fastapi import Request
from starlette.middleware.base import BaseHTTPMiddleware

from app.core.metrics import record
from app.core.settings import get_settings

logger = structlog.get_logger("consensus")


def configure_logging(level: str | None = None, fmt: str | None = None) -> None:
    """Route structlog through stdlib logging on stderr; stdout stays free for data."""
    settings = get_settings()
    level_name = (level or settings.log_level).upper()
    renderer = (
        structlog.dev.ConsoleRenderer()
        if (fmt or settings.log_format) == "console"
        else structlog.processors.JSONRenderer(sort_keys=True)
    )
    logging.basicConfig(level=level_name, stream=sys.stderr, format="%(message)s", force=True)
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(logging.getLevelName(level_name)),
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=False,
    )


def mask_bearer(value: str) -> str:
    if value.startswith("Bearer "):
        token = value[len("Bearer "):]
        tail = token[-4:] if len(token) > 8 else ""
        return f"Bearer ****{tail}"
    return value


class RequestIDMiddleware(BaseHTTPMiddleware):
    async def dispatch(self, request: Request, call_next: Callable):
        start = time.time()
        req_id = request.headers.get("X-Request-ID") or str(uuid.uuid4())
        status = 500
        try:
            response = await call_next(request)
            status = response.status_code
        except Exception:
            logger.exception("unhandled_error", request_id=req_id)
            raise
        finally:
            duration_ms = int((time.time() - start) * 1000)
            logger.info(
                "request",
                request_id=req_id,
                method=request.method,
                path=request.url.path,
                status=status,
                duration_ms=duration_ms,
                authorization=mask_bearer(request.headers.get("Authorization", "")),
            )
            try:
                record(request.url.path, duration_ms, status)
            except Exception:
                pass
        response.headers["X-Request-ID"] = req_id
        return response

__all__ = ["RequestIDMiddleware", "configure_logging", "logger", "mask_bearer"]
