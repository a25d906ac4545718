from fastapi import FastAPI

from app import __version__
from app.api.chat_completions import router as chat_completions_router
from app.api.health import router as health_router
from app.api.metrics import router as metrics_router
from app.core.logging import RequestIDMiddleware
from app.core.sentry import init_sentry


def create_app() -> FastAPI:
    """Mock chat-completions server used for offline runs of LLM agents."""
    app = FastAPI(title="Consensus mock LLM", version=__version__)
    init_sentry()
    app.add_middleware(RequestIDMiddleware)
    app.include_router(metrics_router)
    app.include_router(health_router)
    app.include_router(chat_completions_router)
    return app
