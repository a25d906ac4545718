from datetime import datetime, timezone

from fastapi import APIRouter

from app import __version__
from app.core.settings import get_settings

router = APIRouter()


@router.get("/health")
async def health():
    """
    Liveness of the mock chat endpoint.

    The mock has no downstream dependencies, so it is healthy whenever it
    answers. The response names the model it reports and the tool version.
    """
    return {
        "status": "healthy",
        "model": get_settings().llm_model,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
    }
