import os
import sentry_sdk
from sentry_sdk.integrations.httpx import HttpxIntegration

from app.core.settings import get_settings


def init_sentry() -> bool:
    """Initialize Sentry error tracking for CLI runs.

    Configuration via .env:
    - SENTRY_DSN: project DSN; reporting is disabled when unset
    - SENTRY_TRACES_SAMPLE_RATE: performance sampling (0.0-1.0)
    - ENV: environment name (dev/staging/prod)

    Returns True when reporting was enabled.
    """
    dsn = os.getenv("SENTRY_DSN")
    if not dsn:
        return False

    sentry_sdk.init(
        dsn=dsn,
        environment=get_settings().env,
        traces_sample_rate=float(os.getenv("SENTRY_TRACES_SAMPLE_RATE", "0.0")),
        integrations=[
            HttpxIntegration(),  # chat-completions calls
        ],
        # prompts and replies carry no personal data, API keys stay out of events
        send_default_pii=False,
        attach_stacktrace=True,
        release=os.getenv("SENTRY_RELEASE"),
    )
    return True
