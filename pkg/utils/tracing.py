import os

import structlog

log = structlog.get_logger(__name__)


def init_tracing() -> bool:
    """
    Checks if Langfuse credentials exist in the environment.
    The Langfuse Python SDK picks up on its own:
    - LANGFUSE_SECRET_KEY
    - LANGFUSE_PUBLIC_KEY
    - LANGFUSE_HOST

    Returns:
        True when tracing is active
    """
    secret_key = os.getenv("LANGFUSE_SECRET_KEY")
    public_key = os.getenv("LANGFUSE_PUBLIC_KEY")

    if secret_key and public_key:
        log.info("tracing_enabled", host=os.getenv("LANGFUSE_HOST", "default"))
        return True
    log.info("tracing_inactive", reason="langfuse credentials missing")
    return False
