"""Request-scoped logger dependency."""

from fastapi import Request
from loguru import logger


def get_request_logger(request: Request):
    """Logger bound to the id the logging middleware assigned, plus the route path."""
    request_id = getattr(request.state, "request_id", None) or "no-request-id"
    return logger.bind(request_id=request_id, path=request.url.path)
