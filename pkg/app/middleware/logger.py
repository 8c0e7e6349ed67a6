"""Middleware to log requests and responses."""

import time
from uuid import uuid4

from fastapi import Request
from loguru import logger


async def logging_middleware(request: Request, call_next):
    """Tag the request with an id and log method, path, status and duration."""
    request.state.request_id = uuid4().hex
    start_time = time.perf_counter()
    response = None
    try:
        response = await call_next(request)
        response.headers["X-Request-ID"] = request.state.request_id
        return response
    finally:
        process_time = (time.perf_counter() - start_time) * 1000

        logger.info(
            "HTTP request completed",
            request_id=request.state.request_id,
            method=request.method,
            path=request.url.path,
            status_code=getattr(response, "status_code", "N/A"),
            duration_ms=round(process_time, 2),
            client=request.client.host if request.client else None,
        )
