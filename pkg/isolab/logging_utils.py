"""
Logging Utilities
=================

Structured logging for isolab. ``setup_logging`` installs the stdlib
handlers (console and optional file); structlog renders key/value events
through them. ``MethodTracer`` and the ``traced`` decorator log entry, exit
and failures of long-running operations.
"""

import functools
import logging
import os
import sys
import time
from typing import Any, Callable, Optional, TypeVar

import structlog

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_FILE = "isolab.log"

F = TypeVar("F", bound=Callable[..., Any])


def _configure_structlog() -> None:
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.contextvars.merge_contextvars,
            structlog.processors.format_exc_info,
            structlog.processors.KeyValueRenderer(key_order=["event"], sort_keys=True),
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


_configure_structlog()


def setup_logging(level: str = "INFO", log_dir: Optional[str] = None) -> Optional[str]:
    """Configure logging with console and optional file handlers"""
    handlers: list = [logging.StreamHandler(sys.stderr)]
    log_path = None
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        log_path = os.path.join(log_dir, LOG_FILE)
        handlers.append(logging.FileHandler(log_path, encoding='utf-8'))

    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
    logging.disable(logging.NOTSET)
    return log_path


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    return structlog.get_logger(name)


class MethodTracer:
    """Method-level tracing on top of a structlog logger"""

    def __init__(self, name: str = "isolab.trace"):
        self.logger = get_logger(name)

    def log_method_entry(self, method: str, params: Any, cls: str = ""):
        self.logger.debug("method_entry", method=f"{cls}.{method}" if cls else method, params=params)

    def log_method_exit(self, method: str, result: Any, cls: str = "", seconds: float = 0.0):
        self.logger.debug("method_exit", method=f"{cls}.{method}" if cls else method,
                          result=result, seconds=round(seconds, 6))

    def log_decision(self, decision: str, reasoning: str, cls: str = ""):
        self.logger.info("decision", component=cls, decision=decision, reasoning=reasoning)

    def log_error(self, error: Exception, context: str = "", cls: str = ""):
        self.logger.error("error", component=cls, context=context,
                          error_type=type(error).__name__, error=str(error))


tracer = MethodTracer()


def traced(func: F) -> F:
    """Decorator for automatic entry/exit logging of long-running operations"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        name = func.__qualname__
        tracer.log_method_entry(name, {"args": len(args), "kwargs": sorted(kwargs)})
        started = time.perf_counter()
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            tracer.log_error(e, f"in {name}")
            raise
        tracer.log_method_exit(name, "Success", seconds=time.perf_counter() - started)
        return result

    return wrapper  # type: ignore[return-value]
