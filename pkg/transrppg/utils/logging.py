"""Logging utilities."""
import functools
import logging
import os
from time import perf_counter
from typing import Any, Callable, Optional

_level_override: Optional[str] = None


def set_log_level(level: str) -> None:
    """Override the level used by every logger obtained afterwards."""
    global _level_override
    _level_override = level.upper()
    for name in list(logging.root.manager.loggerDict):
        if name.startswith("transrppg"):
            logging.getLogger(name).setLevel(getattr(logging, _level_override))


def get_logger(name: str) -> logging.Logger:
    """Get a configured logger instance."""
    logger = logging.getLogger(name)
    level = _level_override or os.environ.get("TRANSRPPG_LOG_LEVEL", "INFO").upper()
    logger.setLevel(getattr(logging, level, logging.INFO))
    return logger


def log_execution(func: Callable) -> Callable:
    """Decorator to log a long-running operation with timing."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> Any:
        logger = get_logger(func.__module__)
        start = perf_counter()

        logger.info(f"⚡ Running {func.__name__}")
        logger.debug(f"Arguments: args={len(args)} kwargs={sorted(kwargs)}")

        try:
            result = func(*args, **kwargs)
            duration = perf_counter() - start
            logger.info(f"✅ {func.__name__} completed in {duration:.3f}s")
            return result
        except Exception as e:
            duration = perf_counter() - start
            logger.error(f"❌ {func.__name__} failed after {duration:.3f}s: {e}")
            raise

    return wrapper
