"""
Colored console logging shared by the whole package. Every logger writes to
one stderr handler; the starting level comes from `METAREDUCE_LOG_LEVEL`.
"""
import logging
import os

from colorlog import ColoredFormatter

LOG_LEVEL_ENV = "METAREDUCE_LOG_LEVEL"


def _initial_level() -> int:
    name = os.environ.get(LOG_LEVEL_ENV, "INFO").strip().upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.INFO


def _console_handler(level: int) -> logging.StreamHandler:
    handler = logging.StreamHandler()
    handler.setLevel(level)
    handler.setFormatter(ColoredFormatter(
        "%(log_color)s%(asctime)s %(levelname)-8s %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        reset=True,
        log_colors={
            "DEBUG": "cyan",
            "INFO": "green",
            "WARNING": "yellow",
            "ERROR": "red",
            "CRITICAL": "red,bg_white",
        },
    ))
    return handler


_level = _initial_level()
_handler = _console_handler(_level)


def get_logger(name: str) -> logging.Logger:
    """Logger attached to the shared console handler."""
    logger = logging.getLogger(name)
    if _handler not in logger.handlers:
        logger.addHandler(_handler)
    logger.setLevel(_level)
    logger.propagate = False
    return logger


def set_level(level: int) -> None:
    """Change the level of the shared handler and of every logger attached to it."""
    global _level
    _level = level
    _handler.setLevel(level)
    for logger in logging.Logger.manager.loggerDict.values():
        if isinstance(logger, logging.Logger) and _handler in logger.handlers:
            logger.setLevel(level)


general_logger = get_logger("metareduce")
