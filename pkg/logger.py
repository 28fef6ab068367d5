# filename: logger.py
import logging
import os
from typing import Optional
from rich.logging import RichHandler
from config import LOG_LEVEL, LOG_FILE, LOG_FORMAT, LOG_DATE_FORMAT

# Ensure logging level is valid
numeric_level = getattr(logging, LOG_LEVEL.upper(), None)
if not isinstance(numeric_level, int):
    raise ValueError(f"Invalid log level: {LOG_LEVEL}")

# Configure Rich Handler for console output
rich_handler = RichHandler(
    rich_tracebacks=True,
    show_path=False,
    keywords=["Gibbs", "MH", "Volume", "Quadrature", "Sweep", "Select", "[WARNING]", "[ERROR]"]
)
rich_handler.setFormatter(logging.Formatter(fmt="%(message)s", datefmt="[%X]"))

# File handler is attached lazily so that importing the library never creates files
file_handler: Optional[logging.FileHandler] = None
_loggers: dict = {}


def _make_file_handler(path: str) -> logging.FileHandler:
    handler = logging.FileHandler(path, mode='a', encoding='utf-8')
    handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt=LOG_DATE_FORMAT))
    return handler


def get_logger(name: str) -> logging.Logger:
    """Configures and returns a logger instance."""
    logger = logging.getLogger(name)
    logger.setLevel(numeric_level)

    # Prevent adding handlers multiple times if get_logger is called more than once for the same logger name
    if not logger.handlers:
        logger.addHandler(rich_handler)
        if file_handler is not None:
            logger.addHandler(file_handler)
        logger.propagate = False
    _loggers[name] = logger
    return logger


def enable_file_logging(path: str) -> None:
    """Routes every logger created through get_logger to `path` as well."""
    global file_handler
    path = os.path.abspath(path)
    if file_handler is not None and file_handler.baseFilename == path:
        return
    new_handler = _make_file_handler(path)
    for logger in _loggers.values():
        if file_handler is not None:
            logger.removeHandler(file_handler)
        logger.addHandler(new_handler)
    if file_handler is not None:
        file_handler.close()
    file_handler = new_handler


def set_level(level_name: str) -> None:
    """Changes the level of all loggers handed out so far (used by --verbose)."""
    global numeric_level
    level = getattr(logging, level_name.upper(), None)
    if not isinstance(level, int):
        raise ValueError(f"Invalid log level: {level_name}")
    numeric_level = level
    for logger in _loggers.values():
        logger.setLevel(level)


if LOG_FILE:
    enable_file_logging(LOG_FILE)
