"""Logging configuration."""

import logging
import sys
from pathlib import Path

from app.config import settings

FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _level(name: str) -> int:
    return getattr(logging, name.upper(), logging.INFO)


def setup_logger(name: str = "spectral-dga", log_file: Path | None = None) -> logging.Logger:
    """
    Setup and return a configured logger.

    Records go to stdout, and also to log_file (default: settings.log_file) when one is set.
    """
    logger = logging.getLogger(name)
    logger.setLevel(_level(settings.log_level))

    # Avoid duplicate handlers
    if logger.handlers:
        return logger

    formatter = logging.Formatter(FORMAT, datefmt=DATE_FORMAT)

    handler = logging.StreamHandler(sys.stdout)
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(formatter)
    logger.addHandler(handler)

    log_file = log_file or settings.log_file
    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def set_level(level: str) -> None:
    """Change the level of the global logger, e.g. from a --log-level flag."""
    logger.setLevel(_level(level))


# Global logger instance
logger = setup_logger()
