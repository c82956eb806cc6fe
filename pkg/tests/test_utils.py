"""Tests for logging and the worker pool."""

import logging

from app.config import settings
from app.utils.logger import logger, set_level, setup_logger
from app.utils.workers import map_levels


def test_setup_logger_writes_log_file(tmp_path):
    """A configured log file receives the records."""
    path = tmp_path / "logs" / "run.log"
    log = setup_logger("spectral-dga-test-file", log_file=path)
    log.warning("rank marginal at level 48")
    for handler in log.handlers:
        handler.flush()

    assert "rank marginal at level 48" in path.read_text(encoding="utf-8")
    assert setup_logger("spectral-dga-test-file", log_file=path).handlers == log.handlers


def test_set_level():
    """The global logger level follows set_level."""
    before = logger.level
    set_level("warning")
    try:
        assert logger.level == logging.WARNING
    finally:
        logger.setLevel(before)


def test_map_levels_keeps_order(monkeypatch):
    """Results come back in input order, threaded or not."""
    for threads in (None, 1, 3):
        monkeypatch.setattr(settings, "spectral_dga_threads", threads)
        assert map_levels(lambda x: x * x, [5, 1, 4, 2]) == [25, 1, 16, 4]
