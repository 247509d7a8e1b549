from __future__ import annotations

import logging
from pathlib import Path

import pytest

from caplab.logging_utils import LoggerFactory


def test_logger_factory_writes_to_rotating_file(tmp_path: Path) -> None:
    log_path = tmp_path / "logs" / "caplab.log"
    logger = LoggerFactory.create("test_logger", log_file=log_path)
    logger.info("capacity 3.0")

    for handler in logging.getLogger().handlers:
        handler.flush()

    assert log_path.exists()
    assert "capacity 3.0" in log_path.read_text(encoding="utf-8")


def test_logger_factory_does_not_duplicate_file_handlers(tmp_path: Path) -> None:
    log_path = tmp_path / "caplab.log"
    LoggerFactory.create("first", log_file=log_path)
    LoggerFactory.create("second", log_file=log_path)

    matching = [
        handler
        for handler in logging.getLogger().handlers
        if getattr(handler, "baseFilename", None) == str(log_path.resolve())
    ]

    assert len(matching) == 1


def test_logger_factory_accepts_level_names() -> None:
    logger = LoggerFactory.create("leveled", level="debug")

    assert logger.level == logging.DEBUG


def test_logger_factory_rejects_unknown_level() -> None:
    with pytest.raises(ValueError, match="Unknown log level"):
        LoggerFactory.create("bad", level="chatty")


def test_log_level_applies_when_handlers_already_exist() -> None:
    root = logging.getLogger()
    previous = root.level
    try:
        LoggerFactory.create("first", level="INFO")
        LoggerFactory.create("second", level="DEBUG")

        assert root.level == logging.DEBUG
        assert logging.getLogger("CapacitySolver").isEnabledFor(logging.DEBUG)
    finally:
        root.setLevel(previous)
