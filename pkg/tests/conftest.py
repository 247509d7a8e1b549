import logging
from logging.handlers import RotatingFileHandler
import sys
from pathlib import Path

import pytest


def pytest_sessionstart(session):
    """Put src/ on sys.path so caplab imports without installation."""
    src_path = Path(__file__).resolve().parents[1] / "src"
    if str(src_path) not in sys.path:
        sys.path.insert(0, str(src_path))


@pytest.fixture(autouse=True)
def _close_log_files():
    """Drop file handlers that LoggerFactory attached to the root logger during a test."""
    root = logging.getLogger()
    before = set(root.handlers)
    yield
    for handler in list(root.handlers):
        if handler not in before and isinstance(handler, RotatingFileHandler):
            root.removeHandler(handler)
            handler.close()
