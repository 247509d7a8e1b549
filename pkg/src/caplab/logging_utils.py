from __future__ import annotations

import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional, Union


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s - %(message)s"


class LoggerFactory:
    @staticmethod
    def create(
        name: str,
        log_file: Optional[Union[str, Path]] = None,
        level: Union[int, str] = logging.INFO,
    ) -> logging.Logger:
        root_logger = logging.getLogger()
        formatter = logging.Formatter(LOG_FORMAT)
        resolved_level = _resolve_level(level)

        root_logger.setLevel(resolved_level)
        if not root_logger.handlers:
            stream_handler = logging.StreamHandler()
            stream_handler.setFormatter(formatter)
            root_logger.addHandler(stream_handler)

        if log_file is not None:
            log_path = Path(log_file)
            log_path.parent.mkdir(parents=True, exist_ok=True)
            if not _has_file_handler(root_logger, log_path):
                file_handler = RotatingFileHandler(
                    log_path, maxBytes=1_000_000, backupCount=3
                )
                file_handler.setFormatter(formatter)
                root_logger.addHandler(file_handler)

        logger = logging.getLogger(name)
        logger.setLevel(resolved_level)
        return logger


def _resolve_level(level: Union[int, str]) -> int:
    if isinstance(level, int):
        return level
    value = logging.getLevelName(str(level).upper())
    if not isinstance(value, int):
        raise ValueError(f"Unknown log level: {level}")
    return value


def _has_file_handler(logger: logging.Logger, log_path: Path) -> bool:
    for handler in logger.handlers:
        if isinstance(handler, RotatingFileHandler):
            try:
                if Path(handler.baseFilename) == log_path.resolve():
                    return True
            except Exception:
                continue
    return False
