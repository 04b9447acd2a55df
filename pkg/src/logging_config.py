# Copyright 2025, Trajectory LM contributors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Central logging configuration for the Trajectory LM toolkit.

Every module logs through a child of the ``trajectory_lm`` logger. Console
output goes to stderr so that command results printed on stdout (record
counts, rendered reports) stay machine-readable.
"""

import logging
import logging.handlers
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

ROOT_LOGGER_NAME = "trajectory_lm"
LOG_DIR_ENV = "TRAJECTORY_LM_LOG_DIR"

_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "WARN": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
    "FATAL": logging.CRITICAL,
}

# Singleton guard to prevent duplicate handler setup
_logging_configured = False


def setup_logging(
    level: Optional[str] = None,
    enable_file_logging: bool = True,
    log_subdirectory: Optional[str] = None,
) -> None:
    """Configure the ``trajectory_lm`` logger hierarchy.

    Args:
        level: Log level override (DEBUG, INFO, WARNING, ERROR, CRITICAL).
               If None, uses the LOG_LEVEL environment variable or INFO.
        enable_file_logging: Also write to a timestamped file under the log
               directory (``$TRAJECTORY_LM_LOG_DIR`` or ``<repo>/log``).
        log_subdirectory: Optional subdirectory of the log directory
               (e.g. "tests").

    Note:
        Only the first call has an effect; later calls are ignored until
        reset_logging_config() is used.
    """
    global _logging_configured

    if _logging_configured:
        return

    effective_level = _resolve_log_level(level)

    root_logger = logging.getLogger(ROOT_LOGGER_NAME)
    root_logger.setLevel(effective_level)

    formatter = logging.Formatter(
        fmt="%(asctime)s %(levelname)-8s %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(effective_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if enable_file_logging:
        log_file_path = _generate_log_file_path(log_subdirectory)
        _add_file_handler(root_logger, log_file_path, effective_level, formatter)

    root_logger.propagate = False
    _logging_configured = True


def _log_directory() -> Path:
    override = os.getenv(LOG_DIR_ENV)
    if override:
        return Path(override)
    # src/logging_config.py -> src -> repo root
    return Path(__file__).resolve().parent.parent / "log"


def _generate_log_file_path(subdirectory: Optional[str] = None) -> str:
    """Return ``<log dir>[/subdirectory]/YYYY_MM_DD_HH_MM_SS.log``, creating directories."""
    log_dir = _log_directory()
    if subdirectory:
        log_dir = log_dir / subdirectory
    log_dir.mkdir(parents=True, exist_ok=True)

    timestamp = datetime.now().strftime("%Y_%m_%d_%H_%M_%S")
    return str(log_dir / f"{timestamp}.log")


def _resolve_log_level(cli_level: Optional[str]) -> int:
    """CLI argument, then LOG_LEVEL environment variable, then INFO."""
    if cli_level:
        return _parse_log_level(cli_level)

    env_level = os.getenv("LOG_LEVEL")
    if env_level:
        return _parse_log_level(env_level)

    return logging.INFO


def _parse_log_level(level_str: str) -> int:
    """Parse a level name.

    Raises:
        ValueError: If level_str is not a valid log level
    """
    level_str = level_str.upper().strip()

    if level_str not in _LEVELS:
        valid_levels = ", ".join(sorted(_LEVELS))
        raise ValueError(f"Invalid log level '{level_str}'. Valid levels: {valid_levels}")

    return _LEVELS[level_str]


def _add_file_handler(
    logger: logging.Logger, log_file: str, level: int, formatter: logging.Formatter
) -> None:
    """Attach a rotating file handler; failures degrade to console-only logging."""
    config_logger = logging.getLogger(f"{ROOT_LOGGER_NAME}.logging_config")
    try:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        # Training runs are long; 50MB x 5 keeps a few full runs around
        file_handler = logging.handlers.RotatingFileHandler(
            filename=str(log_path),
            maxBytes=50 * 1024 * 1024,
            backupCount=5,
            encoding="utf-8",
        )
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

        config_logger.info(f"File logging enabled: {log_file}")

    except (OSError, PermissionError) as e:
        config_logger.warning(f"Failed to setup file logging to '{log_file}': {e}")


def reset_logging_config() -> None:
    """Close and detach all handlers so setup_logging() can run again (tests only)."""
    global _logging_configured

    root_logger = logging.getLogger(ROOT_LOGGER_NAME)
    for handler in root_logger.handlers[:]:
        try:
            handler.flush()
            handler.close()
        finally:
            root_logger.removeHandler(handler)

    _logging_configured = False
