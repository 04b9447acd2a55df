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

"""Base utilities shared by every Trajectory LM command: errors and exit codes."""

import zlib
from typing import Callable, Union
from logging import getLogger

logger = getLogger("trajectory_lm.utils.base")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class TrajectoryError(Exception):
    """Base class for every error the toolkit raises on purpose."""

    exit_code = EXIT_UNEXPECTED


class ConfigError(TrajectoryError, ValueError):
    """Invalid configuration, hyperparameters or user input."""

    exit_code = EXIT_CONFIG


class DimensionError(ConfigError):
    """Operand shapes are incompatible."""

    def __init__(self, op: str, left: tuple, right: tuple):
        super().__init__(f"{op}: incompatible shapes {tuple(left)} and {tuple(right)}")
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right)


class VocabularyError(ConfigError):
    """A node name or token ID is not covered by the vocabulary."""

    exit_code = EXIT_CONFIG


class DataIOError(TrajectoryError, OSError):
    """A file could not be read, written or decoded."""

    exit_code = EXIT_IO

    def __init__(self, message: str, line: Union[int, None] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericError(TrajectoryError, ArithmeticError):
    """A computation produced NaN/Inf or left its mathematical domain."""

    exit_code = EXIT_NUMERIC


def stable_key(key: Union[int, str]) -> int:
    """Map a seed-derivation key to a non-negative integer, identically on every platform."""
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if key < 0:
        raise ConfigError(f"seed keys must be non-negative, got {key}")
    return int(key)


def run_command(name: str, handler: Callable[..., int], *args, **kwargs) -> int:
    """Execute a CLI handler and translate failures into exit codes.

    Args:
        name: Command name used in log messages (e.g. "ingest")
        handler: Callable returning an exit code

    Returns:
        int: 0 on success, the error's exit code otherwise
    """
    logger.debug(f"Running command: {name}")

    try:
        code = handler(*args, **kwargs)
        logger.debug(f"Command completed successfully: {name}")
        return EXIT_OK if code is None else code

    except TrajectoryError as e:
        logger.error(f"Command failed: {name} (exit code: {e.exit_code}, {type(e).__name__}: {e})")
        return e.exit_code

    except FileNotFoundError as e:
        logger.error(f"Command failed: {name} - file not found: {e.filename}")
        return EXIT_IO

    except OSError as e:
        logger.error(f"Command failed: {name} - I/O error: {e}")
        return EXIT_IO

    except Exception as e:
        logger.error(f"Unexpected error: {name} - {type(e).__name__}: {str(e)}")
        return EXIT_UNEXPECTED
