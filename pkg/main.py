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

import argparse
import sys
from logging import getLogger
from typing import List, Optional

from src.logging_config import setup_logging
from src.static import CLI_DESCRIPTION
from src.tools import evaluation, ingest, models, synth, training
from src.tools.utils.base import run_command


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajectory-lm",
        description=CLI_DESCRIPTION,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )

    # Logging configuration arguments
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Set logging level (default: INFO, or LOG_LEVEL env var)",
    )

    parser.add_argument(
        "--log-file",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="Enable file logging with automatic timestamped filename in ./log directory",
    )

    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    # Register command modules
    ingest.register_commands(subparsers)
    synth.register_commands(subparsers)
    training.register_commands(subparsers)
    evaluation.register_commands(subparsers)
    models.register_commands(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    # Setup logging before any other operations
    setup_logging(level=args.log_level, enable_file_logging=args.log_file, log_subdirectory=args.command)

    logger = getLogger("trajectory_lm.cli")
    logger.info(f"Starting command: {args.command}")

    return run_command(args.command, args.handler, args)


if __name__ == "__main__":
    sys.exit(main())
