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

"""Model construction, checkpoint loading and the ``inspect`` command."""

import argparse
from logging import getLogger
from pathlib import Path
from typing import List, Union

from src.tools.core.rng import RngState
from src.tools.models.base import SequenceModel
from src.tools.models.checkpoint import read_checkpoint
from src.tools.models.config import ModelConfig
from src.tools.models.lstm import LstmModel
from src.tools.models.transformer import TransformerModel

logger = getLogger("trajectory_lm.models")

MODEL_TYPES = {"lstm": LstmModel, "transformer": TransformerModel}


def build_model(config: ModelConfig, rng: RngState) -> SequenceModel:
    model = MODEL_TYPES[config.architecture](config, rng)
    logger.debug(
        f"Built {config.architecture} model: {model.parameter_count()} parameters, "
        f"tied_output={config.tied_output}, |T|={config.vocab_size}"
    )
    return model


def load_model(path: Union[str, Path]) -> SequenceModel:
    config, state, _ = read_checkpoint(path)
    # initial values are overwritten by the stored ones
    model = build_model(config, RngState(0))
    model.load_state_dict(state)
    return model


def describe_checkpoint(path: Union[str, Path]) -> List[str]:
    """Human-readable lines: config, parameters, tying status."""
    config, state, _ = read_checkpoint(path)
    lines = [f"checkpoint: {path}", "config:"]
    for key, value in config.to_dict().items():
        lines.append(f"  {key}: {value}")

    lines.append("parameters:")
    total = 0
    for name, value in state.items():
        count = int(value.size)
        total += count
        shape = "x".join(str(s) for s in value.shape)
        lines.append(f"  {name:<28} {shape:<12} {count}")
    lines.append(f"total parameters: {total}")

    if config.tied_output:
        lines.append("output matrix: tied to embedding (W = L^T, not stored separately)")
    else:
        lines.append("output matrix: untied (stored as output.weight)")
    return lines


def _inspect(args: argparse.Namespace) -> int:
    for line in describe_checkpoint(args.checkpoint):
        print(line)
    return 0


def register_commands(subparsers) -> None:
    """Register the ``inspect`` subcommand."""
    parser = subparsers.add_parser(
        "inspect",
        help="Print a checkpoint's config, parameter shapes/counts and tied-weight status",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--checkpoint", required=True, help="TRJM checkpoint file")
    parser.set_defaults(handler=_inspect)
