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

"""Loss, optimizer, early stopping and the training loop."""

from .loss import LossConfig, sequence_loss
from .optim import AdamState, EarlyStopState, adam_step
from .split import SplitSpec, split_dataset
from .config import RunConfig, TrainConfig, load_run_config
from .trainer import TrainResult, train
from .training import register_commands

__all__ = [
    "LossConfig",
    "sequence_loss",
    "AdamState",
    "EarlyStopState",
    "adam_step",
    "SplitSpec",
    "split_dataset",
    "RunConfig",
    "TrainConfig",
    "load_run_config",
    "TrainResult",
    "train",
    "register_commands",
]
