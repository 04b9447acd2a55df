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

"""Run configuration: packaged defaults, then a JSON file, then command-line flags.

A JSON config file is a flat object. Recognized keys are the ModelConfig
fields (except vocab_size), the TrainConfig fields, the split fractions,
seed and variant.
"""

import json
from dataclasses import dataclass, fields
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, Optional, Union

from src.static import HYPERPARAMETERS
from src.tools.models.config import ARCHITECTURES, ModelConfig, default_model_config
from src.tools.training.loss import LossConfig
from src.tools.training.split import SplitSpec
from src.tools.utils.base import ConfigError, DataIOError

logger = getLogger("trajectory_lm.training.config")

VARIANTS = tuple(HYPERPARAMETERS["variants"])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 128
    max_epochs: int = 100
    patience: int = 3
    clip_norm: Optional[float] = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("batch_size", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ConfigError(f"clip_norm must be positive, got {self.clip_norm}")


_MODEL_KEYS = {f.name for f in fields(ModelConfig)} - {"vocab_size", "architecture"}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)}
_SPLIT_KEYS = {"train_fraction", "validation_fraction", "test_fraction"}
_RUN_KEYS = {"seed", "variant", "architecture"}
KNOWN_KEYS = frozenset(_MODEL_KEYS | _TRAIN_KEYS | _SPLIT_KEYS | _RUN_KEYS)


@dataclass(frozen=True)
class RunConfig:
    architecture: str
    model: Dict[str, Any]
    train: TrainConfig
    split: SplitSpec
    seed: int
    variant: Optional[str] = None

    def model_config(self, vocab_size: int) -> ModelConfig:
        return default_model_config(self.architecture, vocab_size, **self.model)

    @property
    def loss(self) -> LossConfig:
        return LossConfig(confidence_beta=self.model["confidence_beta"])


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            values = json.load(f)
    except json.JSONDecodeError as e:
        raise DataIOError(f"corrupt config file '{path}': {e.msg}", line=e.lineno)
    except OSError as e:
        raise DataIOError(f"cannot read config file '{path}': {e}")
    if not isinstance(values, dict):
        raise ConfigError(f"config file '{path}' must hold a JSON object")
    unknown = sorted(set(values) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"Unknown config keys in '{path}': {', '.join(unknown)}")
    return values


def _resolve_architecture(architecture: Optional[str], variant: Optional[str]) -> str:
    if variant is not None:
        if variant not in VARIANTS:
            raise ConfigError(f"Unknown variant '{variant}'. Valid: {', '.join(VARIANTS)}")
        implied = HYPERPARAMETERS["variants"][variant]["architecture"]
        if architecture is not None and architecture != implied:
            raise ConfigError(f"variant '{variant}' is a {implied} model, but --arch {architecture} was given")
        return implied
    architecture = architecture or "lstm"
    if architecture not in ARCHITECTURES:
        raise ConfigError(f"Unknown architecture '{architecture}'. Valid: {', '.join(ARCHITECTURES)}")
    return architecture


def load_run_config(
    architecture: Optional[str] = None,
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Layer packaged defaults, the optional JSON file and non-None *overrides*.

    Args:
        architecture: "lstm" or "transformer"; implied by a variant when omitted
        path: Optional JSON config file
        overrides: Command-line values; None means "not given"

    Raises:
        ConfigError: unknown keys or variant, or a variant/architecture clash
    """
    values: Dict[str, Any] = read_config_file(path) if path else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(values) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")

    variant = values.pop("variant", None)
    architecture = _resolve_architecture(values.pop("architecture", architecture), variant)
    arch_defaults = HYPERPARAMETERS["architectures"][architecture]
    shared = HYPERPARAMETERS["shared"]

    model = {
        key: arch_defaults.get(key, shared.get(key))
        for key in ("max_seq_len", "d_model", "layer_count", "head_count", "ffn_hidden",
                    "dropout_rate", "recurrent_dropout_rate", "confidence_beta", "tied_output", "dtype")
    }
    if variant is not None:
        model.update({k: v for k, v in HYPERPARAMETERS["variants"][variant].items() if k != "architecture"})
    model.update({k: v for k, v in values.items() if k in _MODEL_KEYS})

    train = TrainConfig(
        learning_rate=values.get("learning_rate", arch_defaults["learning_rate"]),
        batch_size=values.get("batch_size", arch_defaults["batch_size"]),
        max_epochs=values.get("max_epochs", shared["max_epochs"]),
        patience=values.get("patience", shared["patience"]),
        clip_norm=values.get("clip_norm", shared["clip_norm"]),
    )
    seed = int(values.get("seed", shared["seed"]))
    split = SplitSpec(
        train_fraction=values.get("train_fraction", shared["train_fraction"]),
        validation_fraction=values.get("validation_fraction", shared["validation_fraction"]),
        test_fraction=values.get("test_fraction", shared["test_fraction"]),
        seed=seed,
    )
    config = RunConfig(architecture=architecture, model=model, train=train, split=split, seed=seed, variant=variant)
    logger.debug(f"Resolved run config: {config}")
    return config

