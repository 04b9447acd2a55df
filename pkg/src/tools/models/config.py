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

"""Architecture hyperparameters and their per-architecture defaults."""

import math
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional

from src.static import HYPERPARAMETERS
from src.tools.core.rng import check_rate
from src.tools.core.tensor import resolve_dtype
from src.tools.utils.base import ConfigError

ARCHITECTURES = ("lstm", "transformer")


@dataclass(frozen=True)
class ModelConfig:
    architecture: str
    vocab_size: int
    max_seq_len: int = 256
    d_model: int = 128
    layer_count: int = 2
    head_count: Optional[int] = None
    ffn_hidden: Optional[int] = None
    d_embed: Optional[int] = None
    tied_output: bool = False
    confidence_beta: float = 0.1
    dropout_rate: float = 0.0
    recurrent_dropout_rate: float = 0.0
    dtype: str = "float64"

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"Unknown architecture '{self.architecture}'. Valid: {', '.join(ARCHITECTURES)}")
        if self.d_embed is None:
            object.__setattr__(self, "d_embed", self.d_model)

        for name in ("vocab_size", "max_seq_len", "d_model", "layer_count", "d_embed"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")

        if self.architecture == "transformer":
            if not self.head_count or self.head_count < 1:
                raise ConfigError("transformer requires head_count >= 1")
            if self.d_model % self.head_count != 0:
                raise ConfigError(f"d_model={self.d_model} is not divisible by head_count={self.head_count}")
            if self.ffn_hidden is None:
                object.__setattr__(self, "ffn_hidden", 4 * self.d_model)
            if self.d_embed != self.d_model:
                raise ConfigError(f"transformer residual stream needs d_embed == d_model, got {self.d_embed} != {self.d_model}")

        if not math.isfinite(self.confidence_beta) or self.confidence_beta < 0:
            raise ConfigError(f"confidence_beta must be finite and >= 0, got {self.confidence_beta}")
        check_rate(self.dropout_rate)
        check_rate(self.recurrent_dropout_rate)
        resolve_dtype(self.dtype)

    @property
    def head_width(self) -> int:
        """floor(d / h), the per-head projection width."""
        return self.d_model // self.head_count

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"Unknown model config keys: {', '.join(unknown)}")
        return cls(**values)


def default_model_config(architecture: str, vocab_size: int, **overrides) -> ModelConfig:
    """ModelConfig with the architecture defaults, then *overrides*."""
    if architecture not in ARCHITECTURES:
        raise ConfigError(f"Unknown architecture '{architecture}'. Valid: {', '.join(ARCHITECTURES)}")
    arch = HYPERPARAMETERS["architectures"][architecture]
    shared = HYPERPARAMETERS["shared"]
    values = {
        "architecture": architecture,
        "vocab_size": vocab_size,
        "max_seq_len": arch["max_seq_len"],
        "d_model": arch["d_model"],
        "layer_count": arch["layer_count"],
        "head_count": arch["head_count"],
        "ffn_hidden": arch["ffn_hidden"],
        "dropout_rate": arch["dropout_rate"],
        "recurrent_dropout_rate": arch["recurrent_dropout_rate"],
        "confidence_beta": shared["confidence_beta"],
        "tied_output": shared["tied_output"],
        "dtype": shared["dtype"],
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ModelConfig.from_dict(values)
