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

from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from src.tools.core.rng import RngState
from src.tools.ingest.sequences import SequenceDataset, TrajectorySequence
from src.tools.models.config import ModelConfig
from src.tools.training.loss import LossConfig, sequence_loss, shift_targets


__all__ = [
    "FIXTURES",
    "tiny_config",
    "build_tiny_model",
    "random_tokens",
    "make_dataset",
    "model_loss",
    "chain_spec_payload",
]

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def tiny_config(architecture: str, vocab_size: int = 6, **overrides) -> ModelConfig:
    """Desk-sized config: width 4, two layers/blocks, two heads, no dropout."""
    values = dict(
        architecture=architecture,
        vocab_size=vocab_size,
        max_seq_len=16,
        d_model=4,
        layer_count=2,
        head_count=2 if architecture == "transformer" else None,
        ffn_hidden=8 if architecture == "transformer" else None,
        confidence_beta=0.0,
        dropout_rate=0.0,
        recurrent_dropout_rate=0.0,
    )
    values.update(overrides)
    return ModelConfig(**values)


def build_tiny_model(architecture: str, seed: int = 0, **overrides):
    from src.tools.models.models import build_model

    return build_model(tiny_config(architecture, **overrides), RngState(seed))


def random_tokens(seed: int, batch: int, n: int, vocab_size: int, min_length: Optional[int] = None) -> np.ndarray:
    """Rows of tokens in 1..vocab_size followed by trailing padding."""
    gen = np.random.default_rng(seed)
    tokens = gen.integers(1, vocab_size + 1, size=(batch, n))
    lengths = gen.integers(min_length or n, n + 1, size=batch)
    for row, length in enumerate(lengths):
        tokens[row, length:] = 0
    return tokens.astype(np.int64)


def make_dataset(rows: Sequence[Sequence[int]], max_seq_len: Optional[int] = None) -> SequenceDataset:
    max_seq_len = max_seq_len or max(len(r) for r in rows)
    sequences = [
        TrajectorySequence(user=f"u{i}", tokens=tuple(list(r) + [0] * (max_seq_len - len(r))))
        for i, r in enumerate(rows)
    ]
    return SequenceDataset(sequences, max_seq_len)


def model_loss(model, tokens: np.ndarray, beta: float = 0.0):
    inputs, targets = shift_targets(tokens)
    return sequence_loss(model.forward(inputs), targets, LossConfig(confidence_beta=beta)).loss


def chain_spec_payload(transitions, init=None, seed: int = 7) -> dict:
    transitions = np.asarray(transitions, dtype=np.float64)
    n = transitions.shape[0]
    init = np.full(n, 1.0 / n) if init is None else np.asarray(init, dtype=np.float64)
    return {"states": n, "init": init.tolist(), "transitions": transitions.tolist(), "seed": seed}
