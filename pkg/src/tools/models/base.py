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

"""Pieces shared by both architectures: embedding table, output head, model base."""

from logging import getLogger
from typing import Dict, Optional

import numpy as np

from src.tools.core.rng import RngState, glorot_uniform
from src.tools.core.tensor import Tensor, embedding, no_grad, resolve_dtype, softmax
from src.tools.models.config import ModelConfig
from src.tools.utils.base import ConfigError, DimensionError

logger = getLogger("trajectory_lm.models")

PADDING_ID = 0


class EmbeddingTable:
    """Matrix L of shape (|T|+1, d_embed); row 0 is the all-zero padding row."""

    def __init__(self, matrix: Tensor):
        self.matrix = matrix

    @property
    def vocab_size(self) -> int:
        return self.matrix.shape[0] - 1


def embed(tokens: np.ndarray, table: EmbeddingTable) -> Tensor:
    """Row lookup; token 0 maps to the zero vector and never receives gradient."""
    return embedding(table.matrix, np.asarray(tokens, dtype=np.int64), padding_idx=PADDING_ID)


class OutputHead:
    """Maps final hidden states to logits over |T|+1 classes (column 0 = padding).

    Untied: ``h @ W + bias``. Tied: ``(h @ P + p) @ L.T + bias`` where the
    feed-forward pre-projection P brings d_model to d_embed and L is the
    embedding matrix itself, so both uses accumulate into one tensor.
    """

    def __init__(
        self,
        bias: Tensor,
        weight: Optional[Tensor] = None,
        table: Optional[EmbeddingTable] = None,
        projection_weight: Optional[Tensor] = None,
        projection_bias: Optional[Tensor] = None,
    ):
        if (weight is None) == (table is None):
            raise ConfigError("output head needs exactly one of an untied weight or a tied embedding table")
        self.bias = bias
        self.weight = weight
        self.table = table
        self.projection_weight = projection_weight
        self.projection_bias = projection_bias

    @property
    def tied(self) -> bool:
        return self.table is not None

    def matrix(self) -> Tensor:
        return self.table.matrix.T if self.tied else self.weight

    def __call__(self, h: Tensor) -> Tensor:
        return output_logits(h, self)


def output_logits(h: Tensor, head: OutputHead) -> Tensor:
    if head.tied:
        h = h @ head.projection_weight + head.projection_bias
    return h @ head.matrix() + head.bias


class SequenceModel:
    """Next-step predictor: tokens (batch, n) -> logits (batch, n, |T|+1).

    Subclasses register parameters in construction order (the checkpoint
    order) and implement ``hidden_states``.
    """

    def __init__(self, config: ModelConfig, rng: RngState):
        self.config = config
        self.dtype = resolve_dtype(config.dtype)
        self._params: Dict[str, Tensor] = {}

        init_rng = rng.derive("init")
        table = glorot_uniform((config.vocab_size + 1, config.d_embed), init_rng.derive("embedding"), self.dtype)
        table[PADDING_ID] = 0.0
        self.table = EmbeddingTable(self.add_parameter("embedding", table))

        self._build(init_rng)

        vocab_out = config.vocab_size + 1
        head_rng = init_rng.derive("output")
        if config.tied_output:
            self.head = OutputHead(
                table=self.table,
                projection_weight=self.add_parameter(
                    "output.projection.weight", glorot_uniform((config.d_model, config.d_embed), head_rng, self.dtype)
                ),
                projection_bias=self.add_parameter("output.projection.bias", np.zeros(config.d_embed, self.dtype)),
                bias=self.add_parameter("output.bias", np.zeros(vocab_out, self.dtype)),
            )
        else:
            self.head = OutputHead(
                weight=self.add_parameter(
                    "output.weight", glorot_uniform((config.d_model, vocab_out), head_rng, self.dtype)
                ),
                bias=self.add_parameter("output.bias", np.zeros(vocab_out, self.dtype)),
            )

    # -- parameters ---------------------------------------------------------

    def add_parameter(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name '{name}'")
        tensor = Tensor(np.array(value, dtype=self.dtype), requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def parameters(self) -> Dict[str, Tensor]:
        return dict(self._params)

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self._params.values()))

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self._params.items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        missing = sorted(set(self._params) - set(state))
        unexpected = sorted(set(state) - set(self._params))
        if missing or unexpected:
            raise ConfigError(f"state mismatch: missing {missing}, unexpected {unexpected}")
        for name, param in self._params.items():
            value = np.asarray(state[name])
            if value.shape != param.shape:
                raise DimensionError(f"load '{name}'", param.shape, value.shape)
            # in place: tied heads hold a reference to the embedding tensor
            param.data[...] = value

    def output_matrix(self) -> np.ndarray:
        """The effective output matrix W (a view of L.T when tied)."""
        return self.table.matrix.data.T if self.head.tied else self.head.weight.data

    # -- computation --------------------------------------------------------

    def _build(self, rng: RngState) -> None:
        raise NotImplementedError

    def hidden_states(self, tokens: np.ndarray, training: bool, rng: Optional[RngState]) -> Tensor:
        raise NotImplementedError

    def forward(self, tokens: np.ndarray, training: bool = False, rng: Optional[RngState] = None) -> Tensor:
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.ndim != 2:
            raise DimensionError("forward", tokens.shape, ("batch", "n"))
        if tokens.shape[1] > self.config.max_seq_len:
            raise ConfigError(f"sequence length {tokens.shape[1]} exceeds max_seq_len {self.config.max_seq_len}")
        if training and rng is None:
            raise ConfigError("training-mode forward requires an RngState for dropout")
        return self.head(self.hidden_states(tokens, training, rng))

    __call__ = forward

    def predict_proba(self, tokens: np.ndarray) -> np.ndarray:
        """Next-step distributions; the padding class gets exactly zero mass."""
        with no_grad():
            logits = self.forward(tokens, training=False)
            allowed = np.ones(logits.shape[-1], dtype=bool)
            allowed[PADDING_ID] = False
            return softmax(logits, mask=allowed).data
