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

"""Stacked post-norm Transformer blocks with causal multi-head self-attention."""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from src.tools.core.rng import RngState, dropout, glorot_uniform
from src.tools.core.tensor import Tensor, layer_normalize, softmax
from src.tools.models.base import PADDING_ID, SequenceModel, embed
from src.tools.utils.base import ConfigError, DimensionError


@dataclass
class TransformerBlockParams:
    """Per-head projections are column blocks of w_query/w_key/w_value (head i: columns i*dk:(i+1)*dk)."""

    head_count: int
    w_query: Tensor  # (d_model, d_model)
    w_key: Tensor
    w_value: Tensor
    w_out: Tensor  # (d_model, d_model)
    b_out: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    ffn_w1: Tensor  # (d_model, ffn_hidden)
    ffn_b1: Tensor
    ffn_w2: Tensor  # (ffn_hidden, d_model)
    ffn_b2: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor

    @property
    def d_model(self) -> int:
        return self.w_query.shape[0]

    @property
    def head_width(self) -> int:
        return self.d_model // self.head_count


def score_divisor(d_model: int, head_count: int) -> float:
    """sqrt(floor(d / h))."""
    if d_model % head_count != 0:
        raise ConfigError(f"d_model={d_model} is not divisible by head_count={head_count}")
    return math.sqrt(d_model // head_count)


def causal_mask(n: int) -> np.ndarray:
    """mask[s, j] is True iff query position s may attend key position j (j <= s)."""
    return np.tril(np.ones((n, n), dtype=bool))


def attention_mask(tokens: np.ndarray) -> np.ndarray:
    """(batch, 1, n, n) causal mask that also drops padding keys.

    A query row whose admissible keys are all padding falls back to its own
    diagonal entry so the softmax stays defined.
    """
    n = tokens.shape[1]
    keys = (tokens != PADDING_ID)[:, None, None, :]
    mask = causal_mask(n)[None, None] & keys
    empty = ~mask.any(axis=-1, keepdims=True)
    return mask | (empty & np.eye(n, dtype=bool)[None, None])


def sinusoidal_positions(n: int, d_model: int, dtype=np.float64) -> np.ndarray:
    positions = np.arange(n, dtype=np.float64)[:, None]
    rates = np.exp(-math.log(10000.0) * (np.arange(0, d_model, 2, dtype=np.float64) / d_model))
    table = np.zeros((n, d_model), dtype=np.float64)
    table[:, 0::2] = np.sin(positions * rates)
    table[:, 1::2] = np.cos(positions * rates[: d_model // 2])
    return table.astype(dtype)


def _split_heads(x: Tensor, head_count: int) -> Tensor:
    *lead, n, d = x.shape
    x = x.reshape(*lead, n, head_count, d // head_count)
    axes = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
    return x.transpose(*axes)


def _merge_heads(x: Tensor) -> Tensor:
    *lead, h, n, dk = x.shape
    axes = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
    return x.transpose(*axes).reshape(*lead, n, h * dk)


def attention(
    x: Tensor,
    params: TransformerBlockParams,
    mask: Optional[np.ndarray] = None,
    dropout_rate: float = 0.0,
    rng: Optional[RngState] = None,
    training: bool = False,
    return_weights: bool = False,
) -> Union[Tensor, Tuple[Tensor, Tensor]]:
    """Masked multi-head self-attention over x of shape (..., n, d_model).

    Per head: scores = q k^T / sqrt(floor(d/h)) with rows indexed by query
    position; softmax over keys. ``mask`` defaults to the causal mask, so
    position s attends only to positions <= s.
    """
    if x.shape[-1] != params.d_model:
        raise DimensionError("attention", x.shape, params.w_query.shape)
    n = x.shape[-2]
    if mask is None:
        mask = causal_mask(n)

    q = _split_heads(x @ params.w_query, params.head_count)
    k = _split_heads(x @ params.w_key, params.head_count)
    v = _split_heads(x @ params.w_value, params.head_count)

    scores = (q @ k.T) / score_divisor(params.d_model, params.head_count)
    weights = softmax(scores, mask=mask)
    attended = dropout(weights, dropout_rate, rng, training) if training else weights
    out = _merge_heads(attended @ v) @ params.w_out + params.b_out
    return (out, weights) if return_weights else out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    return layer_normalize(x) * gain + bias


def transformer_block(
    x: Tensor,
    params: TransformerBlockParams,
    mask: Optional[np.ndarray] = None,
    dropout_rate: float = 0.0,
    rng: Optional[RngState] = None,
    training: bool = False,
) -> Tensor:
    """Post-norm block: LN(x + attn(x)), then LN(x + FFN(x)) with a relu FFN."""
    drop = dropout_rate if training else 0.0

    def _rng(key: str) -> Optional[RngState]:
        return rng.derive(key) if training else None

    attended = attention(x, params, mask, drop, _rng("weights"), training)
    x = layer_norm(x + dropout(attended, drop, _rng("attention"), training), params.ln1_gain, params.ln1_bias)
    hidden = (x @ params.ffn_w1 + params.ffn_b1).relu()
    ffn = hidden @ params.ffn_w2 + params.ffn_b2
    return layer_norm(x + dropout(ffn, drop, _rng("ffn"), training), params.ln2_gain, params.ln2_bias)


class TransformerModel(SequenceModel):
    """embed + sinusoidal positions -> dropout -> layer_count blocks -> output head."""

    def _build(self, rng: RngState) -> None:
        cfg = self.config
        d, hidden = cfg.d_model, cfg.ffn_hidden
        self.blocks: List[TransformerBlockParams] = []
        for index in range(cfg.layer_count):
            block_rng = rng.derive("block", index)
            prefix = f"block.{index}"

            def weight(name: str, shape: tuple) -> Tensor:
                return self.add_parameter(f"{prefix}.{name}", glorot_uniform(shape, block_rng.derive(name), self.dtype))

            def const(name: str, size: int, value: float) -> Tensor:
                return self.add_parameter(f"{prefix}.{name}", np.full(size, value, dtype=self.dtype))

            self.blocks.append(
                TransformerBlockParams(
                    head_count=cfg.head_count,
                    w_query=weight("w_query", (d, d)),
                    w_key=weight("w_key", (d, d)),
                    w_value=weight("w_value", (d, d)),
                    w_out=weight("w_out", (d, d)),
                    b_out=const("b_out", d, 0.0),
                    ln1_gain=const("ln1_gain", d, 1.0),
                    ln1_bias=const("ln1_bias", d, 0.0),
                    ffn_w1=weight("ffn_w1", (d, hidden)),
                    ffn_b1=const("ffn_b1", hidden, 0.0),
                    ffn_w2=weight("ffn_w2", (hidden, d)),
                    ffn_b2=const("ffn_b2", d, 0.0),
                    ln2_gain=const("ln2_gain", d, 1.0),
                    ln2_bias=const("ln2_bias", d, 0.0),
                )
            )

    def hidden_states(self, tokens: np.ndarray, training: bool, rng: Optional[RngState]) -> Tensor:
        cfg = self.config
        n = tokens.shape[1]
        x = embed(tokens, self.table) + sinusoidal_positions(n, cfg.d_model, self.dtype)
        x = dropout(x, cfg.dropout_rate, rng.derive("embedding") if training else None, training)

        mask = attention_mask(tokens)
        for index, params in enumerate(self.blocks):
            block_rng = rng.derive("block", index) if training else None
            x = transformer_block(x, params, mask, cfg.dropout_rate, block_rng, training)
        return x


def transformer_forward(
    model: TransformerModel, tokens: np.ndarray, training: bool = False, rng: Optional[RngState] = None
) -> Tensor:
    return model.forward(tokens, training=training, rng=rng)
