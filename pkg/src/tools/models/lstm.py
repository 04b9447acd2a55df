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

"""Stacked LSTM next-step model."""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.tools.core.rng import RngState, dropout, dropout_mask, glorot_uniform
from src.tools.core.tensor import Function, Tensor
from src.tools.models.base import SequenceModel, embed
from src.tools.utils.base import DimensionError

# Gate blocks along the 4*d axis
GATES = ("input", "forget", "cell", "output")


def _sigmoid(a: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(a))
    return np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass
class LstmLayerParams:
    """Gate weights stored as column blocks [input | forget | cell | output]."""

    w_input: Tensor  # (d_in, 4 * d_model)
    w_recurrent: Tensor  # (d_model, 4 * d_model)
    bias: Tensor  # (4 * d_model,)

    @property
    def width(self) -> int:
        return self.w_recurrent.shape[0]


class LstmLayer(Function):
    """One LSTM layer over a whole sequence with backpropagation through time.

    States start at zero for every sequence. ``recurrent_mask`` (batch, d)
    multiplies h_{t-1} before the recurrent product, one mask per sequence
    shared by all time steps.
    """

    def forward(self, x, w_input, w_recurrent, bias, recurrent_mask=None):
        batch, steps, d_in = x.shape
        width = w_recurrent.shape[0]
        if w_input.shape != (d_in, 4 * width) or bias.shape != (4 * width,):
            raise DimensionError("lstm", x.shape, w_input.shape)

        projected = x @ w_input + bias
        h = np.zeros((batch, width), dtype=x.dtype)
        c = np.zeros((batch, width), dtype=x.dtype)
        gates = np.empty((batch, steps, 4 * width), dtype=x.dtype)
        h_in = np.empty((batch, steps, width), dtype=x.dtype)
        c_prev = np.empty((batch, steps, width), dtype=x.dtype)
        tanh_c = np.empty((batch, steps, width), dtype=x.dtype)
        out = np.empty((batch, steps, width), dtype=x.dtype)

        for t in range(steps):
            h_masked = h * recurrent_mask if recurrent_mask is not None else h
            z = projected[:, t] + h_masked @ w_recurrent
            i = _sigmoid(z[:, :width])
            f = _sigmoid(z[:, width : 2 * width])
            g = np.tanh(z[:, 2 * width : 3 * width])
            o = _sigmoid(z[:, 3 * width :])

            h_in[:, t], c_prev[:, t] = h_masked, c
            gates[:, t] = np.concatenate([i, f, g, o], axis=-1)
            c = f * c + i * g
            tanh_c[:, t] = np.tanh(c)
            h = o * tanh_c[:, t]
            out[:, t] = h

        self.x, self.w_input, self.w_recurrent = x, w_input, w_recurrent
        self.mask, self.width = recurrent_mask, width
        self.gates, self.h_in, self.c_prev, self.tanh_c = gates, h_in, c_prev, tanh_c
        return out

    def backward(self, grad):
        width = self.width
        batch, steps, _ = grad.shape
        dz = np.empty_like(self.gates)
        dw_recurrent = np.zeros_like(self.w_recurrent)
        dh_next = np.zeros((batch, width), dtype=grad.dtype)
        dc_next = np.zeros((batch, width), dtype=grad.dtype)

        for t in reversed(range(steps)):
            i = self.gates[:, t, :width]
            f = self.gates[:, t, width : 2 * width]
            g = self.gates[:, t, 2 * width : 3 * width]
            o = self.gates[:, t, 3 * width :]
            tc = self.tanh_c[:, t]

            dh = grad[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz_t = np.concatenate(
                [
                    dc * g * i * (1.0 - i),
                    dc * self.c_prev[:, t] * f * (1.0 - f),
                    dc * i * (1.0 - g * g),
                    dh * tc * o * (1.0 - o),
                ],
                axis=-1,
            )
            dz[:, t] = dz_t
            dc_next = dc * f
            dw_recurrent += self.h_in[:, t].T @ dz_t
            dh_masked = dz_t @ self.w_recurrent.T
            dh_next = dh_masked * self.mask if self.mask is not None else dh_masked

        d_in = self.x.shape[-1]
        dw_input = self.x.reshape(-1, d_in).T @ dz.reshape(-1, 4 * width)
        dx = dz @ self.w_input.T
        dbias = dz.sum(axis=(0, 1))
        return dx, dw_input, dw_recurrent, dbias


def lstm_layer(
    x: Tensor, params: LstmLayerParams, recurrent_mask: Optional[np.ndarray] = None
) -> Tensor:
    return LstmLayer.apply(x, params.w_input, params.w_recurrent, params.bias, recurrent_mask=recurrent_mask)


class LstmModel(SequenceModel):
    """embed -> input dropout -> layer_count LSTM layers -> output head."""

    def _build(self, rng: RngState) -> None:
        cfg = self.config
        self.layers: List[LstmLayerParams] = []
        d_in = cfg.d_embed
        for index in range(cfg.layer_count):
            layer_rng = rng.derive("lstm", index)
            bias = np.zeros(4 * cfg.d_model, dtype=self.dtype)
            bias[cfg.d_model : 2 * cfg.d_model] = 1.0
            self.layers.append(
                LstmLayerParams(
                    w_input=self.add_parameter(
                        f"lstm.{index}.w_input",
                        glorot_uniform((d_in, 4 * cfg.d_model), layer_rng.derive("input"), self.dtype),
                    ),
                    w_recurrent=self.add_parameter(
                        f"lstm.{index}.w_recurrent",
                        glorot_uniform((cfg.d_model, 4 * cfg.d_model), layer_rng.derive("recurrent"), self.dtype),
                    ),
                    bias=self.add_parameter(f"lstm.{index}.bias", bias),
                )
            )
            d_in = cfg.d_model

    def hidden_states(self, tokens: np.ndarray, training: bool, rng: Optional[RngState]) -> Tensor:
        cfg = self.config
        x = embed(tokens, self.table)
        if training:
            x = dropout(x, cfg.dropout_rate, rng.derive("input"), training)

        batch = tokens.shape[0]
        for index, params in enumerate(self.layers):
            mask = None
            if training and cfg.recurrent_dropout_rate > 0:
                mask = dropout_mask(
                    (batch, cfg.d_model), cfg.recurrent_dropout_rate, rng.derive("recurrent", index), self.dtype
                )
            x = lstm_layer(x, params, recurrent_mask=mask)
        return x


def lstm_forward(model: LstmModel, tokens: np.ndarray, training: bool = False, rng: Optional[RngState] = None) -> Tensor:
    return model.forward(tokens, training=training, rng=rng)
