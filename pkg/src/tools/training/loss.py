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

"""Next-step cross-entropy with an optional confidence penalty.

For every non-padding target position::

    L* = -log p_true + beta * sum_j p_j log p_j    (= CE - beta * H(p))

averaged over the included positions. Logit column 0 (padding) is dropped
before normalization, so the padding class never carries probability.
"""

import math
from dataclasses import dataclass

import numpy as np

from src.tools.core.tensor import Tensor, log_softmax, pick
from src.tools.models.base import PADDING_ID
from src.tools.utils.base import ConfigError, DimensionError


@dataclass(frozen=True)
class LossConfig:
    confidence_beta: float = 0.0
    exclude_padding: bool = True

    def __post_init__(self):
        if not math.isfinite(self.confidence_beta) or self.confidence_beta < 0:
            raise ConfigError(f"confidence_beta must be finite and >= 0, got {self.confidence_beta}")
        if not self.exclude_padding:
            raise ConfigError("padding positions are always excluded from the loss")


@dataclass
class LossResult:
    """Mean penalized loss plus per-position terms.

    ``nll`` and ``neg_entropy`` share the targets' shape and are 0 where the
    target is padding.
    """

    loss: Tensor
    cross_entropy: float
    entropy: float
    positions: int
    nll: np.ndarray
    neg_entropy: np.ndarray

    @property
    def penalty(self) -> float:
        """The confidence term as added to the loss, i.e. -beta * H."""
        return self.loss.item() - self.cross_entropy


def shift_targets(tokens: np.ndarray):
    """(inputs, targets) with targets[:, s] = tokens[:, s + 1]."""
    tokens = np.asarray(tokens, dtype=np.int64)
    return tokens[:, :-1], tokens[:, 1:]


def sequence_loss(logits: Tensor, targets: np.ndarray, cfg: LossConfig) -> LossResult:
    """Mean penalized loss over positions whose target is not padding.

    Args:
        logits: (..., |T|+1) scores, column 0 being the padding class
        targets: (...) token IDs aligned with logits; 0 marks excluded positions
        cfg: confidence penalty weight

    Raises:
        ConfigError: every target is padding
    """
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != logits.shape[:-1]:
        raise DimensionError("sequence_loss", logits.shape, targets.shape)
    included = targets != PADDING_ID
    positions = int(included.sum())
    if positions == 0:
        raise ConfigError("loss over an all-padding batch: no target positions")

    log_probs = log_softmax(logits[..., 1:])
    weights = included.astype(logits.dtype) / positions

    nll = -pick(log_probs, np.where(included, targets - 1, 0))
    neg_entropy = (log_probs.exp() * log_probs).sum(axis=-1)
    cross_entropy = (nll * weights).sum()
    if cfg.confidence_beta == 0.0:
        loss = cross_entropy
    else:
        loss = cross_entropy + (neg_entropy * weights).sum() * cfg.confidence_beta

    return LossResult(
        loss=loss,
        cross_entropy=cross_entropy.item(),
        entropy=float(-(neg_entropy.data * weights).sum()),
        positions=positions,
        nll=np.where(included, nll.data, 0.0),
        neg_entropy=np.where(included, neg_entropy.data, 0.0),
    )


def confidence_penalty(probs: np.ndarray, beta: float) -> float:
    """beta * sum_j p_j ln p_j for one distribution (0 ln 0 taken as 0)."""
    probs = np.asarray(probs, dtype=np.float64)
    nonzero = probs[probs > 0]
    return float(beta * np.sum(nonzero * np.log(nonzero)))
