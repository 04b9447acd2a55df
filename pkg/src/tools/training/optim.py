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

"""Adam with bias correction, optional global-norm clipping, and patience-based early stopping."""

import math
from dataclasses import dataclass, field
from logging import getLogger
from typing import Dict, Optional

import numpy as np

from src.tools.core.tensor import Tensor
from src.tools.utils.base import ConfigError, NumericError

logger = getLogger("trajectory_lm.training.optim")


@dataclass
class AdamState:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.learning_rate > 0 or not math.isfinite(self.learning_rate):
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError(f"Adam moment decays must lie in [0, 1), got {self.beta1}, {self.beta2}")


def _unique(params: Dict[str, Tensor]) -> Dict[str, Tensor]:
    # a shared tensor is updated once, under its first name
    seen, unique = set(), {}
    for name, param in params.items():
        if id(param) not in seen:
            seen.add(id(param))
            unique[name] = param
    return unique


def global_grad_norm(params: Dict[str, Tensor]) -> float:
    total = sum(float(np.sum(p.grad * p.grad)) for p in _unique(params).values() if p.grad is not None)
    return math.sqrt(total)


def adam_step(params: Dict[str, Tensor], state: AdamState, clip_norm: Optional[float] = None) -> float:
    """Apply one update in place from each parameter's accumulated grad.

    Returns:
        float: the global gradient norm before clipping

    Raises:
        NumericError: a gradient holds NaN/Inf; no parameter is modified
    """
    params = _unique(params)
    for name, param in params.items():
        if param.grad is not None and not np.all(np.isfinite(param.grad)):
            raise NumericError(f"non-finite gradient in parameter '{name}' at step {state.step + 1}")

    norm = global_grad_norm(params)
    scale = 1.0
    if clip_norm is not None and norm > clip_norm:
        scale = clip_norm / norm

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for name, param in params.items():
        if param.grad is None:
            continue
        grad = param.grad * scale
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(param.data)
            state.v[name] = np.zeros_like(param.data)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        param.data -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return norm


@dataclass
class EarlyStopState:
    """Stops after patience consecutive epochs without a strictly lower loss."""

    patience: int = 3
    best_loss: float = math.inf
    best_epoch: int = 0
    epochs_since_improvement: int = 0

    def __post_init__(self):
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")

    @property
    def should_stop(self) -> bool:
        return self.epochs_since_improvement >= self.patience

    def update(self, epoch: int, loss: float) -> bool:
        """Record one epoch's loss; True when it is the new best."""
        if not math.isfinite(loss):
            raise NumericError(f"non-finite monitoring loss {loss} at epoch {epoch}")
        if loss < self.best_loss:
            self.best_loss, self.best_epoch = loss, epoch
            self.epochs_since_improvement = 0
            return True
        self.epochs_since_improvement += 1
        return False
