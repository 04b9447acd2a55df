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

"""Seeded randomness: Philox streams, weight initialization and dropout."""

from logging import getLogger
from typing import Tuple, Union

import numpy as np

from src.tools.core.tensor import DEFAULT_DTYPE, Tensor
from src.tools.utils.base import ConfigError, stable_key

logger = getLogger("trajectory_lm.core.rng")

ALGORITHM = "philox4x64-10"


class RngState:
    """Counter-based random stream.

    Philox output depends only on (key, counter), so identical seeds and
    call sequences reproduce identical draws on every platform.
    """

    def __init__(self, seed: int, keys: Tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.keys = tuple(keys)
        self.algorithm = ALGORITHM
        self.generator = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, *self.keys])))

    @property
    def position(self) -> int:
        """Number of 256-bit Philox blocks consumed so far."""
        counter = self.generator.bit_generator.state["state"]["counter"]
        return int(sum(int(word) << (64 * i) for i, word in enumerate(counter)))

    def derive(self, *keys: Union[int, str]) -> "RngState":
        """Independent child stream, e.g. ``rng.derive("dropout")`` or ``rng.derive(epoch)``."""
        return RngState(self.seed, self.keys + tuple(stable_key(k) for k in keys))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self.generator.uniform(low, high, size=shape)

    def random(self, shape) -> np.ndarray:
        return self.generator.random(size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def choice(self, n: int, p: np.ndarray) -> int:
        # Inverse-CDF on one uniform draw; stable across numpy versions
        u = self.generator.random()
        return int(min(np.searchsorted(np.cumsum(p), u, side="right"), n - 1))

    def __repr__(self):
        return f"RngState(seed={self.seed}, keys={self.keys}, algorithm={self.algorithm!r})"


def glorot_uniform(shape: Tuple[int, ...], rng: RngState, dtype=DEFAULT_DTYPE) -> np.ndarray:
    """U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))) with fans from the last two axes."""
    fan_in, fan_out = (shape[-2], shape[-1]) if len(shape) >= 2 else (shape[0], shape[0])
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape).astype(dtype)


def dropout(x: Tensor, rate: float, rng: RngState, training: bool) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-rate); identity at inference."""
    check_rate(rate)
    if not training or rate == 0.0:
        return x
    return x * dropout_mask(x.shape, rate, rng, x.dtype)


def dropout_mask(shape, rate: float, rng: RngState, dtype=DEFAULT_DTYPE) -> np.ndarray:
    check_rate(rate)
    keep = rng.random(shape) >= rate
    return (keep / (1.0 - rate)).astype(dtype)


def check_rate(rate: float) -> None:
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must satisfy 0 <= rate < 1, got {rate}")
