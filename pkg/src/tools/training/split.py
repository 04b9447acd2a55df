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

"""Seeded train/validation/test split by whole sequence."""

import math
from dataclasses import dataclass
from typing import NamedTuple

from src.tools.core.rng import RngState
from src.tools.ingest.sequences import SequenceDataset
from src.tools.utils.base import ConfigError


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    validation_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 42

    def __post_init__(self):
        fractions = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if any(not math.isfinite(f) or f < 0 for f in fractions):
            raise ConfigError(f"split fractions must be finite and >= 0, got {fractions}")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fractions)}")
        if self.train_fraction == 0:
            raise ConfigError("train_fraction must be positive")

    def sizes(self, count: int):
        """(train, validation, test) sizes; test takes the rounding remainder."""
        validation = int(round(count * self.validation_fraction))
        test = int(round(count * self.test_fraction))
        train = count - validation - test
        if train < 1 and count > 0:
            raise ConfigError(f"{count} sequences leave no training data under {self}")
        return train, validation, test


class DatasetSplit(NamedTuple):
    train: SequenceDataset
    validation: SequenceDataset
    test: SequenceDataset


def split_dataset(dataset: SequenceDataset, spec: SplitSpec) -> DatasetSplit:
    """Shuffle sequence indices with the split seed and cut them train | validation | test.

    Each part keeps the original file order of its members.
    """
    train, validation, _ = spec.sizes(len(dataset))
    order = RngState(spec.seed).derive("split").permutation(len(dataset))
    parts = (order[:train], order[train : train + validation], order[train + validation :])
    return DatasetSplit(*(dataset.subset(sorted(int(i) for i in part)) for part in parts))
