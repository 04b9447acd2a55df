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

"""Counting core of next-step accuracy.

micro: correct predictions / all non-padding target positions.
macro: mean over sequences of their own accuracy; sequences without any
target are left out of the mean.
"""

from typing import List

import numpy as np

from src.tools.utils.base import ConfigError, DimensionError

PADDING_ID = 0
MODES = ("micro", "macro")


def predict_next(logits: np.ndarray) -> np.ndarray:
    """Argmax over the non-padding classes; ties go to the lowest token ID."""
    logits = np.asarray(logits)
    return np.argmax(logits[..., 1:], axis=-1) + 1


class AccuracyTally:
    """Accumulates micro and macro accuracy over batches of (predictions, targets)."""

    def __init__(self):
        self.correct = 0
        self.total = 0
        self.per_sequence: List[float] = []

    def add(self, predictions: np.ndarray, targets: np.ndarray) -> None:
        predictions, targets = np.atleast_2d(predictions), np.atleast_2d(targets)
        if predictions.shape != targets.shape:
            raise DimensionError("accuracy", predictions.shape, targets.shape)
        included = targets != PADDING_ID
        hits = (predictions == targets) & included
        self.correct += int(hits.sum())
        self.total += int(included.sum())
        for row_hits, row_included in zip(hits.sum(axis=1), included.sum(axis=1)):
            if row_included:
                self.per_sequence.append(row_hits / row_included)

    @property
    def micro(self) -> float:
        if self.total == 0:
            raise ConfigError("accuracy over zero target positions")
        return self.correct / self.total

    @property
    def macro(self) -> float:
        if not self.per_sequence:
            raise ConfigError("accuracy over zero target positions")
        return float(np.mean(self.per_sequence))

    def result(self, mode: str) -> float:
        if mode not in MODES:
            raise ConfigError(f"Unknown accuracy mode '{mode}'. Valid: {', '.join(MODES)}")
        return self.micro if mode == "micro" else self.macro


def accuracy_from_predictions(predictions: np.ndarray, targets: np.ndarray, mode: str = "micro") -> float:
    tally = AccuracyTally()
    tally.add(predictions, targets)
    return tally.result(mode)
