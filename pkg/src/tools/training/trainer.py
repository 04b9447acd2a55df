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

"""Batched epoch loop with validation-driven early stopping."""

import math
import time
from dataclasses import asdict, dataclass, field
from logging import getLogger
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.tools.core.rng import RngState
from src.tools.core.tensor import no_grad
from src.tools.evaluation.metrics import AccuracyTally, predict_next
from src.tools.ingest.sequences import SequenceDataset
from src.tools.models.base import PADDING_ID, SequenceModel
from src.tools.training.config import TrainConfig
from src.tools.training.loss import LossConfig, sequence_loss, shift_targets
from src.tools.training.optim import AdamState, EarlyStopState, adam_step
from src.tools.training.split import DatasetSplit, SplitSpec, split_dataset
from src.tools.utils.base import ConfigError, DataIOError

logger = getLogger("trajectory_lm.training")

LOG_COLUMNS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc", "mean_batch_ms", "stopped_early")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: Optional[float]
    val_acc: Optional[float]
    mean_batch_ms: float
    stopped_early: bool = False


@dataclass
class TrainLog:
    rows: List[EpochRecord] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows], columns=list(LOG_COLUMNS))

    def write_csv(self, path: Union[str, Path]) -> None:
        try:
            self.to_frame().to_csv(path, index=False, lineterminator="\n")
        except OSError as e:
            raise DataIOError(f"cannot write training log '{path}': {e}")


@dataclass
class TrainResult:
    model: SequenceModel
    log: TrainLog
    best_epoch: int
    best_loss: float
    split: DatasetSplit
    batch_times_ms: List[float]
    stopped_early: bool

    @property
    def epochs_run(self) -> int:
        return len(self.log.rows)

    @property
    def mean_batch_ms(self) -> float:
        return float(np.mean(self.batch_times_ms)) if self.batch_times_ms else 0.0

    @property
    def std_batch_ms(self) -> float:
        return float(np.std(self.batch_times_ms, ddof=1)) if len(self.batch_times_ms) > 1 else 0.0


def _batches(tokens: np.ndarray, batch_size: int):
    for start in range(0, len(tokens), batch_size):
        batch = tokens[start : start + batch_size]
        # trailing columns that are padding in every row carry no target
        width = int((batch != PADDING_ID).sum(axis=1).max(initial=0))
        if width >= 2:
            yield batch[:, :width]


def evaluate_loss(
    model: SequenceModel, dataset: SequenceDataset, loss_cfg: LossConfig, batch_size: int
) -> Tuple[Optional[float], Optional[float]]:
    """Position-weighted mean loss and micro accuracy in inference mode; (None, None) when nothing to score."""
    total, positions = 0.0, 0
    tally = AccuracyTally()
    with no_grad():
        for batch in _batches(dataset.tokens(), batch_size):
            inputs, targets = shift_targets(batch)
            logits = model.forward(inputs, training=False)
            result = sequence_loss(logits, targets, loss_cfg)
            total += result.loss.item() * result.positions
            positions += result.positions
            tally.add(predict_next(logits.data), targets)
    if positions == 0:
        return None, None
    return total / positions, tally.micro


def train(
    model: SequenceModel,
    dataset: SequenceDataset,
    split: SplitSpec,
    config: TrainConfig,
    rng: RngState,
    loss_cfg: Optional[LossConfig] = None,
) -> TrainResult:
    """Train *model* in place and restore its best-monitored-loss snapshot.

    Each epoch shuffles the training split with rng.derive("shuffle", epoch),
    runs forward/backward/Adam per batch (timed), then scores the validation
    split. An empty validation split makes the epoch's training loss the
    monitored quantity.
    """
    loss_cfg = loss_cfg or LossConfig(confidence_beta=model.config.confidence_beta)
    parts = split_dataset(dataset, split)
    if len(parts.train) == 0:
        raise ConfigError("training split is empty")
    logger.info(
        f"Training {model.config.architecture} ({model.parameter_count()} parameters) on "
        f"{len(parts.train)}/{len(parts.validation)}/{len(parts.test)} train/validation/test sequences"
    )

    params = model.parameters()
    optimizer = AdamState(learning_rate=config.learning_rate)
    stopper = EarlyStopState(patience=config.patience)
    log = TrainLog()
    best_state: Dict[str, np.ndarray] = model.state_dict()
    batch_times: List[float] = []
    train_tokens = parts.train.tokens()

    for epoch in range(1, config.max_epochs + 1):
        order = rng.derive("shuffle", epoch).permutation(len(train_tokens))
        epoch_times: List[float] = []
        epoch_loss, epoch_positions = 0.0, 0
        tally = AccuracyTally()

        for index, batch in enumerate(_batches(train_tokens[order], config.batch_size)):
            inputs, targets = shift_targets(batch)
            started = time.perf_counter()
            model.zero_grad()
            logits = model.forward(inputs, training=True, rng=rng.derive("dropout", epoch, index))
            result = sequence_loss(logits, targets, loss_cfg)
            result.loss.backward()
            norm = adam_step(params, optimizer, config.clip_norm)
            elapsed_ms = (time.perf_counter() - started) * 1000.0

            epoch_times.append(elapsed_ms)
            epoch_loss += result.loss.item() * result.positions
            epoch_positions += result.positions
            tally.add(predict_next(logits.data), targets)
            logger.debug(
                f"epoch {epoch} batch {index}: loss {result.loss.item():.6f}, "
                f"grad norm {norm:.4f}, {elapsed_ms:.2f} ms"
            )

        if epoch_positions == 0:
            raise ConfigError("training split has no target positions (every sequence has length < 2)")
        train_loss = epoch_loss / epoch_positions
        val_loss, val_acc = evaluate_loss(model, parts.validation, loss_cfg, config.batch_size)
        monitored = val_loss if val_loss is not None else train_loss

        if stopper.update(epoch, monitored):
            best_state = model.state_dict()
        batch_times.extend(epoch_times)
        record = EpochRecord(
            epoch=epoch,
            train_loss=train_loss,
            train_acc=tally.micro,
            val_loss=val_loss,
            val_acc=val_acc,
            mean_batch_ms=float(np.mean(epoch_times)),
        )
        log.rows.append(record)
        logger.info(
            f"epoch {epoch}: train loss {train_loss:.4f} acc {record.train_acc:.4f}, "
            f"val loss {_fmt(val_loss)} acc {_fmt(val_acc)}, {record.mean_batch_ms:.2f} ms/batch"
        )

        if stopper.should_stop:
            record.stopped_early = True
            logger.info(
                f"Early stopping after epoch {epoch}: no improvement for {stopper.patience} epochs "
                f"(best {stopper.best_loss:.4f} at epoch {stopper.best_epoch})"
            )
            break

    model.load_state_dict(best_state)
    return TrainResult(
        model=model,
        log=log,
        best_epoch=stopper.best_epoch,
        best_loss=stopper.best_loss,
        split=parts,
        batch_times_ms=batch_times,
        stopped_early=stopper.should_stop,
    )


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None or math.isnan(value) else f"{value:.4f}"
