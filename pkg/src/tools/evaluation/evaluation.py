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

"""Next-step accuracy of trained models and tabular reports across runs."""

import argparse
import math
from collections import Counter
from dataclasses import asdict, dataclass
from logging import getLogger
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.tools.core.tensor import no_grad
from src.tools.evaluation.metrics import PADDING_ID, AccuracyTally, predict_next
from src.tools.ingest.sequences import SequenceDataset, read_sequences, read_vocab
from src.tools.models.base import SequenceModel
from src.tools.models.models import load_model
from src.tools.training.config import load_run_config
from src.tools.training.split import split_dataset
from src.tools.utils.base import ConfigError, DataIOError

logger = getLogger("trajectory_lm.evaluation")

REPORT_COLUMNS = (
    "dataset",
    "model",
    "users",
    "test_acc_micro",
    "test_acc_macro",
    "train_acc_micro",
    "gap",
    "mean_batch_ms",
    "std_batch_ms",
)
LARGE_DATASET_USERS = 2000
FLOAT_FORMAT = "%.6f"


# ---------------------------------------------------------------------------
# Accuracy
# ---------------------------------------------------------------------------


def _tally(model: SequenceModel, dataset: SequenceDataset, batch_size: int) -> AccuracyTally:
    tally = AccuracyTally()
    tokens = dataset.tokens()
    with no_grad():
        for start in range(0, len(tokens), batch_size):
            batch = tokens[start : start + batch_size]
            logits = model.forward(batch[:, :-1], training=False)
            tally.add(predict_next(logits.data), batch[:, 1:])
    return tally


def next_step_accuracy(model: SequenceModel, dataset: SequenceDataset, mode: str = "micro", batch_size: int = 128) -> float:
    """Fraction of non-padding next-step targets the model's argmax gets right.

    Raises:
        ConfigError: empty dataset, no target positions, or an unknown mode
    """
    if len(dataset) == 0:
        raise ConfigError("accuracy over an empty dataset")
    return _tally(model, dataset, batch_size).result(mode)


def accuracies(model: SequenceModel, dataset: SequenceDataset, batch_size: int = 128) -> Tuple[float, float]:
    """(micro, macro) from a single pass."""
    if len(dataset) == 0:
        raise ConfigError("accuracy over an empty dataset")
    tally = _tally(model, dataset, batch_size)
    return tally.micro, tally.macro


def _targets(dataset: SequenceDataset) -> np.ndarray:
    targets = dataset.tokens()[:, 1:]
    return targets[targets != PADDING_ID]


def unigram_baseline_accuracy(train: SequenceDataset, test: SequenceDataset) -> float:
    """Micro accuracy on *test* of always predicting the most frequent training target (ties: lowest ID)."""
    counts = Counter(int(t) for t in _targets(train))
    if not counts:
        raise ConfigError("unigram baseline needs at least one training target")
    best = min(counts, key=lambda token: (-counts[token], token))
    test_targets = _targets(test)
    if test_targets.size == 0:
        raise ConfigError("accuracy over zero target positions")
    return float(np.mean(test_targets == best))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunResult:
    dataset: str
    model: str
    test_acc_micro: float
    test_acc_macro: float
    train_acc_micro: Optional[float] = None
    mean_batch_ms: Optional[float] = None
    std_batch_ms: Optional[float] = None
    users: int = 0

    def __post_init__(self):
        for name in ("test_acc_micro", "test_acc_macro", "train_acc_micro"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.std_batch_ms is not None and self.std_batch_ms < 0:
            raise ConfigError(f"std_batch_ms must be >= 0, got {self.std_batch_ms}")

    @property
    def gap(self) -> Optional[float]:
        """Train minus test micro accuracy; large values flag overfitting."""
        if self.train_acc_micro is None:
            return None
        return self.train_acc_micro - self.test_acc_micro


def _row(run: RunResult) -> Dict[str, object]:
    row = asdict(run)
    row["gap"] = run.gap
    return row


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def _std(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return float(np.std(present, ddof=1)) if len(present) > 1 else 0.0


_AGGREGATED = ("test_acc_micro", "test_acc_macro", "train_acc_micro", "gap", "mean_batch_ms", "std_batch_ms")


def _aggregate(label: str, model: str, rows: List[Dict[str, object]], reducer) -> Dict[str, object]:
    row: Dict[str, object] = {"dataset": label, "model": model, "users": int(sum(r["users"] for r in rows))}
    for column in _AGGREGATED:
        row[column] = reducer([r[column] for r in rows])
    return row


@dataclass
class MetricsReport:
    rows: List[Dict[str, object]]
    aggregates: List[Dict[str, object]]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows + self.aggregates, columns=list(REPORT_COLUMNS))

    def to_csv(self) -> str:
        return self.to_frame().to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    def write_csv(self, path: Union[str, Path]) -> None:
        try:
            Path(path).write_text(self.to_csv(), encoding="utf-8")
        except OSError as e:
            raise DataIOError(f"cannot write report '{path}': {e}")

    def render_table(self) -> str:
        frame = self.to_frame()
        formatters = {c: (lambda v: "-" if v is None or pd.isna(v) else f"{v:.4f}") for c in _AGGREGATED}
        return frame.to_string(index=False, formatters=formatters) + "\n"


def summarize(runs: Sequence[RunResult], large_threshold: int = LARGE_DATASET_USERS) -> MetricsReport:
    """Per-run rows plus, per model, mean and sample-std rows over all datasets
    and mean rows over large (>= *large_threshold* users) and small datasets."""
    if not runs:
        raise ConfigError("summarize needs at least one run")
    rows = [_row(run) for run in runs]

    aggregates = []
    for model in dict.fromkeys(run.model for run in runs):
        group = [row for row in rows if row["model"] == model]
        aggregates.append(_aggregate("mean", model, group, _mean))
        aggregates.append(_aggregate("std", model, group, _std))
        large = [row for row in group if row["users"] >= large_threshold]
        small = [row for row in group if row["users"] < large_threshold]
        if large and small:
            aggregates.append(_aggregate(f"mean_large(>={large_threshold})", model, large, _mean))
            aggregates.append(_aggregate(f"mean_small(<{large_threshold})", model, small, _mean))
    return MetricsReport(rows=rows, aggregates=aggregates)


def timing_from_log(path: Union[str, Path]) -> Tuple[float, float]:
    """(mean, sample std) of the per-epoch mean batch times in a training log CSV."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataIOError(f"cannot read training log '{path}': {e}")
    if "mean_batch_ms" not in frame.columns or frame.empty:
        raise DataIOError(f"training log '{path}' has no mean_batch_ms values")
    times = [float(v) for v in frame["mean_batch_ms"]]
    return _mean(times), _std(times)


# ---------------------------------------------------------------------------
# Command
# ---------------------------------------------------------------------------


def _eval(args: argparse.Namespace) -> int:
    model = load_model(args.checkpoint)
    dataset = read_sequences(args.seqs)
    if args.vocab:
        vocab = read_vocab(args.vocab)
        if vocab.size != model.config.vocab_size:
            raise ConfigError(
                f"vocabulary has {vocab.size} nodes but the checkpoint was trained with {model.config.vocab_size}"
            )

    if args.whole_file:
        test, train = dataset, None
    else:
        split = load_run_config(model.config.architecture, args.config, {"seed": args.seed}).split
        parts = split_dataset(dataset, split)
        test, train = parts.test, parts.train

    micro, macro = accuracies(model, test, args.batch_size)
    train_micro = accuracies(model, train, args.batch_size)[0] if train is not None and len(train) else None
    mean_ms, std_ms = timing_from_log(args.train_log) if args.train_log else (None, None)

    run = RunResult(
        dataset=args.dataset or Path(args.seqs).stem,
        model=args.model_name or _model_label(model),
        test_acc_micro=micro,
        test_acc_macro=macro,
        train_acc_micro=train_micro,
        mean_batch_ms=mean_ms,
        std_batch_ms=std_ms,
        users=len({s.user for s in dataset}),
    )
    report = summarize([run], args.large_threshold)
    report.write_csv(args.out_report)
    print(report.render_table(), end="")
    logger.info(f"Wrote report to {args.out_report} (test micro {micro:.4f}, macro {macro:.4f})")
    return 0


def _model_label(model: SequenceModel) -> str:
    config = model.config
    parts = [config.architecture]
    if config.tied_output:
        parts.append("tied")
    if config.confidence_beta > 0:
        parts.append(f"beta={config.confidence_beta:g}")
    return "-".join(parts)


def register_commands(subparsers) -> None:
    """Register the ``eval`` subcommand."""
    parser = subparsers.add_parser(
        "eval",
        help="Score a checkpoint's next-step accuracy and write a metrics report",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--checkpoint", required=True, help="TRJM checkpoint file")
    parser.add_argument("--seqs", required=True, help="Sequence file (JSONL)")
    parser.add_argument("--out-report", required=True, help="Output report CSV")
    parser.add_argument("--vocab", default=None, help="Vocabulary JSON to cross-check against the checkpoint")
    parser.add_argument("--train-log", default=None, help="Training log CSV supplying the batch-time columns")
    parser.add_argument("--dataset", default=None, help="Dataset name for the report row (default: file stem)")
    parser.add_argument("--model-name", default=None, help="Model name for the report row")
    parser.add_argument("--config", default=None, help="JSON config whose split fractions match training")
    parser.add_argument("--seed", type=int, default=None, help="Split seed used at training time (default 42)")
    parser.add_argument("--whole-file", action="store_true", help="Treat every sequence as test data (no split)")
    parser.add_argument("--batch-size", type=int, default=128, help="Evaluation batch size")
    parser.add_argument("--large-threshold", type=int, default=LARGE_DATASET_USERS,
                        help="User count from which a dataset counts as large")
    parser.set_defaults(handler=_eval)
