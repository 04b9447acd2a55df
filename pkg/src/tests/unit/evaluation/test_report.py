"""Unit tests for src.tools.evaluation.evaluation."""

import numpy as np
import pandas as pd
import pytest

from src.tools.core.tensor import Tensor
from src.tools.evaluation.evaluation import (
    REPORT_COLUMNS,
    RunResult,
    accuracies,
    next_step_accuracy,
    summarize,
    timing_from_log,
    unigram_baseline_accuracy,
)
from src.tools.utils.base import ConfigError, DataIOError
from src.tests.shared.utils import build_tiny_model, make_dataset


@pytest.fixture
def constant_model():
    """A model that predicts token 3 at every position."""
    model = build_tiny_model("lstm", seed=0)
    params = model.parameters()
    params["output.weight"].data[...] = 0.0
    params["output.bias"].data[...] = 0.0
    params["output.bias"].data[3] = 10.0
    return model


# ---- accuracy ----
def test_constant_model_accuracy(constant_model):
    dataset = make_dataset([[1, 3, 3, 2], [1, 2]], max_seq_len=5)
    assert next_step_accuracy(constant_model, dataset) == 0.5
    micro, macro = accuracies(constant_model, dataset, batch_size=1)
    assert micro == 0.5
    assert macro == pytest.approx((2 / 3 + 0.0) / 2)


class _CycleMemorizer:
    """Puts all logit mass on the successor of each input in the cycle 1 -> 2 -> 3 -> 4 -> 1."""

    def forward(self, tokens, training=False):
        logits = np.zeros(tokens.shape + (5,))
        successors = np.where(tokens == 0, 1, tokens % 4 + 1)
        np.put_along_axis(logits, successors[..., None], 1.0, axis=-1)
        return Tensor(logits)


def test_perfect_memorizer_scores_one_on_cycle_data():
    dataset = make_dataset([[1, 2, 3, 4, 1, 2], [3, 4], [2, 3, 4, 1]], max_seq_len=6)
    micro, macro = accuracies(_CycleMemorizer(), dataset, batch_size=2)
    assert (micro, macro) == (1.0, 1.0)


def test_accuracy_of_empty_dataset_is_an_error(constant_model):
    with pytest.raises(ConfigError, match="empty dataset"):
        next_step_accuracy(constant_model, make_dataset([[1, 2]]).subset([]))


def test_unigram_baseline():
    train = make_dataset([[1, 2, 2, 3], [1, 3, 3]])
    test = make_dataset([[1, 3, 2, 3]])
    # training targets: 2, 2, 3, 3, 3 -> always predict 3
    assert unigram_baseline_accuracy(train, test) == pytest.approx(2 / 3)


def test_unigram_baseline_breaks_ties_toward_lowest_id():
    train = make_dataset([[1, 4, 2]])
    test = make_dataset([[1, 2, 4]])
    assert unigram_baseline_accuracy(train, test) == 0.5


# ---- report ----
def test_summarize_mean_and_sample_std():
    runs = [RunResult("a", "lstm", 0.6, 0.6, users=10), RunResult("b", "lstm", 0.7, 0.8, users=20)]
    report = summarize(runs)
    mean, std = report.aggregates
    assert (mean["dataset"], std["dataset"]) == ("mean", "std")
    assert mean["test_acc_micro"] == pytest.approx(0.65)
    assert std["test_acc_micro"] == pytest.approx(0.0707107, abs=1e-6)
    assert mean["users"] == 30
    assert mean["gap"] is None


def test_single_run_std_is_zero():
    std = summarize([RunResult("a", "lstm", 0.5, 0.5)]).aggregates[1]
    assert std["test_acc_micro"] == 0.0


def test_large_and_small_means_need_both_groups():
    runs = [
        RunResult("big", "tf", 0.8, 0.8, users=5000),
        RunResult("small", "tf", 0.4, 0.4, users=100),
    ]
    labels = [row["dataset"] for row in summarize(runs).aggregates]
    assert labels == ["mean", "std", "mean_large(>=2000)", "mean_small(<2000)"]
    assert len(summarize(runs[:1]).aggregates) == 2


def test_gap_is_train_minus_test():
    run = RunResult("a", "lstm", 0.6, 0.6, train_acc_micro=0.9)
    assert run.gap == pytest.approx(0.3)


def test_accuracy_out_of_range_is_rejected():
    with pytest.raises(ConfigError, match="test_acc_micro"):
        RunResult("a", "lstm", 1.5, 0.5)


def test_report_csv_is_stable(tmp_path):
    runs = [RunResult("a", "lstm", 0.6, 0.55, train_acc_micro=0.7, users=10)]
    report = summarize(runs)
    path = tmp_path / "report.csv"
    report.write_csv(path)

    text = path.read_text()
    assert text == summarize(runs).to_csv()
    assert text.splitlines()[0] == ",".join(REPORT_COLUMNS)
    assert text.splitlines()[1] == "a,lstm,10,0.600000,0.550000,0.700000,0.100000,,"
    frame = pd.read_csv(path)
    assert frame["dataset"].tolist() == ["a", "mean", "std"]


def test_render_table_shows_missing_values_as_dashes():
    table = summarize([RunResult("a", "lstm", 0.6, 0.55)]).render_table()
    assert "0.6000" in table
    assert " - " in table or table.rstrip().endswith("-")


# ---- timing ----
def test_timing_from_log(tmp_path):
    path = tmp_path / "log.csv"
    pd.DataFrame({"epoch": [1, 2, 3], "mean_batch_ms": [10.0, 12.0, 14.0]}).to_csv(path, index=False)
    mean, std = timing_from_log(path)
    assert mean == 12.0
    assert std == pytest.approx(2.0)


def test_timing_from_log_without_column(tmp_path):
    path = tmp_path / "log.csv"
    path.write_text("epoch\n1\n")
    with pytest.raises(DataIOError, match="mean_batch_ms"):
        timing_from_log(path)
