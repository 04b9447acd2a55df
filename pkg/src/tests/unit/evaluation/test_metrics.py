"""Unit tests for src.tools.evaluation.metrics."""

import numpy as np
import pytest

from src.tools.evaluation.metrics import AccuracyTally, accuracy_from_predictions, predict_next
from src.tools.utils.base import ConfigError, DimensionError


def test_micro_accuracy_counts_only_real_targets():
    predictions = np.array([[1, 3, 4, 4]])
    targets = np.array([[1, 2, 0, 0]])
    assert accuracy_from_predictions(predictions, targets) == 0.5


def test_macro_weights_every_sequence_equally():
    """One short perfect sequence and one long miss: micro 0.25, macro 0.5."""
    predictions = np.array([[2, 1, 1, 1], [1, 1, 1, 1]])
    targets = np.array([[2, 0, 0, 0], [3, 3, 3, 0]])
    assert accuracy_from_predictions(predictions, targets, "micro") == 0.25
    assert accuracy_from_predictions(predictions, targets, "macro") == 0.5


def test_sequences_without_targets_are_left_out_of_macro():
    tally = AccuracyTally()
    tally.add(np.array([[1, 1]]), np.array([[1, 1]]))
    tally.add(np.array([[1, 1]]), np.array([[0, 0]]))
    assert tally.macro == 1.0
    assert tally.total == 2


def test_tally_accumulates_across_batches():
    tally = AccuracyTally()
    tally.add(np.array([[1, 2]]), np.array([[1, 1]]))
    tally.add(np.array([[3]]), np.array([[3]]))
    assert tally.micro == pytest.approx(2 / 3)
    assert tally.macro == pytest.approx(0.75)


def test_ties_go_to_the_lowest_token():
    logits = np.array([[[50.0, 1.0, 2.0, 2.0, 0.5]]])
    np.testing.assert_array_equal(predict_next(logits), [[2]])


def test_padding_class_is_never_predicted():
    logits = np.array([[[99.0, -1.0, -2.0]]])
    assert predict_next(logits)[0, 0] == 1


def test_no_targets_is_an_error():
    with pytest.raises(ConfigError, match="zero target positions"):
        accuracy_from_predictions(np.array([[1]]), np.array([[0]]))


def test_unknown_mode_is_an_error():
    with pytest.raises(ConfigError, match="Unknown accuracy mode"):
        accuracy_from_predictions(np.array([[1]]), np.array([[1]]), "weighted")


def test_shape_mismatch_is_an_error():
    with pytest.raises(DimensionError):
        accuracy_from_predictions(np.array([[1, 2]]), np.array([[1]]))


def test_accuracy_is_invariant_under_relabeling():
    gen = np.random.default_rng(3)
    targets = gen.integers(1, 7, size=(5, 8))
    targets[:, 6:] = 0
    predictions = np.where(gen.random(targets.shape) < 0.5, targets, gen.integers(1, 7, size=targets.shape))
    relabel = np.concatenate([[0], gen.permutation(np.arange(1, 7))])

    for mode in ("micro", "macro"):
        assert accuracy_from_predictions(relabel[predictions], relabel[targets], mode) == accuracy_from_predictions(
            predictions, targets, mode
        )
