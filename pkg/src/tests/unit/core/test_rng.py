"""Unit tests for src.tools.core.rng."""

import numpy as np
import pytest

from src.tools.core.rng import RngState, check_rate, dropout, dropout_mask, glorot_uniform
from src.tools.core.tensor import Tensor
from src.tools.utils.base import ConfigError


def test_same_seed_same_stream():
    a, b = RngState(42), RngState(42)
    np.testing.assert_array_equal(a.random(10), b.random(10))
    assert a.position == b.position


def test_derived_streams_are_reproducible_and_distinct():
    root = RngState(42)
    first = root.derive("dropout", 3).random(5)
    again = RngState(42).derive("dropout", 3).random(5)
    other = root.derive("dropout", 4).random(5)
    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other)


def test_derive_does_not_advance_parent():
    root = RngState(1)
    before = root.position
    root.derive("x").random(100)
    assert root.position == before


def test_seed_must_be_unsigned():
    with pytest.raises(ConfigError):
        RngState(-1)
    with pytest.raises(ConfigError):
        RngState(0).derive(-5)


def test_choice_follows_probabilities():
    rng = RngState(3)
    draws = [rng.choice(3, np.array([0.0, 1.0, 0.0])) for _ in range(20)]
    assert set(draws) == {1}


def test_glorot_uniform_bounds():
    w = glorot_uniform((30, 50), RngState(0))
    limit = np.sqrt(6.0 / 80.0)
    assert w.shape == (30, 50)
    assert np.all(np.abs(w) <= limit)


@pytest.mark.parametrize("rate", [0.0, 0.2, 0.5])
def test_dropout_mask_scales_survivors(rate):
    mask = dropout_mask((1000,), rate, RngState(5))
    survivors = mask[mask > 0]
    np.testing.assert_allclose(survivors, 1.0 / (1.0 - rate))


def test_dropout_is_identity_at_inference():
    x = Tensor(np.ones((4, 4)))
    assert dropout(x, 0.5, None, training=False) is x


@pytest.mark.parametrize("rate", [-0.1, 1.0, 1.5])
def test_invalid_rates(rate):
    with pytest.raises(ConfigError, match="0 <= rate < 1"):
        check_rate(rate)


def test_dropout_preserves_the_mean():
    x = Tensor(np.ones(100_000))
    out = dropout(x, 0.5, RngState(12), training=True).data
    assert abs(out.mean() - 1.0) <= 0.02
