"""Unit tests for src.tools.utils.base module."""

import zlib

import pytest

from src.tools.utils import base as base_utils

# ----------------------------- stable_key -----------------------------


@pytest.mark.parametrize("key", [0, 17, 2**40])
def test_stable_key_passes_integers_through(key):
    assert base_utils.stable_key(key) == key


def test_stable_key_hashes_strings_with_crc32():
    assert base_utils.stable_key("shuffle") == zlib.crc32(b"shuffle")
    assert base_utils.stable_key("shuffle") != base_utils.stable_key("dropout")


def test_stable_key_rejects_negative_integers():
    with pytest.raises(base_utils.ConfigError, match="non-negative"):
        base_utils.stable_key(-1)


# ----------------------------- errors -----------------------------


def test_data_io_error_carries_line_number():
    error = base_utils.DataIOError("bad record", line=7)
    assert str(error) == "line 7: bad record"
    assert error.line == 7
    assert isinstance(error, OSError)


def test_dimension_error_is_a_config_error():
    error = base_utils.DimensionError("matmul", (2, 3), (4, 5))
    assert isinstance(error, base_utils.ConfigError)
    assert "(2, 3)" in str(error) and "(4, 5)" in str(error)


# ----------------------------- run_command -----------------------------


def test_run_command_success():
    """Handlers returning None count as success."""
    assert base_utils.run_command("noop", lambda: None) == base_utils.EXIT_OK
    assert base_utils.run_command("echo", lambda value: value, 0) == 0


@pytest.mark.parametrize(
    "error, code",
    [
        (base_utils.ConfigError("bad flag"), 2),
        (base_utils.VocabularyError("unknown node"), 2),
        (base_utils.DataIOError("unreadable"), 3),
        (base_utils.NumericError("nan loss"), 4),
        (FileNotFoundError(2, "No such file", "x.csv"), 3),
        (PermissionError("denied"), 3),
        (RuntimeError("bad things"), 1),
    ],
)
def test_run_command_maps_errors_to_exit_codes(error, code):
    def handler():
        raise error

    assert base_utils.run_command("failing", handler) == code
