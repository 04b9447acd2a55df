"""Unit tests for src.tools.models.checkpoint and checkpoint inspection."""

import json

import numpy as np
import pytest

from src.tools.models.checkpoint import MAGIC, decode_checkpoint, encode_checkpoint, read_checkpoint, save_checkpoint
from src.tools.models.models import describe_checkpoint, load_model
from src.tools.utils.base import ConfigError, DataIOError, run_command
from src.tests.shared.utils import build_tiny_model, random_tokens


# ---- round trip ----
def test_save_and_load_reproduce_predictions(tmp_path, architecture):
    model = build_tiny_model(architecture, seed=13)
    path = tmp_path / "model.trjm"
    save_checkpoint(path, model)

    restored = load_model(path)
    assert restored.config == model.config
    tokens = random_tokens(seed=3, batch=2, n=6, vocab_size=model.config.vocab_size)
    np.testing.assert_array_equal(restored.forward(tokens).data, model.forward(tokens).data)


def test_tensors_are_stored_in_registration_order(architecture):
    model = build_tiny_model(architecture, tied_output=True)
    _, state, header = decode_checkpoint(encode_checkpoint(model.config, model.state_dict()))
    assert [entry["name"] for entry in header["tensors"]] == list(model.parameters())
    assert list(state) == list(model.parameters())
    assert "output.weight" not in state


def test_encoding_is_deterministic():
    model = build_tiny_model("lstm", seed=2)
    assert encode_checkpoint(model.config, model.state_dict()) == encode_checkpoint(model.config, model.state_dict())


def test_float32_tensors_round_trip():
    model = build_tiny_model("transformer", dtype="float32")
    config, state, _ = decode_checkpoint(encode_checkpoint(model.config, model.state_dict()))
    assert config.dtype == "float32"
    assert all(value.dtype == np.float32 for value in state.values())


# ---- corruption ----
@pytest.fixture
def blob():
    model = build_tiny_model("lstm")
    return encode_checkpoint(model.config, model.state_dict())


def test_bad_magic_is_rejected(blob):
    with pytest.raises(DataIOError, match="magic"):
        decode_checkpoint(b"XXXX" + blob[4:])


def test_unknown_version_is_rejected(blob):
    with pytest.raises(DataIOError, match="version 9"):
        decode_checkpoint(blob[:4] + bytes([9]) + blob[5:])


def test_truncated_payload_is_rejected(blob):
    with pytest.raises(DataIOError, match="truncated"):
        decode_checkpoint(blob[:-8])


def test_truncated_header_is_rejected():
    with pytest.raises(DataIOError, match="truncated"):
        decode_checkpoint(MAGIC + b"\x01")


def test_trailing_bytes_are_rejected(blob):
    with pytest.raises(DataIOError, match="trailing"):
        decode_checkpoint(blob + b"\x00")



def _with_header(header: dict) -> bytes:
    raw = json.dumps(header).encode("utf-8")
    return MAGIC + bytes([1]) + len(raw).to_bytes(4, "little") + raw


@pytest.mark.parametrize(
    "header",
    [
        {"config": {}},
        {"config": {}, "tensors": {}},
        {"tensors": []},
        {"config": {}, "tensors": [{"name": "embedding", "shape": [2], "dtype": "int8"}]},
        {"config": {}, "tensors": [{"name": "embedding", "dtype": "float64"}]},
    ],
    ids=["no-tensors", "tensors-not-a-list", "no-config", "unknown-dtype", "no-shape"],
)
def test_malformed_header_is_an_io_error(header):
    with pytest.raises(DataIOError, match="corrupt checkpoint"):
        decode_checkpoint(_with_header(header))


def test_malformed_header_exits_with_io_code(tmp_path):
    path = tmp_path / "broken.trjm"
    path.write_bytes(_with_header({"config": {}, "tensors": [{"name": "x", "shape": [1], "dtype": "int8"}]}))
    assert run_command("inspect", describe_checkpoint, path) == 3


def test_missing_file_raises_io_error(tmp_path):
    with pytest.raises(DataIOError, match="cannot read"):
        read_checkpoint(tmp_path / "absent.trjm")


def test_state_with_wrong_names_is_rejected():
    model = build_tiny_model("lstm")
    state = model.state_dict()
    state["extra"] = state.pop("embedding")
    with pytest.raises(ConfigError, match="missing"):
        model.load_state_dict(state)


# ---- inspection ----
def test_describe_checkpoint_reports_tying_and_counts(tmp_path):
    model = build_tiny_model("transformer", tied_output=True)
    path = tmp_path / "tied.trjm"
    save_checkpoint(path, model)

    lines = describe_checkpoint(path)
    assert "  architecture: transformer" in lines
    assert f"total parameters: {model.parameter_count()}" in lines
    assert any(line.startswith("output matrix: tied") for line in lines)
    assert any(line.strip().startswith("embedding") and "7x4" in line for line in lines)
