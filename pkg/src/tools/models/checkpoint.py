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

"""TRJM checkpoint container.

Layout (all integers little-endian):

    b"TRJM" | version (1 byte) | header length (4 bytes) | JSON header | payloads

The header holds the ModelConfig and the ordered list of
``{"name", "shape", "dtype"}`` entries; payloads follow in header order.
A tied output matrix is never stored: it is the embedding matrix.
"""

import json
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from src.tools.models.config import ModelConfig
from src.tools.utils.base import DataIOError

logger = getLogger("trajectory_lm.models.checkpoint")

MAGIC = b"TRJM"
VERSION = 1
_WIRE_DTYPES = {"float64": "<f8", "float32": "<f4"}


def encode_checkpoint(config: ModelConfig, state: Dict[str, np.ndarray]) -> bytes:
    entries, payloads = [], []
    for name, value in state.items():
        dtype = str(np.asarray(value).dtype)
        if dtype not in _WIRE_DTYPES:
            raise DataIOError(f"cannot store tensor '{name}' of dtype {dtype}")
        entries.append({"name": name, "shape": list(value.shape), "dtype": dtype})
        payloads.append(np.ascontiguousarray(value, dtype=_WIRE_DTYPES[dtype]).tobytes())

    header = json.dumps({"config": config.to_dict(), "tensors": entries}, sort_keys=True, separators=(",", ":"))
    header_bytes = header.encode("utf-8")
    return b"".join([MAGIC, bytes([VERSION]), len(header_bytes).to_bytes(4, "little"), header_bytes, *payloads])


def decode_checkpoint(blob: bytes) -> Tuple[ModelConfig, Dict[str, np.ndarray], Dict[str, Any]]:
    """Returns (config, ordered tensors, raw header)."""
    if blob[:4] != MAGIC:
        raise DataIOError(f"not a TRJM checkpoint (magic {blob[:4]!r})")
    if len(blob) < 9:
        raise DataIOError("truncated checkpoint header")
    if blob[4] != VERSION:
        raise DataIOError(f"unsupported checkpoint version {blob[4]} (expected {VERSION})")

    header_len = int.from_bytes(blob[5:9], "little")
    try:
        header = json.loads(blob[9 : 9 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataIOError(f"corrupt checkpoint header: {e}")

    if not isinstance(header, dict) or not isinstance(header.get("tensors"), list) or "config" not in header:
        raise DataIOError("corrupt checkpoint header: expected 'config' and a 'tensors' list")

    offset = 9 + header_len
    state: Dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        try:
            name, shape = entry["name"], entry["shape"]
            wire = np.dtype(_WIRE_DTYPES[entry["dtype"]])
            count = int(np.prod(shape, dtype=np.int64))
        except (KeyError, TypeError, ValueError) as e:
            raise DataIOError(f"corrupt checkpoint tensor entry {entry!r}: {e!r}")
        end = offset + count * wire.itemsize
        if end > len(blob):
            raise DataIOError(f"checkpoint payload truncated at tensor '{name}'")
        values = np.frombuffer(blob[offset:end], dtype=wire).astype(entry["dtype"])
        state[name] = values.reshape(shape)
        offset = end
    if offset != len(blob):
        raise DataIOError(f"{len(blob) - offset} trailing bytes after checkpoint payloads")

    return ModelConfig.from_dict(header["config"]), state, header


def save_checkpoint(path: Union[str, Path], model) -> None:
    blob = encode_checkpoint(model.config, model.state_dict())
    try:
        Path(path).write_bytes(blob)
    except OSError as e:
        raise DataIOError(f"cannot write checkpoint '{path}': {e}")
    logger.info(f"Saved checkpoint {path} ({len(blob)} bytes, {model.parameter_count()} parameters)")


def read_checkpoint(path: Union[str, Path]) -> Tuple[ModelConfig, Dict[str, np.ndarray], Dict[str, Any]]:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise DataIOError(f"cannot read checkpoint '{path}': {e}")
    return decode_checkpoint(blob)
