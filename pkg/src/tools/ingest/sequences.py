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

"""Vocabulary and token-sequence artifacts shared by ingest, synth, train and eval.

Vocabulary file: a JSON object ``{name: id, ..., "__homepage__": id}`` in ID
order. Sequence file: JSONL whose first line is the header
``{"format": "trajectory-sequences", "version": 1, "max_seq_len": L, "count": N}``
followed by one ``{"user": ..., "tokens": [...]}`` object per sequence.
"""

import json
from dataclasses import dataclass
from logging import getLogger
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.tools.utils.base import ConfigError, DataIOError, VocabularyError

logger = getLogger("trajectory_lm.ingest.sequences")

PADDING_ID = 0
HOMEPAGE_KEY = "__homepage__"
SEQUENCE_FORMAT = "trajectory-sequences"
SEQUENCE_VERSION = 1

PathLike = Union[str, Path]


class Vocab:
    """Bijection between course-node names and token IDs 1..|T|; 0 is padding."""

    padding_id = PADDING_ID

    def __init__(self, names: Sequence[str], homepage_name: str):
        names = list(names)
        if len(set(names)) != len(names):
            raise VocabularyError("vocabulary names must be unique")
        if HOMEPAGE_KEY in names:
            raise VocabularyError(f"'{HOMEPAGE_KEY}' is reserved and cannot be a node name")
        if homepage_name not in names:
            raise VocabularyError(f"homepage '{homepage_name}' is not in the vocabulary")

        self.id_to_name: Dict[int, str] = {index: name for index, name in enumerate(names, start=1)}
        self.name_to_id: Dict[str, int] = {name: index for index, name in self.id_to_name.items()}
        self.homepage_name = homepage_name
        self.homepage_id = self.name_to_id[homepage_name]

    @property
    def size(self) -> int:
        """|T|, padding excluded."""
        return len(self.id_to_name)

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Vocab)
            and self.id_to_name == other.id_to_name
            and self.homepage_id == other.homepage_id
        )

    def token_for(self, name: str) -> int:
        try:
            return self.name_to_id[name]
        except KeyError:
            raise VocabularyError(f"node '{name}' is not in the vocabulary")

    def to_json(self) -> Dict[str, int]:
        payload = dict(self.name_to_id)
        payload[HOMEPAGE_KEY] = self.homepage_id
        return payload

    @classmethod
    def from_json(cls, payload: Dict[str, int]) -> "Vocab":
        if not isinstance(payload, dict) or HOMEPAGE_KEY not in payload:
            raise VocabularyError(f"vocabulary must be a JSON object with a '{HOMEPAGE_KEY}' entry")
        entries = {name: token for name, token in payload.items() if name != HOMEPAGE_KEY}
        ids = sorted(entries.values())
        if ids != list(range(1, len(ids) + 1)):
            raise VocabularyError("vocabulary IDs must be the consecutive integers 1..|T|")

        names = sorted(entries, key=entries.get)
        homepage_id = payload[HOMEPAGE_KEY]
        if not isinstance(homepage_id, int) or not 1 <= homepage_id <= len(names):
            raise VocabularyError(f"homepage ID {homepage_id} is outside 1..{len(names)}")
        return cls(names, names[homepage_id - 1])


@dataclass(frozen=True)
class TrajectorySequence:
    user: str
    tokens: Tuple[int, ...]

    @property
    def length(self) -> int:
        """Number of non-padding tokens."""
        return sum(1 for token in self.tokens if token != PADDING_ID)

    def validate(self, vocab_size: Optional[int] = None, homepage_id: Optional[int] = None) -> None:
        """Check the padding layout, token range and homepage start.

        Raises:
            VocabularyError: a token is outside [0, vocab_size]
            ConfigError: padding precedes a real token, or the homepage is not first
        """
        seen_padding = False
        for position, token in enumerate(self.tokens):
            if token < 0 or (vocab_size is not None and token > vocab_size):
                raise VocabularyError(f"user '{self.user}': token {token} at position {position} is out of range")
            if token == PADDING_ID:
                seen_padding = True
            elif seen_padding:
                raise ConfigError(f"user '{self.user}': token at position {position} follows padding")
        if homepage_id is not None and self.tokens and self.tokens[0] != homepage_id:
            raise ConfigError(f"user '{self.user}': sequence starts with {self.tokens[0]}, not homepage {homepage_id}")


class SequenceDataset:
    """Ordered, equal-length sequences ready to batch."""

    def __init__(self, sequences: Iterable[TrajectorySequence], max_seq_len: int):
        self.sequences: List[TrajectorySequence] = list(sequences)
        self.max_seq_len = max_seq_len
        for sequence in self.sequences:
            if len(sequence.tokens) != max_seq_len:
                raise ConfigError(
                    f"user '{sequence.user}': {len(sequence.tokens)} tokens, expected {max_seq_len}"
                )

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def __getitem__(self, index) -> TrajectorySequence:
        return self.sequences[index]

    def tokens(self) -> np.ndarray:
        """(count, max_seq_len) int64 array."""
        if not self.sequences:
            return np.zeros((0, self.max_seq_len), dtype=np.int64)
        return np.array([s.tokens for s in self.sequences], dtype=np.int64)

    def max_token(self) -> int:
        return int(self.tokens().max(initial=0))

    def subset(self, indices: Sequence[int]) -> "SequenceDataset":
        return SequenceDataset([self.sequences[i] for i in indices], self.max_seq_len)


@dataclass(frozen=True)
class DatasetSummary:
    """Node count and user count of one corpus."""

    name: str
    node_count: int
    user_count: int

    @classmethod
    def of(cls, name: str, vocab: Vocab, dataset: SequenceDataset) -> "DatasetSummary":
        return cls(name=name, node_count=vocab.size, user_count=len({s.user for s in dataset}))

    def describe(self) -> str:
        return f"dataset {self.name}: {self.node_count} nodes, {self.user_count} users"


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _write_text(path: PathLike, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    except OSError as e:
        raise DataIOError(f"cannot write '{path}': {e}")


def _read_text(path: PathLike) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except UnicodeDecodeError as e:
        raise DataIOError(f"'{path}' is not valid UTF-8: {e}")
    except OSError as e:
        raise DataIOError(f"cannot read '{path}': {e}")


def write_vocab(path: PathLike, vocab: Vocab) -> None:
    _write_text(path, json.dumps(vocab.to_json(), indent=2) + "\n")
    logger.info(f"Wrote vocabulary of {vocab.size} nodes to {path}")


def read_vocab(path: PathLike) -> Vocab:
    try:
        payload = json.loads(_read_text(path))
    except json.JSONDecodeError as e:
        raise DataIOError(f"corrupt vocabulary file '{path}': {e.msg}", line=e.lineno)
    return Vocab.from_json(payload)


def write_sequences(path: PathLike, sequences: Sequence[TrajectorySequence], max_seq_len: int) -> None:
    header = {"format": SEQUENCE_FORMAT, "version": SEQUENCE_VERSION, "max_seq_len": max_seq_len, "count": len(sequences)}
    lines = [json.dumps(header)]
    for sequence in sequences:
        if len(sequence.tokens) != max_seq_len:
            raise ConfigError(f"user '{sequence.user}': {len(sequence.tokens)} tokens, expected {max_seq_len}")
        lines.append(json.dumps({"user": sequence.user, "tokens": [int(t) for t in sequence.tokens]}))
    _write_text(path, "\n".join(lines) + "\n")
    logger.info(f"Wrote {len(sequences)} sequences (max_seq_len={max_seq_len}) to {path}")


def read_sequences(path: PathLike) -> SequenceDataset:
    """Load a sequence file.

    Raises:
        DataIOError: unreadable file, bad header, or a corrupt line (with its line number)
    """
    lines = _read_text(path).splitlines()
    if not lines:
        raise DataIOError(f"'{path}' is empty: missing sequence header", line=1)

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DataIOError(f"corrupt sequence header: {e.msg}", line=1)
    if not isinstance(header, dict) or header.get("format") != SEQUENCE_FORMAT:
        raise DataIOError(f"not a {SEQUENCE_FORMAT} file", line=1)
    if header.get("version") != SEQUENCE_VERSION:
        raise DataIOError(f"unsupported sequence file version {header.get('version')}", line=1)
    max_seq_len = header.get("max_seq_len")
    if not isinstance(max_seq_len, int) or max_seq_len < 1:
        raise DataIOError(f"invalid max_seq_len {max_seq_len!r}", line=1)

    sequences = []
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            user, tokens = obj["user"], obj["tokens"]
            if not isinstance(user, str) or not isinstance(tokens, list):
                raise TypeError("'user' must be a string and 'tokens' an array")
            if not all(isinstance(t, int) and not isinstance(t, bool) for t in tokens):
                raise TypeError("tokens must be integers")
            sequence = TrajectorySequence(user=user, tokens=tuple(tokens))
            if len(tokens) != max_seq_len:
                raise ValueError(f"{len(tokens)} tokens, expected {max_seq_len}")
            sequence.validate()
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise DataIOError(f"corrupt sequence record: {e}", line=line_number)
        sequences.append(sequence)

    if header.get("count") != len(sequences):
        raise DataIOError(f"header announces {header.get('count')} sequences, found {len(sequences)}", line=1)
    logger.debug(f"Read {len(sequences)} sequences from {path}")
    return SequenceDataset(sequences, max_seq_len)
