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

"""Navigation-log ingestion: raw records -> vocabulary + padded token sequences.

Steps:
    1. parse_records       select action, timestamp, username and course path
    2. filter_nav_actions  keep seq_next / seq_prev / seq_goto
    3. build_vocab         one positive token per "/"-joined course path
    4-5. assemble_sequences  group by user, order by time, prepend the
                           homepage, truncate to the earliest events, pad with 0
"""

import argparse
import io
import json
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime
from logging import getLogger
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Tuple, Union

import pandas as pd

from src.tools.ingest.sequences import (
    DatasetSummary,
    SequenceDataset,
    TrajectorySequence,
    Vocab,
    write_sequences,
    write_vocab,
)
from src.tools.utils.base import ConfigError, DataIOError, VocabularyError

logger = getLogger("trajectory_lm.ingest")

NAVIGATION_ACTIONS = frozenset({"seq_next", "seq_prev", "seq_goto"})
MANDATORY_COLUMNS = ("basic_action", "timestamp", "username", "path_components")
FORMATS = ("csv", "jsonl")
PATH_SEPARATOR = "/"
DEFAULT_CHUNK_ROWS = 10_000

Source = Union[str, Path, BinaryIO]


@dataclass(frozen=True)
class RawLogRecord:
    basic_action: str
    timestamp: datetime
    username: str
    path_components: Tuple[str, ...]

    @property
    def node_name(self) -> str:
        return PATH_SEPARATOR.join(self.path_components)


@dataclass
class IngestStats:
    """Counters reported by the ingest command."""

    total_rows: int = 0
    malformed_rows: int = 0
    navigation_rows: int = 0
    users: int = 0
    sequences: int = 0
    truncated_sequences: int = 0


# ---------------------------------------------------------------------------
# Step 1: parsing
# ---------------------------------------------------------------------------


def parse_column_map(spec: Optional[str]) -> Dict[str, str]:
    """``"timestamp=time,username=user"`` -> {"timestamp": "time", "username": "user"}."""
    mapping = {name: name for name in MANDATORY_COLUMNS}
    if not spec:
        return mapping
    for item in spec.split(","):
        if "=" not in item:
            raise ConfigError(f"column mapping '{item}' must look like <field>=<column>")
        field, column = (part.strip() for part in item.split("=", 1))
        if field not in mapping:
            raise ConfigError(f"unknown field '{field}' in column mapping. Valid: {', '.join(MANDATORY_COLUMNS)}")
        mapping[field] = column
    return mapping


@contextmanager
def _open_text(source: Source) -> Iterator[io.TextIOBase]:
    try:
        if isinstance(source, (str, Path)):
            handle = open(source, "rb")
            owned = True
        else:
            handle, owned = source, False
    except OSError as e:
        raise DataIOError(f"cannot read '{source}': {e}")

    text = io.TextIOWrapper(handle, encoding="utf-8", newline="")
    try:
        yield text
    except UnicodeDecodeError as e:
        raise DataIOError(f"input is not valid UTF-8: {e}")
    finally:
        text.detach()
        if owned:
            handle.close()


def parse_records(
    source: Source,
    fmt: str = "csv",
    column_map: Optional[Dict[str, str]] = None,
    stats: Optional[IngestStats] = None,
    chunk_rows: int = DEFAULT_CHUNK_ROWS,
) -> Iterator[RawLogRecord]:
    """Yield records in file order; malformed rows are counted in *stats* and skipped.

    Raises:
        ConfigError: unknown format, or a mapped column missing from the CSV header
        DataIOError: unreadable or non-UTF-8 source
    """
    if fmt not in FORMATS:
        raise ConfigError(f"Unknown input format '{fmt}'. Valid: {', '.join(FORMATS)}")
    column_map = column_map or parse_column_map(None)
    stats = stats if stats is not None else IngestStats()

    with _open_text(source) as text:
        frames = _csv_frames(text, column_map, stats, chunk_rows) if fmt == "csv" else _jsonl_frames(
            text, column_map, stats, chunk_rows
        )
        for frame in frames:
            yield from _frame_records(frame, stats)


def _csv_frames(text, column_map, stats, chunk_rows) -> Iterator[pd.DataFrame]:
    header_line = text.readline()
    if not header_line.strip():
        raise ConfigError("CSV input has no header row")
    header = list(pd.read_csv(io.StringIO(header_line), nrows=0).columns)
    missing = [column_map[f] for f in MANDATORY_COLUMNS if column_map[f] not in header]
    if missing:
        raise ConfigError(f"CSV header is missing mandatory column(s): {', '.join(missing)}")

    def _bad_line(fields):
        stats.total_rows += 1
        stats.malformed_rows += 1
        return None

    reader = pd.read_csv(
        text,
        header=None,
        names=header,
        dtype=str,
        keep_default_na=False,
        skip_blank_lines=True,
        engine="python",
        on_bad_lines=_bad_line,
        chunksize=chunk_rows,
    )
    for chunk in reader:
        frame = pd.DataFrame({field: chunk[column_map[field]] for field in MANDATORY_COLUMNS})
        frame["path_components"] = frame["path_components"].map(_split_path)
        yield frame


def _jsonl_frames(text, column_map, stats, chunk_rows) -> Iterator[pd.DataFrame]:
    rows: List[dict] = []
    for line_number, line in enumerate(text, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            row = {field: obj[column_map[field]] for field in MANDATORY_COLUMNS}
            if not isinstance(row["path_components"], list):
                raise TypeError("path_components must be an array")
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            logger.debug(f"Skipping malformed JSONL line {line_number}: {e}")
            stats.total_rows += 1
            stats.malformed_rows += 1
            continue
        row["path_components"] = tuple(str(part) for part in row["path_components"] if str(part))
        rows.append(row)
        if len(rows) >= chunk_rows:
            yield pd.DataFrame(rows, columns=list(MANDATORY_COLUMNS))
            rows = []
    if rows:
        yield pd.DataFrame(rows, columns=list(MANDATORY_COLUMNS))


def _split_path(path) -> Tuple[str, ...]:
    if not isinstance(path, str):
        return ()
    return tuple(part for part in path.split(PATH_SEPARATOR) if part)


def _frame_records(frame: pd.DataFrame, stats: IngestStats) -> Iterator[RawLogRecord]:
    timestamps = pd.to_datetime(frame["timestamp"].astype(str), utc=True, errors="coerce", format="ISO8601")
    for action, timestamp, username, components in zip(
        frame["basic_action"], timestamps, frame["username"], frame["path_components"]
    ):
        stats.total_rows += 1
        action = action.strip() if isinstance(action, str) else ""
        username = username.strip() if isinstance(username, str) else ""
        if not action or not username or pd.isna(timestamp):
            stats.malformed_rows += 1
            continue
        if action in NAVIGATION_ACTIONS and not components:
            stats.malformed_rows += 1
            continue
        yield RawLogRecord(
            basic_action=action,
            timestamp=timestamp.floor("us").to_pydatetime(),
            username=username,
            path_components=tuple(components),
        )


# ---------------------------------------------------------------------------
# Steps 2-5
# ---------------------------------------------------------------------------


def filter_nav_actions(records: Iterable[RawLogRecord], stats: Optional[IngestStats] = None) -> Iterator[RawLogRecord]:
    for record in records:
        if record.basic_action in NAVIGATION_ACTIONS:
            if stats is not None:
                stats.navigation_rows += 1
            yield record


def build_vocab(records: Iterable[RawLogRecord], homepage_name: str) -> Vocab:
    """IDs 1, 2, 3, ... in first-occurrence order; an unseen homepage takes ID 1."""
    names: Dict[str, None] = {}
    for record in records:
        names.setdefault(record.node_name, None)
    ordered = list(names)
    if homepage_name not in names:
        ordered.insert(0, homepage_name)
    return Vocab(ordered, homepage_name)


def assemble_sequences(
    records: Iterable[RawLogRecord],
    vocab: Vocab,
    max_seq_len: int,
    stats: Optional[IngestStats] = None,
) -> List[TrajectorySequence]:
    """One sequence per user, users in order of first appearance.

    Events are ordered by timestamp (ties keep file order), mapped to token
    IDs, prefixed with the homepage unless already first, truncated to the
    earliest max_seq_len tokens and right-padded with 0.
    """
    if max_seq_len < 1:
        raise ConfigError(f"max_seq_len must be >= 1, got {max_seq_len}")
    events = pd.DataFrame(
        [(r.username, r.timestamp, r.node_name) for r in records],
        columns=["user", "timestamp", "node"],
    )
    if events.empty:
        return []

    unknown = events.loc[~events["node"].isin(vocab.name_to_id), "node"]
    if not unknown.empty:
        raise VocabularyError(f"node '{unknown.iloc[0]}' is not in the vocabulary")
    events["token"] = events["node"].map(vocab.name_to_id)

    users = pd.unique(events["user"])
    ordered = events.sort_values("timestamp", kind="stable")
    tokens_by_user = ordered.groupby("user", sort=False)["token"].agg(list)

    sequences = []
    for user in users:
        tokens = [int(t) for t in tokens_by_user[user]]
        if tokens[0] != vocab.homepage_id:
            tokens.insert(0, vocab.homepage_id)
        if len(tokens) > max_seq_len:
            tokens = tokens[:max_seq_len]
            if stats is not None:
                stats.truncated_sequences += 1
        tokens += [vocab.padding_id] * (max_seq_len - len(tokens))
        sequences.append(TrajectorySequence(user=str(user), tokens=tuple(tokens)))

    if stats is not None:
        stats.users = len(users)
        stats.sequences = len(sequences)
    return sequences


def run_ingest(
    source: Source,
    fmt: str,
    homepage_name: str,
    max_seq_len: int,
    column_map: Optional[Dict[str, str]] = None,
) -> Tuple[Vocab, List[TrajectorySequence], IngestStats]:
    """Steps 1-5 end to end."""
    stats = IngestStats()
    navigation = list(filter_nav_actions(parse_records(source, fmt, column_map, stats), stats))
    vocab = build_vocab(navigation, homepage_name)
    sequences = assemble_sequences(navigation, vocab, max_seq_len, stats)
    logger.info(
        f"Ingested {stats.total_rows} rows: {stats.malformed_rows} malformed, "
        f"{stats.navigation_rows} navigation, |T|={vocab.size}, {stats.sequences} sequences"
    )
    return vocab, sequences, stats


# ---------------------------------------------------------------------------
# Command
# ---------------------------------------------------------------------------


def _ingest(args: argparse.Namespace) -> int:
    vocab, sequences, stats = run_ingest(
        args.input,
        args.format,
        args.homepage,
        args.max_len,
        parse_column_map(args.columns),
    )
    write_vocab(args.out_vocab, vocab)
    write_sequences(args.out_seqs, sequences, args.max_len)

    print(f"records total: {stats.total_rows}")
    print(f"records malformed: {stats.malformed_rows}")
    print(f"records navigation: {stats.navigation_rows}")
    print(f"vocabulary size |T|: {vocab.size}")
    print(f"users: {stats.users}")
    print(f"sequences: {stats.sequences} ({stats.truncated_sequences} truncated)")

    summary = DatasetSummary.of(Path(args.input).stem, vocab, SequenceDataset(sequences, args.max_len))
    logger.info(summary.describe())
    print(summary.describe())
    return 0


def register_commands(subparsers) -> None:
    """Register the ``ingest`` subcommand."""
    parser = subparsers.add_parser(
        "ingest",
        help="Turn raw navigation logs into a vocabulary and padded token sequences",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--input", required=True, help="Raw log file (CSV with header, or JSONL)")
    parser.add_argument("--format", choices=FORMATS, default="csv", help="Input format")
    parser.add_argument(
        "--columns",
        default=None,
        help="Column mapping <field>=<column>,... for fields " + ", ".join(MANDATORY_COLUMNS),
    )
    parser.add_argument("--homepage", required=True, help="Course homepage node name (path joined with '/')")
    parser.add_argument("--max-len", type=int, default=256, help="Max. sequence length")
    parser.add_argument("--out-vocab", required=True, help="Output vocabulary JSON")
    parser.add_argument("--out-seqs", required=True, help="Output sequence JSONL")
    parser.set_defaults(handler=_ingest)
