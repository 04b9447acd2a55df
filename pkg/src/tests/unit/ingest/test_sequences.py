"""Unit tests for src.tools.ingest.sequences."""

import json

import numpy as np
import pytest

from src.tools.ingest.sequences import (
    DatasetSummary,
    SequenceDataset,
    TrajectorySequence,
    Vocab,
    read_sequences,
    read_vocab,
    write_sequences,
    write_vocab,
)
from src.tools.utils.base import ConfigError, DataIOError, VocabularyError


# ---- vocabulary ----
def test_vocab_ids_start_at_one():
    vocab = Vocab(["Home", "A", "B"], "Home")
    assert vocab.size == len(vocab) == 3
    assert vocab.token_for("B") == 3
    assert vocab.padding_id == 0
    assert vocab.homepage_id == 1


@pytest.mark.parametrize(
    "names, homepage, message",
    [
        (["A", "A"], "A", "unique"),
        (["A"], "B", "not in the vocabulary"),
        (["__homepage__"], "__homepage__", "reserved"),
    ],
)
def test_invalid_vocabularies(names, homepage, message):
    with pytest.raises(VocabularyError, match=message):
        Vocab(names, homepage)


def test_unknown_name_lookup():
    with pytest.raises(VocabularyError, match="'Z'"):
        Vocab(["A"], "A").token_for("Z")


def test_vocab_file_round_trip(tmp_path):
    vocab = Vocab(["Home", "A"], "A")
    write_vocab(tmp_path / "v.json", vocab)
    assert read_vocab(tmp_path / "v.json") == vocab
    assert json.loads((tmp_path / "v.json").read_text()) == {"Home": 1, "A": 2, "__homepage__": 2}


def test_vocab_with_gaps_is_rejected():
    with pytest.raises(VocabularyError, match="consecutive"):
        Vocab.from_json({"A": 1, "B": 3, "__homepage__": 1})


def test_vocab_homepage_out_of_range():
    with pytest.raises(VocabularyError, match="outside"):
        Vocab.from_json({"A": 1, "__homepage__": 2})


def test_corrupt_vocab_file(tmp_path):
    (tmp_path / "v.json").write_text("{\n\"A\": 1,\n")
    with pytest.raises(DataIOError, match="corrupt vocabulary"):
        read_vocab(tmp_path / "v.json")


# ---- sequences ----
def test_sequence_validation():
    TrajectorySequence("u", (2, 1, 0, 0)).validate(vocab_size=2, homepage_id=2)
    with pytest.raises(ConfigError, match="follows padding"):
        TrajectorySequence("u", (2, 0, 1)).validate()
    with pytest.raises(VocabularyError, match="out of range"):
        TrajectorySequence("u", (2, 3)).validate(vocab_size=2)
    with pytest.raises(ConfigError, match="not homepage"):
        TrajectorySequence("u", (1, 2)).validate(homepage_id=2)


def test_dataset_requires_equal_lengths():
    with pytest.raises(ConfigError, match="expected 3"):
        SequenceDataset([TrajectorySequence("u", (1, 2))], max_seq_len=3)


def test_dataset_tokens_and_subset():
    dataset = SequenceDataset([TrajectorySequence("a", (1, 2, 0)), TrajectorySequence("b", (1, 3, 4))], 3)
    assert dataset.tokens().dtype == np.int64
    assert dataset.max_token() == 4
    assert [s.user for s in dataset.subset([1])] == ["b"]
    assert dataset.subset([]).tokens().shape == (0, 3)


def test_dataset_summary():
    dataset = SequenceDataset([TrajectorySequence("a", (1,)), TrajectorySequence("b", (1,))], 1)
    summary = DatasetSummary.of("course", Vocab(["Home", "A"], "Home"), dataset)
    assert (summary.node_count, summary.user_count) == (2, 2)
    assert summary.describe() == "dataset course: 2 nodes, 2 users"


# ---- sequence files ----
def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


HEADER = '{"format": "trajectory-sequences", "version": 1, "max_seq_len": 3, "count": 2}\n'


def test_sequence_file_round_trip(tmp_path):
    sequences = [TrajectorySequence("a", (1, 2, 0)), TrajectorySequence("b", (1, 0, 0))]
    write_sequences(tmp_path / "s.jsonl", sequences, 3)
    dataset = read_sequences(tmp_path / "s.jsonl")
    assert dataset.sequences == sequences
    assert dataset.max_seq_len == 3


def test_corrupt_line_reports_its_number(tmp_path):
    path = _write(tmp_path / "s.jsonl", HEADER + '{"user": "a", "tokens": [1, 2, 0]}\n{"user": "b", "tokens": [1, 2\n')
    with pytest.raises(DataIOError, match="line 3") as excinfo:
        read_sequences(path)
    assert excinfo.value.line == 3


@pytest.mark.parametrize(
    "record, reason",
    [
        ('{"user": "b", "tokens": [1, 2]}', "expected 3"),
        ('{"user": "b", "tokens": [1, 0, 2]}', "follows padding"),
        ('{"user": "b", "tokens": [1, "x", 0]}', "integers"),
        ('{"tokens": [1, 2, 0]}', "user"),
    ],
)
def test_invalid_records(tmp_path, record, reason):
    path = _write(tmp_path / "s.jsonl", HEADER + '{"user": "a", "tokens": [1, 2, 0]}\n' + record + "\n")
    with pytest.raises(DataIOError, match=reason):
        read_sequences(path)


def test_header_count_must_match(tmp_path):
    path = _write(tmp_path / "s.jsonl", HEADER + '{"user": "a", "tokens": [1, 2, 0]}\n')
    with pytest.raises(DataIOError, match="announces 2 sequences, found 1"):
        read_sequences(path)


@pytest.mark.parametrize(
    "header, reason",
    [
        ("", "empty"),
        ('{"format": "other", "version": 1}\n', "not a trajectory-sequences file"),
        ('{"format": "trajectory-sequences", "version": 2, "max_seq_len": 3, "count": 0}\n', "version 2"),
        ('{"format": "trajectory-sequences", "version": 1, "max_seq_len": 0, "count": 0}\n', "max_seq_len"),
    ],
)
def test_invalid_headers(tmp_path, header, reason):
    with pytest.raises(DataIOError, match=reason):
        read_sequences(_write(tmp_path / "s.jsonl", header))


def test_missing_sequence_file(tmp_path):
    with pytest.raises(DataIOError, match="cannot read"):
        read_sequences(tmp_path / "absent.jsonl")
