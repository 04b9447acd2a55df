"""End-to-end tests of the trajectory-lm command line on tiny inputs."""

import json

import pandas as pd
import pytest

from main import build_parser, main
from src.tools.evaluation.evaluation import REPORT_COLUMNS
from src.tests.shared.utils import chain_spec_payload

TINY_RUN = {"d_model": 8, "max_epochs": 2, "batch_size": 8}


@pytest.fixture(autouse=True)
def _logging(isolated_logging):
    return isolated_logging


def cli(*argv) -> int:
    return main(["--no-log-file", *[str(a) for a in argv]])


@pytest.fixture
def corpus(tmp_path):
    """A synthetic corpus plus a small run config."""
    spec = tmp_path / "chain.json"
    spec.write_text(json.dumps(chain_spec_payload([[0.1, 0.9, 0.0], [0.0, 0.1, 0.9], [0.9, 0.0, 0.1]], seed=3)))
    config = tmp_path / "run.json"
    config.write_text(json.dumps(TINY_RUN))
    seqs, vocab = tmp_path / "seqs.jsonl", tmp_path / "vocab.json"
    assert cli("synth", "--spec", spec, "--n", 20, "--len", 10, "--out", seqs, "--out-vocab", vocab) == 0
    return {"seqs": seqs, "vocab": vocab, "config": config, "dir": tmp_path}


# ---- ingest ----
def test_ingest_writes_golden_files(fixtures_dir, tmp_path, capsys):
    vocab, seqs = tmp_path / "vocab.json", tmp_path / "seqs.jsonl"
    code = cli(
        "ingest",
        "--input", fixtures_dir / "ingest" / "navigation_10.csv",
        "--homepage", "Course/Home",
        "--max-len", 6,
        "--out-vocab", vocab,
        "--out-seqs", seqs,
    )
    assert code == 0
    assert vocab.read_bytes() == (fixtures_dir / "ingest" / "expected_vocab.json").read_bytes()
    assert seqs.read_bytes() == (fixtures_dir / "ingest" / "expected_sequences.jsonl").read_bytes()
    out = capsys.readouterr().out
    assert "records navigation: 8" in out
    assert "vocabulary size |T|: 4" in out
    assert "dataset navigation_10: 4 nodes, 3 users" in out


def test_missing_required_flag_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        cli("ingest", "--input", tmp_path / "x.csv", "--out-vocab", "v", "--out-seqs", "s")
    assert excinfo.value.code == 2


def test_missing_input_file_exits_with_io_code(tmp_path):
    code = cli(
        "ingest", "--input", tmp_path / "absent.csv", "--homepage", "H",
        "--out-vocab", tmp_path / "v.json", "--out-seqs", tmp_path / "s.jsonl",
    )
    assert code == 3


def test_every_command_is_registered():
    choices = build_parser()._subparsers._group_actions[0].choices
    assert set(choices) == {"ingest", "synth", "train", "eval", "inspect"}


# ---- synth -> train -> eval -> inspect ----
def test_pipeline(corpus, capsys):
    out = corpus["dir"]
    checkpoint, log, report = out / "model.trjm", out / "log.csv", out / "report.csv"

    assert cli(
        "train", "--arch", "lstm", "--seqs", corpus["seqs"], "--vocab", corpus["vocab"],
        "--config", corpus["config"], "--out-checkpoint", checkpoint, "--out-log", log,
    ) == 0
    assert "epochs: 2" in capsys.readouterr().out
    assert pd.read_csv(log)["epoch"].tolist() == [1, 2]

    assert cli(
        "eval", "--checkpoint", checkpoint, "--seqs", corpus["seqs"], "--vocab", corpus["vocab"],
        "--config", corpus["config"], "--train-log", log, "--out-report", report, "--dataset", "chain",
    ) == 0
    frame = pd.read_csv(report)
    assert tuple(frame.columns) == REPORT_COLUMNS
    assert frame["dataset"].tolist() == ["chain", "mean", "std"]
    assert frame.loc[0, "model"] == "lstm-beta=0.1"
    assert 0.0 <= frame.loc[0, "test_acc_micro"] <= 1.0
    assert frame.loc[0, "users"] == 20
    capsys.readouterr()

    assert cli("inspect", "--checkpoint", checkpoint) == 0
    listing = capsys.readouterr().out
    assert "architecture: lstm" in listing
    assert "max_seq_len: 10" in listing
    assert "output matrix: untied" in listing


def test_same_seed_gives_identical_checkpoints(corpus):
    out = corpus["dir"]
    for name in ("a.trjm", "b.trjm"):
        assert cli(
            "train", "--variant", "lstm-both", "--seqs", corpus["seqs"], "--vocab", corpus["vocab"],
            "--config", corpus["config"], "--seed", 11, "--out-checkpoint", out / name,
        ) == 0
    assert (out / "a.trjm").read_bytes() == (out / "b.trjm").read_bytes()


def test_transformer_with_overrides(corpus, capsys):
    out = corpus["dir"]
    assert cli(
        "train", "--arch", "transformer", "--seqs", corpus["seqs"], "--vocab", corpus["vocab"],
        "--config", corpus["config"], "--tied", "--beta", 0, "--lr", 0.01, "--max-epochs", 1,
        "--out-checkpoint", out / "tf.trjm",
    ) == 0
    capsys.readouterr()
    assert cli("inspect", "--checkpoint", out / "tf.trjm") == 0
    listing = capsys.readouterr().out
    assert "tied_output: True" in listing
    assert "head_count: 8" in listing


def test_eval_rejects_a_mismatched_vocabulary(corpus):
    out = corpus["dir"]
    checkpoint = out / "model.trjm"
    assert cli(
        "train", "--seqs", corpus["seqs"], "--vocab", corpus["vocab"], "--config", corpus["config"],
        "--max-epochs", 1, "--out-checkpoint", checkpoint,
    ) == 0
    other_vocab = out / "other.json"
    other_vocab.write_text(json.dumps({"a": 1, "b": 2, "__homepage__": 1}))
    code = cli(
        "eval", "--checkpoint", checkpoint, "--seqs", corpus["seqs"], "--vocab", other_vocab,
        "--out-report", out / "r.csv",
    )
    assert code == 2


def test_variant_architecture_clash_exits_with_config_code(corpus):
    code = cli(
        "train", "--arch", "transformer", "--variant", "lstm-tied", "--seqs", corpus["seqs"],
        "--vocab", corpus["vocab"], "--out-checkpoint", corpus["dir"] / "x.trjm",
    )
    assert code == 2


def test_repeated_eval_writes_identical_reports(corpus):
    out = corpus["dir"]
    checkpoint = out / "model.trjm"
    assert cli(
        "train", "--seqs", corpus["seqs"], "--vocab", corpus["vocab"], "--config", corpus["config"],
        "--max-epochs", 1, "--out-checkpoint", checkpoint,
    ) == 0
    for name in ("r1.csv", "r2.csv"):
        assert cli("eval", "--checkpoint", checkpoint, "--seqs", corpus["seqs"], "--whole-file",
                   "--out-report", out / name) == 0
    assert (out / "r1.csv").read_bytes() == (out / "r2.csv").read_bytes()
    frame = pd.read_csv(out / "r1.csv")
    # --whole-file has no training part
    assert frame["train_acc_micro"].isna().all()
