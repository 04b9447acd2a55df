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

"""The ``train`` command."""

import argparse
from dataclasses import replace
from logging import getLogger

from src.tools.core.rng import RngState
from src.tools.ingest.sequences import read_sequences, read_vocab
from src.tools.models.checkpoint import save_checkpoint
from src.tools.models.models import build_model
from src.tools.training.config import VARIANTS, load_run_config
from src.tools.training.trainer import train
from src.tools.utils.base import VocabularyError

logger = getLogger("trajectory_lm.training")


def _train(args: argparse.Namespace) -> int:
    config = load_run_config(
        args.arch,
        args.config,
        {
            "variant": args.variant,
            "seed": args.seed,
            "confidence_beta": args.beta,
            "tied_output": args.tied,
            "learning_rate": args.lr,
            "batch_size": args.batch_size,
            "max_epochs": args.max_epochs,
            "patience": args.patience,
            "clip_norm": args.clip_norm,
        },
    )
    vocab = read_vocab(args.vocab)
    dataset = read_sequences(args.seqs)
    if dataset.max_token() > vocab.size:
        raise VocabularyError(
            f"sequence file uses token {dataset.max_token()} but the vocabulary has only {vocab.size} nodes"
        )

    # the sequence file fixes the window length
    model_config = replace(config.model_config(vocab.size), max_seq_len=dataset.max_seq_len)
    rng = RngState(config.seed)
    model = build_model(model_config, rng.derive("model"))
    result = train(model, dataset, config.split, config.train, rng.derive("train"), config.loss)

    save_checkpoint(args.out_checkpoint, result.model)
    if args.out_log:
        result.log.write_csv(args.out_log)

    print(f"epochs: {result.epochs_run} (best {result.best_epoch}, early stop: {result.stopped_early})")
    print(f"best monitored loss: {result.best_loss:.6f}")
    print(f"mean batch time: {result.mean_batch_ms:.3f} ms (std {result.std_batch_ms:.3f})")
    print(f"checkpoint: {args.out_checkpoint}")
    return 0


def register_commands(subparsers) -> None:
    """Register the ``train`` subcommand."""
    parser = subparsers.add_parser(
        "train",
        help="Train an LSTM or Transformer next-step model",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--arch", choices=("lstm", "transformer"), default=None,
                        help="Architecture (default lstm, or the one implied by --variant)")
    parser.add_argument("--variant", choices=VARIANTS, default=None, help="Named experiment preset")
    parser.add_argument("--seqs", required=True, help="Sequence file (JSONL)")
    parser.add_argument("--vocab", required=True, help="Vocabulary JSON")
    parser.add_argument("--config", default=None, help="JSON config layered over the packaged defaults")
    parser.add_argument("--seed", type=int, default=None, help="Seed for initialization, split, shuffling and dropout (default 42)")
    parser.add_argument("--out-checkpoint", required=True, help="Output TRJM checkpoint")
    parser.add_argument("--out-log", default=None, help="Per-epoch training log CSV")

    overrides = parser.add_argument_group("hyperparameter overrides")
    overrides.add_argument("--beta", type=float, default=None, help="Confidence penalty weight (default 0.1)")
    overrides.add_argument("--tied", action=argparse.BooleanOptionalAction, default=None,
                           help="Tie the output matrix to the embedding (default untied)")
    overrides.add_argument("--lr", type=float, default=None, help="Learning rate (lstm 0.01, transformer 0.0005)")
    overrides.add_argument("--batch-size", type=int, default=None, help="Batch size (lstm 128, transformer 64)")
    overrides.add_argument("--max-epochs", type=int, default=None, help="Epoch cap (default 100)")
    overrides.add_argument("--patience", type=int, default=None, help="Early-stopping patience (default 3)")
    overrides.add_argument("--clip-norm", type=float, default=None, help="Max global gradient norm (default off)")
    parser.set_defaults(handler=_train)
