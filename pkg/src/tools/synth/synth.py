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

"""Trajectory corpora sampled from known Markov chains, with exact oracles.

States are 0-based internally and become token IDs 1..|T| in the written
sequences, so generated corpora feed the regular training pipeline. An
optional emission matrix turns the chain into a hidden Markov model whose
observed symbols are the tokens; the oracles below apply to plain chains only.
"""

import argparse
import json
import math
from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np

from src.tools.core.rng import RngState
from src.tools.ingest.sequences import TrajectorySequence, Vocab, write_sequences, write_vocab
from src.tools.utils.base import ConfigError, DataIOError, NumericError

logger = getLogger("trajectory_lm.synth")

ROW_TOLERANCE = 1e-12
STATIONARY_TOLERANCE = 1e-12
MAX_POWER_ITERATIONS = 1_000_000


def _check_stochastic(name: str, matrix: np.ndarray) -> None:
    if np.any(~np.isfinite(matrix)) or np.any(matrix < 0):
        raise ConfigError(f"{name} has negative or non-finite entries")
    sums = matrix.sum(axis=-1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOLERANCE)
    if bad.size:
        raise ConfigError(f"{name} row {int(bad[0])} sums to {sums[bad[0]]!r}, not 1")


@dataclass(eq=False)
class MarkovChainSpec:
    states: int
    init: np.ndarray
    transitions: np.ndarray
    seed: int = 42
    emissions: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.init = np.asarray(self.init, dtype=np.float64)
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        if self.emissions is not None:
            self.emissions = np.asarray(self.emissions, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        """Raises ConfigError unless every distribution is a valid probability vector."""
        if self.states < 1:
            raise ConfigError(f"states must be >= 1, got {self.states}")
        if self.init.shape != (self.states,):
            raise ConfigError(f"init has shape {self.init.shape}, expected ({self.states},)")
        if self.transitions.shape != (self.states, self.states):
            raise ConfigError(f"transitions have shape {self.transitions.shape}, expected ({self.states}, {self.states})")
        _check_stochastic("init", self.init[None, :])
        _check_stochastic("transitions", self.transitions)
        if self.emissions is not None:
            if self.emissions.ndim != 2 or self.emissions.shape[0] != self.states:
                raise ConfigError(f"emissions have shape {self.emissions.shape}, expected ({self.states}, symbols)")
            _check_stochastic("emissions", self.emissions)

    @property
    def symbols(self) -> int:
        """Number of distinct observable tokens."""
        return self.states if self.emissions is None else self.emissions.shape[1]

    @property
    def is_plain_chain(self) -> bool:
        return self.emissions is None or (
            self.emissions.shape[0] == self.emissions.shape[1] and np.array_equal(self.emissions, np.eye(self.states))
        )

    def to_json(self) -> dict:
        payload = {
            "states": self.states,
            "init": self.init.tolist(),
            "transitions": self.transitions.tolist(),
            "seed": self.seed,
        }
        if self.emissions is not None:
            payload["emissions"] = self.emissions.tolist()
        return payload

    @classmethod
    def from_json(cls, payload: dict) -> "MarkovChainSpec":
        if not isinstance(payload, dict):
            raise ConfigError("chain spec must be a JSON object")
        unknown = sorted(set(payload) - {"states", "init", "transitions", "seed", "emissions"})
        if unknown:
            raise ConfigError(f"Unknown chain spec keys: {', '.join(unknown)}")
        try:
            return cls(
                states=int(payload["states"]),
                init=payload["init"],
                transitions=payload["transitions"],
                seed=int(payload.get("seed", 42)),
                emissions=payload.get("emissions"),
            )
        except KeyError as e:
            raise ConfigError(f"chain spec is missing '{e.args[0]}'")
        except (TypeError, ValueError) as e:
            raise ConfigError(f"malformed chain spec: {e}")


def load_spec(path: Union[str, Path]) -> MarkovChainSpec:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise DataIOError(f"corrupt chain spec '{path}': {e.msg}", line=e.lineno)
    except OSError as e:
        raise DataIOError(f"cannot read chain spec '{path}': {e}")
    return MarkovChainSpec.from_json(payload)


def save_spec(path: Union[str, Path], spec: MarkovChainSpec) -> None:
    try:
        Path(path).write_text(json.dumps(spec.to_json(), indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot write chain spec '{path}': {e}")


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _draw(cumulative: np.ndarray, u: float) -> int:
    return int(min(np.searchsorted(cumulative, u, side="right"), cumulative.shape[0] - 1))


def generate(
    spec: MarkovChainSpec, n_sequences: int, seq_len: int, seed: Optional[int] = None
) -> List[TrajectorySequence]:
    """Sample *n_sequences* independent trajectories of exactly *seq_len* tokens.

    Sequence i draws from RngState(seed).derive(i), so any subset can be
    regenerated on its own.

    The first token is drawn from the initial distribution, so unlike ingested
    trajectories a generated sequence need not start with the vocabulary's
    homepage. Validate synthetic sequences without a ``homepage_id``.
    """
    if n_sequences < 0 or seq_len < 1:
        raise ConfigError(f"need n >= 0 and len >= 1, got n={n_sequences}, len={seq_len}")
    seed = spec.seed if seed is None else seed
    root = RngState(seed)
    init_cdf = np.cumsum(spec.init)
    transition_cdf = np.cumsum(spec.transitions, axis=1)
    emission_cdf = None if spec.emissions is None else np.cumsum(spec.emissions, axis=1)
    width = len(str(max(n_sequences - 1, 0)))

    sequences = []
    for index in range(n_sequences):
        rng = root.derive(index)
        steps = rng.random(seq_len)
        observations = rng.random(seq_len) if emission_cdf is not None else None

        state = _draw(init_cdf, steps[0])
        tokens = []
        for t in range(seq_len):
            if t > 0:
                state = _draw(transition_cdf[state], steps[t])
            symbol = state if emission_cdf is None else _draw(emission_cdf[state], observations[t])
            tokens.append(symbol + 1)
        sequences.append(TrajectorySequence(user=f"synth-{index:0{width}d}", tokens=tuple(tokens)))

    logger.info(f"Generated {n_sequences} sequences of length {seq_len} from a {spec.states}-state chain")
    return sequences


def synthetic_vocab(spec: MarkovChainSpec) -> Vocab:
    """Names state_<k> for tokens 1..|T|; the homepage is the most likely first token."""
    names = [f"state_{k}" for k in range(1, spec.symbols + 1)]
    first = spec.init if spec.emissions is None else spec.init @ spec.emissions
    return Vocab(names, names[int(np.argmax(first))])


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def _reachable(adjacency: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adjacency.shape[0], dtype=bool)
    seen[start] = True
    frontier = [start]
    while frontier:
        nxt = np.flatnonzero(adjacency[frontier].any(axis=0) & ~seen)
        seen[nxt] = True
        frontier = nxt.tolist()
    return seen


def stationary_distribution(transitions: np.ndarray) -> np.ndarray:
    """pi with pi P = pi, by power iteration on the lazy chain (I + P) / 2.

    The lazy chain shares pi with P and is aperiodic, so periodic chains converge too.

    Raises:
        ConfigError: the chain is reducible; the message names the states
            that are not mutually reachable with state 1
        NumericError: no convergence within the iteration cap
    """
    transitions = np.asarray(transitions, dtype=np.float64)
    n = transitions.shape[0]
    adjacency = transitions > 0
    connected = _reachable(adjacency, 0) & _reachable(adjacency.T, 0)
    if not connected.all():
        stranded = ", ".join(f"state_{k + 1}" for k in np.flatnonzero(~connected))
        raise ConfigError(f"chain is reducible: {stranded} not mutually reachable with state_1")

    lazy = 0.5 * (np.eye(n) + transitions)
    pi = np.full(n, 1.0 / n)
    for iteration in range(1, MAX_POWER_ITERATIONS + 1):
        updated = pi @ lazy
        updated /= updated.sum()
        if np.abs(updated - pi).sum() < STATIONARY_TOLERANCE:
            logger.debug(f"Stationary distribution converged after {iteration} iterations")
            return updated
        pi = updated
    raise NumericError(f"stationary distribution did not converge in {MAX_POWER_ITERATIONS} iterations")


def _plain_chain(spec: MarkovChainSpec, what: str) -> None:
    if not spec.is_plain_chain:
        raise ConfigError(f"{what} is defined for plain Markov chains only (identity emissions)")


def entropy_rate(spec: MarkovChainSpec) -> float:
    """-sum_s pi(s) sum_s' P(s, s') ln P(s, s') in nats per step."""
    _plain_chain(spec, "entropy rate")
    pi = stationary_distribution(spec.transitions)
    p = spec.transitions
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    return float(-(pi * plogp.sum(axis=1)).sum())


def oracle_accuracy(spec: MarkovChainSpec) -> float:
    """Expected accuracy of predicting argmax_s' P(s, s') with s drawn from pi."""
    _plain_chain(spec, "oracle accuracy")
    pi = stationary_distribution(spec.transitions)
    return float((pi * spec.transitions.max(axis=1)).sum())


class LogLoss(NamedTuple):
    mean: float
    std_error: float
    steps: int


def empirical_log_loss(spec: MarkovChainSpec, sequences: Sequence[TrajectorySequence]) -> LogLoss:
    """Mean -ln P(x_{t+1} | x_t) of the true chain over every consecutive non-padding pair."""
    _plain_chain(spec, "empirical log-loss")
    losses = []
    for sequence in sequences:
        states = np.array([t - 1 for t in sequence.tokens if t != 0], dtype=np.int64)
        if states.size < 2:
            continue
        probs = spec.transitions[states[:-1], states[1:]]
        if np.any(probs <= 0):
            raise NumericError(f"user '{sequence.user}' takes a transition of probability 0")
        losses.append(-np.log(probs))
    if not losses:
        raise ConfigError("empirical log-loss needs at least one transition")
    values = np.concatenate(losses)
    std_error = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return LogLoss(mean=float(values.mean()), std_error=std_error, steps=int(values.size))


# ---------------------------------------------------------------------------
# Command
# ---------------------------------------------------------------------------


def _synth(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec)
    sequences = generate(spec, args.n, args.len, args.seed)
    write_sequences(args.out, sequences, args.len)
    if args.out_vocab:
        write_vocab(args.out_vocab, synthetic_vocab(spec))

    print(f"sequences: {len(sequences)} x {args.len} tokens, |T|={spec.symbols}")
    if spec.is_plain_chain:
        print(f"entropy rate: {entropy_rate(spec):.6f} nats/step")
        print(f"oracle accuracy: {oracle_accuracy(spec):.6f}")
    return 0


def register_commands(subparsers) -> None:
    """Register the ``synth`` subcommand."""
    parser = subparsers.add_parser(
        "synth",
        help="Sample a sequence file from a Markov chain spec",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--spec", required=True, help="Chain spec JSON {states, init, transitions, seed[, emissions]}")
    parser.add_argument("--n", type=int, required=True, help="Number of sequences")
    parser.add_argument("--len", type=int, required=True, help="Tokens per sequence")
    parser.add_argument("--out", required=True, help="Output sequence file (JSONL)")
    parser.add_argument("--out-vocab", default=None, help="Also write a matching vocabulary JSON")
    parser.add_argument("--seed", type=int, default=None, help="Override the chain file's seed")
    parser.set_defaults(handler=_synth)
