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

"""Shared fixtures for the slow end-to-end training runs."""

import numpy as np
import pytest

from src.logging_config import reset_logging_config
from src.tools.ingest.sequences import SequenceDataset
from src.tools.synth.synth import MarkovChainSpec, generate

STATES = 20
PEAK = 0.75


@pytest.fixture(autouse=True)
def quiet_logging(tmp_path, monkeypatch):
    monkeypatch.setenv("TRAJECTORY_LM_LOG_DIR", str(tmp_path / "log"))
    reset_logging_config()
    yield
    reset_logging_config()


@pytest.fixture(scope="session")
def peaked_chain() -> MarkovChainSpec:
    """20 states; each moves to its successor with probability 0.75, else uniformly elsewhere."""
    transitions = np.full((STATES, STATES), (1.0 - PEAK) / (STATES - 1))
    for state in range(STATES):
        transitions[state, (state + 1) % STATES] = PEAK
    return MarkovChainSpec(states=STATES, init=np.full(STATES, 1.0 / STATES), transitions=transitions, seed=7)


@pytest.fixture(scope="session")
def chain_corpus(peaked_chain) -> SequenceDataset:
    return SequenceDataset(generate(peaked_chain, n_sequences=5000, seq_len=64), max_seq_len=64)
