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

"""Markov-chain corpora with known entropy rate and oracle accuracy."""

from .synth import (
    MarkovChainSpec,
    empirical_log_loss,
    entropy_rate,
    generate,
    oracle_accuracy,
    register_commands,
    stationary_distribution,
)

__all__ = [
    "MarkovChainSpec",
    "empirical_log_loss",
    "entropy_rate",
    "generate",
    "oracle_accuracy",
    "register_commands",
    "stationary_distribution",
]
