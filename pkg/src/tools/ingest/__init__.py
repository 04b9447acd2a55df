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

"""Raw navigation logs to vocabulary and padded token sequences."""

from .ingest import register_commands, run_ingest
from .sequences import SequenceDataset, TrajectorySequence, Vocab, read_sequences, read_vocab

__all__ = [
    "register_commands",
    "run_ingest",
    "SequenceDataset",
    "TrajectorySequence",
    "Vocab",
    "read_sequences",
    "read_vocab",
]
