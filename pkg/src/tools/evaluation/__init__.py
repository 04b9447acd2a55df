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

"""Next-step accuracy and metrics reports."""

from .metrics import AccuracyTally, accuracy_from_predictions, predict_next
from .evaluation import (
    MetricsReport,
    RunResult,
    next_step_accuracy,
    register_commands,
    summarize,
    unigram_baseline_accuracy,
)

__all__ = [
    "AccuracyTally",
    "accuracy_from_predictions",
    "predict_next",
    "MetricsReport",
    "RunResult",
    "next_step_accuracy",
    "register_commands",
    "summarize",
    "unigram_baseline_accuracy",
]
