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

"""Numeric core: tensors, reverse-mode gradients, seeded randomness."""

from .tensor import Tensor, elementwise, matmul, no_grad, softmax
from .rng import RngState, dropout, glorot_uniform
from .gradcheck import GradCheckReport, grad_check

__all__ = [
    "Tensor",
    "elementwise",
    "matmul",
    "no_grad",
    "softmax",
    "RngState",
    "dropout",
    "glorot_uniform",
    "GradCheckReport",
    "grad_check",
]
