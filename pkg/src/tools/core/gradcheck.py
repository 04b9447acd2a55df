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

"""Finite-difference verification of reverse-mode gradients."""

from dataclasses import dataclass, field
from logging import getLogger
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from src.tools.core.tensor import Tensor, no_grad

logger = getLogger("trajectory_lm.core.gradcheck")

# Entries whose gradients are both below this are compared absolutely
RELATIVE_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    """Per-input max relative error between analytic and central-difference gradients."""

    errors: Dict[str, float]
    tolerance: float
    step: float
    worst_index: Dict[str, tuple] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(err <= self.tolerance for err in self.errors.values())

    @property
    def failures(self) -> List[str]:
        return [name for name, err in self.errors.items() if err > self.tolerance]

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = RELATIVE_FLOOR) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def grad_check(
    f: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
    names: Optional[Sequence[str]] = None,
) -> GradCheckReport:
    """Compare ``backward()`` gradients of a scalar function with (f(x+h) - f(x-h)) / 2h.

    Args:
        f: Zero-argument callable rebuilding the scalar output from *inputs*
        inputs: Leaf tensors (64-bit) perturbed in place, one entry at a time
        h: Finite-difference step
        tol: Max relative error for the check to pass
        names: Labels for the report; defaults to tensor names or positions

    Returns:
        GradCheckReport: failures are reported, never raised
    """
    names = list(names) if names is not None else [t.name or f"input_{i}" for i, t in enumerate(inputs)]

    for tensor in inputs:
        tensor.zero_grad()
    f().backward()
    analytic = [tensor.grad.copy() for tensor in inputs]

    errors, worst = {}, {}
    with no_grad():
        for name, tensor, grad in zip(names, inputs, analytic):
            numeric = np.zeros_like(tensor.data)
            for index in np.ndindex(tensor.shape):
                original = tensor.data[index]
                tensor.data[index] = original + h
                upper = f().item()
                tensor.data[index] = original - h
                lower = f().item()
                tensor.data[index] = original
                numeric[index] = (upper - lower) / (2.0 * h)

            rel = relative_error(grad, numeric)
            errors[name] = float(rel.max()) if rel.size else 0.0
            worst[name] = np.unravel_index(int(rel.argmax()), rel.shape) if rel.size else ()

    report = GradCheckReport(errors=errors, tolerance=tol, step=h, worst_index=worst)
    if report.passed:
        logger.debug(f"Gradient check passed (max rel. err {report.max_error:.3e})")
    else:
        logger.warning(f"Gradient check failed for {', '.join(report.failures)} (max rel. err {report.max_error:.3e})")
    return report
