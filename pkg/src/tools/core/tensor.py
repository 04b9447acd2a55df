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

"""Dense tensors with reverse-mode gradient propagation.

A ``Tensor`` wraps a numpy array. Every differentiable operation is a
``Function`` subclass whose ``apply`` runs the forward computation on raw
arrays and, when any input requires a gradient, records itself as the
output's context. ``Tensor.backward`` walks the recorded graph in reverse
topological order and accumulates into the ``grad`` of leaf tensors.

Broadcasting is limited to leading-axis expansion: the smaller operand's
shape must equal the trailing axes of the larger one.
"""

import threading
from contextlib import contextmanager
from logging import getLogger
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from src.tools.utils.base import ConfigError, DimensionError, NumericError, VocabularyError

logger = getLogger("trajectory_lm.core.tensor")

DEFAULT_DTYPE = np.float64
SUPPORTED_DTYPES = {"float64": np.float64, "float32": np.float32}

# Added to masked logits before exponentiation
MASK_LOGIT = -1e9

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]

# ---------------------------------------------------------------------------
# Graph recording switch (per thread: a tape never crosses threads)
# ---------------------------------------------------------------------------

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Suspend graph recording, e.g. for inference and finite differences."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def resolve_dtype(name: str) -> type:
    try:
        return SUPPORTED_DTYPES[name]
    except KeyError:
        raise ConfigError(f"Unsupported dtype '{name}'. Valid: {', '.join(SUPPORTED_DTYPES)}")


# ---------------------------------------------------------------------------
# Tensor
# ---------------------------------------------------------------------------


class Tensor:
    """Dense n-dimensional float array with an optional gradient accumulator."""

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype: Optional[type] = None,
        name: Optional[str] = None,
    ):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype.kind == "f" else DEFAULT_DTYPE
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.name = name
        self._ctx: Optional["Function"] = None
        self.grad: Optional[np.ndarray] = np.zeros_like(self.data) if requires_grad else None

    # -- introspection ------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._ctx is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError("item", self.shape, ())
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"

    # -- gradients ----------------------------------------------------------

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Propagate d(self)/d(leaf) into every leaf that requires a gradient.

        Args:
            grad: Upstream gradient; defaults to 1 for single-element tensors.
        """
        if not self.requires_grad:
            raise ConfigError("backward() called on a tensor that does not require grad")

        if grad is None:
            if self.data.size != 1:
                raise DimensionError("backward", self.shape, ())
            grad = np.ones_like(self.data)
        elif grad.shape != self.shape:
            raise DimensionError("backward", self.shape, grad.shape)

        grads = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in reversed(_topological_order(self)):
            node_grad = grads.pop(id(node), None)
            if node_grad is None:
                continue

            if node._ctx is None:
                node.grad = node.grad + node_grad if node.grad is not None else node_grad.copy()
                continue

            parent_grads = node._ctx.backward(node_grad)
            for parent, parent_grad in zip(node._ctx.parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + parent_grad if key in grads else parent_grad

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return Add.apply(self, other)

    def __radd__(self, other):
        return Add.apply(other, self)

    def __sub__(self, other):
        return Sub.apply(self, other)

    def __rsub__(self, other):
        return Sub.apply(other, self)

    def __mul__(self, other):
        return Mul.apply(self, other)

    def __rmul__(self, other):
        return Mul.apply(other, self)

    def __neg__(self):
        return Scale.apply(self, factor=-1.0)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return Scale.apply(self, factor=1.0 / other)
        return Mul.apply(self, Pow.apply(other, exponent=-1.0))

    def __matmul__(self, other):
        return MatMul.apply(self, other)

    def __getitem__(self, index):
        return GetItem.apply(self, index=index)

    @property
    def T(self) -> "Tensor":
        axes = list(range(self.ndim))
        axes[-2], axes[-1] = axes[-1], axes[-2]
        return Transpose.apply(self, axes=tuple(axes))

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return Mean.apply(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)

    def transpose(self, *axes) -> "Tensor":
        return Transpose.apply(self, axes=tuple(axes))

    def exp(self) -> "Tensor":
        return Exp.apply(self)

    def log(self) -> "Tensor":
        return Log.apply(self)

    def sigmoid(self) -> "Tensor":
        return Sigmoid.apply(self)

    def tanh(self) -> "Tensor":
        return Tanh.apply(self)

    def relu(self) -> "Tensor":
        return Relu.apply(self)


def _topological_order(root: Tensor) -> list:
    """Post-order over the recorded graph, iterative (LSTM graphs are deep)."""
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node._ctx is not None:
            for parent in node._ctx.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def as_tensor(value: ArrayLike, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


# ---------------------------------------------------------------------------
# Function machinery
# ---------------------------------------------------------------------------


class Function:
    """One differentiable operation; instances are the recorded graph nodes."""

    parents: Tuple[Tensor, ...] = ()

    @classmethod
    def apply(cls, *inputs: ArrayLike, **kwargs) -> Tensor:
        dtype = next((x.dtype for x in inputs if isinstance(x, Tensor)), DEFAULT_DTYPE)
        tensors = tuple(as_tensor(x, dtype=dtype) for x in inputs)

        ctx = cls()
        output = np.asarray(ctx.forward(*[t.data for t in tensors], **kwargs), dtype=dtype)
        if not np.all(np.isfinite(output)):
            raise NumericError(f"{cls.__name__} produced non-finite values")

        result = Tensor(output, requires_grad=False)
        if is_grad_enabled() and any(t.requires_grad for t in tensors):
            ctx.parents = tensors
            result.requires_grad = True
            result._ctx = ctx
        return result

    def forward(self, *arrays: np.ndarray, **kwargs) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError


def _check_leading_broadcast(op: str, left: tuple, right: tuple) -> None:
    shorter, longer = (left, right) if len(left) <= len(right) else (right, left)
    if tuple(longer[len(longer) - len(shorter):]) != tuple(shorter):
        raise DimensionError(op, left, right)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient over the leading axes that broadcasting added."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------


class Add(Function):
    def forward(self, a, b):
        _check_leading_broadcast("add", a.shape, b.shape)
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(grad, self.shapes[1])


class Sub(Function):
    def forward(self, a, b):
        _check_leading_broadcast("sub", a.shape, b.shape)
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    def forward(self, a, b):
        _check_leading_broadcast("mul", a.shape, b.shape)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return _unbroadcast(grad * self.b, self.a.shape), _unbroadcast(grad * self.a, self.b.shape)


class Scale(Function):
    def forward(self, a, factor: float):
        self.factor = factor
        return a * factor

    def backward(self, grad):
        return (grad * self.factor,)


class Pow(Function):
    def forward(self, a, exponent: float):
        if exponent < 0 and np.any(a == 0):
            raise NumericError(f"pow: zero raised to negative exponent {exponent}")
        self.a, self.exponent = a, exponent
        return a**exponent

    def backward(self, grad):
        return (grad * self.exponent * self.a ** (self.exponent - 1),)


class Exp(Function):
    def forward(self, a):
        self.out = np.exp(a)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, a):
        if np.any(a <= 0):
            raise NumericError("log: argument must be strictly positive")
        self.a = a
        return np.log(a)

    def backward(self, grad):
        return (grad / self.a,)


class Sigmoid(Function):
    def forward(self, a):
        # exp(-|a|) never overflows
        e = np.exp(-np.abs(a))
        self.out = np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Tanh(Function):
    def forward(self, a):
        self.out = np.tanh(a)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out * self.out),)


class Relu(Function):
    def forward(self, a):
        self.positive = a > 0
        return np.where(self.positive, a, 0.0)

    def backward(self, grad):
        return (grad * self.positive,)


# ---------------------------------------------------------------------------
# Linear algebra, reductions and shape manipulation
# ---------------------------------------------------------------------------


class MatMul(Function):
    """(..., m, k) @ (..., k, n); leading batch axes broadcast by expansion only."""

    def forward(self, a, b):
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise DimensionError("matmul", a.shape, b.shape)
        _check_leading_broadcast("matmul", a.shape[:-2], b.shape[:-2])
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, grad):
        grad_a = np.matmul(grad, np.swapaxes(self.b, -1, -2))
        grad_b = np.matmul(np.swapaxes(self.a, -1, -2), grad)
        return _unbroadcast(grad_a, self.a.shape), _unbroadcast(grad_b, self.b.shape)


class Sum(Function):
    def forward(self, a, axis=None, keepdims=False):
        self.shape, self.axis, self.keepdims = a.shape, axis, keepdims
        return np.sum(a, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape).copy(),)


class Mean(Function):
    def forward(self, a, axis=None, keepdims=False):
        self.shape, self.axis, self.keepdims = a.shape, axis, keepdims
        self.count = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
        return np.mean(a, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad / self.count, self.shape).copy(),)


class Reshape(Function):
    def forward(self, a, shape):
        self.shape = a.shape
        try:
            return a.reshape(shape)
        except ValueError:
            raise DimensionError("reshape", a.shape, tuple(shape))

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class Transpose(Function):
    def forward(self, a, axes):
        self.axes = axes if axes else tuple(reversed(range(a.ndim)))
        return np.transpose(a, self.axes)

    def backward(self, grad):
        return (np.transpose(grad, np.argsort(self.axes)),)


class GetItem(Function):
    def forward(self, a, index):
        self.shape, self.index = a.shape, index
        return a[index]

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=grad.dtype)
        if _is_basic_index(self.index):
            full[self.index] += grad
        else:
            # advanced indices may repeat
            np.add.at(full, self.index, grad)
        return (full,)


def _is_basic_index(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(part is None or part is Ellipsis or isinstance(part, (int, slice)) for part in parts)


class Concat(Function):
    def forward(self, *arrays, axis=-1):
        self.axis = axis
        self.sizes = [a.shape[axis] for a in arrays]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        cuts = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, cuts, axis=self.axis))


class Stack(Function):
    def forward(self, *arrays, axis=0):
        self.axis = axis
        return np.stack(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.moveaxis(grad, self.axis, 0))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Stack.apply(*tensors, axis=axis)


# ---------------------------------------------------------------------------
# Lookups
# ---------------------------------------------------------------------------


class Embedding(Function):
    """Row gather ``table[indices]``; the padding row never receives gradient."""

    def forward(self, table, indices, padding_idx=0):
        indices = np.asarray(indices)
        if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
            bad = int(indices.max()) if indices.max() >= table.shape[0] else int(indices.min())
            raise VocabularyError(f"token {bad} outside vocabulary of {table.shape[0] - 1} nodes")
        self.shape, self.indices, self.padding_idx = table.shape, indices, padding_idx
        return table[indices]

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=grad.dtype)
        np.add.at(full, self.indices, grad)
        if self.padding_idx is not None:
            full[self.padding_idx] = 0.0
        return (full,)


class Pick(Function):
    """``a[..., indices[...]]``: one entry of the last axis per leading position."""

    def forward(self, a, indices):
        indices = np.asarray(indices)
        if indices.shape != a.shape[:-1]:
            raise DimensionError("pick", a.shape, indices.shape)
        self.shape, self.indices = a.shape, indices[..., None]
        return np.take_along_axis(a, self.indices, axis=-1)[..., 0]

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=grad.dtype)
        np.put_along_axis(full, self.indices, grad[..., None], axis=-1)
        return (full,)


def embedding(table: Tensor, indices: np.ndarray, padding_idx: Optional[int] = 0) -> Tensor:
    return Embedding.apply(table, indices=indices, padding_idx=padding_idx)


def pick(a: Tensor, indices: np.ndarray) -> Tensor:
    return Pick.apply(a, indices=indices)


# ---------------------------------------------------------------------------
# Normalizations
# ---------------------------------------------------------------------------


class Softmax(Function):
    """Softmax over the last axis; ``mask`` True marks entries that may receive mass."""

    def forward(self, a, mask=None):
        if mask is not None:
            mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
            if not np.all(mask.any(axis=-1)):
                raise ConfigError("softmax: a row is fully masked (degenerate attention row)")
            a = np.where(mask, a, a + MASK_LOGIT)
        shifted = a - a.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        if mask is not None:
            e = np.where(mask, e, 0.0)
        self.out = e / e.sum(axis=-1, keepdims=True)
        return self.out

    def backward(self, grad):
        y = self.out
        return (y * (grad - (grad * y).sum(axis=-1, keepdims=True)),)


class LogSoftmax(Function):
    def forward(self, a):
        shifted = a - a.max(axis=-1, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        self.probs = np.exp(out)
        return out

    def backward(self, grad):
        return (grad - self.probs * grad.sum(axis=-1, keepdims=True),)


class LayerNormalize(Function):
    """(x - mean) / sqrt(var + eps) over the last axis."""

    def forward(self, a, eps=1e-5):
        centered = a - a.mean(axis=-1, keepdims=True)
        self.inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
        self.normed = centered * self.inv_std
        return self.normed

    def backward(self, grad):
        x_hat = self.normed
        mean_grad = grad.mean(axis=-1, keepdims=True)
        mean_proj = (grad * x_hat).mean(axis=-1, keepdims=True)
        return (self.inv_std * (grad - mean_grad - x_hat * mean_proj),)


def softmax(a: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    return Softmax.apply(a, mask=mask)


def log_softmax(a: Tensor) -> Tensor:
    return LogSoftmax.apply(a)


def layer_normalize(a: Tensor, eps: float = 1e-5) -> Tensor:
    return LayerNormalize.apply(a, eps=eps)


# ---------------------------------------------------------------------------
# Tagged elementwise entry point
# ---------------------------------------------------------------------------

ELEMENTWISE_OPS = {
    "add": Add,
    "mul": Mul,
    "sigmoid": Sigmoid,
    "tanh": Tanh,
    "relu": Relu,
    "log": Log,
    "scale": Scale,
}


def elementwise(tag: str, *operands: ArrayLike, factor: Optional[float] = None) -> Tensor:
    """Apply the elementwise operation named by *tag*.

    ``scale`` takes a single operand and the ``factor`` keyword.
    """
    if tag not in ELEMENTWISE_OPS:
        raise ConfigError(f"Unknown elementwise op '{tag}'. Valid: {', '.join(ELEMENTWISE_OPS)}")
    if tag == "scale":
        if factor is None:
            raise ConfigError("elementwise scale requires a factor")
        return Scale.apply(*operands, factor=factor)
    return ELEMENTWISE_OPS[tag].apply(*operands)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)
