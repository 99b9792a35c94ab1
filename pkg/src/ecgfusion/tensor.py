"""Dense float64 tensors with reverse-mode automatic differentiation.

Deliberately small and strict: CPU only, float64 only, no implicit
broadcasting except against scalars (0-d operands or Python numbers).
Every operation validates that its result is finite and raises
NonFiniteError otherwise, so NaN or Inf can never propagate silently.
Gradients accumulate across backward() calls until zero_grad().
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


class TensorError(Exception):
    """Base class for tensor failures."""


class ShapeError(TensorError):
    """Operand shapes incompatible with the requested operation."""


class NonFiniteError(TensorError):
    """An operation produced (or would produce) NaN or Inf."""


def _as_array(values) -> Array:
    arr = np.asarray(values, dtype=np.float64)
    return arr


class Tensor:
    """A node in a dynamically built computation graph.

    ``data`` is the forward value, ``grad`` the accumulated gradient
    (None until backward touches it). Graph edges are kept only when a
    parent requires gradients, so constant subtrees cost nothing at
    backward time.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backprop")

    def __init__(self, values, requires_grad: bool = False):
        data = _as_array(values)
        if any(d == 0 for d in data.shape):
            raise ShapeError(f"zero-sized dimension in shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteError("tensor constructed from non-finite values")
        self.data = data
        self.grad: Array | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backprop: Callable[[Array], None] | None = None

    # ---------------------------------------------------------------- basics

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # ------------------------------------------------------------- operators

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(_constant(other), self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_constant(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(_constant(other), self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_constant(other), self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def exp(self) -> "Tensor":
        return exp(self)

    def log(self) -> "Tensor":
        return log(self)

    def tanh(self) -> "Tensor":
        return tanh(self)

    def sigmoid(self) -> "Tensor":
        return sigmoid(self)

    def sum(self, axis: int | None = None) -> "Tensor":
        return reduce_sum(self, axis)

    def mean(self, axis: int | None = None) -> "Tensor":
        return reduce_mean(self, axis)

    def reshape(self, shape: tuple[int, ...]) -> "Tensor":
        return reshape(self, shape)

    # -------------------------------------------------------------- backward

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar root.

        Iterative post-order traversal; recursion would overflow on the
        long recurrence chains this library exists to train.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward() requires a scalar root, got shape {self.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        _accumulate(self, np.ones_like(self.data))
        for node in reversed(order):
            if node._backprop is not None:
                node._backprop(node.grad)


def _constant(values) -> Tensor:
    if isinstance(values, Tensor):
        return values
    return Tensor(values)


def _accumulate(t: Tensor, g: Array) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad = t.grad + g


def _make(data: Array, op: str, parents: tuple[Tensor, ...],
          backprop: Callable[[Array], None]) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backprop = backprop
    else:
        out.requires_grad = False
        out._parents = ()
        out._backprop = None
    return out


def _coerce_pair(a, b, op: str) -> tuple[Tensor, Tensor]:
    a = _constant(a)
    b = _constant(b)
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ (only scalar broadcast is allowed)")
    return a, b


def _reduce_to(g: Array, shape: tuple[int, ...]) -> Array:
    # Only scalar-vs-array broadcasting exists, so the sole mismatch case
    # is collapsing the full gradient back onto a 0-d operand.
    if g.shape == shape:
        return g
    return np.asarray(g.sum(), dtype=np.float64)


# ------------------------------------------------------------ elementwise ops

def add(a, b) -> Tensor:
    a, b = _coerce_pair(a, b, "add")
    data = a.data + b.data

    def backprop(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, _reduce_to(g, a.shape))
        if b.requires_grad:
            _accumulate(b, _reduce_to(g, b.shape))

    return _make(data, "add", (a, b), backprop)


def sub(a, b) -> Tensor:
    a, b = _coerce_pair(a, b, "sub")
    data = a.data - b.data

    def backprop(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, _reduce_to(g, a.shape))
        if b.requires_grad:
            _accumulate(b, _reduce_to(-g, b.shape))

    return _make(data, "sub", (a, b), backprop)


def mul(a, b) -> Tensor:
    a, b = _coerce_pair(a, b, "mul")
    data = a.data * b.data

    def backprop(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, _reduce_to(g * b.data, a.shape))
        if b.requires_grad:
            _accumulate(b, _reduce_to(g * a.data, b.shape))

    return _make(data, "mul", (a, b), backprop)


def div(a, b) -> Tensor:
    a, b = _coerce_pair(a, b, "div")
    if np.any(b.data == 0.0):
        raise NonFiniteError("div: division by exact zero")
    data = a.data / b.data

    def backprop(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, _reduce_to(g / b.data, a.shape))
        if b.requires_grad:
            _accumulate(b, _reduce_to(-g * a.data / (b.data * b.data), b.shape))

    return _make(data, "div", (a, b), backprop)


def exp(a) -> Tensor:
    a = _constant(a)
    data = np.exp(a.data)

    def backprop(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, g * data)

    return _make(data, "exp", (a,), backprop)


def log(a) -> Tensor:
    a = _constant(a)
    if np.any(a.data <= 0.0):
        raise NonFiniteError("log: input must be strictly positive")
    data = np.log(a.data)

    def backprop(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, g / a.data)

    return _make(data, "log", (a,), backprop)


def tanh(a) -> Tensor:
    a = _constant(a)
    data = np.tanh(a.data)

    def backprop(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, g * (1.0 - data * data))

    return _make(data, "tanh", (a,), backprop)


def sigmoid(a) -> Tensor:
    a = _constant(a)
    # Split by sign for stability at large |x|.
    x = a.data
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backprop(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, g * data * (1.0 - data))

    return _make(data, "sigmoid", (a,), backprop)


def maximum(a, floor: float) -> Tensor:
    """Elementwise max against a Python scalar.

    Subgradient convention: where input == floor the gradient passes
    through to the input.
    """
    a = _constant(a)
    floor = float(floor)
    data = np.maximum(a.data, floor)

    def backprop(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, g * (a.data >= floor))

    return _make(data, "maximum", (a,), backprop)


# ------------------------------------------------------------------- matmul

def matmul(a, b) -> Tensor:
    a = _constant(a)
    b = _constant(b)
    if a.ndim == 0 or b.ndim == 0 or a.ndim > 2 or b.ndim > 2:
        raise ShapeError(f"matmul: ranks must be 1 or 2, got {a.ndim} and {b.ndim}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backprop(g: Array) -> None:
        if a.ndim == 2 and b.ndim == 2:
            ga, gb = g @ b.data.T, a.data.T @ g
        elif a.ndim == 2 and b.ndim == 1:
            ga, gb = np.outer(g, b.data), a.data.T @ g
        elif a.ndim == 1 and b.ndim == 2:
            ga, gb = b.data @ g, np.outer(a.data, g)
        else:  # 1-D dot product, g is 0-d
            ga, gb = g * b.data, g * a.data
        if a.requires_grad:
            _accumulate(a, ga)
        if b.requires_grad:
            _accumulate(b, gb)

    return _make(np.asarray(data, dtype=np.float64), "matmul", (a, b), backprop)


# ---------------------------------------------------------------- reductions

def _check_axis(a: Tensor, axis: int | None, op: str) -> None:
    if axis is not None and not (0 <= axis < a.ndim):
        raise ShapeError(f"{op}: axis {axis} out of range for shape {a.shape}")


def reduce_sum(a, axis: int | None = None) -> Tensor:
    a = _constant(a)
    _check_axis(a, axis, "sum")
    data = a.data.sum(axis=axis)

    def backprop(g: Array) -> None:
        if not a.requires_grad:
            return
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.shape))
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis), a.shape))

    return _make(np.asarray(data, dtype=np.float64), "sum", (a,), backprop)


def reduce_mean(a, axis: int | None = None) -> Tensor:
    a = _constant(a)
    _check_axis(a, axis, "mean")
    count = a.size if axis is None else a.shape[axis]
    data = a.data.mean(axis=axis)

    def backprop(g: Array) -> None:
        if not a.requires_grad:
            return
        if axis is None:
            _accumulate(a, np.broadcast_to(g / count, a.shape))
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis) / count, a.shape))

    return _make(np.asarray(data, dtype=np.float64), "mean", (a,), backprop)


# ---------------------------------------------------------------- structural

def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = _constant(a)
    if int(np.prod(shape, dtype=np.int64)) != a.size:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}")
    old = a.shape
    data = a.data.reshape(shape)

    def backprop(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, g.reshape(old))

    return _make(data, "reshape", (a,), backprop)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equal-shape tensors along a new leading axis."""
    if len(tensors) == 0:
        raise ShapeError("stack: need at least one tensor")
    parts = [_constant(t) for t in tensors]
    base = parts[0].shape
    for p in parts[1:]:
        if p.shape != base:
            raise ShapeError(f"stack: mixed shapes {base} and {p.shape}")
    data = np.stack([p.data for p in parts])

    def backprop(g: Array) -> None:
        for i, p in enumerate(parts):
            if p.requires_grad:
                _accumulate(p, g[i])

    return _make(data, "stack", tuple(parts), backprop)


def take_row(a, index: int) -> Tensor:
    """Select one slice along the leading axis (a row of a matrix, an
    element of a vector)."""
    a = _constant(a)
    if a.ndim == 0:
        raise ShapeError("take_row: rank must be at least 1")
    if not (0 <= index < a.shape[0]):
        raise ShapeError(f"take_row: index {index} out of range for shape {a.shape}")
    data = np.asarray(a.data[index], dtype=np.float64)

    def backprop(g: Array) -> None:
        if a.requires_grad:
            full = np.zeros(a.shape, dtype=np.float64)
            full[index] = g
            _accumulate(a, full)

    return _make(data, "take_row", (a,), backprop)


# --------------------------------------------------------------------- Adam

@dataclass
class AdamState:
    """Per-parameter moment estimates for bias-corrected Adam."""

    first_moment: list[Array]
    second_moment: list[Array]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[Tensor], beta1: float = 0.9,
                   beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        return cls(first_moment=[np.zeros(p.shape) for p in params],
                   second_moment=[np.zeros(p.shape) for p in params],
                   step_count=0, beta1=beta1, beta2=beta2, epsilon=epsilon)


def adam_step(params: Sequence[Tensor], grads: Sequence[Array | None],
              state: AdamState, lr: float) -> tuple[Sequence[Tensor], AdamState]:
    """One in-place Adam update. A None gradient is treated as zero.

    All gradients are checked before any state mutation so a NaN aborts
    the step without corrupting the moments.
    """
    if lr <= 0.0:
        raise ValueError(f"adam_step: lr must be positive, got {lr}")
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("adam_step: params, grads and state length mismatch")
    for p, g in zip(params, grads):
        if g is None:
            continue
        if g.shape != p.shape:
            raise ShapeError(f"adam_step: gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("adam_step: non-finite gradient, step aborted")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if g is None:
            g = np.zeros(p.shape)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return params, state


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> Tensor:
    """Trainable tensor drawn uniformly from +-1/sqrt(fan_in)."""
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)
