"""Minimal dense-tensor reverse-mode differentiation with an explicit tape.

Tensors wrap float64 numpy arrays. Every primitive records its result on
the active :class:`Tape`; :func:`backward` replays the tape in reverse and
accumulates gradients into ``requires_grad`` leaves. Gradients accumulate
across calls until :func:`zero_grad` / ``Tape.reset`` is invoked.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "AdamState",
    "tensor",
    "add",
    "sub",
    "neg",
    "mul",
    "div",
    "matmul",
    "exp",
    "log",
    "relu",
    "sigmoid",
    "softplus",
    "tensor_sum",
    "tensor_mean",
    "maximum",
    "stop_gradient",
    "concat",
    "reshape",
    "exclusive_cumsum",
    "square",
    "backward",
    "adam_step",
    "learning_rate",
]


class ShapeError(ValueError):
    """Raised when operand shapes do not conform."""


class Tape:
    """Ordered record of primitive results; parents always precede children."""

    def __init__(self):
        self._nodes: list[Tensor] = []

    def record(self, node: "Tensor") -> None:
        node._index = len(self._nodes)
        self._nodes.append(node)

    def __len__(self) -> int:
        return len(self._nodes)

    def reset(self) -> None:
        self._nodes.clear()

    def __enter__(self) -> "Tape":
        global _active_tape
        self._previous = _active_tape
        _active_tape = self
        return self

    def __exit__(self, *exc) -> None:
        global _active_tape
        _active_tape = self._previous


_active_tape = Tape()


def active_tape() -> Tape:
    return _active_tape


class Tensor:
    """A float64 array plus optional gradient storage and tape linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_index")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self._index = -1

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        # Copy on first write: g may alias a buffer shared with other nodes.
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
            if self.grad.shape != self.data.shape:
                self.grad = np.broadcast_to(self.grad, self.data.shape).copy()
        else:
            self.grad += g

    # Operator sugar; every path funnels through the named primitives below.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __getitem__(self, key):
        return _getitem(self, key)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _node(data, parents, backward_fn) -> Tensor:
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    _active_tape.record(out)
    return out


def _check_elementwise(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_elementwise(a, b, "add")

    def bwd(out, g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return _node(a.data + b.data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_elementwise(a, b, "sub")

    def bwd(out, g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.shape))

    return _node(a.data - b.data, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    def bwd(out, g):
        a.accumulate_grad(-g)

    return _node(-a.data, (a,), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_elementwise(a, b, "mul")

    def bwd(out, g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return _node(a.data * b.data, (a, b), bwd)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_elementwise(a, b, "div")

    def bwd(out, g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _node(a.data / b.data, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")

    def bwd(out, g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.T)
        if b.requires_grad:
            b.accumulate_grad(a.data.T @ g)

    return _node(a.data @ b.data, (a, b), bwd)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Fused dense layer x @ weight + bias; one tape node instead of two."""
    if x.data.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError(f"linear: incompatible shapes {x.shape} @ {weight.shape}")

    def bwd(out, g):
        if x.requires_grad:
            x.accumulate_grad(g @ weight.data.T)
        if weight.requires_grad:
            weight.accumulate_grad(x.data.T @ g)
        if bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=0))

    return _node(x.data @ weight.data + bias.data, (x, weight, bias), bwd)


def exp(a: Tensor) -> Tensor:
    value = np.exp(a.data)

    def bwd(out, g):
        a.accumulate_grad(g * value)

    return _node(value, (a,), bwd)


def log(a: Tensor) -> Tensor:
    def bwd(out, g):
        a.accumulate_grad(g / a.data)

    return _node(np.log(a.data), (a,), bwd)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0

    def bwd(out, g):
        a.accumulate_grad(g * mask)

    return _node(np.where(mask, a.data, 0.0), (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    value = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(out, g):
        a.accumulate_grad(g * value * (1.0 - value))

    return _node(value, (a,), bwd)


def softplus(a: Tensor) -> Tensor:
    # log(1 + e^x), computed stably for large |x|.
    value = np.logaddexp(0.0, a.data)

    def bwd(out, g):
        a.accumulate_grad(g / (1.0 + np.exp(-a.data)))

    return _node(value, (a,), bwd)


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def bwd(out, g):
        if axis is None:
            grad = np.full(a.shape, g)
        else:
            grad = np.broadcast_to(
                g if keepdims else np.expand_dims(g, axis), a.shape
            ).copy()
        a.accumulate_grad(grad)

    return _node(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd)


def tensor_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    return mul(tensor_sum(a, axis=axis, keepdims=keepdims), Tensor(1.0 / count))


def maximum(a: Tensor, floor: float) -> Tensor:
    """Elementwise max with a constant; subgradient 0 at the tie point."""
    mask = a.data > floor

    def bwd(out, g):
        a.accumulate_grad(g * mask)

    return _node(np.where(mask, a.data, floor), (a,), bwd)


def stop_gradient(a: Tensor) -> Tensor:
    """Identity on values (bitwise, shares storage); blocks all gradient flow."""
    out = Tensor(a.data)
    _active_tape.record(out)
    return out


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(out, g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(lo, hi)
                p.accumulate_grad(g[tuple(index)])

    return _node(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    def bwd(out, g):
        a.accumulate_grad(g.reshape(a.shape))

    return _node(a.data.reshape(shape), (a,), bwd)


def _getitem(a: Tensor, key) -> Tensor:
    def bwd(out, g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, key, g)
        a.accumulate_grad(grad)

    return _node(a.data[key], (a,), bwd)


def exclusive_cumsum(a: Tensor, axis: int = -1) -> Tensor:
    """out[i] = sum of a[j] for j < i along `axis` (out[0] = 0)."""
    value = np.cumsum(a.data, axis=axis)
    value = np.concatenate(
        [np.zeros_like(np.take(value, [0], axis=axis)), np.delete(value, -1, axis=axis)],
        axis=axis,
    )

    def bwd(out, g):
        # d out[i] / d a[j] = 1 for j < i: reverse exclusive cumsum of g.
        rev = np.flip(np.cumsum(np.flip(g, axis=axis), axis=axis), axis=axis)
        grad = np.concatenate(
            [np.delete(rev, 0, axis=axis), np.zeros_like(np.take(rev, [0], axis=axis))],
            axis=axis,
        )
        a.accumulate_grad(grad)

    return _node(value, (a,), bwd)


def square(a: Tensor) -> Tensor:
    return mul(a, a)


def backward(tape: Tape, root: Tensor) -> None:
    """Accumulate d(root)/d(leaf) into every requires_grad leaf on `tape`.

    The tape is replayed in reverse creation order; each node is visited once.
    Interior-node gradients are transient (cleared after use); leaf gradients
    persist and accumulate across calls until explicitly reset.
    """
    if root.size != 1:
        raise ShapeError(f"backward root must be scalar, got shape {root.shape}")
    root.accumulate_grad(np.ones_like(root.data))
    for node in reversed(tape._nodes[: root._index + 1]):
        if node.grad is None or node._backward is None:
            continue
        node._backward(node, node.grad)
        node.grad = None  # interior gradient, consumed


class AdamState:
    """Adam moments plus the exponentially interpolated learning-rate schedule."""

    def __init__(
        self,
        params: list[Tensor],
        lr_base: float = 5e-4,
        lr_final: float = 5e-6,
        decay_steps: int = 50_000,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        names: list[str] | None = None,
    ):
        self.params = params
        self.names = names or [f"param{i}" for i in range(len(params))]
        self.lr_base = lr_base
        self.lr_final = lr_final
        self.decay_steps = decay_steps
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def learning_rate(state: AdamState, step: int | None = None) -> float:
    """lr(s) = base * (final/base)^(s/total)."""
    s = state.step_count if step is None else step
    frac = s / state.decay_steps
    return state.lr_base * (state.lr_final / state.lr_base) ** frac


def adam_step(state: AdamState) -> float:
    """One bias-corrected Adam update over all params; returns the lr used."""
    lr = learning_rate(state)
    state.step_count += 1
    t = state.step_count
    for name, p, m, v in zip(state.names, state.params, state.m, state.v):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return lr


def zero_grad(params: list[Tensor]) -> None:
    for p in params:
        p.zero_grad()
