"""Reverse-mode autodiff over dense 2-D float64 tensors.

Ops executed while a :class:`Tape` is active (``with Tape() as tape:``) and
touching at least one tensor with ``requires_grad`` are appended to that tape.
Without an active tape ops only compute values, which keeps inference and
finite-difference checks cheap. Tapes are thread-local; one tape per thread.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Optional, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    """A forward op produced NaN or Inf."""


_local = threading.local()


def active_tape() -> Optional["Tape"]:
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class Tensor:
    """2-D float64 array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_tape_id")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        self.data = np.ascontiguousarray(arr)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]] = None
        self._tape_id: Optional[int] = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar tensor, got {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        from .ops import add
        return add(self, other)

    def __sub__(self, other):
        from .ops import sub
        return sub(self, other)

    def __mul__(self, other):
        from .ops import mul, scale
        return scale(self, other) if np.isscalar(other) else mul(self, other)

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_op(name: str, data: np.ndarray, parents: Iterable[Tensor],
            backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> Tensor:
    """Wrap a forward result; records ``backward`` when a tape is listening."""
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{name} produced non-finite values")
    parents = tuple(parents)
    out = Tensor(data, name=name)
    tape = active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
        tape._record(out)
    return out


class Tape:
    """Append-only record of ops; append order is a topological order."""

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self) -> "Tape":
        if not hasattr(_local, "stack"):
            _local.stack = []
        _local.stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _local.stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def _record(self, node: Tensor) -> None:
        node._tape_id = len(self.nodes)
        self.nodes.append(node)

    def backward(self, loss: Tensor, accumulate: bool = False) -> dict[Tensor, np.ndarray]:
        return backward(self, loss, accumulate=accumulate)


def backward(tape: Tape, loss: Tensor, accumulate: bool = False) -> dict[Tensor, np.ndarray]:
    """Gradients of scalar ``loss`` for every leaf tensor with ``requires_grad``.

    Each recorded node is visited once, in reverse append order; gradients
    add up where a value fans out. With ``accumulate`` the leaf gradients are
    also added into ``leaf.grad``.
    """
    if loss.shape != (1, 1):
        raise ShapeError(f"loss must be scalar, got shape {loss.shape}")
    if loss._tape_id is None or loss._tape_id >= len(tape.nodes) or tape.nodes[loss._tape_id] is not loss:
        raise ValueError("loss was not produced on this tape")
    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    leaves: dict[int, Tensor] = {}
    for node in reversed(tape.nodes[: loss._tape_id + 1]):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if parent._backward is None:
                leaves[key] = parent
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    out = {leaves[k]: grads[k] for k in leaves}
    if accumulate:
        for leaf, g in out.items():
            leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g
    return out
