"""Reverse-mode differentiation: tensors and the recording tape.

A Tape is a context manager; while one is active, operations append records
in execution order (inputs always precede their consumers, so the list is
already topologically sorted). backward walks it once in reverse. With no
active tape, the same operations run as plain forward computations, which is
the inference mode.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import DoubleBackward, NonScalarLoss

DEFAULT_DTYPE = np.float32


class Tensor:
    """An n-d real array with an optional gradient of the same shape."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # arithmetic operators are installed by the ops module


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


@dataclass
class OpRecord:
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward_fn: Callable[[np.ndarray], None]


_TAPE_STACK: list["Tape"] = []


def active_tape() -> "Tape | None":
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tape:
    def __init__(self):
        self.records: list[OpRecord] = []
        self._backpropagated = False

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        assert _TAPE_STACK and _TAPE_STACK[-1] is self
        _TAPE_STACK.pop()
        return False

    def record(self, output: Tensor, inputs: Sequence[Tensor],
               backward_fn: Callable[[np.ndarray], None]) -> None:
        self.records.append(OpRecord(output, tuple(inputs), backward_fn))

    def reset(self) -> None:
        """Clear gradients and allow another backward pass."""
        self._backpropagated = False
        for rec in self.records:
            rec.output.grad = None
            for t in rec.inputs:
                t.grad = None


def accumulate(t: Tensor, g: np.ndarray) -> None:
    """Add g into t.grad; no-op for tensors outside the gradient flow."""
    if not t.requires_grad:
        return
    assert g.shape == t.data.shape, f"gradient shape {g.shape} vs tensor {t.data.shape}"
    t.grad = g if t.grad is None else t.grad + g


def backward(tape: Tape, loss: Tensor) -> None:
    """Populate grad on every requires_grad tensor reachable from loss."""
    if loss.data.size != 1:
        raise NonScalarLoss(f"loss has shape {loss.data.shape}")
    if tape._backpropagated:
        raise DoubleBackward("tape already backpropagated; call reset() first")
    tape._backpropagated = True
    loss.grad = np.ones_like(loss.data)
    for rec in reversed(tape.records):
        g = rec.output.grad
        if g is None:
            continue
        rec.backward_fn(g)
