"""Tape-based reverse-mode automatic differentiation on dense arrays.

Operations (see :mod:`daglstm.ops`) record themselves onto the active
:class:`Tape` in execution order. Execution order is already a topological
order of the computation DAG, so a single reverse sweep over the tape
propagates gradients, visiting each recorded node exactly once. When no tape
is active, operations run in plain forward mode; evaluation and prediction
use that path.

Precision: 64-bit floats are the default (gradient checks at 1e-4 are not
reliable in 32-bit); ``set_precision(32)`` opts into the fast mode.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "TapeError",
    "active_tape",
    "set_precision",
    "default_dtype",
]


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class TapeError(RuntimeError):
    """Tape lifecycle misuse: double backward, tensor shared across live tapes."""


_DTYPE = np.float64


def set_precision(bits: int) -> None:
    """Select the float width for newly created tensors (64 or 32)."""
    global _DTYPE
    if bits == 64:
        _DTYPE = np.float64
    elif bits == 32:
        _DTYPE = np.float32
    else:
        raise ValueError(f"precision must be 64 or 32, got {bits}")


def default_dtype() -> np.dtype:
    return np.dtype(_DTYPE)


class Tensor:
    """A dense real array with a lazily allocated gradient slot.

    A tensor may be owned by at most one live tape at a time. Ownership is
    acquired when an operation first consumes or produces the tensor while a
    tape is active, and lapses once that tape has run its backward pass.
    """

    __slots__ = ("values", "grad", "tape", "node_id", "name")

    def __init__(self, values, name: Optional[str] = None):
        self.values = np.asarray(values, dtype=_DTYPE)
        self.grad: Optional[np.ndarray] = None
        self.tape: Optional[Tape] = None
        self.node_id: Optional[int] = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.values.reshape(()))

    def accumulate_grad(self, delta: np.ndarray) -> None:
        """Add ``delta`` into the gradient slot, allocating it on first use."""
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += delta

    def zero_grad(self) -> None:
        self.grad = None

    def __getstate__(self):
        # Tape ownership never crosses process boundaries.
        return (self.values, self.grad, self.name)

    def __setstate__(self, state):
        self.values, self.grad, self.name = state
        self.tape = None
        self.node_id = None

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<Tensor{label} shape={self.shape}>"


class _Node:
    __slots__ = ("op", "inputs", "output", "backward", "visits")

    def __init__(self, op: str, inputs: tuple, output: int, backward: Callable):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward
        self.visits = 0


_ACTIVE: list["Tape"] = []


def active_tape() -> Optional["Tape"]:
    """The tape currently recording, or None for plain forward mode."""
    return _ACTIVE[-1] if _ACTIVE else None


class Tape:
    """Append-only record of operations, in topological (execution) order.

    Usage::

        tape = Tape()
        with tape:
            loss = ...          # ops record themselves
        tape.backward(loss)     # fills .grad on every tensor that mattered
    """

    def __init__(self):
        self.tensors: list[Tensor] = []
        self.nodes: list[_Node] = []
        self.finished = False

    def __enter__(self) -> "Tape":
        if _ACTIVE:
            raise TapeError("tapes do not nest")
        if self.finished:
            raise TapeError("this tape already ran backward; use a fresh tape")
        _ACTIVE.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE.pop()
        return False

    def _register(self, t: Tensor) -> int:
        if t.tape is self:
            return t.node_id  # type: ignore[return-value]
        if t.tape is not None:
            if t.tape.finished:
                t.tape = None  # a spent tape releases its tensors
            else:
                raise TapeError("tensor is already owned by another live tape")
        t.tape = self
        t.node_id = len(self.tensors)
        self.tensors.append(t)
        return t.node_id

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor,
               backward: Callable[[np.ndarray], None]) -> None:
        """Append one operation. ``backward`` receives the output gradient and
        must accumulate into the input tensors' grad slots."""
        in_ids = tuple(self._register(t) for t in inputs)
        out_id = self._register(output)
        self.nodes.append(_Node(op, in_ids, out_id, backward))

    def backward(self, root: Tensor) -> None:
        """Propagate d(root)/d(tensor) to every tensor on the tape.

        Gradients from multiple consumers accumulate additively. A second
        call without ``reset()`` is rejected.
        """
        if self.finished:
            raise TapeError("backward already ran on this tape; call reset() first")
        if root.tape is not self:
            raise TapeError("backward root is not on this tape")
        if root.values.size != 1:
            raise ShapeError(f"backward root must be scalar, got shape {root.shape}")
        root.accumulate_grad(np.ones_like(root.values))
        for node in reversed(self.nodes):
            node.visits += 1
            out_grad = self.tensors[node.output].grad
            if out_grad is not None:
                node.backward(out_grad)
        self.finished = True

    def reset(self) -> None:
        """Clear all gradients and visit counters so backward may run again."""
        for t in self.tensors:
            t.grad = None
        for node in self.nodes:
            node.visits = 0
        self.finished = False

    def release(self) -> None:
        """Detach every tensor so it may join a new tape immediately."""
        for t in self.tensors:
            if t.tape is self:
                t.tape = None
                t.node_id = None

    def visit_counts(self) -> list[int]:
        return [node.visits for node in self.nodes]

    def __len__(self) -> int:
        return len(self.nodes)
