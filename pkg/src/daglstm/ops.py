"""Differentiable operations over vectors and matrices.

Every function here computes a forward value and, when a tape is active,
records a backward closure that accumulates gradients into its inputs.
Shapes are checked eagerly; there is no broadcasting beyond what the model
architectures need.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import ShapeError, Tensor, active_tape

__all__ = [
    "zeros",
    "affine",
    "matvec",
    "add",
    "scale",
    "mul",
    "elementwise_max",
    "relu",
    "sigmoid",
    "tanh",
    "concat",
    "tsum",
    "softmax",
    "softmax_cross_entropy",
    "take_row",
    "apply_mask",
    "dropout",
]


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape))


def _record(op, inputs, out, backward) -> Tensor:
    tape = active_tape()
    if tape is not None:
        tape.record(op, inputs, out, backward)
    return out


def _require_vector(t: Tensor, op: str, role: str) -> None:
    if t.values.ndim != 1:
        raise ShapeError(f"{op}: {role} must be a vector, got shape {t.shape}")


def affine(W: Tensor, x: Tensor, b: Tensor) -> Tensor:
    """W @ x + b for W [m, n], x [n], b [m]."""
    if W.values.ndim != 2:
        raise ShapeError(f"affine: W must be a matrix, got shape {W.shape}")
    m, n = W.values.shape
    _require_vector(x, "affine", "x")
    _require_vector(b, "affine", "b")
    if x.values.shape[0] != n or b.values.shape[0] != m:
        raise ShapeError(
            f"affine: W is {W.shape}, x is {x.shape}, b is {b.shape}")
    out = Tensor(W.values @ x.values + b.values)

    def backward(g, W=W, x=x, b=b, xv=x.values.copy(), Wv=W.values.copy()):
        W.accumulate_grad(np.outer(g, xv))
        x.accumulate_grad(Wv.T @ g)
        b.accumulate_grad(g)

    return _record("affine", (W, x, b), out, backward)


def matvec(W: Tensor, x: Tensor) -> Tensor:
    """W @ x without a bias term."""
    if W.values.ndim != 2:
        raise ShapeError(f"matvec: W must be a matrix, got shape {W.shape}")
    _require_vector(x, "matvec", "x")
    if x.values.shape[0] != W.values.shape[1]:
        raise ShapeError(f"matvec: W is {W.shape}, x is {x.shape}")
    out = Tensor(W.values @ x.values)

    def backward(g, W=W, x=x, xv=x.values.copy(), Wv=W.values.copy()):
        W.accumulate_grad(np.outer(g, xv))
        x.accumulate_grad(Wv.T @ g)

    return _record("matvec", (W, x), out, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.values.shape != b.values.shape:
        raise ShapeError(f"add: shapes differ, {a.shape} vs {b.shape}")
    out = Tensor(a.values + b.values)

    def backward(g, a=a, b=b):
        a.accumulate_grad(g)
        b.accumulate_grad(g)

    return _record("add", (a, b), out, backward)


def scale(x: Tensor, k: float) -> Tensor:
    """Multiply by a plain (non-differentiated) scalar constant."""
    out = Tensor(x.values * k)

    def backward(g, x=x, k=k):
        x.accumulate_grad(g * k)

    return _record("scale", (x,), out, backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of same-shape tensors."""
    if a.values.shape != b.values.shape:
        raise ShapeError(f"mul: shapes differ, {a.shape} vs {b.shape}")
    out = Tensor(a.values * b.values)

    def backward(g, a=a, b=b, av=a.values.copy(), bv=b.values.copy()):
        a.accumulate_grad(g * bv)
        b.accumulate_grad(g * av)

    return _record("mul", (a, b), out, backward)


def elementwise_max(inputs: Sequence[Tensor]) -> Tensor:
    """Coordinatewise maximum over one or more same-shape tensors.

    Each coordinate's gradient is routed entirely to the input that attained
    the maximum; ties go to the earliest input in list order, which keeps the
    subgradient deterministic across runs.
    """
    inputs = list(inputs)
    if not inputs:
        raise ValueError("elementwise_max needs at least one input")
    shape = inputs[0].values.shape
    for t in inputs[1:]:
        if t.values.shape != shape:
            raise ShapeError(
                f"elementwise_max: shapes differ, {shape} vs {t.shape}")
    stacked = np.stack([t.values for t in inputs])
    winner = np.argmax(stacked, axis=0)  # argmax picks the earliest maximum
    out = Tensor(np.max(stacked, axis=0))

    def backward(g, inputs=inputs, winner=winner):
        for i, t in enumerate(inputs):
            t.accumulate_grad(g * (winner == i))

    return _record("elementwise_max", inputs, out, backward)


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.values, 0.0))

    def backward(g, x=x, mask=(x.values > 0)):
        x.accumulate_grad(g * mask)

    return _record("relu", (x,), out, backward)


def _stable_sigmoid(v: np.ndarray) -> np.ndarray:
    # Split by sign so the exponential argument is never positive.
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = _stable_sigmoid(x.values)
    out = Tensor(s)

    def backward(g, x=x, s=s):
        x.accumulate_grad(g * s * (1.0 - s))

    return _record("sigmoid", (x,), out, backward)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.values)
    out = Tensor(y)

    def backward(g, x=x, y=y):
        x.accumulate_grad(g * (1.0 - y * y))

    return _record("tanh", (x,), out, backward)


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate vectors into one longer vector."""
    parts = list(parts)
    if not parts:
        raise ValueError("concat needs at least one input")
    for t in parts:
        _require_vector(t, "concat", "input")
    out = Tensor(np.concatenate([t.values for t in parts]))
    offsets = np.cumsum([0] + [t.values.shape[0] for t in parts])

    def backward(g, parts=parts, offsets=offsets):
        for i, t in enumerate(parts):
            t.accumulate_grad(g[offsets[i]:offsets[i + 1]])

    return _record("concat", parts, out, backward)


def tsum(x: Tensor) -> Tensor:
    """Sum all entries into a scalar."""
    out = Tensor(np.sum(x.values))

    def backward(g, x=x):
        x.accumulate_grad(np.full_like(x.values, float(g)))

    return _record("tsum", (x,), out, backward)


def softmax(v: np.ndarray) -> np.ndarray:
    """Numerically stable softmax of a plain vector (forward only)."""
    shifted = v - np.max(v)
    e = np.exp(shifted)
    return e / np.sum(e)


def softmax_cross_entropy(logits: Tensor, gold: int):
    """Cross-entropy of softmax(logits) against a gold class index.

    Returns ``(loss, probs)`` where ``loss`` is a scalar tensor and ``probs``
    is a plain array (detached). The loss is computed through log-sum-exp so
    extreme logits neither overflow nor produce infinite losses spuriously.
    """
    _require_vector(logits, "softmax_cross_entropy", "logits")
    n = logits.values.shape[0]
    if not 0 <= int(gold) < n:
        raise ValueError(
            f"gold class index {gold} out of range for {n} classes")
    gold = int(gold)
    m = np.max(logits.values)
    lse = m + np.log(np.sum(np.exp(logits.values - m)))
    probs = np.exp(logits.values - lse)
    out = Tensor(lse - logits.values[gold])

    def backward(g, logits=logits, probs=probs, gold=gold):
        delta = probs.copy()
        delta[gold] -= 1.0
        logits.accumulate_grad(float(g) * delta)

    _record("softmax_cross_entropy", (logits,), out, backward)
    return out, probs.copy()


def take_row(M: Tensor, index: int) -> Tensor:
    """Select row ``index`` of a matrix; gradients scatter back to that row."""
    if M.values.ndim != 2:
        raise ShapeError(f"take_row: M must be a matrix, got shape {M.shape}")
    if not 0 <= index < M.values.shape[0]:
        raise IndexError(f"take_row: row {index} out of range for {M.shape}")
    out = Tensor(M.values[index].copy())

    def backward(g, M=M, index=index):
        if M.grad is None:
            M.grad = np.zeros_like(M.values)
        M.grad[index] += g

    return _record("take_row", (M,), out, backward)


def apply_mask(x: Tensor, mask: np.ndarray) -> Tensor:
    """Elementwise product with a constant array (the dropout primitive)."""
    if mask.shape != x.values.shape:
        raise ShapeError(f"apply_mask: mask {mask.shape} vs x {x.shape}")
    out = Tensor(x.values * mask)

    def backward(g, x=x, mask=mask):
        x.accumulate_grad(g * mask)

    return _record("apply_mask", (x,), out, backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero entries with probability ``rate``, rescale the rest."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    keep = (rng.random(x.values.shape) >= rate).astype(x.values.dtype)
    return apply_mask(x, keep / (1.0 - rate))
