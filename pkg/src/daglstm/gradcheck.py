"""Finite-difference checking of analytic gradients.

Central differences per coordinate against a backward pass, with the
relative error |a - n| / max(|a| + |n|, 1e-8). The numeric side never
touches the tape, so it stays independent of the code path it checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .tensor import ShapeError, Tape, Tensor

__all__ = ["GradCheckReport", "grad_check"]


@dataclass
class GradCheckReport:
    op: str
    max_rel_err: float
    worst: Optional[Tuple[int, tuple]]  # (input position, coordinate)
    passed: bool

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (f"grad_check[{self.op}]: {status}, "
                f"max rel err {self.max_rel_err:.3e} at {self.worst}")


def grad_check(f: Callable[..., Tensor], inputs: Sequence[Tensor],
               step: float = 1e-5, tol: float = 1e-4,
               name: str = "f") -> GradCheckReport:
    """Compare the backward pass of scalar-valued ``f`` with central differences.

    ``f`` is called as ``f(*inputs)`` and must be a pure function of the input
    tensors' current values. The inputs are perturbed in place and restored.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")

    for t in inputs:
        t.zero_grad()
    tape = Tape()
    with tape:
        y = f(*inputs)
    if y.values.size != 1:
        raise ShapeError(f"grad_check needs a scalar-valued f, got {y.shape}")
    tape.backward(y)
    analytic = [np.zeros_like(t.values) if t.grad is None else t.grad.copy()
                for t in inputs]
    tape.release()

    def value() -> float:
        return float(f(*inputs).values)

    max_rel = 0.0
    worst = None
    for i, t in enumerate(inputs):
        flat = t.values.reshape(-1)
        a_flat = analytic[i].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            f_plus = value()
            flat[j] = orig - step
            f_minus = value()
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = float(a_flat[j])
            rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-8)
            if rel > max_rel:
                max_rel = rel
                worst = (i, np.unravel_index(j, t.values.shape))
    return GradCheckReport(op=name, max_rel_err=max_rel, worst=worst,
                           passed=max_rel <= tol)
