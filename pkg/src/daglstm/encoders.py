"""Utterance encoders: peephole LSTM, BiLSTM with max pooling, and a 1-D CNN.

The word-level LSTM keeps full peephole matrices: the input and forget gates
read the previous cell, and the output gate reads the freshly computed cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import ops
from .tensor import Tensor

__all__ = [
    "LstmParams",
    "LstmState",
    "UttPoolParams",
    "CnnEncoderParams",
    "initial_state",
    "lstm_step",
    "lstm_run",
    "bilstm_encode",
    "pool_utterance",
    "cnn_encode",
    "init_lstm_params",
    "init_pool_params",
    "init_cnn_params",
]


def xavier(rng: np.random.Generator, rows: int, cols: int) -> Tensor:
    r = np.sqrt(6.0 / (rows + cols))
    return Tensor(rng.uniform(-r, r, size=(rows, cols)))


@dataclass
class LstmParams:
    """Weights for one LSTM direction; peephole matrices are full H x H."""

    W_ix: Tensor
    W_ih: Tensor
    W_fx: Tensor
    W_fh: Tensor
    W_ox: Tensor
    W_oh: Tensor
    W_cx: Tensor
    W_ch: Tensor
    b_i: Tensor
    b_f: Tensor
    b_o: Tensor
    b_c: Tensor
    hidden: int
    peepholes: bool = True
    W_ic: Optional[Tensor] = None
    W_fc: Optional[Tensor] = None
    W_oc: Optional[Tensor] = None

    def tensors(self) -> dict[str, Tensor]:
        named = {
            "W_ix": self.W_ix, "W_ih": self.W_ih,
            "W_fx": self.W_fx, "W_fh": self.W_fh,
            "W_ox": self.W_ox, "W_oh": self.W_oh,
            "W_cx": self.W_cx, "W_ch": self.W_ch,
            "b_i": self.b_i, "b_f": self.b_f,
            "b_o": self.b_o, "b_c": self.b_c,
        }
        if self.peepholes:
            named.update({"W_ic": self.W_ic, "W_fc": self.W_fc,
                          "W_oc": self.W_oc})
        return named


@dataclass
class LstmState:
    h: Tensor
    c: Tensor


def initial_state(hidden: int) -> LstmState:
    return LstmState(h=ops.zeros(hidden), c=ops.zeros(hidden))


def init_lstm_params(rng: np.random.Generator, input_dim: int, hidden: int,
                     peepholes: bool = True,
                     forget_bias: float = 1.0) -> LstmParams:
    def mat_x():
        return xavier(rng, hidden, input_dim)

    def mat_h():
        return xavier(rng, hidden, hidden)

    return LstmParams(
        W_ix=mat_x(), W_ih=mat_h(),
        W_fx=mat_x(), W_fh=mat_h(),
        W_ox=mat_x(), W_oh=mat_h(),
        W_cx=mat_x(), W_ch=mat_h(),
        b_i=ops.zeros(hidden),
        b_f=Tensor(np.full(hidden, forget_bias)),
        b_o=ops.zeros(hidden),
        b_c=ops.zeros(hidden),
        hidden=hidden,
        peepholes=peepholes,
        W_ic=mat_h() if peepholes else None,
        W_fc=mat_h() if peepholes else None,
        W_oc=mat_h() if peepholes else None,
    )


def lstm_step(x: Tensor, prev: LstmState, params: LstmParams) -> LstmState:
    """One LSTM step. Peepholes for i and f read the previous cell; the
    output gate peephole reads the new cell."""
    i_pre = ops.add(ops.affine(params.W_ix, x, params.b_i),
                    ops.matvec(params.W_ih, prev.h))
    f_pre = ops.add(ops.affine(params.W_fx, x, params.b_f),
                    ops.matvec(params.W_fh, prev.h))
    if params.peepholes:
        i_pre = ops.add(i_pre, ops.matvec(params.W_ic, prev.c))
        f_pre = ops.add(f_pre, ops.matvec(params.W_fc, prev.c))
    i = ops.sigmoid(i_pre)
    f = ops.sigmoid(f_pre)
    g = ops.tanh(ops.add(ops.affine(params.W_cx, x, params.b_c),
                         ops.matvec(params.W_ch, prev.h)))
    c = ops.add(ops.mul(f, prev.c), ops.mul(i, g))
    o_pre = ops.add(ops.affine(params.W_ox, x, params.b_o),
                    ops.matvec(params.W_oh, prev.h))
    if params.peepholes:
        o_pre = ops.add(o_pre, ops.matvec(params.W_oc, c))
    o = ops.sigmoid(o_pre)
    h = ops.mul(o, ops.tanh(c))
    return LstmState(h=h, c=c)


def lstm_run(xs: Sequence[Tensor], params: LstmParams) -> list[LstmState]:
    if not xs:
        raise ValueError("lstm_run needs a nonempty sequence")
    state = initial_state(params.hidden)
    states = []
    for x in xs:
        state = lstm_step(x, state, params)
        states.append(state)
    return states


def bilstm_encode(xs: Sequence[Tensor], fwd: LstmParams,
                  bwd: LstmParams) -> list[Tensor]:
    """Per-position concatenation [h_fwd_t; h_bwd_t] over the sequence."""
    if not xs:
        raise ValueError("bilstm_encode needs a nonempty sequence")
    fwd_states = lstm_run(xs, fwd)
    bwd_states = lstm_run(list(reversed(xs)), bwd)[::-1]
    return [ops.concat([f.h, b.h]) for f, b in zip(fwd_states, bwd_states)]


@dataclass
class UttPoolParams:
    """Affine map into feature space, pooled by elementwise max over words."""

    W_u: Tensor
    b_u: Tensor

    def tensors(self) -> dict[str, Tensor]:
        return {"W_u": self.W_u, "b_u": self.b_u}


def init_pool_params(rng: np.random.Generator, in_dim: int,
                     out_dim: int) -> UttPoolParams:
    return UttPoolParams(W_u=xavier(rng, out_dim, in_dim), b_u=ops.zeros(out_dim))


def pool_utterance(contextual: Sequence[Tensor],
                   pool: UttPoolParams) -> Tensor:
    if not contextual:
        raise ValueError("pool_utterance needs a nonempty sequence")
    transformed = [ops.affine(pool.W_u, h, pool.b_u) for h in contextual]
    return ops.elementwise_max(transformed)


@dataclass
class CnnEncoderParams:
    """Filter bank stored flattened as [filters, window * in_dim]."""

    weight: Tensor
    bias: Tensor
    window: int
    in_dim: int

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")

    @property
    def filters(self) -> int:
        return self.weight.shape[0]

    def tensors(self) -> dict[str, Tensor]:
        return {"weight": self.weight, "bias": self.bias}


def init_cnn_params(rng: np.random.Generator, in_dim: int, window: int,
                    filters: int) -> CnnEncoderParams:
    return CnnEncoderParams(weight=xavier(rng, filters, window * in_dim),
                            bias=ops.zeros(filters), window=window,
                            in_dim=in_dim)


def cnn_encode(xs: Sequence[Tensor], params: CnnEncoderParams) -> Tensor:
    """1-D convolution over time, ReLU, max-over-time pooling.

    Sequences shorter than the window are zero-padded on the right.
    """
    xs = list(xs)
    if len(xs) < params.window:
        xs = xs + [ops.zeros(params.in_dim)] * (params.window - len(xs))
    outputs = []
    for t in range(len(xs) - params.window + 1):
        window = ops.concat(xs[t:t + params.window])
        outputs.append(ops.relu(ops.affine(params.weight, window, params.bias)))
    return ops.elementwise_max(outputs)
