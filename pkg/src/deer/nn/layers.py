"""Neural building blocks: dense layer, GRU cell, dot-product attention.

All layers operate on batched 2-d inputs [batch, features] and keep their
parameters in a flat ``name -> Tensor`` dict so optimizers and checkpoints
can treat every model uniformly.  Single-vector convenience wrappers mirror
the batched forward passes for the 1-d contract forms.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor

ACTIVATIONS = ("identity", "tanh", "relu")


def init_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _apply_activation(x: Tensor, activation: str) -> Tensor:
    if activation == "identity":
        return x
    if activation == "tanh":
        return ad.tanh(x)
    if activation == "relu":
        return ad.relu(x)
    raise ValueError(f"unknown activation {activation!r}, expected one of {ACTIVATIONS}")


def _as_batch(x) -> tuple[Tensor, bool]:
    """Promote a 1-d input to a single-row batch; report whether it was 1-d."""
    if isinstance(x, Tensor):
        if x.data.ndim == 1:
            return ad.reshape(x, (1, x.data.shape[0])), True
        return x, False
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return Tensor(arr[None, :]), True
    return Tensor(arr), False


class DenseLayer:
    """Affine map with an element-wise activation; weight stored [out, in]."""

    def __init__(self, in_dim: int, out_dim: int, activation: str = "identity",
                 rng: np.random.Generator | None = None, name: str = "dense"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}, expected one of {ACTIVATIONS}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.name = name
        self.weight = Tensor.param(init_uniform(rng, (out_dim, in_dim), in_dim))
        self.bias = Tensor.param(init_uniform(rng, (out_dim,), in_dim))

    @property
    def parameters(self) -> dict[str, Tensor]:
        return {f"{self.name}.weight": self.weight, f"{self.name}.bias": self.bias}

    def forward(self, x: Tensor) -> Tensor:
        """x: [batch, in] -> [batch, out]."""
        if x.data.ndim != 2 or x.data.shape[1] != self.in_dim:
            raise ShapeError(
                f"{self.name}: expected input [batch, {self.in_dim}], got {x.data.shape}")
        y = ad.matmul(x, ad.transpose(self.weight)) + self.bias
        return _apply_activation(y, self.activation)

    __call__ = forward


def dense_forward(layer: DenseLayer, x) -> Tensor:
    """Single-vector or batched forward; 1-d in, 1-d out."""
    xb, was_1d = _as_batch(x)
    y = layer.forward(xb)
    return ad.reshape(y, (layer.out_dim,)) if was_1d else y


class GruCell:
    """Gated recurrent unit with one shared bias block on the input side.

    Gate order within the stacked [3H] blocks is (reset, update, candidate):

        r = sigmoid(W_ir x + W_hr h + b_r)
        z = sigmoid(W_iz x + W_hz h + b_z)
        n = tanh(W_in x + b_n + r * (W_hn h))
        h' = (1 - z) * n + z * h
    """

    def __init__(self, in_dim: int, hidden_dim: int,
                 rng: np.random.Generator | None = None, name: str = "gru"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        self.name = name
        self.w_ih = Tensor.param(init_uniform(rng, (3 * hidden_dim, in_dim), in_dim))
        self.w_hh = Tensor.param(init_uniform(rng, (3 * hidden_dim, hidden_dim), hidden_dim))
        self.bias = Tensor.param(init_uniform(rng, (3 * hidden_dim,), hidden_dim))

    @property
    def parameters(self) -> dict[str, Tensor]:
        return {f"{self.name}.w_ih": self.w_ih,
                f"{self.name}.w_hh": self.w_hh,
                f"{self.name}.bias": self.bias}

    def step(self, x: Tensor, h_prev: Tensor) -> Tensor:
        """x: [batch, in], h_prev: [batch, hidden] -> new hidden [batch, hidden]."""
        if x.data.ndim != 2 or x.data.shape[1] != self.in_dim:
            raise ShapeError(f"{self.name}: expected input [batch, {self.in_dim}], got {x.data.shape}")
        if h_prev.data.ndim != 2 or h_prev.data.shape[1] != self.hidden_dim:
            raise ShapeError(
                f"{self.name}: expected hidden [batch, {self.hidden_dim}], got {h_prev.data.shape}")
        h_ = self.hidden_dim
        gi = ad.matmul(x, ad.transpose(self.w_ih)) + self.bias
        gh = ad.matmul(h_prev, ad.transpose(self.w_hh))
        r = ad.sigmoid(gi[:, 0:h_] + gh[:, 0:h_])
        z = ad.sigmoid(gi[:, h_:2 * h_] + gh[:, h_:2 * h_])
        n = ad.tanh(gi[:, 2 * h_:3 * h_] + r * gh[:, 2 * h_:3 * h_])
        return (1.0 - z) * n + z * h_prev

    __call__ = step


def gru_step(cell: GruCell, x, h_prev) -> Tensor:
    """Single-vector or batched GRU update."""
    xb, was_1d = _as_batch(x)
    hb, _ = _as_batch(h_prev)
    h_new = cell.step(xb, hb)
    return ad.reshape(h_new, (cell.hidden_dim,)) if was_1d else h_new


_MASK_BIAS = -1e30


def attention_batched(encoder_states: Tensor, query: Tensor,
                      mask: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
    """Scaled dot-product attention over a padded batch of sequences.

    encoder_states: [batch, steps, K1], query: [batch, K1],
    mask: bool [batch, steps], True where the position is real.  Padded
    positions get a -1e30 score so their softmax weight underflows to zero.
    Returns (context [batch, K1], weights [batch, steps]).
    """
    b, t, k = encoder_states.data.shape
    if query.data.shape != (b, k):
        raise ShapeError(f"attention: query {query.data.shape} does not match states {(b, t, k)}")
    q3 = ad.reshape(query, (b, 1, k))
    scores = ad.sum_(encoder_states * q3, axis=2) * (1.0 / math.sqrt(k))
    if mask is not None:
        if mask.shape != (b, t):
            raise ShapeError(f"attention: mask {mask.shape} does not match scores {(b, t)}")
        if not mask.any(axis=1).all():
            raise ValueError("attention: some sequence has no unmasked position")
        scores = scores + np.where(mask, 0.0, _MASK_BIAS)
    weights = ad.softmax(scores, axis=-1)
    context = ad.sum_(encoder_states * ad.reshape(weights, (b, t, 1)), axis=1)
    return context, weights


def attention(encoder_states, query) -> tuple[Tensor, Tensor]:
    """Single-sequence attention: states as list of K1-vectors (or [steps, K1])."""
    if isinstance(encoder_states, Tensor):
        states = encoder_states
    else:
        rows = list(encoder_states)
        if len(rows) == 0:
            raise ValueError("attention: empty encoder state list")
        states = ad.stack([r if isinstance(r, Tensor) else Tensor(r) for r in rows], axis=0)
    if states.data.ndim != 2:
        raise ShapeError(f"attention: expected [steps, K1] states, got {states.data.shape}")
    if states.data.shape[0] == 0:
        raise ValueError("attention: empty encoder state list")
    t, k = states.data.shape
    q = query if isinstance(query, Tensor) else Tensor(query)
    context, weights = attention_batched(ad.reshape(states, (1, t, k)), ad.reshape(q, (1, k)))
    return ad.reshape(context, (k,)), ad.reshape(weights, (t,))


def merge_parameters(*modules) -> dict[str, Tensor]:
    """Union of parameter dicts; duplicate names are an error."""
    out: dict[str, Tensor] = {}
    for m in modules:
        params = m.parameters if not isinstance(m, dict) else m
        for k, v in params.items():
            if k in out:
                raise ValueError(f"duplicate parameter name {k!r}")
            out[k] = v
    return out
