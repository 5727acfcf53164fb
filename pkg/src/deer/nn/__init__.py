"""Differentiable primitives: autodiff tensors, layers, and the optimizer."""

from . import autodiff
from .autodiff import Tensor, gradients
from .layers import (DenseLayer, GruCell, attention, attention_batched,
                     dense_forward, gru_step, init_uniform, merge_parameters)
from .optim import Adam

__all__ = [
    "autodiff", "Tensor", "gradients",
    "DenseLayer", "GruCell", "attention", "attention_batched",
    "dense_forward", "gru_step", "init_uniform", "merge_parameters",
    "Adam",
]
