"""Minimal reverse-mode automatic differentiation on numpy arrays."""

from cebed.autodiff import ops
from cebed.autodiff.checkpoint import load_checkpoint, save_checkpoint
from cebed.autodiff.optim import AdamState, adam_step
from cebed.autodiff.tensor import Tape, Tensor, backward

__all__ = [
    "AdamState",
    "Tape",
    "Tensor",
    "adam_step",
    "backward",
    "load_checkpoint",
    "ops",
    "save_checkpoint",
]
