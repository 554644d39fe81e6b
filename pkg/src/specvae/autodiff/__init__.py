"""Reverse-mode automatic differentiation over numpy arrays."""
from . import ops
from .check import batch_jacobian, directional_check, gradient_check, jacobian
from .tensor import ShapeError, Tape, Tensor, as_tensor, is_recording, no_record

__all__ = [
    "ShapeError", "Tape", "Tensor", "as_tensor", "batch_jacobian", "directional_check", "gradient_check",
    "is_recording", "jacobian", "no_record", "ops",
]
