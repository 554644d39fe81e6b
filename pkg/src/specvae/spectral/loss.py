"""Index-weighted L1 spectral loss (mean of ``|lambda_i - pred_i| / i``).

The ``1/i`` weights keep the high-frequency end, whose eigenvalues grow
roughly linearly with index, from dominating the loss.
"""
import numpy as np

from ..autodiff import Tensor, ops
from ..errors import ValidationError


def spectral_weights(n):
    return 1.0 / np.arange(1, n + 1, dtype=np.float64)


def spectral_loss(target, pred):
    """Loss per spectrum; a batch of arrays gives one value per row.

    When ``pred`` is a tape tensor the result is the batch mean, as a tensor.
    """
    target = np.asarray(target, dtype=np.float64)
    pv = pred.value if isinstance(pred, Tensor) else np.asarray(pred, dtype=np.float64)
    if target.shape[-1] != pv.shape[-1]:
        raise ValidationError(f"spectrum length mismatch: {target.shape[-1]} vs {pv.shape[-1]}")
    w = spectral_weights(target.shape[-1])
    if isinstance(pred, Tensor):
        return ops.mean(ops.sum(ops.abs(pred - target) * w, axis=-1)) / float(len(w))
    per = np.sum(np.abs(target - pv) * w, axis=-1) / len(w)
    return per if per.ndim else float(per)
