"""Point-cloud reconstruction losses and the quaternion loss.

Every loss accepts plain arrays (reference evaluation) or a tracked
:class:`~specvae.autodiff.Tensor` for the prediction, in which case the
result is a tensor differentiable with respect to it. Clouds are ``(N, 3)`` or
batched ``(B, N, 3)``; batched losses are averaged over the batch.

With ``d_hat(p) = min_{q in P_hat} |p - q|^2`` and ``d(q) = min_{p in P} |p - q|^2``:

* chamfer   ``M_a(mean_P d_hat, mean_{P_hat} d)``
* hausdorff ``M_a(max_P d_hat,  max_{P_hat} d)``

Distances are squared. Nearest-neighbour ties go to the lowest index, and
``max`` routes its gradient to the first maximizer.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .autodiff import Tensor, ops
from .errors import ValidationError


@dataclass(frozen=True)
class LossWeights:
    alpha_c: float = 0.75
    alpha_h: float = 0.5
    r_c: float = 10.0
    r_h: float = 1.0

    def __post_init__(self):
        for name in ("alpha_c", "alpha_h"):
            a = getattr(self, name)
            if not 0.0 <= a <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {a}")
        for name in ("r_c", "r_h"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")


def max_average(l1, l2, alpha):
    """``alpha * max(l1, l2) + (1 - alpha) * (l1 + l2) / 2``, elementwise."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")
    if isinstance(l1, Tensor) or isinstance(l2, Tensor):
        l1 = l1 if isinstance(l1, Tensor) else Tensor(np.asarray(l1, dtype=np.float64))
        l2 = l2 if isinstance(l2, Tensor) else Tensor(np.asarray(l2, dtype=np.float64))
        pair = ops.concat([ops.reshape(l1, l1.shape + (1,)), ops.reshape(l2, l2.shape + (1,))], axis=-1)
        return alpha * ops.max(pair, axis=-1) + (1.0 - alpha) * 0.5 * (l1 + l2)
    l1 = np.asarray(l1, dtype=np.float64)
    l2 = np.asarray(l2, dtype=np.float64)
    return alpha * np.maximum(l1, l2) + (1.0 - alpha) * 0.5 * (l1 + l2)


def _batched(P, P_hat):
    pv = P_hat.value if isinstance(P_hat, Tensor) else np.asarray(P_hat, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != pv.ndim or P.ndim not in (2, 3) or P.shape[-1] != 3 or pv.shape[-1] != 3:
        raise ValidationError(f"clouds must both be (N, 3) or (B, N, 3), got {P.shape} and {pv.shape}")
    if P.shape[-2] == 0 or pv.shape[-2] == 0:
        raise ValidationError("empty point cloud")
    single = P.ndim == 2
    if single:
        P, pv = P[None], pv[None]
        if isinstance(P_hat, Tensor):
            P_hat = ops.reshape(P_hat, pv.shape)
    if P.shape[0] != pv.shape[0]:
        raise ValidationError(f"batch sizes differ: {P.shape[0]} vs {pv.shape[0]}")
    return P, P_hat if isinstance(P_hat, Tensor) else pv, pv, single


def _selection_gap(P, Q):
    """Smallest gap between nearest and second-nearest squared distance, both directions."""
    d = np.sum((P[:, :, None, :] - Q[:, None, :, :]) ** 2, axis=-1)
    gap = np.inf
    for m, ax in ((d, 2), (d, 1)):
        if m.shape[ax] > 1:
            s = np.sort(m, axis=ax)
            gap = min(gap, float(np.min(np.take(s, 1, axis=ax) - np.take(s, 0, axis=ax))))
    return gap


def nearest_terms(P, P_hat):
    """Per-point squared nearest-neighbour distances ``(d_hat over P, d over P_hat)``, each ``(B, N)``."""
    P, P_hat, pv, _ = _batched(P, P_hat)
    d_hat, i_hat = kernels.nearest_sqdist(P, pv)
    d, i = kernels.nearest_sqdist(pv, P)
    if not isinstance(P_hat, Tensor):
        return d_hat, d
    if P_hat.tape is not None and P_hat.tape.track_kinks:
        P_hat.tape.note_kink(_selection_gap(P, pv))
    idx = np.repeat(i_hat[..., None], 3, axis=2)
    matched = ops.take_along_axis(P_hat, idx, axis=1)
    d_hat_t = ops.sum(ops.square(matched - P), axis=-1)
    targets = np.take_along_axis(P, np.repeat(i[..., None], 3, axis=2), axis=1)
    d_t = ops.sum(ops.square(P_hat - targets), axis=-1)
    return d_hat_t, d_t


def _reduce(x, how):
    if isinstance(x, Tensor):
        return ops.mean(x, axis=-1) if how == "mean" else ops.max(x, axis=-1)
    return x.mean(axis=-1) if how == "mean" else x.max(axis=-1)


def _batch_mean(x):
    return ops.mean(x) if isinstance(x, Tensor) else float(np.mean(x))


def chamfer_loss(P, P_hat, alpha=0.75):
    d_hat, d = nearest_terms(P, P_hat)
    return _batch_mean(max_average(_reduce(d_hat, "mean"), _reduce(d, "mean"), alpha))


def hausdorff_loss(P, P_hat, alpha=0.5):
    d_hat, d = nearest_terms(P, P_hat)
    return _batch_mean(max_average(_reduce(d_hat, "max"), _reduce(d, "max"), alpha))


def reconstruction_loss(P, P_hat, w=LossWeights()):
    """``r_c * chamfer + r_h * hausdorff`` sharing one nearest-neighbour pass."""
    d_hat, d = nearest_terms(P, P_hat)
    lc = _batch_mean(max_average(_reduce(d_hat, "mean"), _reduce(d, "mean"), w.alpha_c))
    lh = _batch_mean(max_average(_reduce(d_hat, "max"), _reduce(d, "max"), w.alpha_h))
    return w.r_c * lc + w.r_h * lh


def quat_loss(q, q_hat):
    """Mean of ``1 - |q . q_hat|`` after normalizing both; ``(..., 4)`` inputs."""
    if not isinstance(q_hat, Tensor) and not isinstance(q, Tensor):
        from .geom.quat import distance
        return float(np.mean(distance(q, q_hat)))
    q = q if isinstance(q, Tensor) else Tensor(np.asarray(q, dtype=np.float64))
    q_hat = q_hat if isinstance(q_hat, Tensor) else Tensor(np.asarray(q_hat, dtype=np.float64))
    qn = normalize_quat(q)
    pn = normalize_quat(q_hat)
    dot = ops.sum(qn * pn, axis=-1)
    return ops.mean(1.0 - ops.abs(dot))


def normalize_quat(q):
    """Tape-side ``q / |q|`` over the last axis (norm floored at 1e-12)."""
    norm = ops.sqrt(ops.sum(ops.square(q), axis=-1, keepdims=True) + 1e-24)
    return q / norm
