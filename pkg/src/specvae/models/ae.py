"""Point-cloud autoencoder ``f_E(P) = (R, X)``, ``f_D(R, X) = g_D(X) @ R_M``.

The encoder is a reduced PointNet: a per-point MLP shared across points,
max-pooled over the set, then a dense head. No input/feature transformer
networks. The decoder emits a fixed-size cloud from ``X`` and rotates it by
the (normalized) quaternion ``R``.
"""
import numpy as np

from ..autodiff import Tensor, ops
from ..rng import make_rng
from .layers import mlp, quat_matrix
from .params import init_mlp


def init_ae(cfg, seed, template=None):
    """AE parameters for a :class:`~specvae.config.ModelConfig`.

    ``template`` (``(n_out, 3)``) seeds the decoder output bias so training
    starts from a plausible shape instead of a point blob.
    """
    rng = make_rng(seed, 1)
    p = {}
    init_mlp(p, rng, "enc.point", (3,) + tuple(cfg.enc_point), last_gain=2.0)
    init_mlp(p, rng, "enc.fc", (cfg.enc_point[-1],) + tuple(cfg.enc_fc) + (4 + cfg.dim_x,))
    init_mlp(p, rng, "dec", (cfg.dim_x,) + tuple(cfg.dec_fc) + (3 * cfg.n_out,))
    last = len(cfg.dec_fc)
    p[f"dec.{last}.w"] *= 0.1
    # bias the quaternion head toward identity so early rotations are tame
    p[f"enc.fc.{len(cfg.enc_fc)}.b"][0] = 1.0
    if template is not None:
        p[f"dec.{last}.b"] = np.asarray(template, dtype=np.float64).reshape(-1).copy()
    return p


def ae_encode(params, points):
    """``(B, N, 3)`` clouds -> ``(R (B, 4), X (B, dim_x))``; permutation-invariant in ``N``."""
    points = points if isinstance(points, Tensor) else Tensor(np.asarray(points, dtype=np.float64))
    h = ops.relu(mlp(points, params, "enc.point"))
    pooled = ops.max(h, axis=1)
    code = mlp(pooled, params, "enc.fc")
    return code[:, :4], code[:, 4:]


def shape_decode(params, X):
    """Unrotated cloud ``g_D(X)``, ``(B, n_out, 3)``."""
    flat = mlp(X, params, "dec")
    return ops.reshape(flat, (flat.shape[0], flat.shape[1] // 3, 3))


def ae_decode(params, R, X):
    """``g_D(X) @ R_M`` with ``R`` a raw 4-vector per row."""
    R = R if isinstance(R, Tensor) else Tensor(np.asarray(R, dtype=np.float64))
    X = X if isinstance(X, Tensor) else Tensor(np.asarray(X, dtype=np.float64))
    return ops.matmul(shape_decode(params, X), quat_matrix(R))
