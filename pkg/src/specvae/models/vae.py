"""Latent VAE over AE codes.

Two independent encoder stacks: one maps the normalized quaternion ``R`` to a
posterior over ``z_R``, the other maps ``X`` to a posterior over
``(z_E, z_I)``. Decoding is structurally separated: ``z_R`` alone feeds the
rotation decoder, ``(z_E, z_I)`` alone feed ``h_D``, and the spectrum head
``f_S`` sees only ``z_I``.
"""
from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, ops
from ..errors import ValidationError
from ..rng import make_rng
from .layers import mlp
from .params import init_mlp


@dataclass
class Posterior:
    """Diagonal Gaussian; ``mu`` and ``sigma`` are tensors of shape ``(B, d)``."""
    mu: Tensor
    sigma: Tensor


# fixed output affine of f_S; not updated by the optimizer
BUFFERS = ("spec.shift", "spec.scale")


def init_vae(cfg, seed, spectra=None):
    """Parameters of the latent VAE. ``spectra`` (training spectra) sets the fixed
    per-index output shift and scale of the spectrum head."""
    rng = make_rng(seed, 2)
    p = {}
    ze = cfg.z_e + cfg.z_i
    init_mlp(p, rng, "encR.shared", (4,) + tuple(cfg.vae_r_hidden), last_gain=2.0)
    init_mlp(p, rng, "encR.mu", (cfg.vae_r_hidden[-1], cfg.head_hidden, cfg.z_r))
    init_mlp(p, rng, "encR.sigma", (cfg.vae_r_hidden[-1], cfg.head_hidden, cfg.z_r))
    init_mlp(p, rng, "encX.shared", (cfg.dim_x,) + tuple(cfg.vae_x_hidden), last_gain=2.0)
    init_mlp(p, rng, "encX.mu", (cfg.vae_x_hidden[-1], cfg.head_hidden, ze))
    init_mlp(p, rng, "encX.sigma", (cfg.vae_x_hidden[-1], cfg.head_hidden, ze))
    # sigma heads start at softplus(0) + eps
    p["encR.sigma.1.w"][:] = 0.0
    p["encX.sigma.1.w"][:] = 0.0
    init_mlp(p, rng, "decR", (cfg.z_r,) + tuple(cfg.rot_dec_hidden) + (4,))
    p[f"decR.{len(cfg.rot_dec_hidden)}.b"][0] = 1.0     # start near the identity rotation
    init_mlp(p, rng, "decX", (ze,) + tuple(cfg.x_dec_hidden) + (cfg.dim_x,))
    init_mlp(p, rng, "spec", (cfg.z_i,) + tuple(cfg.spec_hidden) + (cfg.n_lambda,))
    p["spec.shift"] = np.zeros(cfg.n_lambda)
    p["spec.scale"] = np.ones(cfg.n_lambda)
    if spectra is not None:
        spectra = np.atleast_2d(np.asarray(spectra, dtype=np.float64))
        p["spec.shift"] = spectra.mean(axis=0)
        if len(spectra) > 1:
            p["spec.scale"] = np.maximum(spectra.std(axis=0), 1e-6 * np.abs(p["spec.shift"]).max() + 1e-12)
    return p


def _sigma(h, eps):
    return ops.softplus(h) + eps


def encode_x(params, X, eps=1e-6):
    """Posterior over ``(z_E, z_I)`` from ``X``."""
    h = ops.relu(mlp(X, params, "encX.shared"))
    return Posterior(mlp(h, params, "encX.mu"), _sigma(mlp(h, params, "encX.sigma"), eps))


def encode_r(params, R, eps=1e-6):
    """Posterior over ``z_R`` from the normalized quaternion."""
    norm = ops.sqrt(ops.sum(ops.square(R), axis=-1, keepdims=True) + 1e-24)
    h = ops.relu(mlp(R / norm, params, "encR.shared"))
    return Posterior(mlp(h, params, "encR.mu"), _sigma(mlp(h, params, "encR.sigma"), eps))


def vae_encode(params, R, X, eps=1e-6):
    """``(posterior_R, posterior_EI)`` for a batch of AE codes."""
    R = R if isinstance(R, Tensor) else Tensor(np.asarray(R, dtype=np.float64))
    X = X if isinstance(X, Tensor) else Tensor(np.asarray(X, dtype=np.float64))
    return encode_r(params, R, eps), encode_x(params, X, eps)


def joint_posterior(post_r, post_ei):
    """Concatenate into one posterior over ``(z_R, z_E, z_I)``."""
    return Posterior(ops.concat([post_r.mu, post_ei.mu], axis=-1),
                     ops.concat([post_r.sigma, post_ei.sigma], axis=-1))


def reparameterize(post, seed):
    """``mu + sigma * xi`` with ``xi ~ N(0, I)`` from ``seed``."""
    xi = make_rng(seed).standard_normal(post.mu.shape)
    return post.mu + post.sigma * xi


def decode_r(params, z_r):
    return mlp(z_r, params, "decR")


def decode_x(params, z_ei):
    return mlp(z_ei, params, "decX")


def vae_decode(params, z, cfg):
    """Full latent ``(B, z_R + z_E + z_I)`` -> ``(R_hat (B, 4), X_hat (B, dim_x))``."""
    g = cfg.groups()
    z = z if isinstance(z, Tensor) else Tensor(np.asarray(z, dtype=np.float64))
    if z.shape[-1] != cfg.z_dim:
        raise ValidationError(f"latent width {z.shape[-1]} != {cfg.z_dim}")
    return decode_r(params, z[:, g["R"]]), decode_x(params, z[:, g["E"].start:g["I"].stop])


def predict_spectrum(params, z_i):
    z_i = z_i if isinstance(z_i, Tensor) else Tensor(np.asarray(z_i, dtype=np.float64))
    out = mlp(z_i, params, "spec")
    if "spec.scale" in params:
        out = out * params["spec.scale"] + params["spec.shift"]
    return out


def vae_recon_loss(R, X, R_hat, X_hat, w_q=10.0):
    """``mean_b(|X - X_hat|^2 / D) + w_q * mean_b(1 - |q . q_hat|)``."""
    from ..losses import quat_loss
    xv = X.value if isinstance(X, Tensor) else np.asarray(X)
    xh = X_hat.value if isinstance(X_hat, Tensor) else np.asarray(X_hat)
    if xv.shape != xh.shape:
        raise ValidationError(f"code shapes differ: {xv.shape} vs {xh.shape}")
    if not isinstance(X_hat, Tensor) and not isinstance(R_hat, Tensor):
        return float(np.mean(np.sum((xv - xh) ** 2, axis=-1) / xv.shape[-1])) + w_q * quat_loss(R, R_hat)
    X_hat = X_hat if isinstance(X_hat, Tensor) else Tensor(xh)
    euclid = ops.mean(ops.sum(ops.square(X_hat - X), axis=-1)) / float(xv.shape[-1])
    return euclid + w_q * quat_loss(R, R_hat)
