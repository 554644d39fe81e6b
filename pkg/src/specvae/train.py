"""Optimizer and the two training stages (AE, then VAE on frozen AE codes)."""
import csv
import logging
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from .autodiff import Tape
from .disentangle import (
    PenaltyWeights,
    covariance_penalty,
    cross_jacobian_norms,
    hfvae_terms,
    jacobian_penalty,
    rotational_consistency,
    total_vae_loss,
)
from .errors import NumericalError, ValidationError
from .geom import quat
from .losses import LossWeights, reconstruction_loss
from .models import (
    BUFFERS,
    ae_decode,
    ae_encode,
    decode_r,
    decode_x,
    encode_x,
    init_ae,
    init_vae,
    joint_posterior,
    load_checkpoint,
    predict_spectrum,
    reparameterize,
    save_checkpoint,
    vae_encode,
    vae_recon_loss,
)
from .rng import make_rng
from .spectral import spectral_loss

log = logging.getLogger(__name__)

AE_COLUMNS = ["epoch", "L_R"]
VAE_COLUMNS = ["epoch", "L_V", "P_intra", "P_KL", "MI", "TC", "COV", "J_IE", "J_EI", "L_S", "total"]


class Adam:
    """Adam with bias correction; weight decay is added to the gradient."""

    def __init__(self, params, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8, decay=0.0):
        self.lr, self.b1, self.b2, self.eps, self.decay = lr, b1, b2, eps, decay
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        """Update every parameter that has an entry in ``grads``."""
        self.t += 1
        for k in grads:
            adam_step(params, grads, self, k)
        return params


def adam_step(params, grads, state, key):
    """Update ``params[key]`` in place from ``grads[key]``."""
    g = grads[key]
    if not np.all(np.isfinite(g)):
        raise NumericalError(f"non-finite gradient for parameter {key!r}")
    if state.decay:
        g = g + state.decay * params[key]
    m = state.m[key] = state.b1 * state.m[key] + (1 - state.b1) * g
    v = state.v[key] = state.b2 * state.v[key] + (1 - state.b2) * g * g
    mhat = m / (1 - state.b1 ** state.t)
    vhat = v / (1 - state.b2 ** state.t)
    params[key] = params[key] - state.lr * mhat / (np.sqrt(vhat) + state.eps)


def clip_by_norm(grads, max_norm):
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm and total > max_norm:
        s = max_norm / total
        grads = {k: g * s for k, g in grads.items()}
    return grads, total


def _write_metrics(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def _batches(n, size, rng):
    order = rng.permutation(n)
    return [order[s:s + size] for s in range(0, n, size) if len(order[s:s + size]) >= 2]


def _subsample(clouds, n, rng):
    idx = np.stack([rng.choice(clouds.shape[1], size=n, replace=False) for _ in range(len(clouds))])
    return np.take_along_axis(clouds, idx[..., None], axis=1)


def _rotate_batch(clouds, angles):
    mats = quat.to_matrix(quat.about_axis(angles, "y"))
    return np.einsum("bnj,bjk->bnk", clouds, mats)


# ----------------------------------------------------------------------------- AE

def ae_step(params, clouds, rng, cfg):
    """Loss and gradients for one augmented AE batch.

    With a nonzero ``penalty.rot_consistency`` a second, independently rotated
    copy is encoded too and ``|X - X_r|^2`` is added at that weight. Returns
    ``(loss, grads, rot)`` where ``rot`` is the unweighted term (0 when off).
    """
    a = cfg.ae
    angles = rng.uniform(a.angle_min, a.angle_max, size=len(clouds))
    target = _rotate_batch(clouds, angles)
    inp = _subsample(target, min(a.n_input, clouds.shape[1]), rng)
    w = LossWeights(**vars(cfg.loss))
    w_rot = cfg.penalty.rot_consistency
    with Tape() as tape:
        p = {k: tape.var(v) for k, v in params.items()}
        R, X = ae_encode(p, inp)
        loss = reconstruction_loss(target, ae_decode(p, R, X), w)
        rot = 0.0
        if w_rot:
            turned = _rotate_batch(clouds, rng.uniform(a.angle_min, a.angle_max, size=len(clouds)))
            _, X_r = ae_encode(p, _subsample(turned, min(a.n_input, clouds.shape[1]), rng))
            rot = rotational_consistency(X, X_r)
            loss = loss + w_rot * rot
            rot = float(rot.value)
        keys = list(p)
        grads = dict(zip(keys, tape.grad(loss, [p[k] for k in keys])))
        return float(loss.value), grads, rot


def train_ae(ds, cfg, out_dir, epochs=None, progress=None):
    """Train the AE on ``ds`` (train split); writes ``ae.ckpt`` and ``ae_metrics.csv`` to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train = ds.subset("train")
    if len(train) < 2:
        raise ValidationError("need at least 2 training shapes")
    seed = cfg.seed
    mc = cfg.model
    template = train.clouds[0][make_rng(seed, 3).choice(train.clouds.shape[1], size=mc.n_out, replace=mc.n_out > train.clouds.shape[1])]
    params = init_ae(mc, seed, template=template)
    opt = Adam(params, lr=cfg.ae.lr, decay=cfg.ae.weight_decay)
    rows = []
    ckpt = out / "ae.ckpt"
    header = lambda ep: {"stage": "ae", "config": cfg.to_dict(), "seed": seed, "epoch": ep}  # noqa: E731
    n_epochs = cfg.ae.epochs if epochs is None else epochs
    columns = AE_COLUMNS + (["rot"] if cfg.penalty.rot_consistency else [])
    for ep in range(1, n_epochs + 1):
        rng = make_rng(seed, 100, ep)
        losses, rots = [], []
        for idx in _batches(len(train), cfg.ae.batch_size, rng):
            loss, grads, rot = ae_step(params, train.clouds[idx], rng, cfg)
            if not math.isfinite(loss):
                save_checkpoint(ckpt, params, header(ep - 1))
                raise NumericalError(f"AE loss diverged at epoch {ep}; last good checkpoint saved")
            grads, _ = clip_by_norm(grads, cfg.vae.clip)
            opt.step(params, grads)
            losses.append(loss)
            rots.append(rot)
        rows.append((ep, float(np.mean(losses))) + ((float(np.mean(rots)),) if len(columns) > 2 else ()))
        log.info("ae epoch %d  L_R %.5f", ep, rows[-1][1])
        if progress:
            progress(ep, rows[-1])
    save_checkpoint(ckpt, params, header(n_epochs))
    _write_metrics(out / "ae_metrics.csv", columns, rows)
    return params, rows


def ae_codes(params, clouds, n_input, seed):
    """Deterministic AE codes ``(R, X)`` from a fixed subsample of each cloud.

    Every cloud uses the same point indices, so a cloud's code does not depend
    on where it sits in ``clouds``.
    """
    idx = make_rng(seed, 4).choice(clouds.shape[1], size=min(n_input, clouds.shape[1]), replace=False)
    sub = clouds[:, idx]
    R, X = [], []
    for s in range(0, len(sub), 64):
        r, x = ae_encode(params, sub[s:s + 64])
        R.append(r.value)
        X.append(x.value)
    return np.concatenate(R), np.concatenate(X)


# ---------------------------------------------------------------------------- VAE

def penalty_weights(cfg):
    return PenaltyWeights(**vars(cfg.penalty))


def vae_objective(p, R, X, spectra, n_data, cfg, noise_seed, need_jac_grad=True):
    """All VAE loss terms for one batch. ``p`` maps names to tape tensors (or arrays)."""
    mc = cfg.model
    w = penalty_weights(cfg)
    g = mc.groups()
    post_r, post_ei = vae_encode(p, R, X, mc.sigma_eps)
    post = joint_posterior(post_r, post_ei)
    z = reparameterize(post, noise_seed)
    R_hat = decode_r(p, z[:, g["R"]])
    X_hat = decode_x(p, z[:, g["E"].start:g["I"].stop])
    recon = vae_recon_loss(R, X, R_hat, X_hat, w.w_q)
    terms = hfvae_terms(post.mu, post.sigma, z, [g["R"], g["E"], g["I"]], n_data)
    cov = covariance_penalty(post.mu, [g["R"], g["E"], g["I"]])
    X_t = X if hasattr(X, "tape") and X.tape is not None else None
    if X_t is None:
        tape = next((t.tape for t in p.values() if getattr(t, "tape", None) is not None), None)
        X_t = tape.var(X) if tape is not None else X
    j_ie, j_ei = cross_jacobian_norms(lambda x: encode_x(p, x, mc.sigma_eps).mu,
                                      lambda m: decode_x(p, m), X_t, mc.z_e,
                                      create_graph=need_jac_grad)
    jac = jacobian_penalty(j_ie, j_ei)
    spec = spectral_loss(spectra, predict_spectrum(p, z[:, g["I"]]))
    total = total_vae_loss(recon, terms, cov, jac, spec, replace(w, rot_consistency=0.0))
    return total, {"L_V": recon, **dict(zip(("P_intra", "P_KL", "MI", "TC"),
                                            (terms.intra_tc, terms.dim_kl, terms.mutual_info, terms.inter_tc))),
                   "COV": cov, "J_IE": j_ie, "J_EI": j_ei, "L_S": spec, "total": total}


def _value(t):
    return float(t.value) if hasattr(t, "value") else float(t)


def train_vae(ds, ae_params, cfg, out_dir, epochs=None, progress=None):
    """Train the VAE on frozen AE codes of the train split; writes ``vae.ckpt`` and ``vae_metrics.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train = ds.subset("train")
    seed = cfg.seed
    mc = cfg.model
    if train.spectra.shape[1] != mc.n_lambda:
        raise ValidationError(f"dataset spectra have length {train.spectra.shape[1]}, model expects {mc.n_lambda}")
    R_all, X_all = ae_codes(ae_params, train.clouds, cfg.ae.n_input, seed)
    R_all = quat.normalize(R_all)
    params = init_vae(mc, seed, spectra=train.spectra)
    opt = Adam(params, lr=cfg.vae.lr, decay=cfg.vae.weight_decay)
    w = penalty_weights(cfg)
    n_data = len(train)
    rows = []
    ckpt = out / "vae.ckpt"
    header = lambda ep: {"stage": "vae", "config": cfg.to_dict(), "seed": seed, "epoch": ep}  # noqa: E731
    n_epochs = cfg.vae.epochs if epochs is None else epochs
    for ep in range(1, n_epochs + 1):
        rng = make_rng(seed, 200, ep)
        acc = {c: [] for c in VAE_COLUMNS[1:]}
        for b, idx in enumerate(_batches(n_data, min(cfg.vae.batch_size, n_data), rng)):
            with Tape() as tape:
                p = {k: tape.var(v) for k, v in params.items()}
                total, parts = vae_objective(p, R_all[idx], tape.var(X_all[idx]), train.spectra[idx], n_data, cfg,
                                             make_rng(seed, 300, ep, b), need_jac_grad=w.w_j > 0)
                val = _value(total)
                if not math.isfinite(val):
                    save_checkpoint(ckpt, params, header(ep - 1))
                    raise NumericalError(f"VAE loss diverged at epoch {ep}; last good checkpoint saved")
                keys = [k for k in p if k not in BUFFERS]
                grads = dict(zip(keys, tape.grad(total, [p[k] for k in keys])))
                for c in acc:
                    acc[c].append(_value(parts[c]))
            grads, _ = clip_by_norm(grads, cfg.vae.clip)
            opt.step(params, grads)
        rows.append((ep,) + tuple(float(np.mean(acc[c])) for c in VAE_COLUMNS[1:]))
        log.info("vae epoch %d  " + "  ".join(f"{c} %.4f" for c in VAE_COLUMNS[1:]), ep, *rows[-1][1:])
        if progress:
            progress(ep, rows[-1])
    save_checkpoint(ckpt, params, header(n_epochs))
    _write_metrics(out / "vae_metrics.csv", VAE_COLUMNS, rows)
    return params, rows


def load_params(path, stage):
    params, head = load_checkpoint(path)
    if head.get("stage") != stage:
        raise ValidationError(f"{path} is a {head.get('stage')!r} checkpoint, expected {stage!r}")
    return params, head
