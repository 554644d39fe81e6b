import math

import numpy as np
import pytest

from specvae.autodiff import Tape, as_tensor, gradient_check, ops
from specvae.config import ModelConfig
from specvae.errors import ValidationError
from specvae.geom import quat, rotate_cloud
from specvae.losses import reconstruction_loss
from specvae.models import (
    Posterior,
    ae_decode,
    ae_encode,
    init_ae,
    init_vae,
    load_checkpoint,
    predict_spectrum,
    reparameterize,
    save_checkpoint,
    vae_decode,
    vae_encode,
    vae_recon_loss,
)
from specvae.spectral import spectral_loss

SMALL = ModelConfig(n_lambda=6, dim_x=6, n_out=12, z_r=2, z_e=2, z_i=3, enc_point=(8, 10), enc_fc=(10,),
                    dec_fc=(10,), vae_r_hidden=(6,), vae_x_hidden=(8,), head_hidden=6, rot_dec_hidden=(6,),
                    x_dec_hidden=(8,), spec_hidden=(6,))


def _keyed(params, prefix):
    keys = sorted(k for k in params if k.startswith(prefix))
    return keys, [params[k] for k in keys]


def test_encoder_permutation_and_duplicates(rng):
    p = init_ae(ModelConfig(), 0)
    pts = rng.standard_normal((1, 100, 3))
    r1, x1 = ae_encode(p, pts)
    r2, x2 = ae_encode(p, pts[:, rng.permutation(100)])
    np.testing.assert_array_equal(x1.value, x2.value)
    np.testing.assert_array_equal(r1.value, r2.value)
    dup = np.concatenate([pts, pts[:, :7]], axis=1)
    np.testing.assert_array_equal(ae_encode(p, dup)[1].value, x1.value)


def test_code_norm_gradient(rng):
    p = init_ae(SMALL, 1)
    keys, vals = _keyed(p, "enc")
    pts = rng.standard_normal((2, 9, 3))

    def f(*v):
        R, X = ae_encode({**p, **dict(zip(keys, v))}, pts)
        return ops.sum(ops.square(X)) + ops.sum(ops.square(R))
    err, ok = gradient_check(f, vals, tol=1e-5)
    assert ok, err


def test_decoder_rotation_factorization(rng):
    p = init_ae(ModelConfig(), 2)
    X = rng.standard_normal((3, 64))
    R = quat.normalize(rng.standard_normal((3, 4)))
    q = quat.normalize(rng.standard_normal(4))
    base = ae_decode(p, R, X).value
    turned = ae_decode(p, quat.multiply(R, q), X).value
    for b in range(3):
        np.testing.assert_allclose(turned[b], rotate_cloud(base[b], q), atol=1e-9)
    y_pi = quat.about_axis(math.pi, "y")
    np.testing.assert_allclose(ae_decode(p, y_pi[None], X[:1]).value[0],
                               rotate_cloud(ae_decode(p, [[1.0, 0, 0, 0]], X[:1]).value[0], y_pi), atol=1e-9)


def test_zero_final_layer_gives_bias_positions(rng):
    p = init_ae(SMALL, 3, template=rng.standard_normal((SMALL.n_out, 3)))
    p["dec.1.w"][:] = 0.0
    out = ae_decode(p, [[1.0, 0, 0, 0]] * 2, rng.standard_normal((2, SMALL.dim_x))).value
    np.testing.assert_allclose(out[0], p["dec.1.b"].reshape(-1, 3), atol=1e-15)
    np.testing.assert_allclose(out[1], out[0])


def test_reconstruction_roundtrip_gradient(rng):
    p = init_ae(SMALL, 4)
    keys = sorted(p)
    P = rng.standard_normal((2, 9, 3))

    def f(*v):
        q = dict(zip(keys, v))
        R, X = ae_encode(q, P)
        return reconstruction_loss(P, ae_decode(q, R, X))
    # re-draw until the max-pool and nearest-neighbour selections are tie-free
    from specvae.gradsuite import MARGIN, _margin
    for seed in range(20):
        p = init_ae(SMALL, seed)
        vals = [p[k] for k in keys]
        if _margin(f, vals) > MARGIN:
            break
    err, ok = gradient_check(f, vals, tol=1e-5)
    assert ok, err


def test_sigma_init_and_determinism(rng):
    p = init_vae(ModelConfig(), 0)
    R, X = rng.standard_normal((4, 4)), rng.standard_normal((4, 64))
    pr, pe = vae_encode(p, R, X)
    sp0 = math.log(2.0) + 1e-6
    np.testing.assert_allclose(pe.sigma.value, sp0, rtol=1e-12)
    np.testing.assert_allclose(pr.sigma.value, sp0, rtol=1e-12)
    pr2, pe2 = vae_encode(p, R, X)
    np.testing.assert_array_equal(pe.mu.value, pe2.mu.value)


def test_kl_gradient(rng):
    p = init_vae(SMALL, 1)
    for k in p:
        if k.startswith("encX.sigma"):
            p[k] = p[k] + 0.1 * rng.standard_normal(p[k].shape)
    keys, vals = _keyed(p, "encX")
    R, X = rng.standard_normal((3, 4)), rng.standard_normal((3, SMALL.dim_x))

    def kl(*v):
        _, post = vae_encode({**p, **dict(zip(keys, v))}, R, X)
        s2 = ops.square(post.sigma)
        return 0.5 * ops.sum(s2 + ops.square(post.mu) - 1.0 - ops.log(s2))
    err, ok = gradient_check(kl, vals, tol=1e-5)
    assert ok, err


def test_reparameterize(rng):
    mu = rng.standard_normal((1, 3))
    z0 = reparameterize(Posterior(as_tensor(mu), as_tensor(np.zeros((1, 3)))), 0)
    np.testing.assert_array_equal(z0.value, mu)
    sig = np.array([[0.5, 1.0, 2.0]])
    big = Posterior(as_tensor(np.repeat(mu, 100000, 0)), as_tensor(np.repeat(sig, 100000, 0)))
    z = reparameterize(big, 5).value
    assert (np.abs(z.mean(0) - mu[0]) < 3 * sig[0] / math.sqrt(1e5)).all()
    np.testing.assert_array_equal(z, reparameterize(big, 5).value)


def test_structural_zeros(rng):
    cfg = ModelConfig()
    p = init_vae(cfg, 7, spectra=rng.uniform(1, 100, (10, cfg.n_lambda)))
    g = cfg.groups()
    t = Tape()
    z = t.var(rng.standard_normal((5, cfg.z_dim)))
    R_hat, X_hat = vae_decode(p, z, cfg)
    lam = predict_spectrum(p, z[:, g["I"]])
    gx = t.grad(ops.sum(X_hat * rng.standard_normal(X_hat.shape)), z)
    gr = t.grad(ops.sum(R_hat * rng.standard_normal(R_hat.shape)), z)
    gl = t.grad(ops.sum(lam * rng.standard_normal(lam.shape)), z)
    assert np.all(gx[:, g["R"]] == 0.0) and np.any(gx[:, g["E"]] != 0)
    assert np.all(gr[:, g["E"]] == 0.0) and np.all(gr[:, g["I"]] == 0.0)
    assert np.all(gl[:, g["R"]] == 0.0) and np.all(gl[:, g["E"]] == 0.0)
    assert lam.shape == (5, cfg.n_lambda)


def test_spectrum_head_gradient(rng):
    target = np.sort(rng.uniform(1, 20, (4, SMALL.n_lambda)), axis=1)
    p = init_vae(SMALL, 2, spectra=target)
    keys, vals = _keyed(p, "spec.")
    keys_vals = [(k, v) for k, v in zip(keys, vals) if k not in ("spec.shift", "spec.scale")]
    keys, vals = [k for k, _ in keys_vals], [v for _, v in keys_vals]
    zi = rng.standard_normal((4, SMALL.z_i))

    def f(*v):
        return spectral_loss(target, predict_spectrum({**p, **dict(zip(keys, v))}, zi))
    err, ok = gradient_check(f, vals, tol=1e-5)
    assert ok, err


def test_vae_recon_loss_examples(rng):
    R, X = quat.normalize(rng.standard_normal((3, 4))), rng.standard_normal((3, 64))
    assert vae_recon_loss(R, X, R, X) == pytest.approx(0.0, abs=1e-15)
    assert vae_recon_loss(R, X, -R, X) == pytest.approx(0.0, abs=1e-15)
    assert vae_recon_loss(R, X, R, X + 1.0) == pytest.approx(1.0)


def test_checkpoint_roundtrip(tmp_path):
    p = init_vae(SMALL, 0)
    save_checkpoint(tmp_path / "a.ckpt", p, {"seed": 3, "epoch": 2})
    q, head = load_checkpoint(tmp_path / "a.ckpt")
    assert head["seed"] == 3 and list(q) == list(p)
    for k in p:
        np.testing.assert_array_equal(q[k], p[k])
    (tmp_path / "b.ckpt").write_bytes(b"junk" * 10)
    with pytest.raises(ValidationError):
        load_checkpoint(tmp_path / "b.ckpt")
    raw = (tmp_path / "a.ckpt").read_bytes()
    (tmp_path / "c.ckpt").write_bytes(raw[:-8])
    with pytest.raises(ValidationError, match="truncated"):
        load_checkpoint(tmp_path / "c.ckpt")


def test_latent_width_checked():
    with pytest.raises(ValidationError):
        vae_decode(init_vae(SMALL, 0), np.zeros((1, 3)), SMALL)
