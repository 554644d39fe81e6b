"""Finite-difference gradient suite over every tape op and every composite loss.

Each case draws a random configuration, rejects it if any non-smooth op sits
within ``MARGIN`` of a kink or tie, and compares reverse-mode gradients with
central differences. Small cases are checked entry by entry; network-level
losses are checked along random directions over all parameters.
"""
import time
from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, directional_check, gradient_check, ops
from .config import Config, ModelConfig
from .disentangle import covariance_penalty, cross_jacobian_norms, jacobian_penalty
from .errors import NumericalError
from .losses import LossWeights, quat_loss, reconstruction_loss
from .models import BUFFERS, decode_x, encode_x, init_vae, vae_recon_loss
from .rng import make_rng
from .spectral import spectral_loss

MARGIN = 1e-4
TOL = 1e-5
MAX_TRIES = 500


def _ops_cases():
    def pos(rng, *shape):
        return rng.uniform(0.5, 2.0, shape)

    def gen(rng, *shape):
        return rng.standard_normal(shape)

    idx = np.array([[2, 0], [1, 1], [0, 2]])
    return {
        "add": (lambda a, b: a + b, lambda r: [gen(r, 3, 4), gen(r, 4)]),
        "sub": (lambda a, b: a - b, lambda r: [gen(r, 3, 1), gen(r, 3, 4)]),
        "mul": (lambda a, b: a * b, lambda r: [gen(r, 2, 3), gen(r, 2, 3)]),
        "div": (lambda a, b: a / b, lambda r: [gen(r, 2, 3), pos(r, 3)]),
        "neg": (lambda a: -a, lambda r: [gen(r, 5)]),
        "square": (ops.square, lambda r: [gen(r, 5)]),
        "sqrt": (ops.sqrt, lambda r: [pos(r, 5)]),
        "abs": (ops.abs, lambda r: [gen(r, 6)]),
        "exp": (ops.exp, lambda r: [gen(r, 5)]),
        "log": (ops.log, lambda r: [pos(r, 5)]),
        "relu": (ops.relu, lambda r: [gen(r, 6)]),
        "sigmoid": (ops.sigmoid, lambda r: [3 * gen(r, 6)]),
        "softplus": (ops.softplus, lambda r: [3 * gen(r, 6)]),
        "transpose": (ops.transpose, lambda r: [gen(r, 2, 3, 4)]),
        "matmul": (ops.matmul, lambda r: [gen(r, 2, 3, 4), gen(r, 4, 2)]),
        "linear": (ops.linear, lambda r: [gen(r, 3, 4), gen(r, 4, 5), gen(r, 5)]),
        "reshape": (lambda a: ops.reshape(a, (6, 2)) * np.arange(12.0).reshape(6, 2), lambda r: [gen(r, 3, 4)]),
        "getitem": (lambda a: a[1:, ::2] * 2.0, lambda r: [gen(r, 3, 4)]),
        "scatter_add": (lambda a: ops.scatter_add(a, np.array([0, 2, 0]), (4,)) * np.arange(1.0, 5.0),
                        lambda r: [gen(r, 3)]),
        "concat": (lambda a, b: ops.concat([a, b], axis=0) * np.arange(10.0).reshape(5, 2), lambda r: [gen(r, 2, 2), gen(r, 3, 2)]),
        "take_along_axis": (lambda a: ops.take_along_axis(a, idx, axis=0) * np.array([1.0, -2.0]),
                            lambda r: [gen(r, 3, 2)]),
        "broadcast_to": (lambda a: ops.broadcast_to(a, (4, 3)) * np.arange(12.0).reshape(4, 3), lambda r: [gen(r, 3)]),
        "sum_to": (lambda a: ops.sum_to(a, (1, 3)) * np.arange(3.0), lambda r: [gen(r, 4, 3)]),
        "sum": (lambda a: ops.sum(a, axis=0) * np.arange(4.0), lambda r: [gen(r, 3, 4)]),
        "mean": (lambda a: ops.mean(a, axis=1) * np.arange(3.0), lambda r: [gen(r, 3, 4)]),
        "max": (lambda a: ops.max(a, axis=1), lambda r: [gen(r, 3, 4)]),
        "min": (lambda a: ops.min(a, axis=0), lambda r: [gen(r, 3, 4)]),
        "logsumexp": (lambda a: ops.logsumexp(a, axis=-1), lambda r: [gen(r, 3, 4)]),
        "layer_norm": (lambda a: ops.layer_norm(a) * np.arange(5.0), lambda r: [gen(r, 2, 5)]),
    }


def _tiny_model():
    return ModelConfig(n_lambda=4, dim_x=4, n_out=8, z_r=2, z_e=2, z_i=2, vae_r_hidden=(5,), vae_x_hidden=(6,),
                       head_hidden=5, rot_dec_hidden=(5,), x_dec_hidden=(6,), spec_hidden=(5,))


def _loss_cases():
    w = LossWeights()
    mc = _tiny_model()

    def cloud(r):
        return r.standard_normal((2, 7, 3)), r.standard_normal((2, 6, 3))

    def l_r(rng):
        P, P_hat = cloud(rng)
        return (lambda ph: reconstruction_loss(P, ph, w)), [P_hat]

    def l_q(rng):
        q = rng.standard_normal((4, 4))
        return (lambda qh: quat_loss(q, qh)), [rng.standard_normal((4, 4))]

    def l_s(rng):
        target = np.sort(rng.uniform(0, 10, (3, 6)), axis=1)
        return (lambda pred: spectral_loss(target, pred)), [target + rng.standard_normal((3, 6))]

    def l_v(rng):
        R, X = rng.standard_normal((4, 4)), rng.standard_normal((4, 5))
        return (lambda rh, xh: vae_recon_loss(R, X, rh, xh, 10.0)), [rng.standard_normal((4, 4)), rng.standard_normal((4, 5))]

    def l_cov(rng):
        groups = [slice(0, 2), slice(2, 4), slice(4, 6)]
        return (lambda mu: covariance_penalty(mu, groups)), [rng.standard_normal((6, 6))]

    def net(rng):
        p = init_vae(mc, int(rng.integers(1 << 30)))
        return {k: v for k, v in p.items() if k.startswith(("encX.shared", "encX.mu", "decX"))}

    def l_j(rng):
        params = net(rng)
        keys = sorted(params)
        X = rng.standard_normal((3, mc.dim_x))

        def fn(*vals):
            p = dict(zip(keys, vals))
            Xt = vals[0].tape.var(X)
            j_ie, j_ei = cross_jacobian_norms(lambda x: encode_x(p, x).mu, lambda m: decode_x(p, m), Xt, mc.z_e)
            return jacobian_penalty(j_ie, j_ei)
        return fn, [params[k] for k in keys]

    def total(rng):
        from .train import vae_objective
        cfg = Config(model=mc)
        spectra = np.sort(rng.uniform(1, 10, (5, mc.n_lambda)), axis=1)
        params = init_vae(mc, int(rng.integers(1 << 30)), spectra=spectra)
        keys = sorted(k for k in params if k not in BUFFERS)
        R, X = rng.standard_normal((5, 4)), rng.standard_normal((5, mc.dim_x))
        noise = int(rng.integers(1 << 30))

        def fn(*vals):
            p = {**{k: params[k] for k in BUFFERS}, **dict(zip(keys, vals))}
            return vae_objective(p, R, vals[0].tape.var(X), spectra, 50, cfg, noise)[0]
        return fn, [params[k] for k in keys]

    return {"L_R": (l_r, "entry"), "L_Q": (l_q, "entry"), "L_S": (l_s, "entry"), "L_V": (l_v, "entry"),
            "L_COV": (l_cov, "entry"), "L_J": (l_j, "direction"), "total": (total, "direction")}


@dataclass
class CaseResult:
    name: str
    configs: int
    rejected: int
    max_rel_err: float
    seconds: float

    @property
    def ok(self):
        return self.configs > 0 and self.max_rel_err <= TOL


def case_names():
    return list(_ops_cases()) + list(_loss_cases())


def _margin(fn, inputs):
    tape = Tape(track_kinks=True)
    with tape:
        fn(*[tape.var(x) for x in inputs])
        return tape.kink_margin


def run_case(name, n_configs=20, seed=0):
    op_cases, loss_cases = _ops_cases(), _loss_cases()
    if name in op_cases:
        fn, make = op_cases[name]
        build, mode = (lambda r: (fn, make(r))), "entry"
    elif name in loss_cases:
        build, mode = loss_cases[name]
    else:
        raise KeyError(name)
    rng = make_rng(seed, 11, sum(map(ord, name)))
    t0 = time.perf_counter()
    worst, done, rejected = 0.0, 0, 0
    while done < n_configs:
        f, inputs = build(rng)
        if _margin(f, inputs) <= MARGIN:
            rejected += 1
            if rejected > MAX_TRIES:
                raise NumericalError(f"{name}: could not draw a tie-free configuration")
            continue
        if mode == "entry":
            err, _ = gradient_check(f, inputs, tol=TOL)
        else:
            err, _ = directional_check(f, inputs, n_dirs=4, seed=int(rng.integers(1 << 30)))
        worst = max(worst, err)
        done += 1
    return CaseResult(name, done, rejected, worst, time.perf_counter() - t0)


def run_suite(names=None, n_configs=20, seed=0):
    return [run_case(n, n_configs, seed) for n in (names or case_names())]
