"""Hierarchical disentanglement penalties and loss assembly.

Prior-matching decomposition
----------------------------
For a batch of ``M`` data with Gaussian posteriors ``q(z|x_j)`` and one
sample ``z_i ~ q(z|x_i)`` each, the aggregate posterior density at ``z_i`` is
estimated with stratified importance weights::

    log q(z_i) ~= logsumexp_j [ log q(z_i | x_j) + log w_ij ]
    w_ii = 1/N,   w_ij = (N - 1) / (N (M - 1))   (j != i)

with ``N`` the dataset size. The datum itself contributes its own ``1/N`` share
and the other ``M - 1`` batch members stand in for the remaining ``N - 1``.
Marginals over a group (or a single dimension) use the same weights on the
summed per-dimension log densities of that subset. The four terms are
batch means of::

    MI       log q(z|x) - log q(z)
    TC       log q(z) - sum_g log q(z_g)                (inter-group)
    P_intra  sum_g [ log q(z_g) - sum_{d in g} log q(z_d) ]
    P_KL     sum_d [ log q(z_d) - log p(z_d) ]

and they add up to the usual ``E[log q(z|x) - log p(z)]`` with ``p = N(0, I)``.

The plain minibatch-weighted normalizer ``log(M N)`` is not used. It
assigns the other batch members weight ``1/(MN)`` instead of about ``1/M``,
which biases every marginal by about ``log N``. For example, when every
posterior equals the prior it reports ``MI = log N`` where the exact value is 0.

Training logs
-------------
``vae_metrics.csv`` has one row per epoch (training-set means)::

    epoch, L_V, P_intra, P_KL, MI, TC, COV, J_IE, J_EI, L_S, total

``L_V`` is the weighted reconstruction of ``R`` and ``X``, ``COV`` the summed
absolute cross-group covariance of the posterior means, ``J_IE``/``J_EI``
the two cross-Jacobian norms (``L_J`` is their max) and ``L_S`` the spectral
loss. ``ae_metrics.csv`` has ``epoch, L_R`` plus ``rot`` when rotational
consistency is enabled.
"""
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, ops
from .errors import ValidationError

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class HFTerms:
    intra_tc: object
    dim_kl: object
    mutual_info: object
    inter_tc: object

    def values(self):
        f = lambda t: float(t.value) if isinstance(t, Tensor) else float(t)  # noqa: E731
        return {"P_intra": f(self.intra_tc), "P_KL": f(self.dim_kl),
                "MI": f(self.mutual_info), "TC": f(self.inter_tc)}


@dataclass(frozen=True)
class PenaltyWeights:
    beta1: float = 1.0
    beta2: float = 1.0
    beta3: float = 1.0
    beta4: float = 50.0
    gamma_i: float = 1.0
    w_j: float = 1.0
    zeta: float = 1.0
    eta: float = 1.0
    w_q: float = 10.0
    rot_consistency: float = 0.0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if v < 0:
                raise ValidationError(f"penalty weight {k} must be >= 0, got {v}")


def _t(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def log_importance_weights(m, n_data):
    if m < 2:
        raise ValidationError(f"batch size must be >= 2, got {m}")
    if n_data < m:
        raise ValidationError(f"dataset size {n_data} smaller than batch size {m}")
    w = np.full((m, m), np.log(n_data - 1) - np.log(n_data) - np.log(m - 1))
    np.fill_diagonal(w, -np.log(n_data))
    return w


def hfvae_terms(mu, sigma, z, groups, n_data):
    """Estimate ``HFTerms`` from posteriors ``(mu, sigma)`` and samples ``z`` (all ``(M, D)``).

    ``groups`` is a sequence of slices or index lists partitioning the ``D``
    columns. Accepts arrays or tape tensors.
    """
    mu, sigma, z = _t(mu), _t(sigma), _t(z)
    m, d = z.shape
    logw = log_importance_weights(m, n_data)
    cols = [np.arange(d)[g] for g in groups]
    if sorted(np.concatenate(cols).tolist()) != list(range(d)):
        raise ValidationError("groups must partition the latent dimensions")
    # contiguous groups index as slices (cheaper adjoints than integer arrays)
    cols = [slice(int(c[0]), int(c[-1]) + 1) if np.all(np.diff(c) == 1) else c for c in cols]

    zi = ops.reshape(z, (m, 1, d))
    std = (zi - ops.reshape(mu, (1, m, d))) / ops.reshape(sigma, (1, m, d))
    # log q(z_i,d | x_j, d) for every pair (i, j)
    lq = -0.5 * LOG_2PI - ops.log(ops.reshape(sigma, (1, m, d))) - 0.5 * ops.square(std)

    def agg(logdens):
        return ops.logsumexp(logdens + logw, axis=1)

    own = ops.sum(-0.5 * LOG_2PI - ops.log(sigma) - 0.5 * ops.square((z - mu) / sigma), axis=1)
    log_qz = agg(ops.sum(lq, axis=2))
    log_qdim = ops.logsumexp(lq + logw[:, :, None], axis=1)           # (M, D)
    log_pdim = -0.5 * LOG_2PI - 0.5 * ops.square(z)

    log_qg, intra = [], 0.0
    for c in cols:
        lg = agg(ops.sum(lq[:, :, c], axis=2))
        log_qg.append(lg)
        intra = intra + ops.mean(lg - ops.sum(log_qdim[:, c], axis=1))
    sum_qg = log_qg[0]
    for lg in log_qg[1:]:
        sum_qg = sum_qg + lg
    return HFTerms(
        intra_tc=intra,
        dim_kl=ops.mean(ops.sum(log_qdim - log_pdim, axis=1)),
        mutual_info=ops.mean(own - log_qz),
        inter_tc=ops.mean(log_qz - sum_qg),
    )


def covariance_penalty(mu, groups):
    """Sum of ``|C_ij|`` over cross-group blocks of the unbiased batch covariance of ``mu``.

    Ordered pairs, so each unordered pair of groups counts twice.
    """
    mu = _t(mu)
    m, d = mu.shape
    if m < 2:
        raise ValidationError(f"covariance needs a batch of >= 2, got {m}")
    owner = np.full(d, -1)
    for k, g in enumerate(groups):
        owner[np.arange(d)[g]] = k
    mask = ((owner[:, None] != owner[None, :]) & (owner[:, None] >= 0) & (owner[None, :] >= 0)).astype(np.float64)
    centered = mu - ops.mean(mu, axis=0, keepdims=True)
    cov = ops.matmul(ops.transpose(centered), centered) / float(m - 1)
    return ops.sum(ops.abs(cov) * mask)


def cross_jacobian_norms(encode_mu, decode, X, e_size, create_graph=True):
    """Batch-mean squared Frobenius norms of the re-encoding Jacobians.

    ``encode_mu(X) -> (B, |E| + |I|)`` posterior means and ``decode(mu) -> X``.
    Returns ``(J_IE, J_EI)`` where ``J_IE`` is ``|d mu_hat_I / d mu_E|_F^2`` and
    ``J_EI`` is ``|d mu_hat_E / d mu_I|_F^2``, each averaged over the batch.

    The Jacobians are taken with reverse sweeps on ``X``'s tape (one per
    output coordinate, all batch rows at once since rows are independent).
    With ``create_graph`` the result stays differentiable.
    """
    X = _t(X)
    tape = X.tape
    if tape is None:
        from .autodiff import Tape
        tape = Tape()
        X = tape.var(X.value)
    mu = encode_mu(X)
    b = mu.shape[0]
    mu_e, mu_i = mu[:, :e_size], mu[:, e_size:]
    mu_hat = encode_mu(decode(ops.concat([mu_e, mu_i], axis=-1)))
    hat_e, hat_i = mu_hat[:, :e_size], mu_hat[:, e_size:]

    def sq_norm(out, wrt):
        total = 0.0
        for k in range(out.shape[1]):
            seed = np.zeros(out.shape)
            seed[:, k] = 1.0
            g = tape.grad(out, wrt, seed, create_graph=create_graph)
            g = g if isinstance(g, Tensor) else Tensor(g)
            total = total + ops.sum(ops.square(g))
        return total / float(b)

    return sq_norm(hat_i, mu_e), sq_norm(hat_e, mu_i)


def jacobian_penalty(j_ie, j_ei):
    """``max(J_IE, J_EI)``; an exact tie routes to ``J_IE``, the (I, E) pair."""
    pair = ops.concat([ops.reshape(_t(j_ie), (1,)), ops.reshape(_t(j_ei), (1,))], axis=0)
    return ops.max(pair, axis=0)


def rotational_consistency(x1, x2):
    """Batch mean of ``|X - X_r|^2``."""
    x1, x2 = _t(x1), _t(x2)
    if x1.shape != x2.shape:
        raise ValidationError(f"code shapes differ: {x1.shape} vs {x2.shape}")
    return ops.mean(ops.sum(ops.square(x1 - x2), axis=-1))


def hf_loss(terms, w):
    return (w.beta1 * terms.intra_tc + w.beta2 * terms.dim_kl
            + w.beta3 * terms.mutual_info + w.beta4 * terms.inter_tc)


def total_vae_loss(recon, terms, cov, jac, spec, w, rot=0.0):
    """``eta L_V + L_HF + gamma_I L_COV + w_J L_J + zeta L_S`` (+ optional rotational consistency)."""
    out = w.eta * recon + hf_loss(terms, w) + w.gamma_i * cov + w.w_j * jac + w.zeta * spec
    if w.rot_consistency:
        out = out + w.rot_consistency * rot
    return out
