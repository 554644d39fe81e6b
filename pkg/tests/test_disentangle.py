import math

import numpy as np
import pytest

from specvae.autodiff import ops
from specvae.disentangle import (
    HFTerms,
    PenaltyWeights,
    covariance_penalty,
    cross_jacobian_norms,
    hfvae_terms,
    jacobian_penalty,
    log_importance_weights,
    rotational_consistency,
    total_vae_loss,
)
from specvae.errors import ValidationError
from specvae.rng import make_rng

PAIR = [slice(0, 1), slice(1, 2)]


def correlated_batch(rho, m, *seed):
    # mu carries the shared part, sigma the rest: aggregate is N(0, [[1, rho], [rho, 1]])
    r = make_rng(*seed)
    u = r.standard_normal((m, 1))
    mu = math.sqrt(rho) * np.hstack([u, u])
    s = np.full((m, 2), math.sqrt(1 - rho))
    return mu, s, mu + s * r.standard_normal((m, 2))


def mean_terms(batches):
    vals = [hfvae_terms(*b).values() for b in batches]
    return {k: np.mean([v[k] for v in vals]) for k in vals[0]}


def test_importance_weights_normalized():
    w = np.exp(log_importance_weights(8, 100))
    np.testing.assert_allclose(w.sum(axis=1), 1.0, rtol=1e-14)
    with pytest.raises(ValidationError):
        log_importance_weights(1, 100)


@pytest.mark.parametrize("rho", [0.5, 0.8])
def test_gaussian_tc(rho):
    batches = [correlated_batch(rho, 512, 0, b) + (PAIR, 10 ** 6) for b in range(10)]
    tc = mean_terms(batches)["TC"]
    assert tc == pytest.approx(-0.5 * math.log(1 - rho * rho), rel=0.1)


def test_factorized_prior_terms_vanish():
    m = 512
    batches = []
    for b in range(20):
        z = make_rng(1, b).standard_normal((m, 4))
        batches.append((np.zeros((m, 4)), np.ones((m, 4)), z, [slice(0, 2), slice(2, 4)], 10 ** 5))
    for k, v in mean_terms(batches).items():
        assert abs(v) < 0.05, (k, v)


def test_dim_kl_nonnegative_on_average():
    m = 128
    batches = []
    for b in range(10):
        r = make_rng(2, b)
        mu = 0.7 * r.standard_normal((m, 3)) + 0.4
        s = np.full((m, 3), 0.5)
        batches.append((mu, s, mu + s * r.standard_normal((m, 3)), [slice(0, 1), slice(1, 3)], 1000))
    assert mean_terms(batches)["P_KL"] >= -1e-6


def test_intra_correlated_inter_independent():
    m, rho = 512, 0.8
    batches = []
    for b in range(10):
        mu1, s1, z1 = correlated_batch(rho, m, 3, b, 0)
        mu2, s2, z2 = correlated_batch(rho, m, 3, b, 1)
        batches.append((np.hstack([mu1, mu2]), np.hstack([s1, s2]), np.hstack([z1, z2]),
                        [slice(0, 2), slice(2, 4)], 10 ** 6))
    t = mean_terms(batches)
    assert abs(t["TC"]) < 0.03
    assert t["P_intra"] == pytest.approx(2 * -0.5 * math.log(1 - rho * rho), rel=0.1)


def test_hf_terms_sum_to_kl(rng):
    # the four terms telescope to E[log q(z|x) - log p(z)]
    m, d = 32, 5
    mu, s = rng.standard_normal((m, d)), rng.uniform(0.3, 1.5, (m, d))
    z = mu + s * rng.standard_normal((m, d))
    t = hfvae_terms(mu, s, z, [slice(0, 2), [2, 4], [3]], 500).values()
    log_q = np.sum(-0.5 * np.log(2 * np.pi) - np.log(s) - 0.5 * ((z - mu) / s) ** 2, axis=1)
    log_p = np.sum(-0.5 * np.log(2 * np.pi) - 0.5 * z ** 2, axis=1)
    assert sum(t.values()) == pytest.approx(np.mean(log_q - log_p), abs=1e-10)


def test_groups_must_partition(rng):
    z = rng.standard_normal((4, 3))
    with pytest.raises(ValidationError):
        hfvae_terms(z, np.ones_like(z), z, [slice(0, 1), slice(1, 2)], 10)


def test_covariance_independent_blocks():
    mu = make_rng(4).standard_normal((4096, 6))
    groups = [slice(0, 2), slice(2, 4), slice(4, 6)]
    assert covariance_penalty(mu, groups).value < 0.05 * 6 * 6


def test_covariance_copied_columns():
    u = make_rng(5).standard_normal((20000, 2))
    u = (u - u.mean(0)) / u.std(0, ddof=1)
    mu = np.hstack([u, u])
    # cov(u_a, u_b) for a != b is tiny; the copied diagonal is exactly 1
    pen = covariance_penalty(mu, [slice(0, 2), slice(2, 4)]).value
    assert pen == pytest.approx(2 * 2 * 1.0 + 4 * abs(np.cov(u.T)[0, 1]), rel=1e-10)


def test_covariance_constant_and_shift(rng):
    groups = [slice(0, 1), slice(1, 3)]
    assert covariance_penalty(np.ones((5, 3)), groups).value == 0.0
    mu = rng.standard_normal((10, 3))
    shifted = covariance_penalty(mu + rng.standard_normal(3) * 100, groups).value
    assert shifted == pytest.approx(covariance_penalty(mu, groups).value, rel=1e-9)
    with pytest.raises(ValidationError):
        covariance_penalty(mu[:1], groups)


def linear_pair(a, b):
    return (lambda x: ops.matmul(x, a)), (lambda mu: ops.matmul(mu, b))


def test_jacobian_block_diagonal_is_zero(rng):
    a = np.zeros((4, 4))
    b = np.zeros((4, 4))
    a[:2, :2], a[2:, 2:] = rng.standard_normal((2, 2, 2))
    b[:2, :2], b[2:, 2:] = rng.standard_normal((2, 2, 2))
    j_ie, j_ei = cross_jacobian_norms(*linear_pair(a, b), rng.standard_normal((3, 4)), 2)
    assert jacobian_penalty(j_ie, j_ei).value < 1e-12


@pytest.mark.parametrize("w", [0.5, -1.7, 3.0])
def test_jacobian_planted_weight(w, rng):
    b = np.array([[1.0, w], [0.0, 1.0]])
    j_ie, j_ei = cross_jacobian_norms(*linear_pair(np.eye(2), b), rng.standard_normal((5, 2)), 1)
    assert abs(j_ie.value - w * w) < 1e-10 and j_ei.value == 0.0
    assert abs(jacobian_penalty(j_ie, j_ei).value - w * w) < 1e-10


def test_jacobian_tie_goes_to_ie():
    from specvae.autodiff import Tape
    t = Tape()
    a, b = t.var(2.0), t.var(2.0)
    ga, gb = t.grad(jacobian_penalty(a, b), [a, b])
    assert (ga, gb) == (1.0, 0.0)


def test_jacobian_matches_finite_differences(rng):
    e, d = 2, 5
    w1, w2 = rng.standard_normal((d, 4)), rng.standard_normal((4, d))

    def enc(x):
        return ops.softplus(ops.matmul(x, w1))

    def dec(mu):
        return ops.sigmoid(ops.matmul(mu, w2))
    X = rng.standard_normal((3, d))
    j_ie, j_ei = cross_jacobian_norms(enc, dec, X, e)

    f = lambda mu: np.logaddexp(0, (1 / (1 + np.exp(-mu @ w2))) @ w1)  # noqa: E731
    mu = np.logaddexp(0, X @ w1)
    h = 1e-6
    jac = np.zeros((3, 4, 4))
    for k in range(4):
        dm = np.zeros(4)
        dm[k] = h
        jac[:, :, k] = (f(mu + dm) - f(mu - dm)) / (2 * h)
    ref_ie = np.mean(np.sum(jac[:, e:, :e] ** 2, axis=(1, 2)))
    ref_ei = np.mean(np.sum(jac[:, :e, e:] ** 2, axis=(1, 2)))
    assert j_ie.value == pytest.approx(ref_ie, rel=1e-4)
    assert j_ei.value == pytest.approx(ref_ei, rel=1e-4)


def test_rotational_consistency(rng):
    x = rng.standard_normal((4, 6))
    assert rotational_consistency(x, x).value == 0.0
    e1 = np.zeros(6)
    e1[0] = 1.0
    assert rotational_consistency(x, x + e1).value == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        rotational_consistency(x, x[:, :5])


def test_total_loss_arithmetic():
    ones = HFTerms(1.0, 1.0, 1.0, 1.0)
    w = PenaltyWeights(beta1=1, beta2=1, beta3=1, beta4=1, gamma_i=1, w_j=1, zeta=1, eta=1)
    assert total_vae_loss(1.0, ones, 1.0, 1.0, 1.0, w) == 8.0
    only_eta = PenaltyWeights(beta1=0, beta2=0, beta3=0, beta4=0, gamma_i=0, w_j=0, zeta=0, eta=1)
    assert total_vae_loss(0.0, ones, 5.0, 5.0, 5.0, only_eta) == 0.0


def test_defaults_and_validation():
    w = PenaltyWeights()
    assert (w.beta1, w.beta2, w.beta3) == (1.0, 1.0, 1.0)
    assert (w.beta4, w.gamma_i, w.w_j) == (50.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        PenaltyWeights(beta4=-1.0)
