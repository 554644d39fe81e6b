import numpy as np
import pytest

from specvae.autodiff import Tape, gradient_check
from specvae.errors import ValidationError
from specvae.geom import quat, rotate_cloud
from specvae.losses import LossWeights, chamfer_loss, hausdorff_loss, max_average, quat_loss, reconstruction_loss


def brute(P, Q):
    d_hat = [min(np.sum((p - q) ** 2) for q in Q) for p in P]
    d = [min(np.sum((q - p) ** 2) for p in P) for q in Q]
    return np.array(d_hat), np.array(d)


def test_max_average_examples():
    assert max_average(2.0, 4.0, 0.5) == 3.5
    for a in (0.0, 0.3, 1.0):
        assert max_average(1.7, 1.7, a) == pytest.approx(1.7)
    assert max_average(1.0, 3.0, 1.0) == 3.0
    assert max_average(1.0, 3.0, 0.0) == 2.0


def test_chamfer_hand_examples():
    P = np.zeros((1, 3))
    Q = np.array([[1.0, 0, 0]])
    for a in (0.0, 0.5, 1.0):
        assert chamfer_loss(P, Q, a) == 1.0
    c = np.random.default_rng(0).standard_normal((10, 3))
    assert chamfer_loss(c, c) == 0.0


def test_hausdorff_hand_example():
    P = np.array([[0.0, 0, 0], [2.0, 0, 0]])
    Q = np.zeros((1, 3))
    assert hausdorff_loss(P, Q, 0.5) == 3.0


def test_reconstruction_unit_offset():
    w = LossWeights(r_c=10.0, r_h=1.0)
    assert reconstruction_loss(np.zeros((1, 3)), np.array([[1.0, 0, 0]]), w) == 11.0


def test_brute_force_oracle(rng):
    for _ in range(100):
        P = rng.standard_normal((rng.integers(1, 65), 3))
        Q = rng.standard_normal((rng.integers(1, 65), 3))
        d_hat, d = brute(P, Q)
        a = rng.uniform()
        c_ref = a * max(d_hat.mean(), d.mean()) + (1 - a) * 0.5 * (d_hat.mean() + d.mean())
        h_ref = a * max(d_hat.max(), d.max()) + (1 - a) * 0.5 * (d_hat.max() + d.max())
        assert abs(chamfer_loss(P, Q, a) - c_ref) < 1e-12
        assert abs(hausdorff_loss(P, Q, a) - h_ref) < 1e-12


def test_hausdorff_dominates_chamfer(rng):
    P, Q = rng.standard_normal((2, 30, 3))
    assert hausdorff_loss(P, Q, 0.6) >= chamfer_loss(P, Q, 0.6)


def test_permutation_and_rigid_invariance(rng):
    P, Q = rng.standard_normal((20, 3)), rng.standard_normal((25, 3))
    base = chamfer_loss(P, Q)
    assert chamfer_loss(P[rng.permutation(20)], Q[rng.permutation(25)]) == base
    q = quat.normalize(rng.standard_normal(4))
    t = rng.standard_normal(3)
    moved = chamfer_loss(rotate_cloud(P, q) + t, rotate_cloud(Q, q) + t)
    assert moved == pytest.approx(base, abs=1e-9)
    assert hausdorff_loss(rotate_cloud(P, q) + t, rotate_cloud(Q, q) + t) == pytest.approx(hausdorff_loss(P, Q), abs=1e-9)


def test_batched_is_mean_of_singles(rng):
    P, Q = rng.standard_normal((3, 12, 3)), rng.standard_normal((3, 9, 3))
    w = LossWeights()
    singles = [reconstruction_loss(P[b], Q[b], w) for b in range(3)]
    assert reconstruction_loss(P, Q, w) == pytest.approx(np.mean(singles), rel=1e-14)


def test_tape_value_matches_numpy(rng):
    P, Q = rng.standard_normal((2, 12, 3)), rng.standard_normal((2, 9, 3))
    t = Tape()
    assert reconstruction_loss(P, t.var(Q)).value == pytest.approx(reconstruction_loss(P, Q), rel=1e-14)


def test_reconstruction_gradient(rng):
    P = rng.standard_normal((2, 10, 3))
    err, ok = gradient_check(lambda q: reconstruction_loss(P, q), [rng.standard_normal((2, 8, 3))], tol=1e-5)
    assert ok, err


def test_validation():
    with pytest.raises(ValidationError):
        chamfer_loss(np.zeros((0, 3)), np.zeros((1, 3)))
    with pytest.raises(ValidationError):
        chamfer_loss(np.zeros((4, 2)), np.zeros((1, 3)))
    with pytest.raises(ValidationError):
        LossWeights(alpha_c=1.5)


def test_quat_loss(rng):
    q = rng.standard_normal((5, 4))
    assert quat_loss(q, q) == pytest.approx(0.0, abs=1e-15)
    assert quat_loss(q, -q) == pytest.approx(0.0, abs=1e-15)
    err, ok = gradient_check(lambda qh: quat_loss(q, qh), [rng.standard_normal((5, 4))], tol=1e-5)
    assert ok, err
