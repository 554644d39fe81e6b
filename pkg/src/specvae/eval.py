"""Retrieval, linear probe and latent manipulation on trained models."""
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geom import quat
from .models import ae_decode, decode_r, decode_x, predict_spectrum, vae_encode
from .rng import make_rng
from .train import ae_codes

SPACES = ("X", "z", "z_E", "z_I")


@dataclass
class Codes:
    """AE codes and VAE posterior means for a set of shapes."""
    R: np.ndarray
    X: np.ndarray
    mu: np.ndarray
    groups: dict

    def space(self, name):
        g = self.groups
        if name == "X":
            return self.X
        if name == "z":
            return self.mu
        if name in ("z_R", "z_E", "z_I"):
            return self.mu[:, g[name[-1]]]
        raise ValidationError(f"unknown latent space {name!r}")


def encode(ae, vae, clouds, cfg, seed=0):
    """Encode clouds ``(S, N, 3)`` with a fixed point subsample drawn from ``seed``."""
    R, X = ae_codes(ae, np.asarray(clouds, dtype=np.float64), cfg.ae.n_input, seed)
    R = quat.normalize(R)
    post_r, post_ei = vae_encode(vae, R, X, cfg.model.sigma_eps)
    mu = np.concatenate([post_r.mu.value, post_ei.mu.value], axis=-1)
    return Codes(R, X, mu, cfg.model.groups())


def decode(ae, vae, z, cfg):
    """Latent vectors ``(B, z_dim)`` -> clouds ``(B, n_out, 3)``."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != cfg.model.z_dim:
        raise ValidationError(f"latent width {z.shape[1]} != {cfg.model.z_dim}")
    if len(z) == 0:
        return np.zeros((0, cfg.model.n_out, 3))
    g = cfg.model.groups()
    R_hat = quat.normalize(decode_r(vae, z[:, g["R"]]).value)
    X_hat = decode_x(vae, z[:, g["E"].start:g["I"].stop]).value
    return ae_decode(ae, R_hat, X_hat).value


# ---------------------------------------------------------------------- retrieval

def beta_error(b1, b2):
    """MSE between intrinsic parameter vectors (broadcasts)."""
    return np.mean((np.asarray(b1) - np.asarray(b2)) ** 2, axis=-1)


def theta_error(t1, t2):
    """Mean over joints of the quaternion distance between axis-angle poses."""
    q1 = quat.from_axis_angle(np.asarray(t1))
    q2 = quat.from_axis_angle(np.asarray(t2))
    return np.mean(quat.distance(q1, q2), axis=-1)


def pair_errors(beta, theta):
    """All-pairs raw error matrices ``(E_beta, E_theta)``."""
    beta, theta = np.asarray(beta, dtype=np.float64), np.asarray(theta, dtype=np.float64)
    if beta.ndim != 2 or theta.ndim != 3 or np.isnan(beta).any() or np.isnan(theta).any():
        raise ValidationError("retrieval needs ground-truth beta and theta for every test shape")
    eb = beta_error(beta[:, None, :], beta[None, :, :])
    et = theta_error(theta[:, None], theta[None, :])
    return eb, et


@dataclass
class RetrievalReport:
    k: int
    norm_beta: float
    norm_theta: float
    rows: dict = field(default_factory=dict)    # space -> (E_beta, E_theta), normalized

    def to_csv_rows(self):
        return [(s, eb, et) for s, (eb, et) in self.rows.items()]


def _off_diag_mean(m):
    n = len(m)
    return float((m.sum() - np.trace(m)) / (n * (n - 1)))


def retrieve_indices(latent, k=3):
    """Indices of the ``k`` L2-nearest other rows for every row (ties by index)."""
    z = np.asarray(latent, dtype=np.float64)
    d = np.sum((z[:, None, :] - z[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d, np.inf)
    return np.argsort(d, axis=1, kind="stable")[:, :k]


def _scored(nn, eb, et):
    rows = np.arange(len(nn))[:, None]
    return float(np.mean(eb[rows, nn])), float(np.mean(et[rows, nn]))


def retrieval_eval(latents, beta, theta, k=3):
    """Normalized top-``k`` retrieval errors for each named latent space in ``latents``."""
    eb, et = pair_errors(beta, theta)
    if len(eb) <= k:
        raise ValidationError(f"need more than k={k} shapes for retrieval")
    nb, nt = _off_diag_mean(eb), _off_diag_mean(et)
    report = RetrievalReport(k, nb, nt)
    for name, lat in latents.items():
        b, t = _scored(retrieve_indices(lat, k), eb, et)
        report.rows[name] = (b / nb, t / nt)
    return report


def random_retrieval(beta, theta, k=3, seed=0):
    """Normalized errors of uniformly random top-``k`` retrieval."""
    eb, et = pair_errors(beta, theta)
    n = len(eb)
    rng = make_rng(seed, 7)
    nn = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        others = np.delete(np.arange(n), i)
        nn[i] = rng.choice(others, size=k, replace=False)
    b, t = _scored(nn, eb, et)
    return b / _off_diag_mean(eb), t / _off_diag_mean(et)


# -------------------------------------------------------------------------- probe

@dataclass
class ProbeResult:
    accuracy: float
    train_accuracy: float
    confusion: np.ndarray
    classes: np.ndarray


def linear_probe(train_z, train_y, test_z, test_y, C=1.0):
    """Multinomial logistic regression on standardized latents."""
    from sklearn.linear_model import LogisticRegression
    from sklearn.metrics import confusion_matrix
    from sklearn.pipeline import make_pipeline
    from sklearn.preprocessing import StandardScaler

    train_y, test_y = np.asarray(train_y), np.asarray(test_y)
    classes = np.unique(train_y)
    if len(classes) < 2:
        raise ValidationError("linear probe needs at least two classes in the training split")
    clf = make_pipeline(StandardScaler(), LogisticRegression(C=C, max_iter=5000))
    clf.fit(np.asarray(train_z), train_y)
    pred = clf.predict(np.asarray(test_z))
    labels = np.union1d(classes, test_y)
    return ProbeResult(
        accuracy=float(np.mean(pred == test_y)),
        train_accuracy=float(clf.score(np.asarray(train_z), train_y)),
        confusion=confusion_matrix(test_y, pred, labels=labels),
        classes=labels,
    )


# ---------------------------------------------------------------- manipulation

def transfer_latents(mu_a, mu_b, groups):
    """``(z_R^A, z_E^B, z_I^A)`` and its symmetric counterpart."""
    ab, ba = np.array(mu_a, dtype=np.float64), np.array(mu_b, dtype=np.float64)
    ab[..., groups["E"]] = mu_b[..., groups["E"]]
    ba[..., groups["E"]] = mu_a[..., groups["E"]]
    return ab, ba


def pose_transfer(ae, vae, cloud_a, cloud_b, cfg, seed=0):
    """Clouds for A posed like B and B posed like A."""
    codes = encode(ae, vae, np.stack([cloud_a, cloud_b]), cfg, seed)
    ab, ba = transfer_latents(codes.mu[0], codes.mu[1], codes.groups)
    out = decode(ae, vae, np.stack([ab, ba]), cfg)
    return out[0], out[1]


def interpolation_latents(mu_a, mu_b, groups, axis="both", steps=5):
    """Latent sequence (or ``steps x steps`` grid, rows along E) with ``z_R = 0``."""
    if steps < 2:
        raise ValidationError("steps must be >= 2")
    if axis not in ("E", "I", "both"):
        raise ValidationError(f"axis must be E, I or both, got {axis!r}")
    a, b = np.array(mu_a, dtype=np.float64), np.array(mu_b, dtype=np.float64)
    a[groups["R"]] = 0.0
    b[groups["R"]] = 0.0
    t = np.linspace(0.0, 1.0, steps)
    out = []
    if axis == "both":
        for te in t:
            for ti in t:
                z = a.copy()
                z[groups["E"]] = (1 - te) * a[groups["E"]] + te * b[groups["E"]]
                z[groups["I"]] = (1 - ti) * a[groups["I"]] + ti * b[groups["I"]]
                out.append(z)
    else:
        g = groups[axis]
        for s in t:
            z = a.copy()
            z[g] = (1 - s) * a[g] + s * b[g]
            out.append(z)
    return np.stack(out)


def interpolate(ae, vae, cloud_a, cloud_b, cfg, axis="both", steps=5, seed=0):
    codes = encode(ae, vae, np.stack([cloud_a, cloud_b]), cfg, seed)
    return decode(ae, vae, interpolation_latents(codes.mu[0], codes.mu[1], codes.groups, axis, steps), cfg)


def prior_latents(n, cfg, seed):
    z = make_rng(seed, 8).standard_normal((n, cfg.model.z_dim))
    z[:, cfg.model.groups()["R"]] = 0.0
    return z


def sample_prior(ae, vae, n, cfg, seed=0):
    """``n`` clouds decoded from the prior with ``z_R = 0``, plus predicted spectra."""
    if n < 0:
        raise ValidationError("n must be >= 0")
    z = prior_latents(n, cfg, seed)
    if n == 0:
        return np.zeros((0, cfg.model.n_out, 3)), np.zeros((0, cfg.model.n_lambda))
    spectra = predict_spectrum(vae, z[:, cfg.model.groups()["I"]]).value
    return decode(ae, vae, z, cfg), spectra
