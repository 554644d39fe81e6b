"""Graph Laplacian of a point cloud from a Gaussian affinity kernel."""
import numpy as np

from ..errors import ValidationError
from .eigen import Spectrum, nonzero_modes, symmetric_eigenvalues

XI = 0.01


def mean_nn_distance(points):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    return float(np.mean(np.sqrt(d2.min(axis=1))))


def rbf_bandwidth(d_nn, xi=XI):
    return d_nn ** (-1.0 / (2.0 + xi)) / 4.0


def pointcloud_laplacian(points, xi=XI):
    """Dense ``L = D - A`` with ``A_ij = exp(-|p_i - p_j|^2 / b^2)``, zero diagonal.

    ``b = d_N^(-1/(2+xi)) / 4`` where ``d_N`` is the mean nearest-neighbour distance.
    Returns ``(L, b)``.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
        raise ValidationError("need at least two 3D points")
    d_nn = mean_nn_distance(pts)
    if d_nn <= 0.0:
        raise ValidationError("duplicate points collapse the mean nearest-neighbour distance to zero")
    b = rbf_bandwidth(d_nn, xi)
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    a = np.exp(-d2 / (b * b))
    np.fill_diagonal(a, 0.0)
    lap = np.diag(a.sum(axis=1)) - a
    return lap, b


def pointcloud_spectrum(points, n_lambda, xi=XI):
    lap, _ = pointcloud_laplacian(points, xi)
    vals, _ = nonzero_modes(symmetric_eigenvalues(lap), n_lambda)
    return Spectrum(np.maximum(vals, 0.0), "pointcloud-rbf")


__all__ = ["mean_nn_distance", "pointcloud_laplacian", "pointcloud_spectrum", "rbf_bandwidth"]
