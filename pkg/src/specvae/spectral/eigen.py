"""Generalized symmetric eigenvalues ``W phi = lambda M phi`` for diagonal ``M``."""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .. import kernels
from ..errors import NumericalError, ValidationError

log = logging.getLogger(__name__)

ZERO_TOL = 1e-8
DENSE_LIMIT = 4000
SOURCES = ("mesh-cotangent", "pointcloud-rbf", "noisy", "random-replacement")


@dataclass(frozen=True, eq=False)
class Spectrum:
    """First ``N`` nonzero eigenvalues, nonnegative and nondecreasing."""

    values: np.ndarray
    source: str = "mesh-cotangent"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if self.source not in SOURCES:
            raise ValidationError(f"unknown spectrum source {self.source!r}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("spectrum has non-finite values")
        if np.any(v < 0):
            raise ValidationError("spectrum has negative values")
        if np.any(np.diff(v) < 0):
            raise ValidationError("spectrum is not sorted ascending")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def symmetric_eigenvalues(a, max_iter=60):
    """All eigenvalues of a dense symmetric matrix, ascending (Householder + implicit QL)."""
    a = np.array(a, dtype=np.float64, order="C")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got {a.shape}")
    d, e = kernels.tridiagonalize(a)
    try:
        w = kernels.tql_eigenvalues(np.ascontiguousarray(d), np.ascontiguousarray(e), max_iter)
    except ArithmeticError as exc:
        raise NumericalError(str(exc)) from exc
    return np.sort(np.asarray(w))


def generalized_eigenvalues(stiffness, mass, max_iter=60):
    """Eigenvalues of ``M^-1/2 W M^-1/2`` (same as ``W phi = lambda M phi``), ascending."""
    mass = np.asarray(mass, dtype=np.float64)
    if np.any(mass <= 0):
        raise ValidationError("mass matrix must be positive")
    n = len(mass)
    if n > DENSE_LIMIT:
        log.warning("dense eigensolve on %d vertices exceeds the %d-vertex design size", n, DENSE_LIMIT)
    w = stiffness.toarray() if sp.issparse(stiffness) else np.asarray(stiffness, dtype=np.float64)
    s = 1.0 / np.sqrt(mass)
    c = w * s[:, None] * s[None, :]
    c = 0.5 * (c + c.T)
    return symmetric_eigenvalues(c, max_iter)


def nonzero_modes(eigs, n_lambda, zero_tol=ZERO_TOL):
    """Drop numerically-zero modes (``|lambda| < zero_tol * lambda_max``) and keep the next ``n_lambda``."""
    eigs = np.sort(np.asarray(eigs))
    cut = zero_tol * max(abs(eigs[-1]), abs(eigs[0]))
    keep = eigs[eigs >= cut]
    if len(keep) < n_lambda:
        raise ValidationError(f"only {len(keep)} nonzero eigenvalues available, {n_lambda} requested")
    return keep[:n_lambda], int(len(eigs) - len(keep))


def solve_spectrum(stiffness, mass, n_lambda, zero_tol=ZERO_TOL, max_iter=60):
    """Smallest ``n_lambda`` nonzero generalized eigenvalues as a :class:`Spectrum`."""
    n = len(mass)
    if n_lambda < 1:
        raise ValidationError("n_lambda must be >= 1")
    if n_lambda + 1 > n:
        raise ValidationError(f"{n} vertices cannot provide {n_lambda} nonzero eigenvalues")
    eigs = generalized_eigenvalues(stiffness, mass, max_iter)
    vals, n_zero = nonzero_modes(eigs, n_lambda, zero_tol)
    log.debug("skipped %d zero mode(s)", n_zero)
    return Spectrum(vals, "mesh-cotangent")


def mesh_spectrum(mesh, n_lambda, **kw):
    from .laplacian import cotangent_laplacian

    w, m = cotangent_laplacian(mesh)
    return solve_spectrum(w, m, n_lambda, **kw)


def count_zero_modes(stiffness, mass, zero_tol=ZERO_TOL):
    eigs = generalized_eigenvalues(stiffness, mass)
    return int(np.sum(np.abs(eigs) < zero_tol * np.abs(eigs).max()))
