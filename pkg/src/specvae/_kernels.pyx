# cython: language_level=3
"""Compiled hot loops: nearest-neighbour search, Householder reduction, QL sweep.

Semantics are identical to :mod:`specvae._kernels_py`; the selector in
:mod:`specvae.kernels` picks whichever is importable.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, hypot

cnp.import_array()


def nearest_sqdist(const double[:, :, ::1] a, const double[:, :, ::1] b):
    """For each point of ``a[k]``, squared distance to and index of its nearest point in ``b[k]``.

    Ties go to the lowest index in ``b``.
    """
    cdef Py_ssize_t nb = a.shape[0], n = a.shape[1], m = b.shape[1]
    if b.shape[0] != nb:
        raise ValueError("batch size mismatch")
    if m == 0:
        raise ValueError("empty target cloud")
    out_d = np.empty((nb, n), dtype=np.float64)
    out_i = np.empty((nb, n), dtype=np.int64)
    cdef double[:, ::1] od = out_d
    cdef long long[:, ::1] oi = out_i
    cdef Py_ssize_t k, i, j, best_j
    cdef double ax, ay, az, dx, dy, dz, dist, best
    with nogil:
        for k in range(nb):
            for i in range(n):
                ax = a[k, i, 0]
                ay = a[k, i, 1]
                az = a[k, i, 2]
                best = 1e308
                best_j = 0
                for j in range(m):
                    dx = ax - b[k, j, 0]
                    dy = ay - b[k, j, 1]
                    dz = az - b[k, j, 2]
                    dist = dx * dx + dy * dy + dz * dz
                    if dist < best:
                        best = dist
                        best_j = j
                od[k, i] = best
                oi[k, i] = best_j
    return out_d, out_i


def tridiagonalize(double[:, ::1] a):
    """Householder reduction of a symmetric matrix to tridiagonal form (in place).

    Returns ``(d, e)`` with ``e[0] = 0`` and ``e[i]`` coupling rows ``i-1, i``.
    Only the lower triangle of ``a`` is read.
    """
    cdef Py_ssize_t n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError("matrix must be square")
    d_arr = np.zeros(n, dtype=np.float64)
    e_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] d = d_arr
    cdef double[::1] e = e_arr
    cdef Py_ssize_t i, j, k, l
    cdef double scale, h, f, g, hh
    with nogil:
        for i in range(n - 1, 0, -1):
            l = i - 1
            h = 0.0
            scale = 0.0
            if l > 0:
                for k in range(l + 1):
                    scale += fabs(a[i, k])
                if scale == 0.0:
                    e[i] = a[i, l]
                else:
                    for k in range(l + 1):
                        a[i, k] /= scale
                        h += a[i, k] * a[i, k]
                    f = a[i, l]
                    g = -sqrt(h) if f >= 0.0 else sqrt(h)
                    e[i] = scale * g
                    h -= f * g
                    a[i, l] = f - g
                    f = 0.0
                    for j in range(l + 1):
                        g = 0.0
                        for k in range(j + 1):
                            g += a[j, k] * a[i, k]
                        for k in range(j + 1, l + 1):
                            g += a[k, j] * a[i, k]
                        e[j] = g / h
                        f += e[j] * a[i, j]
                    hh = f / (h + h)
                    for j in range(l + 1):
                        f = a[i, j]
                        g = e[j] - hh * f
                        e[j] = g
                        for k in range(j + 1):
                            a[j, k] -= f * e[k] + g * a[i, k]
            else:
                e[i] = a[i, l]
            d[i] = h
        for i in range(n):
            d[i] = a[i, i]
        e[0] = 0.0
    return d_arr, e_arr


def tql_eigenvalues(double[::1] d, double[::1] e, int max_iter=60):
    """Implicit-shift QL on a symmetric tridiagonal matrix; eigenvalues only, in place on ``d``.

    ``e`` uses the layout returned by :func:`tridiagonalize`. Raises
    ``ArithmeticError`` if an eigenvalue needs more than ``max_iter`` sweeps.
    """
    cdef Py_ssize_t n = d.shape[0]
    if e.shape[0] != n:
        raise ValueError("d and e must have equal length")
    cdef Py_ssize_t i, l, m
    cdef int it
    cdef double dd, g, r, s, c, p, f, b
    cdef double eps = 2.220446049250313e-16
    cdef int failed = 0
    with nogil:
        for i in range(1, n):
            e[i - 1] = e[i]
        if n > 0:
            e[n - 1] = 0.0
        for l in range(n):
            it = 0
            while True:
                m = l
                while m < n - 1:
                    dd = fabs(d[m]) + fabs(d[m + 1])
                    if fabs(e[m]) <= eps * dd:
                        break
                    m += 1
                if m == l:
                    break
                if it == max_iter:
                    failed = 1
                    break
                it += 1
                g = (d[l + 1] - d[l]) / (2.0 * e[l])
                r = hypot(g, 1.0)
                g = d[m] - d[l] + e[l] / (g + (fabs(r) if g >= 0.0 else -fabs(r)))
                s = 1.0
                c = 1.0
                p = 0.0
                i = m - 1
                while i >= l:
                    f = s * e[i]
                    b = c * e[i]
                    r = hypot(f, g)
                    e[i + 1] = r
                    if r == 0.0:
                        d[i + 1] -= p
                        e[m] = 0.0
                        break
                    s = f / r
                    c = g / r
                    g = d[i + 1] - p
                    r = (d[i] - g) * s + 2.0 * c * b
                    p = s * r
                    d[i + 1] = g + p
                    g = c * r - b
                    i -= 1
                if r == 0.0 and i >= l:
                    continue
                d[l] -= p
                e[l] = g
                e[m] = 0.0
            if failed:
                break
    if failed:
        raise ArithmeticError(f"QL iteration did not converge within {max_iter} sweeps")
    return np.asarray(d)
