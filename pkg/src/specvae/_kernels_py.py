"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Same call signatures and return layouts; used when the extension is not built
or when ``SPECVAE_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np

# squared-distance blocks are evaluated this many query points at a time
_CHUNK = 512


def nearest_sqdist(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape[0] != b.shape[0]:
        raise ValueError("batch size mismatch")
    if b.shape[1] == 0:
        raise ValueError("empty target cloud")
    nb, n = a.shape[:2]
    out_d = np.empty((nb, n))
    out_i = np.empty((nb, n), dtype=np.int64)
    for k in range(nb):
        for s in range(0, n, _CHUNK):
            diff = a[k, s:s + _CHUNK, None, :] - b[k, None, :, :]
            dist = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1] + diff[..., 2] * diff[..., 2]
            idx = np.argmin(dist, axis=1)
            out_i[k, s:s + _CHUNK] = idx
            out_d[k, s:s + _CHUNK] = dist[np.arange(len(idx)), idx]
    return out_d, out_i


def tridiagonalize(a):
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError("matrix must be square")
    # only the lower triangle is trusted, as in the compiled version
    a = np.tril(a) + np.tril(a, -1).T
    e = np.zeros(n)
    for k in range(n - 2):
        x = a[k + 1:, k]
        norm = math.sqrt(float(x @ x))
        if norm == 0.0:
            continue
        alpha = -norm if x[0] >= 0.0 else norm
        v = x.copy()
        v[0] -= alpha
        vv = float(v @ v)
        sub = a[k + 1:, k + 1:]
        p = (sub @ v) * (2.0 / vv)
        w = p - (float(v @ p) / vv) * v
        sub -= np.outer(v, w) + np.outer(w, v)
        a[k + 1:, k] = 0.0
        a[k, k + 1:] = 0.0
        a[k + 1, k] = a[k, k + 1] = alpha
    for k in range(n - 1):
        e[k + 1] = a[k + 1, k]
    return np.diag(a).copy(), e


def tql_eigenvalues(d, e, max_iter=60):
    n = len(d)
    if len(e) != n:
        raise ValueError("d and e must have equal length")
    d = [float(v) for v in d]
    e = [float(v) for v in e[1:]] + [0.0]
    eps = 2.220446049250313e-16
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                raise ArithmeticError(f"QL iteration did not converge within {max_iter} sweeps")
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (abs(r) if g >= 0.0 else -abs(r)))
            s = c = 1.0
            p = 0.0
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
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
    return np.array(d)
