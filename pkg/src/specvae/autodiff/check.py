"""Finite-difference gradient checking and Jacobian helpers."""
import numpy as np

from .tensor import Tape


def _step(x):
    return 1e-5 * max(1.0, abs(x))


def gradient_check(fn, inputs, tol=1e-6, seed_vec=None):
    """Compare reverse-mode gradients of ``fn`` against central differences.

    ``fn`` receives one tracked tensor per array in ``inputs`` and returns a
    tensor. Non-scalar outputs are contracted with ``seed_vec`` (ones by
    default). Relative error per entry is
    ``|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)``.

    Returns ``(max_rel_error, ok)``.
    """
    inputs = [np.array(x, dtype=np.float64) for x in inputs]

    def value(arrs):
        tape = Tape()
        out = fn(*[tape.var(a) for a in arrs])
        v = np.asarray(out.value, dtype=np.float64)
        s = np.ones_like(v) if seed_vec is None else np.asarray(seed_vec, dtype=np.float64).reshape(v.shape)
        return float((v * s).sum())

    tape = Tape()
    xs = [tape.var(a) for a in inputs]
    out = fn(*xs)
    seed = None if seed_vec is None else np.asarray(seed_vec, dtype=np.float64).reshape(out.shape)
    grads = tape.grad(out, xs, seed)

    worst = 0.0
    for k, x in enumerate(inputs):
        flat = x.reshape(-1)
        g_ad = grads[k].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            h = _step(orig)
            flat[j] = orig + h
            up = value(inputs)
            flat[j] = orig - h
            down = value(inputs)
            flat[j] = orig
            g_fd = (up - down) / (2.0 * h)
            err = abs(g_ad[j] - g_fd) / max(1.0, abs(g_ad[j]), abs(g_fd))
            worst = max(worst, err) if np.isfinite(err) else np.inf
    return worst, worst <= tol


def jacobian(fn, x):
    """Dense Jacobian of ``fn`` at ``x`` as ``(out.size, x.size)``, one sweep per output entry."""
    tape = Tape()
    xv = tape.var(x)
    out = fn(xv)
    return tape.jacobian(out, xv)


def batch_jacobian(fn, x):
    """Per-row Jacobians ``(B, out_dim, in_dim)`` for a row-independent ``fn`` on ``x`` of shape ``(B, in_dim)``.

    Rows must not interact (no batch statistics), which lets one reverse sweep
    per output column serve the whole batch.
    """
    tape = Tape()
    xv = tape.var(x)
    out = fn(xv)
    b, m = out.shape
    jac = np.zeros((b, m, x.shape[1]))
    for k in range(m):
        seed = np.zeros((b, m))
        seed[:, k] = 1.0
        jac[:, k, :] = tape.grad(out, xv, seed)
    return jac


def directional_check(fn, inputs, n_dirs=4, seed=0, h=1e-5):
    """Central differences of ``fn`` along random unit directions in the joint input space.

    Cheaper than :func:`gradient_check` for many parameters; the error per
    direction is ``|g.v - fd| / max(1, |g.v|, |fd|)``. Returns ``(max_rel_error, errors)``.
    """
    inputs = [np.array(x, dtype=np.float64) for x in inputs]
    tape = Tape()
    xs = [tape.var(a) for a in inputs]
    out = fn(*xs)
    grads = tape.grad(out, xs)
    tape.release()
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(n_dirs):
        dirs = [rng.standard_normal(x.shape) for x in inputs]
        norm = np.sqrt(sum(float(np.sum(d * d)) for d in dirs))
        dirs = [d / norm for d in dirs]
        g_dir = sum(float(np.sum(g * d)) for g, d in zip(grads, dirs))

        def at(s):
            t = Tape()
            v = fn(*[t.var(x + s * d) for x, d in zip(inputs, dirs)])
            return float(np.sum(v.value))

        fd = (at(h) - at(-h)) / (2 * h)
        err = abs(g_dir - fd) / max(1.0, abs(g_dir), abs(fd))
        errs.append(err if np.isfinite(err) else np.inf)
    return max(errs), errs
