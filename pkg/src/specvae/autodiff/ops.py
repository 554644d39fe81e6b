"""Differentiable operations.

Each op computes its value with numpy and registers a vector-Jacobian
product written in terms of these same ops, which keeps every adjoint
differentiable. Piecewise-constant factors (relu masks, max routing, signs)
enter adjoints as constants.

Subgradient conventions: ``sign(0) = 0`` for ``abs``; ``max``/``min`` route
the whole gradient to the first attaining index along the reduced axis.
"""
import numpy as np

from .tensor import ShapeError, Tensor, is_recording

__all__ = [
    "abs", "add", "broadcast_to", "concat", "div", "exp", "getitem", "layer_norm", "linear",
    "log", "logsumexp", "matmul", "max", "mean", "min", "mul", "neg", "relu", "reshape",
    "scatter_add", "sigmoid", "softplus", "sqrt", "square", "sub", "sum", "sum_to",
    "take_along_axis", "transpose",
]

_builtin_abs = abs


def _wrap(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else np.float64
    return Tensor(np.asarray(x, dtype=dtype))


def _make(value, op, parents, vjp):
    tape = None
    if is_recording():
        for p in parents:
            if p.tape is not None:
                if tape is None:
                    tape = p.tape
                elif p.tape is not tape:
                    raise ValueError(f"{op}: operands belong to different tapes")
    if tape is None:
        return Tensor(value, op=op)
    return tape.record(value, op, parents, vjp)


def _binary_value(op, fn, a, b):
    try:
        return fn(a.value, b.value)
    except ValueError as exc:
        where = ", ".join(f"node {t.id}" if t.tracked else "const" for t in (a, b))
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape} ({where})") from exc


# ----------------------------------------------------------------- broadcasting

def sum_to(x, shape):
    """Sum ``x`` down to ``shape`` (inverse of numpy broadcasting)."""
    x = _wrap(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x
    lead = x.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        i + lead for i, s in enumerate(shape) if s == 1 and x.shape[i + lead] != 1)
    val = x.value.sum(axis=axes, keepdims=True)
    val = val.reshape(shape)
    src = x.shape
    return _make(val, "sum_to", (x,), lambda g: (broadcast_to(g, src),))


def broadcast_to(x, shape):
    x = _wrap(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x
    try:
        val = np.broadcast_to(x.value, shape)
    except ValueError as exc:
        raise ShapeError(f"broadcast_to: cannot broadcast {x.shape} to {shape}") from exc
    src = x.shape
    return _make(val, "broadcast_to", (x,), lambda g: (sum_to(g, src),))


# ------------------------------------------------------------------ elementwise

def add(a, b):
    a, b = _wrap(a), _wrap(b)
    val = _binary_value("add", np.add, a, b)
    sa, sb = a.shape, b.shape
    return _make(val, "add", (a, b), lambda g: (sum_to(g, sa), sum_to(g, sb)))


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    val = _binary_value("sub", np.subtract, a, b)
    sa, sb = a.shape, b.shape
    return _make(val, "sub", (a, b), lambda g: (sum_to(g, sa), neg(sum_to(g, sb))))


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    val = _binary_value("mul", np.multiply, a, b)
    return _make(val, "mul", (a, b),
                 lambda g: (sum_to(mul(g, b), a.shape) if a.tracked else None,
                            sum_to(mul(g, a), b.shape) if b.tracked else None))


def div(a, b):
    a, b = _wrap(a), _wrap(b)
    val = _binary_value("div", np.divide, a, b)
    return _make(val, "div", (a, b),
                 lambda g: (sum_to(div(g, b), a.shape) if a.tracked else None,
                            sum_to(neg(div(mul(g, a), square(b))), b.shape) if b.tracked else None))


def neg(x):
    x = _wrap(x)
    return _make(-x.value, "neg", (x,), lambda g: (neg(g),))


def square(x):
    x = _wrap(x)
    return _make(x.value * x.value, "square", (x,), lambda g: (mul(g, mul(x, 2.0)),))


def sqrt(x):
    x = _wrap(x)
    out = _make(np.sqrt(x.value), "sqrt", (x,), None)
    out.vjp = lambda g: (div(g, mul(out, 2.0)),)
    return out


def abs(x):
    x = _wrap(x)
    _kink(x, lambda: np.min(np.abs(x.value)))
    sign = np.sign(x.value)
    return _make(np.abs(x.value), "abs", (x,), lambda g: (mul(g, sign),))


def exp(x):
    x = _wrap(x)
    out = _make(np.exp(x.value), "exp", (x,), None)
    out.vjp = lambda g: (mul(g, out),)
    return out


def log(x):
    x = _wrap(x)
    return _make(np.log(x.value), "log", (x,), lambda g: (div(g, x),))


def _kink(x, margin):
    if x.tape is not None and x.tape.track_kinks and x.value.size and is_recording():
        x.tape.note_kink(margin())


def relu(x):
    x = _wrap(x)
    _kink(x, lambda: np.min(np.abs(x.value)))
    mask = (x.value > 0).astype(x.dtype)
    return _make(x.value * mask, "relu", (x,), lambda g: (mul(g, mask),))


def sigmoid(x):
    x = _wrap(x)
    v = x.value
    val = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.where(v >= 0, v, 0))),
                   np.exp(np.where(v < 0, v, 0)) / (1.0 + np.exp(np.where(v < 0, v, 0)))).astype(x.dtype)
    out = _make(val, "sigmoid", (x,), None)
    out.vjp = lambda g: (mul(g, mul(out, sub(1.0, out))),)
    return out


def softplus(x):
    x = _wrap(x)
    v = x.value
    val = np.maximum(v, 0) + np.log1p(np.exp(-np.abs(v)))
    return _make(val.astype(x.dtype), "softplus", (x,), lambda g: (mul(g, sigmoid(x)),))


# -------------------------------------------------------------------- linear algebra

def _swap(v):
    return np.swapaxes(v, -1, -2)


def transpose(x):
    """Swap the last two axes."""
    x = _wrap(x)
    if x.ndim < 2:
        raise ShapeError(f"transpose needs >= 2 dims, got {x.shape}")
    return _make(_swap(x.value), "transpose", (x,), lambda g: (transpose(g),))


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >= 2-d operands, got {a.shape} and {b.shape}")
    val = _binary_value("matmul", np.matmul, a, b)
    return _make(val, "matmul", (a, b),
                 lambda g: (sum_to(matmul(g, transpose(b)), a.shape) if a.tracked else None,
                            sum_to(matmul(transpose(a), g), b.shape) if b.tracked else None))


def linear(x, weight, bias=None):
    """Affine map on row vectors: ``x @ weight + bias`` with ``weight`` of shape ``(in, out)``."""
    y = matmul(x, weight)
    return y if bias is None else add(y, bias)


# ------------------------------------------------------------------- shape ops

def reshape(x, shape):
    x = _wrap(x)
    try:
        val = x.value.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot reshape {x.shape} to {shape}") from exc
    src = x.shape
    return _make(val, "reshape", (x,), lambda g: (reshape(g, src),))


def getitem(x, index):
    x = _wrap(x)
    val = x.value[index]
    src = x.shape
    return _make(np.array(val, copy=True), "getitem", (x,), lambda g: (scatter_add(g, index, src),))


def scatter_add(x, index, shape):
    """Zeros of ``shape`` with ``x`` added at ``index`` (repeated indices accumulate)."""
    x = _wrap(x)
    val = np.zeros(shape, dtype=x.dtype)
    np.add.at(val, index, x.value)
    return _make(val, "scatter_add", (x,), lambda g: (getitem(g, index),))


def concat(xs, axis=-1):
    xs = [_wrap(x) for x in xs]
    try:
        val = np.concatenate([x.value for x in xs], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: incompatible shapes {[x.shape for x in xs]}") from exc
    ax = axis % val.ndim
    bounds = np.cumsum([0] + [x.shape[ax] for x in xs])

    def vjp(g):
        out = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            idx = [slice(None)] * g.ndim
            idx[ax] = slice(int(lo), int(hi))
            out.append(getitem(g, tuple(idx)))
        return tuple(out)

    return _make(val, "concat", tuple(xs), vjp)


def take_along_axis(x, indices, axis):
    """Gather ``x`` along ``axis`` with an integer index array (adjoint: scatter-add)."""
    x = _wrap(x)
    indices = np.asarray(indices)
    val = np.take_along_axis(x.value, indices, axis=axis)
    src = x.shape
    return _make(val, "take_along_axis", (x,),
                 lambda g: (_scatter_along(g, indices, axis, src),))


def _scatter_along(x, indices, axis, shape):
    x = _wrap(x)
    val = np.zeros(shape, dtype=x.dtype)
    ax = axis % len(shape)
    grids = np.meshgrid(*[np.arange(s) for s in indices.shape], indexing="ij")
    full = tuple(indices if d == ax else np.broadcast_to(grids[d], indices.shape) for d in range(len(shape)))
    np.add.at(val, full, x.value)
    return _make(val, "scatter_along", (x,), lambda g: (take_along_axis(g, indices, axis),))


# ------------------------------------------------------------------ reductions

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum(x, axis=None, keepdims=False):
    x = _wrap(x)
    axes = _norm_axis(axis, x.ndim)
    val = np.asarray(x.value.sum(axis=axes, keepdims=keepdims))
    src = x.shape
    kshape = tuple(1 if i in axes else s for i, s in enumerate(src))
    return _make(val, "sum", (x,), lambda g: (broadcast_to(reshape(g, kshape), src),))


def mean(x, axis=None, keepdims=False):
    x = _wrap(x)
    axes = _norm_axis(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return div(sum(x, axis, keepdims), float(count))


def _first_arg_onehot(v, axis):
    idx = np.expand_dims(np.argmax(v, axis=axis), axis)
    mask = np.zeros(v.shape, dtype=v.dtype)
    np.put_along_axis(mask, idx, 1.0, axis=axis)
    return mask


def max(x, axis=-1, keepdims=False):
    """Maximum along one axis; gradient goes to the first maximizer."""
    x = _wrap(x)
    ax = axis % x.ndim
    if x.shape[ax] > 1:
        _kink(x, lambda: np.min(np.diff(np.sort(x.value, axis=ax), axis=ax).take(-1, axis=ax)))
    mask = _first_arg_onehot(x.value, ax)
    val = np.asarray(np.max(x.value, axis=ax, keepdims=keepdims))
    src = x.shape
    kshape = tuple(1 if i == ax else s for i, s in enumerate(src))
    return _make(val, "max", (x,), lambda g: (mul(broadcast_to(reshape(g, kshape), src), mask),))


def min(x, axis=-1, keepdims=False):
    """Minimum along one axis; gradient goes to the first minimizer."""
    return neg(max(neg(x), axis, keepdims))


def logsumexp(x, axis=-1, keepdims=False):
    x = _wrap(x)
    ax = axis % x.ndim
    m = np.max(x.value, axis=ax, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    lse = np.log(np.sum(np.exp(x.value - m), axis=ax, keepdims=True)) + m
    val = lse if keepdims else np.squeeze(lse, axis=ax)
    src = x.shape
    kshape = tuple(1 if i == ax else s for i, s in enumerate(src))
    out = _make(np.asarray(val), "logsumexp", (x,), None)
    out.vjp = lambda g: (mul(broadcast_to(reshape(g, kshape), src),
                             exp(sub(x, broadcast_to(reshape(out, kshape), src)))),)
    return out


# ------------------------------------------------------------------- composites

def layer_norm(x, eps=1e-5):
    """Normalize the last axis to zero mean and unit variance (no affine part)."""
    mu = mean(x, axis=-1, keepdims=True)
    centered = sub(x, mu)
    var = mean(square(centered), axis=-1, keepdims=True)
    return div(centered, sqrt(add(var, eps)))
