"""Tape and tensor types for define-by-run reverse-mode differentiation.

Each operation on a tracked :class:`Tensor` appends a node to the tape it
belongs to. Nodes are appended in evaluation order, so the tape is always a
topological order and a backward sweep is a reverse walk over it.

Vector-Jacobian products are themselves written with tensor operations. A
backward sweep with ``create_graph=True`` therefore records its own work on
the tape, and the resulting gradients can be differentiated again.
"""
import threading
from contextlib import contextmanager

import numpy as np

_state = threading.local()


def is_recording():
    return getattr(_state, "recording", True)


@contextmanager
def no_record():
    """Evaluate operations without recording them (results are constants)."""
    prev = is_recording()
    _state.recording = False
    try:
        yield
    finally:
        _state.recording = prev


@contextmanager
def _recording(flag):
    prev = is_recording()
    _state.recording = flag
    try:
        yield
    finally:
        _state.recording = prev


class ShapeError(ValueError):
    pass


class Tensor:
    """A numpy array plus its position on a tape (``tape is None`` means constant)."""

    __slots__ = ("value", "tape", "id", "op", "parents", "vjp", "name", "__weakref__")
    __array_priority__ = 100

    def __init__(self, value, tape=None, op="const", parents=(), vjp=None, name=None):
        self.value = value
        self.tape = tape
        self.id = -1
        self.op = op
        self.parents = parents
        self.vjp = vjp
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def dtype(self):
        return self.value.dtype

    @property
    def size(self):
        return self.value.size

    @property
    def tracked(self):
        return self.tape is not None

    def numpy(self):
        return self.value

    def item(self):
        return float(self.value)

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        where = f"node {self.id}" if self.tracked else "const"
        return f"Tensor({self.op}, shape={self.shape}, {where})"

    # operator sugar; implementations live in ops.py
    def __add__(self, o):
        return ops.add(self, o)

    def __radd__(self, o):
        return ops.add(o, self)

    def __sub__(self, o):
        return ops.sub(self, o)

    def __rsub__(self, o):
        return ops.sub(o, self)

    def __mul__(self, o):
        return ops.mul(self, o)

    def __rmul__(self, o):
        return ops.mul(o, self)

    def __truediv__(self, o):
        return ops.div(self, o)

    def __rtruediv__(self, o):
        return ops.div(o, self)

    def __neg__(self):
        return ops.neg(self)

    def __matmul__(self, o):
        return ops.matmul(self, o)

    def __rmatmul__(self, o):
        return ops.matmul(o, self)

    def __getitem__(self, index):
        return ops.getitem(self, index)

    @property
    def T(self):
        return ops.transpose(self)

    def sum(self, axis=None, keepdims=False):
        return ops.sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return ops.mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype if dtype is not None else np.float64))


class Tape:
    """Ordered record of operations.

    ``debug=True`` checks every recorded output for NaN/Inf and raises
    ``FloatingPointError`` naming the offending node.

    With ``track_kinks=True``, ``kink_margin`` is the smallest distance seen
    between the input of a non-smooth op (relu, abs, max, nearest-neighbour
    selection) and its kink or runner-up. Gradient checks use it to reject
    configurations sitting on a tie.
    """

    def __init__(self, dtype=np.float64, debug=False, track_kinks=False):
        self.nodes = []
        self.dtype = np.dtype(dtype)
        self.debug = debug
        self.track_kinks = track_kinks
        self.kink_margin = np.inf

    def note_kink(self, margin):
        if margin < self.kink_margin:
            self.kink_margin = float(margin)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.release()
        return False

    def __len__(self):
        return len(self.nodes)

    def var(self, value, name=None):
        """A leaf tensor whose gradient can be requested."""
        arr = np.array(value, dtype=self.dtype, copy=True)
        t = Tensor(arr, self, "leaf", (), None, name)
        self._push(t)
        return t

    def const(self, value):
        return Tensor(np.asarray(value, dtype=self.dtype))

    def _push(self, t):
        t.id = len(self.nodes)
        self.nodes.append(t)

    def record(self, value, op, parents, vjp):
        if self.debug and not np.all(np.isfinite(value)):
            raise FloatingPointError(f"non-finite output from '{op}' at node {len(self.nodes)}")
        t = Tensor(value, self, op, parents, vjp)
        self._push(t)
        return t

    def release(self):
        """Drop all nodes and break closure cycles so arrays are freed promptly."""
        for n in self.nodes:
            n.vjp = None
            n.parents = ()
        self.nodes = []

    def _check_owned(self, t, what):
        if not isinstance(t, Tensor) or t.tape is not self or t.id < 0 or t.id >= len(self.nodes) \
                or self.nodes[t.id] is not t:
            raise ValueError(f"{what} is not a node on this tape")

    def grad(self, output, wrt, seed=None, create_graph=False):
        """Gradients of ``output`` (contracted with ``seed``) with respect to each tensor in ``wrt``.

        ``seed`` defaults to ones (so a scalar output gives the plain
        gradient). Tensors in ``wrt`` need not be leaves. Returns a list of
        arrays, or of tracked tensors when ``create_graph`` is set. A tensor
        that does not influence ``output`` gets zeros.
        """
        single = isinstance(wrt, Tensor)
        wrt = [wrt] if single else list(wrt)
        self._check_owned(output, "output")
        for w in wrt:
            self._check_owned(w, "gradient target")
        if seed is None:
            seed = np.ones(output.shape, dtype=output.dtype)
        seed_t = seed if isinstance(seed, Tensor) else Tensor(np.asarray(seed, dtype=output.dtype))
        if seed_t.shape != output.shape:
            raise ShapeError(f"seed shape {seed_t.shape} does not match output shape {output.shape}")

        lo = min(w.id for w in wrt)
        live = set(w.id for w in wrt)
        for node in self.nodes[lo:output.id + 1]:
            if node.id not in live and any(p.tape is self and p.id in live for p in node.parents):
                live.add(node.id)

        adj = {output.id: seed_t} if output.id in live else {}
        targets = set(w.id for w in wrt)
        done = {}
        with _recording(create_graph):
            for node in reversed(self.nodes[lo:output.id + 1]):
                g = adj.pop(node.id, None)
                if g is None:
                    continue
                if node.id in targets:
                    done[node.id] = g
                if not node.parents:
                    continue
                pgs = node.vjp(g)
                for p, pg in zip(node.parents, pgs):
                    if pg is None or not isinstance(p, Tensor) or p.tape is not self or p.id not in live:
                        continue
                    prev = adj.get(p.id)
                    adj[p.id] = pg if prev is None else prev + pg
        out = []
        for w in wrt:
            g = done.get(w.id)
            if g is None:
                g = Tensor(np.zeros(w.shape, dtype=w.dtype))
            out.append(g if create_graph else g.value)
        return out[0] if single else out

    def backward(self, output, seed=None):
        """Gradients for every leaf on the tape, keyed by node id."""
        leaves = [n for n in self.nodes[:output.id + 1] if n.op == "leaf"]
        if not leaves:
            return {}
        grads = self.grad(output, leaves, seed)
        return {leaf.id: g for leaf, g in zip(leaves, grads)}

    def jacobian(self, output, input):
        """Dense ``(output.size, input.size)`` Jacobian, one reverse sweep per output entry."""
        m, n = output.size, input.size
        jac = np.zeros((m, n), dtype=output.dtype)
        for k in range(m):
            seed = np.zeros(m, dtype=output.dtype)
            seed[k] = 1.0
            jac[k] = self.grad(output, input, seed.reshape(output.shape)).ravel()
        return jac


from . import ops  # noqa: E402  (operator methods above resolve through this module)
