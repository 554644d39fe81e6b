"""Parameter dictionaries, initialization, and the checkpoint format.

Checkpoint layout::

    b"SPECVAE-CKPT\\x00v1\\n"           magic, 16 bytes
    <u8 little-endian header length>
    <header: UTF-8 JSON>                {"config", "seed", "epoch", "dtype", "arrays": [[name, shape], ...], ...}
    <raw arrays>                        little-endian, C order, in header order
"""
import json
from pathlib import Path

import numpy as np

from ..errors import ValidationError

MAGIC = b"SPECVAE-CKPT\x00v1\n"
assert len(MAGIC) == 16


def dense_init(rng, fan_in, fan_out, gain=2.0):
    """Gaussian init with variance ``gain / fan_in`` (He for ``gain=2``)."""
    return rng.normal(0.0, np.sqrt(gain / fan_in), size=(fan_in, fan_out))


def init_mlp(params, rng, prefix, sizes, last_gain=1.0):
    """Add ``{prefix}.{k}.w`` / ``.b`` for consecutive widths in ``sizes``."""
    n = len(sizes) - 1
    for k in range(n):
        gain = last_gain if k == n - 1 else 2.0
        params[f"{prefix}.{k}.w"] = dense_init(rng, sizes[k], sizes[k + 1], gain)
        params[f"{prefix}.{k}.b"] = np.zeros(sizes[k + 1])
    return params


def n_layers(params, prefix):
    k = 0
    while f"{prefix}.{k}.w" in params:
        k += 1
    return k


def count(params):
    return int(sum(np.asarray(v).size for v in params.values()))


def save_checkpoint(path, params, header=None):
    """Write ``params`` (name -> array) with a JSON ``header`` dict."""
    names = list(params)
    arrays = [np.ascontiguousarray(np.asarray(params[k], dtype=np.float64)) for k in names]
    head = dict(header or {})
    head["dtype"] = "<f8"
    head["arrays"] = [[k, list(a.shape)] for k, a in zip(names, arrays)]
    blob = json.dumps(head, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for a in arrays:
            fh.write(a.astype("<f8").tobytes())
    tmp.replace(path)


def load_checkpoint(path):
    """Returns ``(params, header)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:16] != MAGIC:
        raise ValidationError(f"{path}: not a checkpoint (bad magic)")
    hlen = int.from_bytes(data[16:24], "little")
    head = json.loads(data[24:24 + hlen].decode("utf-8"))
    off = 24 + hlen
    params = {}
    for name, shape in head["arrays"]:
        size = int(np.prod(shape)) if shape else 1
        nbytes = 8 * size
        if off + nbytes > len(data):
            raise ValidationError(f"{path}: truncated checkpoint at array {name!r}")
        params[name] = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).astype(np.float64)
        off += nbytes
    return params, head
