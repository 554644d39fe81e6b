"""Height-field meshes from grayscale rasters (e.g. MNIST digits saved as PGM).

A vertex sits at every pixel, at ``x = col / W`` and ``y = (H - 1 - row) / W``,
so the image reads upright, and ``z = 0.1 * value``. Each pixel quad is split
along its lower-left to upper-right diagonal. Vertices with ``z < 0.01`` are
removed with their triangles. Then the largest connected component of the
edge graph is kept; ties go to the component met first in raster order.
"""
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..errors import MeshParseError, ValidationError
from ..geom.mesh import TriMesh

Z_SCALE = 0.1
Z_MIN = 0.01


def read_pgm(path):
    """P2 (ASCII) or P5 (binary) PGM as floats in ``[0, 1]`` (divided by maxval)."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise MeshParseError(f"not a PGM file (magic {magic!r})", 1, path)
    # header: magic, width, height, maxval separated by whitespace, '#' comments allowed
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MeshParseError("truncated PGM header", None, path)
        fields.append(int(data[start:pos]))
    w, h, maxval = fields
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise MeshParseError(f"bad PGM header {fields}", None, path)
    if magic == b"P5":
        pos += 1
        dtype = ">u2" if maxval > 255 else "u1"
        need = w * h * np.dtype(dtype).itemsize
        if len(data) - pos < need:
            raise MeshParseError("truncated PGM pixel data", None, path)
        img = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).astype(np.float64)
    else:
        vals = data[pos:].split()
        if len(vals) < w * h:
            raise MeshParseError(f"expected {w * h} pixels, found {len(vals)}", None, path)
        img = np.array([int(v) for v in vals[:w * h]], dtype=np.float64)
    return img.reshape(h, w) / maxval


def write_pgm(path, image):
    img = np.clip(np.round(np.asarray(image, dtype=np.float64) * 255), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def heightfield_mesh(image):
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < 2:
        raise ValidationError(f"raster must be 2-D with both sides >= 2, got {img.shape}")
    h, w = img.shape
    rows, cols = np.mgrid[0:h, 0:w]
    z = Z_SCALE * img
    verts = np.stack([cols / w, (h - 1 - rows) / w, z], axis=-1).reshape(-1, 3)
    idx = np.arange(h * w).reshape(h, w)
    ul, ur = idx[:-1, :-1], idx[:-1, 1:]
    ll, lr = idx[1:, :-1], idx[1:, 1:]
    tris = np.concatenate([
        np.stack([ll, lr, ur], axis=-1).reshape(-1, 3),
        np.stack([ll, ur, ul], axis=-1).reshape(-1, 3),
    ])
    keep = z.reshape(-1) >= Z_MIN
    if not keep.any():
        raise ValidationError("no pixel above the height threshold")

    # graph over kept vertices: horizontal, vertical and diagonal neighbours
    edges = []
    for a, b in ((idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :]), (ll, ur)):
        a, b = a.reshape(-1), b.reshape(-1)
        ok = keep[a] & keep[b]
        edges.append(np.stack([a[ok], b[ok]], axis=1))
    e = np.concatenate(edges)
    n = h * w
    graph = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, label = connected_components(graph, directed=False)
    kept_labels = label[keep]
    counts = np.bincount(kept_labels)
    # first label in raster order among the largest
    order = {}
    for lab in kept_labels:
        order.setdefault(lab, len(order))
    best = min((lab for lab in order if counts[lab] == counts.max()), key=order.get)
    in_comp = keep & (label == best)

    t = tris[in_comp[tris].all(axis=1)]
    if len(t) == 0:
        raise ValidationError("largest component above threshold has no triangles")
    # vertices only reachable through edges carry no area; drop them
    used = np.zeros(n, dtype=bool)
    used[t.reshape(-1)] = True
    remap = -np.ones(n, dtype=np.int64)
    remap[used] = np.arange(used.sum())
    return TriMesh(verts[used], remap[t])
