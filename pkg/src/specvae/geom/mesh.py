"""Triangle meshes, OFF/OBJ/PLY input-output and area-weighted surface sampling."""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import MeshParseError, ValidationError
from ..rng import make_rng

log = logging.getLogger(__name__)

MIN_TRIANGLE_AREA = 1e-12


def triangle_areas(vertices, triangles):
    v = vertices[triangles]
    return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Vertices ``(V, 3)`` and triangles ``(F, 3)``, validated on construction.

    Indices must be in range, every triangle must have area above
    ``MIN_TRIANGLE_AREA`` and no triangle may appear twice (in any winding).
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValidationError(f"vertices must be (V, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3:
            if t.size == 0:
                t = t.reshape(0, 3)
            else:
                raise ValidationError(f"triangles must be (F, 3), got {t.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("non-finite vertex coordinates")
        if t.size:
            bad = np.flatnonzero((t < 0).any(axis=1) | (t >= len(v)).any(axis=1))
            if len(bad):
                raise ValidationError(
                    f"triangle {int(bad[0])} has vertex index out of range "
                    f"(indices {t[bad[0]].tolist()}, {len(v)} vertices)")
            areas = triangle_areas(v, t)
            degenerate = np.flatnonzero(areas <= MIN_TRIANGLE_AREA)
            if len(degenerate):
                raise ValidationError(
                    f"{len(degenerate)} degenerate triangle(s) with area <= {MIN_TRIANGLE_AREA}: "
                    f"{degenerate[:20].tolist()}")
            keys = np.sort(t, axis=1)
            _, first, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
            if (counts > 1).any():
                dup = int(first[np.argmax(counts > 1)])
                raise ValidationError(f"duplicate triangle {t[dup].tolist()}")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def areas(self):
        return triangle_areas(self.vertices, self.triangles)

    def area(self):
        return float(self.areas().sum())

    def transformed(self, matrix=None, scale=1.0, offset=None):
        """Copy with vertices mapped to ``scale * (v @ matrix.T) + offset``."""
        v = self.vertices
        if matrix is not None:
            v = v @ np.asarray(matrix).T
        v = scale * v
        if offset is not None:
            v = v + np.asarray(offset)
        return TriMesh(v, self.triangles)

    def bbox_diagonal(self):
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    def centroid(self):
        """Area-weighted surface centroid."""
        a = self.areas()
        centers = self.vertices[self.triangles].mean(axis=1)
        return (a[:, None] * centers).sum(axis=0) / a.sum()


def _tokens(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def _floats(tokens, lineno, path, count):
    try:
        vals = [float(x) for x in tokens[:count]]
    except ValueError:
        raise MeshParseError(f"expected {count} numbers, got {' '.join(tokens)!r}", lineno, path) from None
    if len(vals) < count:
        raise MeshParseError(f"expected {count} numbers, got {len(vals)}", lineno, path)
    return vals


def _ints(tokens, lineno, path):
    try:
        return [int(x) for x in tokens]
    except ValueError:
        raise MeshParseError(f"expected integers, got {' '.join(tokens)!r}", lineno, path) from None


def _read_off(path):
    lines = _tokens(path)
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise MeshParseError("empty file", None, path) from None
    if head[0] != "OFF":
        raise MeshParseError(f"expected header 'OFF', got {head[0]!r}", lineno, path)
    rest = head[1:]
    if not rest:
        try:
            lineno, rest = next(lines)
        except StopIteration:
            raise MeshParseError("missing element counts", None, path) from None
    counts = _ints(rest, lineno, path)
    if len(counts) < 2 or counts[0] < 0 or counts[1] < 0:
        raise MeshParseError("expected 'nV nF nE'", lineno, path)
    nv, nf = counts[:2]
    verts, tris = [], []
    for _ in range(nv):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise MeshParseError(f"file ends after {len(verts)} of {nv} vertices", None, path) from None
        verts.append(_floats(tok, lineno, path, 3))
    for _ in range(nf):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise MeshParseError(f"file ends after {len(tris)} of {nf} faces", None, path) from None
        face = _ints(tok, lineno, path)
        if face[0] != 3 or len(face) < 4:
            raise MeshParseError(f"only triangular faces are supported, got {face[0]}-gon", lineno, path)
        idx = face[1:4]
        if any(i < 0 or i >= nv for i in idx):
            raise MeshParseError(f"face index out of range in {idx} ({nv} vertices)", lineno, path)
        tris.append(idx)
    return np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(tris, dtype=np.int64).reshape(-1, 3)


def _read_obj(path):
    verts, tris, pending = [], [], []
    ignored = set()
    for lineno, tok in _tokens(path):
        kind = tok[0]
        if kind == "v":
            verts.append(_floats(tok[1:], lineno, path, 3))
        elif kind == "f":
            if len(tok) != 4:
                raise MeshParseError(f"only triangular faces are supported, got {len(tok) - 1} indices", lineno, path)
            idx = _ints([t.split("/")[0] for t in tok[1:]], lineno, path)
            tris.append([i - 1 for i in idx])
            pending.append(lineno)
        else:
            ignored.add(kind)
    for lineno, face in zip(pending, tris):
        if any(i < 0 or i >= len(verts) for i in face):
            raise MeshParseError(f"face index out of range in {[i + 1 for i in face]} ({len(verts)} vertices)",
                                 lineno, path)
    if ignored:
        log.warning("%s: ignored OBJ directives %s", path, sorted(ignored))
    return np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(tris, dtype=np.int64).reshape(-1, 3)


def load_mesh(path, format=None):
    """Read an OFF or OBJ triangle mesh; ``format`` defaults to the file suffix."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    if fmt == "OFF":
        v, t = _read_off(path)
    elif fmt == "OBJ":
        v, t = _read_obj(path)
    else:
        raise ValidationError(f"unsupported mesh format {fmt!r}")
    mesh = TriMesh(v, t)
    log.debug("loaded %s: %d vertices, %d triangles", path, mesh.n_vertices, mesh.n_triangles)
    return mesh


def save_off(mesh, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} 0\n")
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"{x!r} {y!r} {z!r}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"3 {i} {j} {k}\n")


def save_obj(mesh, path):
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"f {i + 1} {j + 1} {k + 1}\n")


def save_ply(points, path, depth_axis=2):
    """ASCII PLY point cloud with an extra per-vertex ``depth`` scalar (the ``depth_axis`` coordinate)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(points)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\nproperty float depth\n")
        fh.write("end_header\n")
        for p in points:
            fh.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g} {p[depth_axis]:.9g}\n")


def load_ply(path):
    """Read an ASCII PLY written by :func:`save_ply`; returns ``(points, depth)``."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "ply":
        raise MeshParseError("missing 'ply' magic", 1, path)
    if len(lines) < 2 or lines[1] != "format ascii 1.0":
        raise MeshParseError("only 'format ascii 1.0' is supported", 2, path)
    n, props, end = None, [], None
    for i, line in enumerate(lines[2:], start=3):
        tok = line.split()
        if tok[:2] == ["element", "vertex"]:
            n = int(tok[2])
        elif tok and tok[0] == "property":
            props.append(tok[-1])
        elif line == "end_header":
            end = i
            break
    if n is None or end is None:
        raise MeshParseError("incomplete header", None, path)
    body = lines[end:end + n]
    if len(body) != n:
        raise MeshParseError(f"expected {n} vertex rows, found {len(body)}", None, path)
    data = np.array([[float(x) for x in row.split()] for row in body]).reshape(n, len(props))
    cols = {name: data[:, i] for i, name in enumerate(props)}
    pts = np.stack([cols["x"], cols["y"], cols["z"]], axis=1)
    return pts, cols.get("depth")


def sample_surface(mesh, n, seed, return_faces=False):
    """``n`` points uniformly distributed over the surface (triangle ∝ area, uniform barycentrics).

    With ``return_faces`` the source triangle index of each point is returned too.
    """
    if n < 1:
        raise ValidationError(f"sample count must be >= 1, got {n}")
    if mesh.n_triangles == 0:
        raise ValidationError("cannot sample an empty mesh")
    rng = make_rng(seed)
    areas = mesh.areas()
    tri = rng.choice(mesh.n_triangles, size=n, p=areas / areas.sum())
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    corners = mesh.vertices[mesh.triangles[tri]]
    pts = ((1.0 - r1)[:, None] * corners[:, 0]
           + (r1 * (1.0 - r2))[:, None] * corners[:, 1]
           + (r1 * r2)[:, None] * corners[:, 2])
    if return_faces:
        return pts, tri
    return pts

