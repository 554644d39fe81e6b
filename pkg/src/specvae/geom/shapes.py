"""Reference meshes used by tests and the ``spectra`` command."""
import numpy as np

from .mesh import TriMesh


def icosahedron(edge=None):
    """Regular icosahedron, circumradius 1 unless ``edge`` is given."""
    p = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
        [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
        [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
    ], dtype=np.float64)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    if edge is None:
        v /= np.linalg.norm(v[0])
    else:
        v *= edge / 2.0
    return TriMesh(v, f)


def icosphere(subdivisions=3, radius=1.0):
    """Loop-style midpoint subdivision of the icosahedron projected to the sphere."""
    ico = icosahedron()
    verts = [tuple(v) for v in ico.vertices]
    faces = [tuple(f) for f in ico.triangles]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = (np.array(verts[i]) + np.array(verts[j])) / 2.0
                verts.append(tuple(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriMesh(radius * np.array(verts), np.array(faces))


def flat_disk(radius=1.0, rings=20):
    """Triangulated planar disk with concentric rings of vertices."""
    verts = [(0.0, 0.0, 0.0)]
    faces = []
    prev = [0]
    for r in range(1, rings + 1):
        n = 6 * r
        ang = 2 * np.pi * np.arange(n) / n
        start = len(verts)
        verts += [(radius * r / rings * np.cos(a), radius * r / rings * np.sin(a), 0.0) for a in ang]
        cur = list(range(start, start + n))
        # walk both rings by angle and emit triangles between them
        i = j = 0
        m = len(prev)
        while i < n or j < m:
            ti = (i + 1) / n if i < n else 2.0
            tj = (j + 1) / m if j < m else 2.0
            if ti <= tj:
                faces.append((cur[i % n], cur[(i + 1) % n], prev[j % m]))
                i += 1
            else:
                faces.append((prev[j % m], cur[i % n], prev[(j + 1) % m]))
                j += 1
        prev = cur
    faces = [f for f in faces if len(set(f)) == 3]
    return TriMesh(np.array(verts), np.array(faces))
