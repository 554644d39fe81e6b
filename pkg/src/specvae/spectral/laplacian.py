"""Cotangent-weight stiffness and lumped mass matrices of a triangle mesh."""
import logging

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

COT_CLAMP = 1e4
MIN_ANGLE = 1e-4


def corner_cotangents(vertices, triangles):
    """Cotangent of the angle at each triangle corner, shape ``(F, 3)``, plus the clamp count."""
    v = vertices[triangles]
    cots = np.empty((len(triangles), 3))
    n_clamped = 0
    for c in range(3):
        u = v[:, (c + 1) % 3] - v[:, c]
        w = v[:, (c + 2) % 3] - v[:, c]
        dot = np.einsum("ij,ij->i", u, w)
        cross = np.linalg.norm(np.cross(u, w), axis=1)
        ang = np.arctan2(cross, dot)
        small = (ang < MIN_ANGLE) | (ang > np.pi - MIN_ANGLE)
        n_clamped += int(small.sum())
        cots[:, c] = np.clip(dot / cross, -COT_CLAMP, COT_CLAMP)
    return cots, n_clamped


def cotangent_laplacian(mesh):
    """Return ``(W, mass)``: sparse PSD stiffness (rows sum to zero) and the lumped mass diagonal.

    ``W[i, j] = -(cot a_ij + cot b_ij) / 2`` over the triangles sharing edge
    ``ij`` (one term on a boundary edge) and ``W[i, i] = -sum_j W[i, j]``.
    ``mass[i]`` is a third of the area of the triangles incident to ``i``.
    """
    verts, tris = mesh.vertices, mesh.triangles
    n = len(verts)
    cots, n_clamped = corner_cotangents(verts, tris)
    if n_clamped:
        log.warning("cotangent clamped at %g for %d near-degenerate corner(s)", COT_CLAMP, n_clamped)
    rows, cols, vals = [], [], []
    for c in range(3):
        i = tris[:, (c + 1) % 3]
        j = tris[:, (c + 2) % 3]
        w = -0.5 * cots[:, c]
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    off = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    stiffness = (off + sp.diags(diag)).tocsr()
    mass = np.zeros(n)
    np.add.at(mass, tris.ravel(), np.repeat(mesh.areas() / 3.0, 3))
    return stiffness, mass
