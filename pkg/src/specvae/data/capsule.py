"""Articulated capsules: a tube swept along a bent centerline, with hemispherical caps.

Intrinsic parameters ``beta = (L_1, ..., L_K, r)`` fix segment lengths and
tube radius. Articulation ``theta`` is one bend angle per interior joint, all
about the +z axis, so the centerline stays in the xy-plane. Each joint bends
along a circular arc of fixed length ``arc`` centered on the joint. This keeps
the centerline length and the surface area exact (Pappus). The metric
distorts on the inner and outer sides of the arc by a factor ``1 -/+ r*phi/arc``,
which a thin tube with a long arc keeps small. Bent and straight spectra then
agree to a percent or two.

Ring placement depends only on ``beta``, so capsules with equal ``beta`` share
connectivity.
"""
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..geom.mesh import TriMesh

BEND_AXIS = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class CapsuleParams:
    lengths: tuple
    radius: float
    bends: tuple = ()
    segments: int = 12
    spacing: float = 0.07        # ring spacing along the centerline
    arc: float = 0.8             # centerline length of each joint's bend
    bend_max: float = 1.2

    def __post_init__(self):
        L = tuple(float(x) for x in self.lengths)
        b = tuple(float(x) for x in self.bends)
        object.__setattr__(self, "lengths", L)
        object.__setattr__(self, "bends", b)
        if len(L) < 1:
            raise ValidationError("capsule needs at least one segment")
        if self.radius <= 0:
            raise ValidationError(f"radius must be positive, got {self.radius}")
        if len(b) != len(L) - 1:
            raise ValidationError(f"{len(L)} segments need {len(L) - 1} bend angles, got {len(b)}")
        for k, length in enumerate(L):
            if length <= 2 * self.radius:
                raise ValidationError(f"segment {k} length {length} must exceed 2r = {2 * self.radius}")
            # arcs borrow half their length from each neighbouring segment
            need = self.arc * (0.5 * (k > 0) + 0.5 * (k < len(L) - 1))
            if length <= need:
                raise ValidationError(f"segment {k} length {length} too short for joint arcs ({need})")
        for j, phi in enumerate(b):
            if abs(phi) > self.bend_max:
                raise ValidationError(f"bend {j} = {phi} exceeds bend_max {self.bend_max}")
        if self.arc <= 0 or self.spacing <= 0:
            raise ValidationError("arc and spacing must be positive")
        if self.segments < 3:
            raise ValidationError("need at least 3 segments around the tube")

    @property
    def beta(self):
        return np.array(self.lengths + (self.radius,))

    @property
    def theta(self):
        """Per-joint axis-angle vectors ``(K-1, 3)``."""
        return np.array([phi * BEND_AXIS for phi in self.bends]).reshape(-1, 3)


def _pieces(p):
    """Centerline pieces ``(length, curvature)`` from start to end."""
    L = p.lengths
    arc = p.arc
    out = []
    for k, length in enumerate(L):
        straight = length - 0.5 * arc * (k > 0) - 0.5 * arc * (k < len(L) - 1)
        out.append((straight, 0.0))
        if k < len(L) - 1:
            out.append((arc, p.bends[k] / arc))
    return out


def centerline(p, h):
    """Ring centers, headings and arc-length positions along the tube."""
    pos = np.zeros(2)
    psi = 0.0
    centers, heads, svals = [pos.copy()], [psi], [0.0]
    s = 0.0
    for length, kappa in _pieces(p):
        n = max(1, int(math.ceil(length / h - 1e-9)))
        ds = length / n
        for _ in range(n):
            psi1 = psi + kappa * ds
            if kappa == 0.0:
                pos = pos + ds * np.array([math.cos(psi), math.sin(psi)])
            else:
                pos = pos + np.array([math.sin(psi1) - math.sin(psi), math.cos(psi) - math.cos(psi1)]) / kappa
            psi = psi1
            s += ds
            centers.append(pos.copy())
            heads.append(psi)
            svals.append(s)
    c = np.zeros((len(centers), 3))
    c[:, :2] = centers
    return c, np.array(heads), np.array(svals)


def capsule_mesh(p):
    """Returns ``(TriMesh, beta, theta)``."""
    m = p.segments
    r = p.radius
    h = p.spacing
    centers, heads, _ = centerline(p, h)
    ang = 2 * math.pi * np.arange(m) / m
    ca, sa = np.cos(ang), np.sin(ang)

    def ring(center, psi, radius):
        t_n = np.array([-math.sin(psi), math.cos(psi), 0.0])
        return center + radius * (ca[:, None] * t_n + sa[:, None] * BEND_AXIS)

    def tangent(psi):
        return np.array([math.cos(psi), math.sin(psi), 0.0])

    n_cap = max(1, int(math.ceil(0.5 * math.pi * r / h - 1e-9)))
    gam = 0.5 * math.pi * np.arange(1, n_cap) / n_cap    # latitudes strictly between equator and pole

    rings = []
    t0 = tangent(heads[0])
    for g in gam[::-1]:
        rings.append(ring(centers[0] - r * math.sin(g) * t0, heads[0], r * math.cos(g)))
    for c, psi in zip(centers, heads):
        rings.append(ring(c, psi, r))
    t1 = tangent(heads[-1])
    for g in gam:
        rings.append(ring(centers[-1] + r * math.sin(g) * t1, heads[-1], r * math.cos(g)))

    pole0 = centers[0] - r * t0
    pole1 = centers[-1] + r * t1
    verts = np.vstack([pole0[None]] + rings + [pole1[None]])
    nr = len(rings)
    tris = []
    base = lambda k: 1 + k * m  # noqa: E731
    for j in range(m):
        tris.append((0, base(0) + (j + 1) % m, base(0) + j))
    for k in range(nr - 1):
        a, b = base(k), base(k + 1)
        for j in range(m):
            j1 = (j + 1) % m
            tris.append((a + j, a + j1, b + j1))
            tris.append((a + j, b + j1, b + j))
    last = len(verts) - 1
    for j in range(m):
        tris.append((last, base(nr - 1) + j, base(nr - 1) + (j + 1) % m))
    return TriMesh(verts, np.array(tris)), p.beta, p.theta


def capsule_area(lengths, radius):
    """Closed-form surface area: tube ``2 pi r L`` plus one full sphere."""
    return 2 * math.pi * radius * float(np.sum(lengths)) + 4 * math.pi * radius ** 2
