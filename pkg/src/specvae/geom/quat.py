"""Unit quaternions stored as ``(w, x, y, z)`` arrays.

Functions accept a single quaternion of shape ``(4,)`` or a stack ``(..., 4)``.
"""
import numpy as np

from ..errors import ValidationError
from ..rng import make_rng

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

_AXES = {"x": 0, "y": 1, "z": 2}


def normalize(q):
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1] != 4:
        raise ValidationError(f"quaternion must have 4 components, got shape {q.shape}")
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm == 0.0) or not np.all(np.isfinite(norm)):
        raise ValidationError("zero or non-finite quaternion has no rotation")
    return q / norm


def to_matrix(q):
    """Rotation matrix of ``q`` (normalized first); column-vector convention ``v' = M v``."""
    w, x, y, z = np.moveaxis(normalize(q), -1, 0)
    m = np.stack([
        1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
    ], axis=-1)
    return m.reshape(m.shape[:-1] + (3, 3))


def multiply(a, b):
    """Hamilton product ``a ⊗ b``; ``to_matrix(a ⊗ b) == to_matrix(a) @ to_matrix(b)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    w1, x1, y1, z1 = np.moveaxis(a, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(b, -1, 0)
    return np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=-1)


def inverse(q):
    q = normalize(q)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def distance(q, p):
    """``1 - |q·p|`` between normalized quaternions; in [0, 1], zero iff same rotation."""
    d = np.abs(np.sum(normalize(q) * normalize(p), axis=-1))
    return 1.0 - np.minimum(d, 1.0)


def from_axis_angle(rotvec):
    """Quaternion of a Rodrigues vector (axis scaled by angle)."""
    v = np.asarray(rotvec, dtype=np.float64)
    angle = np.linalg.norm(v, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sin(a/2)/a -> 1/2 as a -> 0
    k = np.where(angle > 1e-12, np.sin(half) / np.where(angle > 1e-12, angle, 1.0), 0.5)
    return np.concatenate([np.cos(half), k * v], axis=-1)


def about_axis(angle, axis="y"):
    angle = np.asarray(angle, dtype=np.float64)
    out = np.zeros(angle.shape + (4,))
    out[..., 0] = np.cos(0.5 * angle)
    out[..., 1 + _AXES[axis]] = np.sin(0.5 * angle)
    return out


def random_height_rotation(angle_range, seed, axis="y", size=None):
    """Rotation about the height axis with angle uniform on ``angle_range``."""
    lo, hi = angle_range
    if lo > hi:
        raise ValidationError(f"empty angle range [{lo}, {hi}]")
    rng = make_rng(seed)
    angle = rng.uniform(lo, hi, size=size)
    return about_axis(angle, axis)


def rotation_angle(q):
    """Angle in [0, pi] of the rotation represented by ``q``."""
    w = np.abs(normalize(q)[..., 0])
    return 2.0 * np.arccos(np.minimum(w, 1.0))


def rotate_cloud(points, q):
    """Right-multiply each row of ``points`` by the matrix of ``q`` (``P @ R_M``)."""
    return np.asarray(points, dtype=np.float64) @ to_matrix(q)
