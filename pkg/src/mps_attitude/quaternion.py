"""Unit-quaternion algebra.

Quaternions are plain ``numpy`` arrays of shape ``(4,)`` in scalar-first
order ``[w, x, y, z]``.  A quaternion ``q`` describes the attitude of a body
frame relative to the inertial frame, so ``rotation_matrix(q)`` maps
body-frame vectors into the inertial frame.  Products compose right to left
in the body frame: ``q_ab ⊗ q_bc = q_ac``.

``q`` and ``-q`` are the same physical rotation.  Nothing in this module
flips signs behind the caller's back; the sign is what the attitude
controllers key on.
"""

from __future__ import annotations

import math
import warnings
from typing import NamedTuple

import numpy as np

UNIT_TOL = 1e-6
_AXIS_EPS = 1e-12
_GIMBAL_EPS = 1e-6

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


class NonUnitInput(ValueError):
    """A quaternion argument is not of unit norm."""


class NonUnitAxis(ValueError):
    """An axis-angle rotation axis is not of unit length."""


class GimbalDegenerate(RuntimeWarning):
    """Heading is undefined because the body x-axis points (almost) vertically."""


class AxisAngle(NamedTuple):
    axis: np.ndarray
    angle: float


def check_unit(q, name: str = "q") -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise NonUnitInput(f"{name} must have shape (4,), got {q.shape}")
    n = math.sqrt(float(q @ q))
    if not math.isfinite(n) or abs(n - 1.0) > UNIT_TOL:
        raise NonUnitInput(f"{name} has norm {n!r}, expected 1")
    return q


def normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q / math.sqrt(float(q @ q))


def multiply(a, b) -> np.ndarray:
    """Raw Hamilton product of two arbitrary 4-vectors (no checks, no renormalization)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def hamilton_product(a, b) -> np.ndarray:
    """Return the unit quaternion ``a ⊗ b``, renormalized."""
    a = check_unit(a, "a")
    b = check_unit(b, "b")
    return normalize(multiply(a, b))


def conjugate(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def inverse(q) -> np.ndarray:
    """Inverse of a unit quaternion, which is its conjugate."""
    return conjugate(check_unit(q))


def from_axis_angle(axis, angle: float) -> np.ndarray:
    """``[cos(angle/2), axis*sin(angle/2)]``.

    ``angle`` is not wrapped: ``angle = 2π`` gives ``[-1, 0, 0, 0]``.
    """
    axis = np.asarray(axis, dtype=np.float64)
    n = float(np.linalg.norm(axis))
    if axis.shape != (3,) or not math.isfinite(n) or abs(n - 1.0) > UNIT_TOL:
        raise NonUnitAxis(f"rotation axis must be a unit 3-vector, got {axis!r}")
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle!r}")
    half = 0.5 * angle
    return normalize(np.concatenate(([math.cos(half)], axis * math.sin(half))))


def to_axis_angle(q) -> AxisAngle:
    """Axis and angle in ``[0, 2π)``; the axis defaults to +z for a null rotation."""
    q = check_unit(q)
    v = q[1:]
    s = float(np.linalg.norm(v))
    angle = 2.0 * math.atan2(s, q[0])
    if angle >= 2.0 * math.pi:
        angle -= 2.0 * math.pi
    if s < _AXIS_EPS:
        return AxisAngle(np.array([0.0, 0.0, 1.0]), angle)
    return AxisAngle(v / s, angle)


def rotation_matrix(q) -> np.ndarray:
    """Body-to-inertial rotation matrix of ``q`` (identical for ``q`` and ``-q``)."""
    w, x, y, z = check_unit(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rotate(q, vec) -> np.ndarray:
    return rotation_matrix(q) @ np.asarray(vec, dtype=np.float64)


def yaw_of(q) -> float:
    """Heading of the body x-axis in the inertial horizontal plane, in (-π, π].

    Reporting only.  If the x-axis is within 1e-6 rad of vertical the
    heading is undefined: a :class:`GimbalDegenerate` warning is issued and
    0.0 is returned.
    """
    w, x, y, z = check_unit(q)
    hx = 1 - 2 * (y * y + z * z)
    hy = 2 * (x * y + w * z)
    if math.hypot(hx, hy) < math.sin(_GIMBAL_EPS):
        warnings.warn("body x-axis is vertical; yaw undefined", GimbalDegenerate, stacklevel=2)
        return 0.0
    psi = math.atan2(hy, hx)
    return math.pi if psi == -math.pi else psi
