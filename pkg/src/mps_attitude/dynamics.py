"""Rotational rigid-body plant: quaternion kinematics, Euler's equation, RK4 stepping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quaternion as quat

MAX_DT = 0.01

# Crazyflie-2.1-class placeholder, kg·m²
DEFAULT_INERTIA_DIAG = (1.66e-5, 1.66e-5, 2.93e-5)


class InvalidTimestep(ValueError):
    pass


@dataclass(frozen=True)
class BodyState:
    """Attitude ``q`` of the body frame in the inertial frame and body rate ``omega`` (rad/s)."""

    q: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        if abs(math.sqrt(float(q @ q)) - 1.0) > 1e-9:
            q = quat.normalize(quat.check_unit(q))
        omega = np.asarray(self.omega, dtype=np.float64)
        if omega.shape != (3,) or not np.all(np.isfinite(omega)):
            raise ValueError(f"omega must be a finite 3-vector, got {omega!r}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "omega", omega)

    @classmethod
    def at_rest(cls, q=quat.IDENTITY) -> "BodyState":
        return cls(np.array(q, dtype=np.float64), np.zeros(3))


@dataclass(frozen=True)
class InertiaModel:
    J: np.ndarray
    J_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        J = np.array(self.J, dtype=np.float64)
        if J.shape != (3, 3):
            raise ValueError(f"inertia must be 3x3, got shape {J.shape}")
        if not np.allclose(J, J.T, rtol=0.0, atol=1e-12 * np.abs(J).max()):
            raise ValueError("inertia matrix must be symmetric")
        if np.linalg.eigvalsh(J).min() <= 0.0:
            raise ValueError("inertia matrix must be positive definite")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "J_inv", np.linalg.inv(J))

    @classmethod
    def diagonal(cls, jx: float, jy: float, jz: float) -> "InertiaModel":
        return cls(np.diag([jx, jy, jz]))

    @classmethod
    def default(cls) -> "InertiaModel":
        return cls.diagonal(*DEFAULT_INERTIA_DIAG)


def cross(a, b) -> np.ndarray:
    """3-vector cross product (``np.cross`` is slow for single small vectors)."""
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def angular_acceleration(state: BodyState, tau, inertia: InertiaModel) -> np.ndarray:
    """``J⁻¹(τ − ω × Jω)``."""
    tau = np.asarray(tau, dtype=np.float64)
    if not np.all(np.isfinite(tau)):
        raise ValueError(f"torque must be finite, got {tau!r}")
    w = state.omega
    return inertia.J_inv @ (tau - cross(w, inertia.J @ w))


def _derivative(q, omega, tau, inertia):
    q_dot = 0.5 * quat.multiply(q, (0.0, omega[0], omega[1], omega[2]))
    w_dot = inertia.J_inv @ (tau - cross(omega, inertia.J @ omega))
    return q_dot, w_dot


def state_derivative(state: BodyState, tau, inertia: InertiaModel):
    """Return ``(q̇, ω̇)``; ``q̇ = ½ q ⊗ [0, ω]`` as a raw 4-vector."""
    quat.check_unit(state.q)
    q_dot = 0.5 * quat.multiply(state.q, (0.0, *state.omega))
    return q_dot, angular_acceleration(state, tau, inertia)


def integrate_step(state: BodyState, tau, inertia: InertiaModel, dt: float) -> BodyState:
    """Advance one step of classical RK4 with ``tau`` held constant; renormalizes ``q``."""
    if not (0.0 < dt <= MAX_DT):
        raise InvalidTimestep(f"dt must satisfy 0 < dt <= {MAX_DT}, got {dt!r}")
    tau = np.asarray(tau, dtype=np.float64)
    if not np.all(np.isfinite(tau)):
        raise ValueError(f"torque must be finite, got {tau!r}")
    q0, w0 = state.q, state.omega
    k1q, k1w = _derivative(q0, w0, tau, inertia)
    k2q, k2w = _derivative(q0 + 0.5 * dt * k1q, w0 + 0.5 * dt * k1w, tau, inertia)
    k3q, k3w = _derivative(q0 + 0.5 * dt * k2q, w0 + 0.5 * dt * k2w, tau, inertia)
    k4q, k4w = _derivative(q0 + dt * k3q, w0 + dt * k3w, tau, inertia)
    q1 = q0 + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    w1 = w0 + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    return BodyState(quat.normalize(q1), w1)


def kinetic_energy(state: BodyState, inertia: InertiaModel) -> float:
    return 0.5 * float(state.omega @ inertia.J @ state.omega)


def angular_momentum_inertial(state: BodyState, inertia: InertiaModel) -> np.ndarray:
    return quat.rotation_matrix(state.q) @ (inertia.J @ state.omega)
