"""Attitude error and the quaternion-feedback torque laws.

All three laws share the structure

    τ = s·K_n·n_e + K_ω·ω_e + J·ω̇_d + ω × Jω

and differ only in the factor ``s`` on the proportional term: ``+1`` for the
continuous law, ``sgn(m_e)`` for the shorter-path benchmark, and an
externally selected ``σ ∈ {-1, +1}`` for the switched law.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import quaternion as quat
from .dynamics import BodyState, InertiaModel, cross

TANGENCY_TOL = 1e-6


class NonTangentRate(ValueError):
    """The quaternion rate has a component along the quaternion itself."""


class InvalidSigma(ValueError):
    pass


class AttitudeError(NamedTuple):
    m_e: float
    n_e: np.ndarray
    omega_e: np.ndarray

    @property
    def quaternion(self) -> np.ndarray:
        return np.concatenate(([self.m_e], self.n_e))


@dataclass(frozen=True)
class ReferenceSample:
    """Desired attitude ``q_d`` and its rate, plus the desired body rate and its derivative.

    ``omega_d`` and ``omega_d_rate`` are expressed in the actual body frame
    (see :func:`reference_sample`).
    """

    q_d: np.ndarray
    q_d_rate: np.ndarray
    omega_d: np.ndarray
    omega_d_rate: np.ndarray

    def __post_init__(self):
        q_d = quat.check_unit(self.q_d, "q_d")
        rate = np.asarray(self.q_d_rate, dtype=np.float64)
        if abs(float(q_d @ rate)) > 1e-9:
            raise NonTangentRate("q_d_rate is not tangent to q_d")
        object.__setattr__(self, "q_d", q_d)
        object.__setattr__(self, "q_d_rate", rate)
        object.__setattr__(self, "omega_d", np.asarray(self.omega_d, dtype=np.float64))
        object.__setattr__(self, "omega_d_rate", np.asarray(self.omega_d_rate, dtype=np.float64))

    @classmethod
    def hold(cls, q_d) -> "ReferenceSample":
        """Constant attitude reference with zero rates."""
        return cls(np.asarray(q_d, dtype=np.float64), np.zeros(4), np.zeros(3), np.zeros(3))


def _check_spd(M: np.ndarray, name: str) -> np.ndarray:
    M = np.array(M, dtype=np.float64)
    if M.shape != (3, 3):
        raise ValueError(f"{name} must be 3x3, got shape {M.shape}")
    if not np.allclose(M, M.T, rtol=1e-12, atol=0.0):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(M).min() <= 0.0:
        raise ValueError(f"{name} must be positive definite")
    return M


@dataclass(frozen=True)
class ControllerGains:
    K_n: np.ndarray
    K_omega: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K_n", _check_spd(self.K_n, "K_n"))
        object.__setattr__(self, "K_omega", _check_spd(self.K_omega, "K_omega"))

    @classmethod
    def from_inertia(cls, inertia: InertiaModel, kn: float = 900.0, kw: float = 90.0) -> "ControllerGains":
        """Gains as scalar multiples of the inertia matrix (``K_n = kn·J``, ``K_ω = kw·J``)."""
        return cls(kn * inertia.J, kw * inertia.J)


def desired_body_rate(q, q_d, q_d_rate) -> np.ndarray:
    """Desired angular velocity expressed in the actual body frame.

    The rate in the desired frame comes from ``[0, ω̂_d] = 2 q_d⁻¹ ⊗ q̇_d``
    and is then mapped through desired frame → inertial → body.
    """
    q = quat.check_unit(q, "q")
    q_d = quat.check_unit(q_d, "q_d")
    w_hat = 2.0 * quat.multiply(quat.conjugate(q_d), np.asarray(q_d_rate, dtype=np.float64))
    if abs(w_hat[0]) > TANGENCY_TOL:
        raise NonTangentRate(f"scalar part of 2 q_d^-1 ⊗ q_d_rate is {w_hat[0]!r}")
    return quat.rotation_matrix(q).T @ (quat.rotation_matrix(q_d) @ w_hat[1:])


def reference_sample(q, q_d, q_d_rate, omega_d_rate_hat=(0.0, 0.0, 0.0)) -> ReferenceSample:
    """Build a :class:`ReferenceSample` for a body currently at attitude ``q``.

    ``omega_d_rate_hat`` is given in the desired frame and goes through the
    same frame change as the desired rate.
    """
    omega_d = desired_body_rate(q, q_d, q_d_rate)
    S = quat.rotation_matrix(q).T @ quat.rotation_matrix(q_d)
    return ReferenceSample(q_d, q_d_rate, omega_d, S @ np.asarray(omega_d_rate_hat, dtype=np.float64))


def attitude_error(q, ref: ReferenceSample, omega) -> AttitudeError:
    """``q_e = q⁻¹ ⊗ q_d`` split as ``(m_e, n_e)``, and ``ω_e = ω_d − ω``."""
    q_e = quat.hamilton_product(quat.inverse(q), ref.q_d)
    return AttitudeError(float(q_e[0]), q_e[1:], ref.omega_d - np.asarray(omega, dtype=np.float64))


def _law(s: float, err: AttitudeError, state: BodyState, ref: ReferenceSample,
         gains: ControllerGains, inertia: InertiaModel) -> np.ndarray:
    w = state.omega
    return (s * (gains.K_n @ err.n_e) + gains.K_omega @ err.omega_e
            + inertia.J @ ref.omega_d_rate + cross(w, inertia.J @ w))


def torque_continuous(err, state, ref, gains, inertia) -> np.ndarray:
    return _law(1.0, err, state, ref, gains, inertia)


def sign_of_scalar(m_e: float) -> float:
    """``sgn`` with the tie ``sgn(0) = +1``."""
    return -1.0 if m_e < 0.0 else 1.0


def torque_benchmark(err, state, ref, gains, inertia) -> np.ndarray:
    """Continuous law with the proportional term scaled by ``sgn(m_e)`` (shorter rotation)."""
    return _law(sign_of_scalar(err.m_e), err, state, ref, gains, inertia)


def check_sigma(sigma) -> float:
    if sigma == 1:
        return 1.0
    if sigma == -1:
        return -1.0
    raise InvalidSigma(f"sigma must be -1 or +1, got {sigma!r}")


def torque_sigma(sigma, err, state, ref, gains, inertia) -> np.ndarray:
    return _law(check_sigma(sigma), err, state, ref, gains, inertia)
