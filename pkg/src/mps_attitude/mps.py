"""Model predictive selection of the stabilized attitude-error equilibrium.

At every control step the closed loop is simulated over a finite horizon
twice, once with the proportional sign ``σ = +1`` (converge to
``q_e = +1``) and once with ``σ = -1`` (converge to ``q_e = -1``).  Each
prediction is scored with the quadratic cost

    Γ = ∫ (τ_σᵀ R τ_σ + n_eᵀ Q n_e) dt

and ``σ`` is switched with a hysteresis band ``δ`` on ``ΔΓ = Γ(+1) − Γ(−1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .control import (
    ControllerGains,
    ReferenceSample,
    _check_spd,
    attitude_error,
    check_sigma,
    torque_sigma,
)
from .dynamics import MAX_DT, BodyState, InertiaModel


class NonFiniteCost(ValueError):
    pass


@dataclass(frozen=True)
class PfmWeights:
    """Torque weight ``R`` and attitude-error weight ``Q`` of the cost."""

    R: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", _check_spd(self.R, "R"))
        object.__setattr__(self, "Q", _check_spd(self.Q, "Q"))

    @classmethod
    def default(cls) -> "PfmWeights":
        return cls(np.eye(3), 1e-6 * np.eye(3))


@dataclass(frozen=True)
class SelectorConfig:
    t_h: float = 0.4
    prediction_dt: float = 0.002
    delta: float = 5e-7
    sigma_init: int = 1

    def __post_init__(self):
        if not (0.0 < self.prediction_dt <= MAX_DT):
            raise ValueError(f"prediction_dt must be in (0, {MAX_DT}], got {self.prediction_dt!r}")
        if not self.t_h >= self.prediction_dt:
            raise ValueError(f"t_h must be >= prediction_dt, got {self.t_h!r}")
        if not (self.delta > 0.0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        check_sigma(self.sigma_init)

    @property
    def horizon_steps(self) -> int:
        return max(1, round(self.t_h / self.prediction_dt))


@dataclass(frozen=True)
class SelectorState:
    sigma: int = 1
    last_delta_gamma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "sigma", int(check_sigma(self.sigma)))

    @classmethod
    def initial(cls, cfg: SelectorConfig) -> "SelectorState":
        return cls(cfg.sigma_init, 0.0)


def rollout_cost(sigma, state: BodyState, ref: ReferenceSample, gains: ControllerGains,
                 inertia: InertiaModel, weights: PfmWeights, cfg: SelectorConfig,
                 torque_limit: float | None = None) -> float:
    """Predicted cost of holding ``sigma`` for ``cfg.horizon_steps`` steps.

    The full plant is propagated with RK4 under the switched law; the
    reference is held constant over the horizon.  The integrand is sampled
    at the start of each step (left Riemann sum).
    """
    s = check_sigma(sigma)
    limit = math.inf if torque_limit is None else float(torque_limit)
    return float(_kernels.rollout(
        s, state.q, state.omega, ref.q_d, ref.omega_d, ref.omega_d_rate,
        inertia.J, inertia.J_inv, gains.K_n, gains.K_omega, weights.R, weights.Q,
        float(cfg.prediction_dt), cfg.horizon_steps, limit,
    ))


def select_sigma(state: SelectorState, gamma_star: float, gamma_dagger: float, delta: float) -> SelectorState:
    """Hysteresis switch on ``ΔΓ = gamma_star − gamma_dagger``.

    Keeps ``σ`` inside the open band ``(−δ, δ)``; ``ΔΓ ≥ δ`` selects −1 and
    ``ΔΓ ≤ −δ`` selects +1.
    """
    if not (math.isfinite(gamma_star) and math.isfinite(gamma_dagger)):
        raise NonFiniteCost(f"costs must be finite, got {gamma_star!r}, {gamma_dagger!r}")
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    dg = gamma_star - gamma_dagger
    if dg >= delta:
        sigma = -1
    elif dg <= -delta:
        sigma = 1
    else:
        sigma = state.sigma
    return replace(state, sigma=sigma, last_delta_gamma=dg)


def mps_torque(state: BodyState, ref: ReferenceSample, selector: SelectorState,
               gains: ControllerGains, inertia: InertiaModel, weights: PfmWeights,
               cfg: SelectorConfig, torque_limit: float | None = None):
    """One control step: predict both costs, update ``σ``, return ``(τ_σ, new selector)``."""
    g_star = rollout_cost(1, state, ref, gains, inertia, weights, cfg, torque_limit)
    g_dagger = rollout_cost(-1, state, ref, gains, inertia, weights, cfg, torque_limit)
    selector = select_sigma(selector, g_star, g_dagger, cfg.delta)
    err = attitude_error(state.q, ref, state.omega)
    return torque_sigma(selector.sigma, err, state, ref, gains, inertia), selector
