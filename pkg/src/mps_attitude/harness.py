"""Three-stage yaw maneuvers flown in closed loop, scored with the discrete cost.

A maneuver hovers (stage 1), spins the attitude reference at a constant
body rate ``omega0`` (stage 2), and once the reference ramp reaches
``psi0`` steps the reference back to zero heading (stage 3).  Scoring
covers exactly ``n_samples_stage3`` control steps starting at stage-3 entry.
"""

from __future__ import annotations

import csv
import io
import math
import os
from decimal import Decimal
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import quaternion as quat
from .control import (
    ControllerGains,
    ReferenceSample,
    attitude_error,
    reference_sample,
    sign_of_scalar,
    torque_benchmark,
    torque_continuous,
)
from .dynamics import BodyState, InertiaModel, integrate_step
from .mps import PfmWeights, SelectorConfig, SelectorState, mps_torque

CONTROLLERS = ("continuous", "benchmark", "mps")

TRAJECTORY_COLUMNS = (
    "t", "psi_d_rad", "psi_rad", "qw", "qx", "qy", "qz", "wx", "wy", "wz",
    "tau_x", "tau_y", "tau_z", "sigma", "delta_gamma",
)
SUMMARY_COLUMNS = ("spec_id", "controller", "trials", "gamma_mean", "gamma_esd", "switch_count_max")

HOVER = quat.IDENTITY


class DivergedState(RuntimeError):
    pass


class Stage3NeverEntered(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ManeuverSpec:
    omega0: tuple = (0.0, 0.0, 2.0)
    psi0: float = math.radians(170.0)
    stage1_duration: float = 0.5
    control_dt: float = 0.002
    n_samples_stage3: int = 1500
    name: str = ""

    def __post_init__(self):
        w = np.asarray(self.omega0, dtype=np.float64)
        if w.shape != (3,) or not np.all(np.isfinite(w)):
            raise ValueError(f"omega0 must be a finite 3-vector, got {self.omega0!r}")
        object.__setattr__(self, "omega0", tuple(float(x) for x in w))
        if not (0.0 < self.psi0 < 2.0 * math.pi):
            raise ValueError(f"psi0 must lie in (0, 2*pi), got {self.psi0!r}")
        if not self.control_dt > 0.0:
            raise ValueError(f"control_dt must be positive, got {self.control_dt!r}")
        if self.stage1_duration < 0.0:
            raise ValueError("stage1_duration must be non-negative")
        if int(self.n_samples_stage3) < 1:
            raise ValueError("n_samples_stage3 must be >= 1")

    @property
    def spin_rate(self) -> float:
        return float(np.linalg.norm(self.omega0))

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return f"w{self.spin_rate:g}_psi{math.degrees(self.psi0):g}"

    def ramp(self, t: float) -> float:
        """Stage-2 reference angle accumulated at time ``t`` (unwrapped)."""
        return self.spin_rate * (t - self.stage1_duration)

    def stage3_entry_step(self) -> int | None:
        """First control step whose reference ramp has reached ``psi0``; None if never."""
        if self.spin_rate == 0.0:
            return None
        dt = self.control_dt
        k = max(0, math.ceil((self.stage1_duration + self.psi0 / self.spin_rate) / dt))
        while k > 0 and (k - 1) * dt >= self.stage1_duration and self.ramp((k - 1) * dt) >= self.psi0:
            k -= 1
        while k * dt < self.stage1_duration or self.ramp(k * dt) < self.psi0:
            k += 1
        return k


@dataclass(frozen=True)
class Jitter:
    """Std-devs of the seeded initial perturbation: attitude angle (rad) and body rate (rad/s)."""

    attitude: float = 0.0
    rate: float = 0.0

    def initial_state(self, seed: int) -> BodyState:
        if self.attitude == 0.0 and self.rate == 0.0:
            return BodyState.at_rest(HOVER)
        rng = np.random.default_rng(seed)
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        angle = self.attitude * rng.standard_normal()
        omega = self.rate * rng.standard_normal(3)
        return BodyState(quat.hamilton_product(HOVER, quat.from_axis_angle(axis, angle)), omega)


def reference_at(spec: ManeuverSpec, t: float, q=None) -> ReferenceSample:
    """Reference sample at time ``t``.

    ``q`` is the measured attitude used to express the desired rate in the
    body frame; without it the frames are taken as aligned.
    """
    if t < 0.0:
        raise ValueError(f"t must be non-negative, got {t!r}")
    k3 = spec.stage3_entry_step()
    if t < spec.stage1_duration or (k3 is not None and t >= k3 * spec.control_dt):
        return ReferenceSample.hold(HOVER)
    w0 = np.asarray(spec.omega0)
    rate = spec.spin_rate
    if rate == 0.0:
        return ReferenceSample.hold(HOVER)
    q_d = quat.hamilton_product(HOVER, quat.from_axis_angle(w0 / rate, spec.ramp(t)))
    q_d_rate = 0.5 * quat.multiply(q_d, (0.0, *w0))
    return reference_sample(q_d if q is None else q, q_d, q_d_rate)


def gamma_exp(tau, n_e, weights: PfmWeights, T_s: float) -> float:
    """``Σ (τᵀRτ + n_eᵀQn_e)·T_s`` over sampled series."""
    tau = np.asarray(tau, dtype=np.float64).reshape(-1, 3)
    n_e = np.asarray(n_e, dtype=np.float64).reshape(-1, 3)
    if len(tau) != len(n_e):
        raise LengthMismatch(f"torque series has {len(tau)} samples, error series {len(n_e)}")
    per_sample = (np.einsum("ij,jk,ik->i", tau, weights.R, tau)
                  + np.einsum("ij,jk,ik->i", n_e, weights.Q, n_e))
    return float(per_sample.sum() * T_s)


def count_switches(sigma, initial=None) -> int:
    s = np.asarray(sigma)
    if initial is not None:
        s = np.concatenate(([initial], s))
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if x == 0.0:
        return "0"
    # 12 significant digits, never exponent notation
    return format(Decimal(f"{x:.11e}"), "f")


@dataclass
class RunRecord:
    spec: ManeuverSpec
    controller: str
    seed: int
    t: np.ndarray
    psi_d: np.ndarray
    psi: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    tau: np.ndarray
    n_e: np.ndarray
    m_e: np.ndarray
    sigma: np.ndarray
    delta_gamma: np.ndarray
    stage3_index: int
    gamma_exp: float
    switch_count: int

    @property
    def final_equilibrium(self) -> int:
        """Sign of the scalar error part at the end of the run (+1 or −1)."""
        return int(sign_of_scalar(self.m_e[-1]))

    def stage3(self, name: str) -> np.ndarray:
        return getattr(self, name)[self.stage3_index:]

    def unwrapped_yaw(self) -> np.ndarray:
        return np.unwrap(self.psi)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for i in range(len(self.t)):
            row = [self.t[i], self.psi_d[i], self.psi[i], *self.q[i], *self.omega[i],
                   *self.tau[i], int(self.sigma[i]), self.delta_gamma[i]]
            w.writerow([_fmt(v) for v in row])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def run_maneuver(spec: ManeuverSpec, controller: str = "mps", *,
                 gains: ControllerGains | None = None,
                 weights: PfmWeights | None = None,
                 selector: SelectorConfig | None = None,
                 inertia: InertiaModel | None = None,
                 seed: int = 0,
                 jitter: Jitter | None = None,
                 torque_limit: float | None = None,
                 omega_bound: float = 200.0) -> RunRecord:
    """Fly ``spec`` under one controller at the control rate and score stage 3."""
    if controller not in CONTROLLERS:
        raise ValueError(f"unknown controller {controller!r}; expected one of {CONTROLLERS}")
    inertia = inertia or InertiaModel.default()
    gains = gains or ControllerGains.from_inertia(inertia)
    weights = weights or PfmWeights.default()
    selector = selector or SelectorConfig()
    jitter = jitter or Jitter()

    k3 = spec.stage3_entry_step()
    if k3 is None:
        raise Stage3NeverEntered(f"maneuver {spec.label}: reference ramp never reaches psi0")
    n = k3 + int(spec.n_samples_stage3)
    dt = spec.control_dt

    t = np.empty(n)
    psi_d = np.empty(n)
    psi = np.empty(n)
    q_log = np.empty((n, 4))
    w_log = np.empty((n, 3))
    tau_log = np.empty((n, 3))
    ne_log = np.empty((n, 3))
    me_log = np.empty(n)
    sigma_log = np.empty(n, dtype=np.int64)
    dg_log = np.full(n, np.nan)

    state = jitter.initial_state(seed)
    sel = SelectorState.initial(selector)
    for k in range(n):
        tk = k * dt
        ref = reference_at(spec, tk, state.q)
        err = attitude_error(state.q, ref, state.omega)
        if controller == "mps":
            tau, sel = mps_torque(state, ref, sel, gains, inertia, weights, selector, torque_limit)
            sigma = sel.sigma
            dg_log[k] = sel.last_delta_gamma
        elif controller == "benchmark":
            tau = torque_benchmark(err, state, ref, gains, inertia)
            sigma = int(sign_of_scalar(err.m_e))
        else:
            tau = torque_continuous(err, state, ref, gains, inertia)
            sigma = 1
        if torque_limit is not None:
            tau = np.clip(tau, -torque_limit, torque_limit)

        t[k] = tk
        psi_d[k] = quat.yaw_of(ref.q_d)
        psi[k] = quat.yaw_of(state.q)
        q_log[k] = state.q
        w_log[k] = state.omega
        tau_log[k] = tau
        ne_log[k] = err.n_e
        me_log[k] = err.m_e
        sigma_log[k] = sigma

        state = integrate_step(state, tau, inertia, dt)
        if not np.linalg.norm(state.omega) <= omega_bound:
            raise DivergedState(
                f"maneuver {spec.label} ({controller}): |omega| exceeded {omega_bound} rad/s at t={tk + dt:.3f} s")

    gamma = gamma_exp(tau_log[k3:], ne_log[k3:], weights, dt)
    initial = selector.sigma_init if controller == "mps" else None
    return RunRecord(spec, controller, seed, t, psi_d, psi, q_log, w_log, tau_log, ne_log, me_log,
                     sigma_log, dg_log, k3, gamma, count_switches(sigma_log, initial))


@dataclass
class SweepCell:
    spec: ManeuverSpec
    controller: str
    gammas: list = field(default_factory=list)
    switch_counts: list = field(default_factory=list)
    equilibria: list = field(default_factory=list)
    error: str | None = None
    first_record: RunRecord | None = None

    @property
    def trials(self) -> int:
        return len(self.gammas)

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def mean(self) -> float:
        return float(np.mean(self.gammas)) if self.gammas and not self.failed else math.nan

    @property
    def esd(self) -> float:
        if self.failed or not self.gammas:
            return math.nan
        if len(self.gammas) == 1:
            return 0.0
        return float(np.std(self.gammas, ddof=1))

    @property
    def switch_count_max(self) -> int:
        return max(self.switch_counts) if self.switch_counts else 0


@dataclass
class Comparison:
    spec: ManeuverSpec
    baseline: SweepCell
    candidate: SweepCell

    @property
    def reduction(self) -> float:
        """``1 − Γ̄_candidate / Γ̄_baseline`` (NaN if either cell failed)."""
        if self.baseline.failed or self.candidate.failed:
            return math.nan
        return 1.0 - self.candidate.mean / self.baseline.mean

    @property
    def different_equilibria(self) -> bool:
        return set(self.baseline.equilibria) != set(self.candidate.equilibria)


@dataclass
class SweepSummary:
    cells: list
    comparisons: list

    @property
    def average_reduction(self) -> float:
        r = [c.reduction for c in self.comparisons]
        return float(np.mean(r)) if r else math.nan

    def cell(self, label: str, controller: str) -> SweepCell:
        for c in self.cells:
            if c.spec.label == label and c.controller == controller:
                return c
        raise KeyError((label, controller))

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for c in self.cells:
            if c.failed:
                w.writerow([c.spec.label, c.controller, c.trials, "FAILED", "FAILED", c.switch_count_max])
            else:
                w.writerow([c.spec.label, c.controller, c.trials, _fmt(c.mean), _fmt(c.esd), c.switch_count_max])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{'maneuver':<16}{'controller':<12}{'n':>4}{'mean':>14}{'esd':>14}{'switches':>10}"]
        for c in self.cells:
            mean = "FAILED" if c.failed else f"{c.mean:.4e}"
            esd = "FAILED" if c.failed else f"{c.esd:.4e}"
            lines.append(f"{c.spec.label:<16}{c.controller:<12}{c.trials:>4}{mean:>14}{esd:>14}{c.switch_count_max:>10}")
        lines.append("")
        for cmp in self.comparisons:
            lines.append(f"{cmp.spec.label:<16}reduction {cmp.candidate.controller} vs "
                         f"{cmp.baseline.controller}: {100.0 * cmp.reduction:7.2f} %"
                         + ("  (different equilibria)" if cmp.different_equilibria else ""))
        lines.append(f"average reduction: {100.0 * self.average_reduction:.2f} %")
        return "\n".join(lines)


def _run_job(args):
    spec, controller, seed, keep, kwargs = args
    try:
        rec = run_maneuver(spec, controller, seed=seed, **kwargs)
    except (DivergedState, Stage3NeverEntered) as exc:
        return None, f"{type(exc).__name__}: {exc}"
    return (rec.gamma_exp, rec.switch_count, rec.final_equilibrium, rec if keep else None), None


def run_sweep(specs, trials: int = 10, *, controllers=("benchmark", "mps"), seed: int = 0,
              jobs: int = 1, keep_first_record: bool = False, **run_kwargs) -> SweepSummary:
    """Run ``trials`` seeded runs per (maneuver, controller) and aggregate the costs.

    Trial ``i`` uses seed ``seed + i`` for every controller, so runs are paired.
    The first controller is the baseline of each comparison.  A failing run
    marks its whole cell as failed.  With ``keep_first_record`` each cell
    also keeps the full record of its first trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if len(controllers) < 1:
        raise ValueError("at least one controller is required")
    jobs_list = [(spec, ctrl, seed + i, keep_first_record and i == 0, run_kwargs)
                 for spec in specs for ctrl in controllers for i in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, os.cpu_count() or 1)) as pool:
            results = list(pool.map(_run_job, jobs_list))
    else:
        results = [_run_job(j) for j in jobs_list]

    cells = []
    it = iter(results)
    for spec in specs:
        for ctrl in controllers:
            cell = SweepCell(spec, ctrl)
            for _ in range(trials):
                res, err = next(it)
                if err is not None:
                    cell.error = cell.error or err
                    continue
                g, sw, eq, rec = res
                if rec is not None:
                    cell.first_record = rec
                cell.gammas.append(g)
                cell.switch_counts.append(sw)
                cell.equilibria.append(eq)
            cells.append(cell)

    comparisons = []
    if len(controllers) >= 2:
        n_c = len(controllers)
        for i, spec in enumerate(specs):
            row = cells[i * n_c:(i + 1) * n_c]
            comparisons.append(Comparison(spec, row[0], row[-1]))
    return SweepSummary(cells, comparisons)
