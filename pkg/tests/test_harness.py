import csv
import io
import math

import numpy as np
import pytest

from mps_attitude import quaternion as quat
from mps_attitude.control import ControllerGains, ReferenceSample
from mps_attitude.dynamics import BodyState, InertiaModel
from mps_attitude.harness import (
    SUMMARY_COLUMNS,
    TRAJECTORY_COLUMNS,
    Comparison,
    DivergedState,
    Jitter,
    LengthMismatch,
    ManeuverSpec,
    Stage3NeverEntered,
    SweepCell,
    count_switches,
    gamma_exp,
    reference_at,
    run_maneuver,
    run_sweep,
)
from mps_attitude.mps import PfmWeights, SelectorConfig, rollout_cost
from oracles import quadratic_sum

SHORT = ManeuverSpec(omega0=(0, 0, 2.0), psi0=math.radians(170), stage1_duration=0.1, n_samples_stage3=300)


def test_spec_validation():
    with pytest.raises(ValueError):
        ManeuverSpec(psi0=0.0)
    with pytest.raises(ValueError):
        ManeuverSpec(psi0=2 * math.pi)
    with pytest.raises(ValueError):
        ManeuverSpec(omega0=(0, 0))
    with pytest.raises(ValueError):
        ManeuverSpec(control_dt=0.0)


def test_spec_label():
    assert ManeuverSpec().label == "w2_psi170"
    assert ManeuverSpec(omega0=(0, 0, 4), psi0=math.radians(90)).label == "w4_psi90"
    assert ManeuverSpec(name="custom").label == "custom"


def test_stage3_entry_step_is_first_crossing():
    spec = ManeuverSpec()
    k = spec.stage3_entry_step()
    assert spec.ramp(k * spec.control_dt) >= spec.psi0
    assert spec.ramp((k - 1) * spec.control_dt) < spec.psi0
    # 0.5 s hover + 170° at 2 rad/s ≈ 1.984 s
    assert k * spec.control_dt == pytest.approx(0.5 + math.radians(170) / 2.0, abs=spec.control_dt)


def test_stage3_entry_step_none_without_spin():
    assert ManeuverSpec(omega0=(0, 0, 0)).stage3_entry_step() is None


def test_reference_at_stages():
    spec = ManeuverSpec()
    k3 = spec.stage3_entry_step()
    r1 = reference_at(spec, 0.2)
    np.testing.assert_array_equal(r1.q_d, quat.IDENTITY)
    np.testing.assert_array_equal(r1.omega_d, 0.0)

    r2 = reference_at(spec, 1.0)
    assert quat.yaw_of(r2.q_d) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(r2.omega_d, [0, 0, 2.0], atol=1e-12)
    np.testing.assert_array_equal(r2.omega_d_rate, 0.0)

    r3 = reference_at(spec, k3 * spec.control_dt)
    np.testing.assert_array_equal(r3.q_d, quat.IDENTITY)
    np.testing.assert_array_equal(r3.omega_d, 0.0)
    r3_late = reference_at(spec, 100.0)
    np.testing.assert_array_equal(r3_late.q_d, quat.IDENTITY)


def test_reference_at_body_frame_rate():
    # desired spin about inertial z, expressed in the axes of a rolled body
    spec = ManeuverSpec()
    q = quat.from_axis_angle([1.0, 0, 0], math.pi / 2)
    r = reference_at(spec, 0.5, q)
    np.testing.assert_allclose(quat.rotate(q, r.omega_d), [0, 0, 2.0], atol=1e-12)


def test_reference_at_rejects_negative_time():
    with pytest.raises(ValueError):
        reference_at(ManeuverSpec(), -0.1)


def test_gamma_exp_single_sample():
    w = PfmWeights.default()
    assert gamma_exp([[1e-3, 0, 0]], [[0, 0, 0]], w, 0.002) == pytest.approx(2e-9, rel=1e-15)
    assert gamma_exp([[0, 0, 0]], [[0, 0, 1.0]], w, 0.002) == pytest.approx(2e-9, rel=1e-15)
    assert gamma_exp(np.zeros((0, 3)), np.zeros((0, 3)), w, 0.002) == 0.0


def test_gamma_exp_matches_oracle():
    rng = np.random.default_rng(4)
    tau = rng.standard_normal((500, 3)) * 1e-3
    n_e = rng.standard_normal((500, 3))
    A = rng.standard_normal((3, 3))
    w = PfmWeights(A @ A.T + np.eye(3), 1e-6 * np.eye(3))
    expected = quadratic_sum(tau.tolist(), n_e.tolist(), w.R.tolist(), w.Q.tolist(), 0.002)
    assert gamma_exp(tau, n_e, w, 0.002) == pytest.approx(expected, rel=1e-12)


def test_gamma_exp_length_mismatch():
    with pytest.raises(LengthMismatch):
        gamma_exp(np.zeros((3, 3)), np.zeros((2, 3)), PfmWeights.default(), 0.002)


def test_count_switches():
    assert count_switches([1, 1, 1]) == 0
    assert count_switches([1, -1, -1, 1]) == 2
    assert count_switches([-1, -1], initial=1) == 1
    assert count_switches([], initial=1) == 0


def test_jitter_is_seeded():
    j = Jitter(0.05, 0.1)
    a, b = j.initial_state(3), j.initial_state(3)
    np.testing.assert_array_equal(a.q, b.q)
    np.testing.assert_array_equal(a.omega, b.omega)
    assert not np.array_equal(a.q, j.initial_state(4).q)
    rest = Jitter().initial_state(9)
    np.testing.assert_array_equal(rest.q, quat.IDENTITY)


@pytest.fixture(scope="module")
def mps_record():
    return run_maneuver(SHORT, "mps")


def test_run_record_shapes_and_window(mps_record):
    rec = mps_record
    k3 = SHORT.stage3_entry_step()
    assert rec.stage3_index == k3
    assert len(rec.t) == k3 + 300
    assert len(rec.stage3("tau")) == 300
    np.testing.assert_allclose(np.diff(rec.t), SHORT.control_dt, rtol=1e-9)


def test_run_scores_stage3_window_only(mps_record):
    rec = mps_record
    expected = gamma_exp(rec.stage3("tau"), rec.stage3("n_e"), PfmWeights.default(), SHORT.control_dt)
    assert rec.gamma_exp == expected


def test_stage_latching(mps_record):
    # once in stage 3 the reference never returns to the ramp
    k3 = mps_record.stage3_index
    np.testing.assert_allclose(mps_record.psi_d[k3:], 0.0, atol=1e-15)
    assert mps_record.psi_d[k3 - 1] != 0.0


def test_mps_record_logs_delta_gamma(mps_record):
    assert np.all(np.isfinite(mps_record.delta_gamma))
    assert set(np.unique(mps_record.sigma)) <= {-1, 1}
    assert mps_record.switch_count == count_switches(mps_record.sigma, initial=1)


def test_benchmark_record_has_no_delta_gamma():
    rec = run_maneuver(SHORT, "benchmark")
    assert np.all(np.isnan(rec.delta_gamma))
    np.testing.assert_array_equal(rec.sigma, np.where(rec.m_e >= 0, 1, -1))


def test_continuous_gamma_matches_rollout_prediction():
    # with the reference held, the logged stage-3 cost equals the predicted one
    # for the same window, sigma = +1 being the continuous law
    spec = ManeuverSpec(stage1_duration=0.1, n_samples_stage3=200)
    rec = run_maneuver(spec, "continuous")
    k3 = rec.stage3_index
    state = BodyState(rec.q[k3], rec.omega[k3])
    ref = ReferenceSample.hold(quat.IDENTITY)
    inertia = InertiaModel.default()
    predicted = rollout_cost(1, state, ref, ControllerGains.from_inertia(inertia), inertia,
                             PfmWeights.default(), SelectorConfig(t_h=0.4))
    assert rec.gamma_exp == pytest.approx(predicted, rel=1e-9)


def test_run_is_deterministic():
    j = Jitter(0.05, 0.1)
    a = run_maneuver(SHORT, "mps", seed=7, jitter=j)
    b = run_maneuver(SHORT, "mps", seed=7, jitter=j)
    assert a.to_csv() == b.to_csv()
    assert a.gamma_exp == b.gamma_exp


def test_csv_layout(mps_record):
    text = mps_record.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == TRAJECTORY_COLUMNS
    assert len(rows) == len(mps_record.t) + 1
    assert rows[1][0] == "0"
    assert all("e" not in v.lower() or v in ("nan", "inf", "-inf") for r in rows[1:] for v in r)
    assert rows[-1][13] in ("1", "-1")
    np.testing.assert_allclose([float(r[2]) for r in rows[1:]], mps_record.psi, rtol=1e-11, atol=1e-300)


def test_unknown_controller():
    with pytest.raises(ValueError):
        run_maneuver(SHORT, "pid")


def test_diverged_state():
    with pytest.raises(DivergedState):
        run_maneuver(SHORT, "continuous", omega_bound=1.0)


def test_stage3_never_entered():
    with pytest.raises(Stage3NeverEntered):
        run_maneuver(ManeuverSpec(omega0=(0, 0, 0)), "mps")


def test_sweep_single_trial_esd_zero():
    summary = run_sweep([SHORT], trials=1, controllers=("benchmark", "mps"))
    for c in summary.cells:
        assert c.trials == 1
        assert c.esd == 0.0
    assert len(summary.comparisons) == 1


def test_sweep_zero_jitter_has_no_spread():
    summary = run_sweep([SHORT], trials=2, controllers=("benchmark",))
    cell = summary.cells[0]
    assert cell.gammas[0] == cell.gammas[1]
    assert cell.esd == 0.0
    assert summary.comparisons == []


def test_sweep_self_comparison_is_zero():
    summary = run_sweep([SHORT], trials=2, controllers=("mps", "mps"), jitter=Jitter(0.05, 0.1))
    assert summary.comparisons[0].reduction == 0.0
    assert summary.average_reduction == 0.0
    assert not summary.comparisons[0].different_equilibria


def test_sweep_failed_cell_marker():
    summary = run_sweep([SHORT], trials=1, controllers=("benchmark", "mps"), omega_bound=1.0)
    assert all(c.failed for c in summary.cells)
    rows = list(csv.reader(io.StringIO(summary.to_csv())))
    assert tuple(rows[0]) == SUMMARY_COLUMNS
    assert rows[1][3] == "FAILED"
    assert math.isnan(summary.comparisons[0].reduction)
    assert "FAILED" in summary.table()


def test_sweep_parallel_matches_serial():
    kw = dict(trials=2, controllers=("benchmark", "mps"), jitter=Jitter(0.05, 0.1), seed=3)
    serial = run_sweep([SHORT], jobs=1, **kw)
    parallel = run_sweep([SHORT], jobs=2, **kw)
    assert serial.to_csv() == parallel.to_csv()


def test_comparison_reduction():
    spec = ManeuverSpec()
    base = SweepCell(spec, "benchmark", gammas=[2.0, 2.0], equilibria=[1, 1])
    cand = SweepCell(spec, "mps", gammas=[1.0, 1.0], equilibria=[-1, -1])
    cmp = Comparison(spec, base, cand)
    assert cmp.reduction == 0.5
    assert cmp.different_equilibria
