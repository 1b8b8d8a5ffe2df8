import math

import numpy as np
import pytest

from costas_lab.analysis import (
    LockCriterion,
    averaging_discrepancy,
    classic_equilibria,
    detect_lock,
    find_limit_cycles,
    ideal_lpf_error,
    pullin_probe,
    return_map,
)
from costas_lab.errors import InsufficientDataError, LayoutError
from costas_lab.experiments import (
    CARRIER_OMEGA,
    EX6_OMEGA_DELTA,
    EX6_THETA0,
    EX6_X0,
    baseline_params,
    _ex6_bracket,
    _ex6_params,
)
from costas_lab.integrators import IntegratorConfig, Trajectory, integrate
from costas_lab.models import ModelKind, pack_state

LPF_CUTOFF = 1.2566e6


def synthetic_classic_traj(theta_fn, n=200, t_end=1.0, g_const=0.0):
    p = baseline_params(CARRIER_OMEGA)
    times = np.linspace(0.0, t_end, n)
    states = np.zeros((n, 2))
    states[:, 0] = g_const
    states[:, 1] = theta_fn(times)
    return Trajectory(ModelKind.CLASSIC_PHASE_SPACE, p, times, states)


class TestDetectLock:
    def test_constant_theta_locks(self):
        traj = synthetic_classic_traj(lambda t: 0.42 * np.ones_like(t))
        rep = detect_lock(traj)
        assert rep.locked
        assert rep.steady_theta_delta == pytest.approx(0.42)
        assert rep.tail_mean_freq_error == pytest.approx(0.0, abs=1e-12)

    def test_drifting_theta_does_not_lock(self):
        traj = synthetic_classic_traj(lambda t: 100.0 * t)
        rep = detect_lock(traj)
        assert not rep.locked
        assert rep.tail_mean_freq_error == pytest.approx(100.0, rel=1e-9)
        assert rep.steady_theta_delta is None

    def test_bounded_oscillation_fails_span(self):
        # zero net drift but a wide swing: span criterion must catch it
        traj = synthetic_classic_traj(lambda t: np.sin(200.0 * np.pi * t))
        rep = detect_lock(traj)
        assert not rep.locked
        assert rep.tail_phase_span > 1.0

    def test_short_trajectory_rejected(self):
        traj = synthetic_classic_traj(lambda t: np.zeros_like(t), n=5)
        with pytest.raises(InsufficientDataError):
            detect_lock(traj)

    def test_loosening_tolerances_is_monotone(self):
        traj = synthetic_classic_traj(lambda t: 0.3 + 0.02 * np.sin(40.0 * np.pi * t))
        tight = LockCriterion(freq_tol=0.5, phase_drift_tol=0.01)
        loose = LockCriterion(freq_tol=5.0, phase_drift_tol=0.5)
        if detect_lock(traj, tight).locked:
            assert detect_lock(traj, loose).locked


@pytest.fixture(scope="module")
def ex2_black_traj():
    p = baseline_params(CARRIER_OMEGA - 2.0)
    k = ModelKind.SIGNAL_SPACE
    cfg = IntegratorConfig(t_end=5e-3, dt=2e-9, sample_dt=1e-6)
    return integrate(k, p, pack_state(k, p), cfg)


class TestLockOnRealRun:
    def test_locked_waveform_run(self, ex2_black_traj):
        rep = detect_lock(ex2_black_traj)
        assert rep.locked
        assert rep.tail_mean_freq_error < 1.0
        # residual double-frequency ripple stays under the default span budget
        assert rep.tail_phase_span < 0.05

    def test_arm_outputs_track_ideal_limits(self, ex2_black_traj):
        # the deviation is the double-frequency leakage of the arms, whose
        # first-order magnitude is cutoff/(2*omega1)/2; frozen with margin
        e1, e2 = ideal_lpf_error(ex2_black_traj)
        band = 0.6 * LPF_CUTOFF / (2.0 * CARRIER_OMEGA)
        assert e1 < band
        assert e2 < band


class TestIdealLpfError:
    def test_slow_locked_regime_is_tiny(self):
        p = baseline_params(CARRIER_OMEGA - 100.0)
        k = ModelKind.PHASE_SPACE
        traj = integrate(
            k, p, pack_state(k, p), IntegratorConfig(t_end=2e-3, dt=2e-8, sample_dt=1e-6)
        )
        assert detect_lock(traj).locked
        e1, e2 = ideal_lpf_error(traj)
        assert e1 < 1e-3 and e2 < 1e-3

    def test_stationary_point_exact(self):
        # frozen at the averaged model's stationary point the error is the
        # algebraic mismatch, which vanishes for unit-DC-gain arms
        p = baseline_params(CARRIER_OMEGA)
        k = ModelKind.PHASE_SPACE
        s = pack_state(k, p, x1=[0.5 / LPF_CUTOFF])
        times = np.linspace(0.0, 1.0, 50)
        traj = Trajectory(k, p, times, np.tile(s, (50, 1)))
        e1, e2 = ideal_lpf_error(traj)
        assert e1 < 1e-12 and e2 < 1e-12

    def test_requires_lowpass_states(self):
        traj = synthetic_classic_traj(lambda t: np.zeros_like(t))
        with pytest.raises(LayoutError):
            ideal_lpf_error(traj)


class TestAveragingDiscrepancy:
    def test_halving_with_carrier_doubling(self):
        p = baseline_params(CARRIER_OMEGA - 5e4)
        rows = averaging_discrepancy(
            p, [2.0 * math.pi * 2e5, 2.0 * math.pi * 4e5], 3e-4
        )
        ratio = rows[1].sup_theta_error / rows[0].sup_theta_error
        assert 0.3 <= ratio <= 0.7

    def test_zero_deviation_stays_small(self):
        p = baseline_params(CARRIER_OMEGA)
        rows = averaging_discrepancy(p, [CARRIER_OMEGA], 2e-4)
        # both models settle to the same lock state; only the fast ripple
        # of order L*h*phi/(2*omega1) remains
        assert rows[0].sup_theta_error < 0.2

    def test_condition_ratio_reported(self):
        p = baseline_params(CARRIER_OMEGA - 5e4)
        rows = averaging_discrepancy(p, [2.0 * math.pi * 2e5], 1e-4)
        assert rows[0].condition_ratio == pytest.approx(5e4 / (2.0 * math.pi * 2e5))


@pytest.fixture(scope="module")
def ex6_params():
    return _ex6_params(0.2, 0.06)


@pytest.fixture(scope="module")
def ex6_cycles(ex6_params):
    return find_limit_cycles(ex6_params, _ex6_bracket(ex6_params), EX6_THETA0, n_grid=65)


class TestReturnMap:
    def test_rotational_start_returns_finite_state(self, ex6_params):
        r = return_map(ex6_params, -0.01, EX6_THETA0)
        assert r.crossed
        assert math.isfinite(r.x_out)

    def test_capture_above_unstable_cycle(self, ex6_params):
        r = return_map(ex6_params, 0.024, EX6_THETA0)
        assert not r.crossed
        assert r.x_out is None

    def test_symmetry_under_deviation_negation(self, ex6_params):
        import dataclasses

        p_plus = ex6_params
        p_minus = dataclasses.replace(
            p_plus, omega2_free=p_plus.omega1 + EX6_OMEGA_DELTA
        )
        for x in np.linspace(-0.01, 0.008, 10):
            r_plus = return_map(p_plus, float(x), EX6_THETA0)
            r_minus = return_map(p_minus, float(-x), -EX6_THETA0)
            assert r_plus.crossed == r_minus.crossed
            if r_plus.crossed:
                assert r_minus.x_out == pytest.approx(-r_plus.x_out, abs=1e-9)


class TestFindLimitCycles:
    def test_pair_found_with_correct_stability(self, ex6_cycles):
        stable = [c for c in ex6_cycles.cycles if c.stable]
        unstable = [c for c in ex6_cycles.cycles if not c.stable]
        assert len(stable) == 1 and len(unstable) == 1
        assert stable[0].fixed_point_x < unstable[0].fixed_point_x
        assert abs(stable[0].multiplier) < 1.0 < abs(unstable[0].multiplier)

    def test_fixed_points_satisfy_return_map(self, ex6_params, ex6_cycles):
        for c in ex6_cycles.cycles:
            r = return_map(ex6_params, c.fixed_point_x, EX6_THETA0)
            assert r.crossed
            assert abs(r.x_out - c.fixed_point_x) < 1e-9

    def test_reproducible_under_halved_step(self, ex6_params, ex6_cycles):
        scale = max(
            abs(ex6_params.omega_delta_free),
            math.sqrt(ex6_params.vco_gain * float(ex6_params.loop_filter.c[0]) / 4.0),
        )
        dt_half = (math.pi / scale) / 6000.0
        rep2 = find_limit_cycles(
            ex6_params, _ex6_bracket(ex6_params), EX6_THETA0, n_grid=65, dt=dt_half
        )
        assert len(rep2.cycles) == len(ex6_cycles.cycles)
        for a, b in zip(ex6_cycles.cycles, rep2.cycles):
            assert abs(a.fixed_point_x - b.fixed_point_x) < 1e-7 * abs(a.fixed_point_x)

    def test_empty_report_without_rotational_cycles(self):
        # zero deviation: every trajectory is captured, no sign change
        p = _ex6_params(0.2, 0.06)
        import dataclasses

        p0 = dataclasses.replace(p, omega2_free=p.omega1)
        rep = find_limit_cycles(p0, (-0.03, -0.005), 0.0, n_grid=65)
        assert rep.cycles == ()


class TestPullinProbe:
    def test_zero_deviation_all_lock(self, ex6_params):
        k = ModelKind.CLASSIC_PHASE_SPACE
        ics = [
            pack_state(k, ex6_params, x=[x0], theta=th0)
            for x0 in (0.0, EX6_X0)
            for th0 in (0.0, EX6_THETA0)
        ]
        v = pullin_probe(ex6_params, [0.0], ics)[0]
        assert v.all_lock
        assert v.verdict == "all-lock"

    def test_pinned_deviation_escapes(self, ex6_params):
        k = ModelKind.CLASSIC_PHASE_SPACE
        ics = [
            pack_state(k, ex6_params, x=[x0], theta=th0)
            for x0 in (0.0, 0.005, EX6_X0)
            for th0 in (EX6_THETA0, 0.0)
        ]
        v = pullin_probe(ex6_params, [EX6_OMEGA_DELTA], ics)[0]
        assert not v.all_lock
        assert v.verdict == "some-escape"
        assert v.n_escaped >= 1


class TestClassicEquilibria:
    def test_integrator_loop_filter_equilibria(self):
        p = baseline_params(CARRIER_OMEGA - 100.0)
        eqs = classic_equilibria(p)
        assert len(eqs) == 2
        stable = {th: ok for th, _, ok in eqs}
        assert stable[0.0] is True
        assert stable[0.5 * math.pi] is False

    def test_lag_filter_hold_in_boundary(self, ex6_params):
        import dataclasses

        eqs = classic_equilibria(ex6_params)
        assert len(eqs) == 2
        assert any(ok for _, _, ok in eqs)
        # beyond the hold-in limit L*H(0)/8 = 125 no equilibria remain
        p_far = dataclasses.replace(
            ex6_params, omega2_free=ex6_params.omega1 - 130.0
        )
        assert classic_equilibria(p_far) == []
