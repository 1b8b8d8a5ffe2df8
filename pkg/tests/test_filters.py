import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from costas_lab.errors import LayoutError, ParameterError
from costas_lab.filters import (
    FilterSS,
    dc_gain,
    filter_output,
    impulse_response,
    make_first_order_lowpass,
    make_lag_lead_filter,
    make_pi_loop_filter,
    zero_input_response,
)
from costas_lab.integrators import integrate_ode

OMEGA3 = 1.2566e6  # rad/s
TAU1 = 2e-5  # s
TAU2 = 3.9789e-6  # s


class TestConstructors:
    def test_lowpass_realization(self):
        f = make_first_order_lowpass(OMEGA3, 1.0)
        assert f.A[0, 0] == -OMEGA3
        assert f.b[0] == 1.0
        assert f.c[0] == OMEGA3
        assert f.h == 0.0
        assert f.requires_stable

    def test_lowpass_dc_gain(self):
        assert dc_gain(make_first_order_lowpass(OMEGA3, 1.0)) == pytest.approx(1.0, rel=1e-14)
        assert dc_gain(make_first_order_lowpass(OMEGA3, 2.0)) == pytest.approx(2.0, rel=1e-14)

    def test_pi_realization(self):
        f = make_pi_loop_filter(TAU1, TAU2)
        assert f.A[0, 0] == 0.0
        assert f.b[0] == 1.0
        assert f.c[0] == pytest.approx(5e4, rel=1e-12)
        assert f.h == pytest.approx(0.198945, rel=1e-12)
        assert not f.requires_stable

    def test_lag_lead_realization(self):
        f = make_lag_lead_filter(0.2, 0.06)
        assert f.A[0, 0] == pytest.approx(-5.0)
        assert f.h == pytest.approx(0.3)
        assert dc_gain(f) == pytest.approx(1.0, rel=1e-14)

    @pytest.mark.parametrize("omega3, gain", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
    def test_lowpass_rejects_bad_values(self, omega3, gain):
        with pytest.raises(ParameterError):
            make_first_order_lowpass(omega3, gain)

    def test_pi_rejects_bad_tau(self):
        with pytest.raises(ParameterError):
            make_pi_loop_filter(0.0, 1.0)
        with pytest.raises(ParameterError):
            make_pi_loop_filter(1.0, -1.0)

    def test_stability_flag_enforced(self):
        with pytest.raises(ParameterError):
            FilterSS(A=[[1.0]], b=[1.0], c=[1.0], requires_stable=True)
        with pytest.raises(ParameterError):
            FilterSS(A=[[0.0]], b=[1.0], c=[1.0], requires_stable=True)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ParameterError):
            FilterSS(A=np.zeros((2, 2)), b=[1.0], c=[1.0, 0.0])


class TestFilterOutput:
    def test_pi_feedthrough(self):
        f = make_pi_loop_filter(TAU1, TAU2)
        assert filter_output(f, [0.0], 1.0) == pytest.approx(0.198945, rel=1e-12)

    def test_zero_everything(self):
        for f in (make_pi_loop_filter(TAU1, TAU2), make_first_order_lowpass(OMEGA3)):
            assert filter_output(f, np.zeros(1), 0.0) == 0.0

    def test_lowpass_state_scaling(self):
        f = make_first_order_lowpass(OMEGA3, 1.0)
        assert filter_output(f, [0.02], 0.0) == pytest.approx(25132.0, rel=1e-12)

    def test_state_length_checked(self):
        f = make_first_order_lowpass(OMEGA3)
        with pytest.raises(LayoutError):
            filter_output(f, [0.0, 0.0], 0.0)


class TestZeroInputResponse:
    def test_at_zero_time(self):
        f = make_first_order_lowpass(OMEGA3)
        assert zero_input_response(f, [0.02], 0.0) == pytest.approx(25132.0, rel=1e-12)

    def test_zero_state(self):
        f = make_pi_loop_filter(TAU1, TAU2)
        assert zero_input_response(f, [0.0], 123.0) == 0.0

    def test_five_time_constants(self):
        f = make_first_order_lowpass(OMEGA3)
        expected = 25132.0 * math.exp(-5.0)
        got = zero_input_response(f, [0.02], 5.0 / OMEGA3)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_second_order_block_matches_closed_form(self):
        # undamped-ish oscillator block: closed-form zero-input response
        w0, zeta = 3.0, 0.25
        wd = w0 * math.sqrt(1.0 - zeta**2)
        f = FilterSS(
            A=[[0.0, 1.0], [-w0**2, -2.0 * zeta * w0]],
            b=[0.0, 1.0],
            c=[1.0, 0.0],
            requires_stable=True,
        )
        for t in (0.0, 0.3, 1.7):
            expected = math.exp(-zeta * w0 * t) * (
                math.cos(wd * t) + zeta * w0 / wd * math.sin(wd * t)
            )
            assert zero_input_response(f, [1.0, 0.0], t) == pytest.approx(
                expected, rel=1e-12, abs=1e-14
            )

    @given(
        t1=st.floats(0.0, 10.0),
        dt=st.floats(0.0, 10.0),
        x0=st.floats(-100.0, 100.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_stable_response_decays(self, t1, dt, x0):
        f = make_first_order_lowpass(2.0)
        sigma = 2.0  # spectral abscissa magnitude
        a1 = abs(zero_input_response(f, [x0], t1))
        a2 = abs(zero_input_response(f, [x0], t1 + dt))
        assert a2 <= a1 * math.exp(-sigma * dt) * (1.0 + 1e-12) + 1e-300


class TestImpulseResponse:
    def test_lowpass_at_zero(self):
        f = make_first_order_lowpass(OMEGA3)
        assert impulse_response(f, 0.0) == pytest.approx(OMEGA3, rel=1e-14)

    def test_pi_is_constant(self):
        f = make_pi_loop_filter(TAU1, TAU2)
        for t in (0.0, 1e-6, 1.0):
            assert impulse_response(f, t) == pytest.approx(5e4, rel=1e-14)

    def test_lowpass_matches_analytic_over_grid(self):
        f = make_first_order_lowpass(OMEGA3)
        for t in np.linspace(0.0, 10.0 / OMEGA3, 101):
            expected = OMEGA3 * math.exp(-OMEGA3 * t)
            assert impulse_response(f, t) == pytest.approx(expected, rel=1e-12)

    def test_one_time_constant(self):
        f = make_first_order_lowpass(OMEGA3)
        assert impulse_response(f, 1.0 / OMEGA3) == pytest.approx(
            OMEGA3 * math.exp(-1.0), rel=1e-12
        )


class TestStepResponses:
    """Simulated step responses must match the analytic forms."""

    def test_pi_step_response_analytic_point(self):
        # unit step: g(t) = h + t/tau1
        f = make_pi_loop_filter(TAU1, TAU2)
        t = 1e-5
        ts, xs = integrate_ode(lambda tt, x: f.A @ x + f.b, np.zeros(1), t, rel_tol=1e-10)
        g = filter_output(f, xs[-1], 1.0)
        assert g == pytest.approx(0.198945 + 0.5, rel=1e-9)

    @pytest.mark.parametrize("gain", [1.0, 2.0])
    def test_lowpass_step_response(self, gain):
        f = make_first_order_lowpass(OMEGA3, gain)
        t_end = 5.0 / OMEGA3
        ts, xs = integrate_ode(
            lambda tt, x: f.A @ x + f.b, np.zeros(1), t_end, rel_tol=1e-10, abs_tol=1e-16
        )
        for t, x in zip(ts[1:], xs[1:]):
            expected = gain * (1.0 - math.exp(-OMEGA3 * t))
            assert filter_output(f, x, 1.0) == pytest.approx(expected, rel=1e-6)

    def test_pure_integrator_accumulates(self):
        f = make_pi_loop_filter(1.0, 0.0)
        t_end = 2.0
        ts, xs = integrate_ode(lambda tt, x: f.A @ x + f.b, np.zeros(1), t_end, rel_tol=1e-10)
        assert filter_output(f, xs[-1], 1.0) == pytest.approx(t_end, rel=1e-9)
