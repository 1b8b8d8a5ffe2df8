import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from costas_lab import _kernels as K
from costas_lab.errors import LayoutError
from costas_lab.experiments import CARRIER_OMEGA, baseline_params
from costas_lab.models import (
    DataSignal,
    ModelKind,
    ideal_lpf_outputs,
    initial_frequency_difference,
    pack_state,
    pd_characteristic,
    rhs,
    rhs_classic,
    rhs_modified_signal,
    rhs_phase_space,
    rhs_signal_space,
    rhs_simplified_signal,
    state_layout,
)

OMEGA3 = 1.2566e6
L_GAIN = 4.8e6

P = baseline_params(CARRIER_OMEGA - 2.0)
ALL_KINDS = list(ModelKind)


class TestPdCharacteristic:
    def test_zero(self):
        assert pd_characteristic(0.0) == 0.0

    def test_peak_value_exact(self):
        assert pd_characteristic(math.pi / 4.0) == 0.125

    @given(st.floats(-1e3, 1e3))
    @settings(max_examples=200, deadline=None)
    def test_odd(self, theta):
        assert pd_characteristic(-theta) == pytest.approx(
            -pd_characteristic(theta), abs=1e-15
        )

    @given(st.floats(-1e3, 1e3))
    @settings(max_examples=200, deadline=None)
    def test_pi_periodic(self, theta):
        assert pd_characteristic(theta + math.pi) == pytest.approx(
            pd_characteristic(theta), abs=1e-12
        )

    def test_equal_across_half_turn(self):
        assert pd_characteristic(0.3) == pytest.approx(
            pd_characteristic(0.3 + math.pi), abs=1e-15
        )


class TestIdealLpfOutputs:
    def test_locked_no_inversion(self):
        assert ideal_lpf_outputs(0.0, 1.0) == (0.5, 0.0)

    def test_quadrature(self):
        g1, g2 = ideal_lpf_outputs(math.pi / 2.0, 1.0)
        assert g1 == pytest.approx(0.0, abs=1e-16)
        assert g2 == pytest.approx(0.5)

    def test_product_matches_detector(self):
        g1, g2 = ideal_lpf_outputs(math.pi / 4.0, 1.0)
        assert g1 * g2 == pytest.approx(pd_characteristic(math.pi / 4.0), rel=1e-15)
        assert g1 * g2 == pytest.approx(0.125, rel=1e-12)


class TestDataSignal:
    def test_sign_zero_is_plus_one(self):
        m = DataSignal.periodic_square(2.0 * math.pi * 1e5)
        assert m.value(0.0) == 1.0

    def test_transition_period(self):
        m = DataSignal.periodic_square(2.0 * math.pi * 1e5)
        assert m.transition_period == pytest.approx(5e-6)
        assert DataSignal.constant_one().transition_period is None

    @given(st.floats(0.0, 1e-3))
    @settings(max_examples=100, deadline=None)
    def test_unit_magnitude(self, t):
        m = DataSignal.periodic_square(2.0 * math.pi * 1e5)
        assert m.value(t) ** 2 == 1.0

    def test_flips_between_half_periods(self):
        m = DataSignal.periodic_square(2.0 * math.pi * 1e5)
        assert m.value(2.5e-6) == 1.0
        assert m.value(7.5e-6) == -1.0


class TestLayouts:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_dimensions(self, kind):
        lay = state_layout(kind, P)
        expected = 4 if kind.has_lowpass_states else 2
        assert lay.dim == expected

    def test_pack_state_blocks(self):
        s = pack_state(ModelKind.SIGNAL_SPACE, P, x1=[0.02], theta=1.5)
        assert s.tolist() == [0.02, 0.0, 0.0, 1.5]
        s = pack_state(ModelKind.CLASSIC_PHASE_SPACE, P, x=[-1e-5], theta=0.5)
        assert s.tolist() == [-1e-5, 0.5]

    def test_pack_rejects_foreign_blocks(self):
        with pytest.raises(LayoutError):
            pack_state(ModelKind.CLASSIC_PHASE_SPACE, P, x1=[0.02])

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_rhs_rejects_wrong_length(self, kind):
        with pytest.raises(LayoutError):
            rhs(kind, 0.0, np.zeros(7), P)


class TestTrivialDerivatives:
    def test_signal_space_zero_state(self):
        d = rhs_signal_space(0.0, np.zeros(4), P)
        assert d[:3].tolist() == [0.0, 0.0, 0.0]
        assert d[3] == pytest.approx(P.omega2_free, rel=1e-15)

    def test_simplified_zero_states_any_angle(self):
        s = pack_state(ModelKind.SIMPLIFIED_SIGNAL_SPACE, P, theta=0.7)
        d = rhs_simplified_signal(0.0, s, P)
        assert d[3] == pytest.approx(P.omega_delta_free, rel=1e-12)

    def test_phase_space_at_origin(self):
        d = rhs_phase_space(np.zeros(4), P)
        assert d[0] == pytest.approx(0.5)  # b1/2 * cos(0)
        assert d[1] == 0.0
        assert d[3] == pytest.approx(P.omega_delta_free, rel=1e-12)

    def test_classic_at_origin(self):
        d = rhs_classic(np.zeros(2), P)
        assert d[0] == 0.0
        assert d[1] == pytest.approx(P.omega_delta_free, rel=1e-12)

    def test_modified_at_origin(self):
        d = rhs_modified_signal(0.0, np.zeros(2), P)
        assert d[0] == 0.0
        assert d[1] == pytest.approx(P.omega2_free, rel=1e-15)


class TestPhaseSpaceEquilibrium:
    def test_stationary_point_with_zero_deviation(self):
        p = baseline_params(CARRIER_OMEGA)  # omega_delta_free = 0
        x1_star = 0.5 / OMEGA3  # solves A1 x1 + b1/2 = 0
        s = pack_state(ModelKind.PHASE_SPACE, p, x1=[x1_star])
        d = rhs_phase_space(s, p)
        assert np.abs(d).max() < 1e-9


class TestFastAverageOracle:
    """Averaging the waveform drives over one carrier period at frozen slow
    variables must reproduce the carrier-averaged model's terms."""

    N = 4096

    def _grid(self, w1):
        # one period of the double-frequency content
        return np.linspace(0.0, 2.0 * math.pi / w1, self.N, endpoint=False)

    @pytest.mark.parametrize("seed", range(4))
    def test_signal_space_drives(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(25):
            td = rng.uniform(-10.0, 10.0)
            tt = self._grid(P.omega1)
            th1 = P.omega1 * tt
            th2 = th1 - td
            u1 = np.sin(th1) * np.sin(th2)
            u2 = np.sin(th1) * np.cos(th2)
            assert u1.mean() == pytest.approx(0.5 * math.cos(td), abs=1e-12)
            assert u2.mean() == pytest.approx(0.5 * math.sin(td), abs=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_modified_loop_drive(self, seed):
        rng = np.random.default_rng(100 + seed)
        for _ in range(25):
            td = rng.uniform(-10.0, 10.0)
            tt = self._grid(P.omega1)
            th1 = P.omega1 * tt
            th2 = th1 - td
            phi = np.sin(th1) ** 2 * np.sin(th2) * np.cos(th2)
            assert phi.mean() == pytest.approx(pd_characteristic(td), abs=1e-12)


class TestInitialFrequencyDifference:
    def test_zero_state(self):
        s = pack_state(ModelKind.SIGNAL_SPACE, P)
        assert initial_frequency_difference(ModelKind.SIGNAL_SPACE, P, s) == pytest.approx(
            P.omega_delta_free, rel=1e-15
        )

    def test_charged_loop_filter_case(self):
        p = baseline_params(CARRIER_OMEGA - 10.0)
        s = pack_state(ModelKind.SIGNAL_SPACE, p, x=[-1e-5])
        w0 = initial_frequency_difference(ModelKind.SIGNAL_SPACE, p, s)
        assert w0 == pytest.approx(2400010.0, rel=1e-6)

    def test_cross_term_vanishes_with_one_arm_zero(self):
        s = pack_state(ModelKind.SIGNAL_SPACE, P, x1=[0.02], x=[1e-6])
        w0 = initial_frequency_difference(ModelKind.SIGNAL_SPACE, P, s)
        expected = P.omega_delta_free - P.vco_gain * 5e4 * 1e-6
        assert w0 == pytest.approx(expected, rel=1e-12)

    def test_classic_uses_detector_value(self):
        s = pack_state(ModelKind.CLASSIC_PHASE_SPACE, P, theta=0.3)
        w0 = initial_frequency_difference(ModelKind.CLASSIC_PHASE_SPACE, P, s)
        lf = P.loop_filter
        expected = P.omega_delta_free - P.vco_gain * lf.h * pd_characteristic(0.3)
        assert w0 == pytest.approx(expected, rel=1e-12)


class TestKernelMatchesReference:
    """The compiled dispatch must agree with the numpy right-hand sides."""

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_agreement_on_random_states(self, kind):
        p = baseline_params(
            CARRIER_OMEGA - 3e5,
            data=DataSignal.periodic_square(2.0 * math.pi * 1e5)
            if kind is ModelKind.SIGNAL_SPACE
            else None,
        )
        lay = state_layout(kind, p)
        fp, ip = K.pack_params(kind, p)
        rng = np.random.default_rng(7)
        for _ in range(50):
            s = rng.normal(scale=2.0, size=lay.dim)
            t = float(rng.uniform(0.0, 1e-4))
            ref = rhs(kind, t, s, p)
            out = np.empty(lay.dim)
            K._rhs(t, s, out, fp, ip, float(p.data.value(t)))
            np.testing.assert_allclose(out, ref, rtol=1e-13, atol=1e-16)
