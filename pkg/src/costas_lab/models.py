"""Right-hand sides of the five BPSK Costas-loop models.

Model hierarchy (coarsest last):

* ``signal_space`` -- full waveform-level loop: both mixer products pass
  through the low-pass arms, the data signal multiplies the carrier, the
  VCO phase theta2 is a state.
* ``simplified_signal_space`` -- the same loop with constant data, rewritten
  in the phase-difference coordinate theta_delta = theta1 - theta2.
* ``phase_space`` -- baseband model obtained by averaging over the carrier:
  the low-pass arms are driven by cos/sin of theta_delta directly.
* ``classic_phase_space`` -- baseband model with ideal low-pass arms: the
  whole phase detector collapses to (1/8) sin(2 theta_delta).
* ``modified_signal_space`` -- modified loop where the mixer product is
  formed before the loop filter; the data signal cancels (m^2 = 1).

State layouts (flat float vectors):

* signal_space / simplified_signal_space / phase_space:
  ``[x1 (n1), x2 (n2), x (nl), angle]``
* classic_phase_space / modified_signal_space: ``[x (nl), angle]``

The angle is theta2 for signal_space / modified_signal_space and
theta_delta for the rest.  Angles are kept unwrapped so cycle slips and
rotational solutions stay visible; wrap only for plotting.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LayoutError, ParameterError
from .filters import FilterSS

__all__ = [
    "DataSignal",
    "ModelKind",
    "LoopParams",
    "StateLayout",
    "state_layout",
    "pack_state",
    "pd_characteristic",
    "ideal_lpf_outputs",
    "carrier_phase",
    "rhs_signal_space",
    "rhs_simplified_signal",
    "rhs_phase_space",
    "rhs_classic",
    "rhs_modified_signal",
    "rhs",
    "initial_frequency_difference",
    "wrap_angle",
]


@dataclass(frozen=True)
class DataSignal:
    """Binary data stream m(t) in {+1, -1}.

    kind "constant" is m == 1; kind "square" is sign(sin(omega_m t)) with
    sign(0) = +1.  Transitions sit at t_k = k*pi/omega_m; the integrators
    align steps to them so no step interior straddles a sign change.
    """

    kind: str = "constant"
    omega_m: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "square"):
            raise ParameterError(f"unknown data signal kind {self.kind!r}")
        if self.kind == "square" and not self.omega_m > 0.0:
            raise ParameterError("square data signal needs omega_m > 0")

    @classmethod
    def constant_one(cls):
        return cls("constant", 0.0)

    @classmethod
    def periodic_square(cls, omega_m):
        return cls("square", float(omega_m))

    @property
    def transition_period(self):
        """Spacing of sign flips (pi/omega_m), or None for constant data."""
        if self.kind == "constant":
            return None
        return math.pi / self.omega_m

    def value(self, t):
        """m(t); works on scalars and arrays."""
        if self.kind == "constant":
            return np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else 1.0
        s = np.sin(self.omega_m * np.asarray(t, dtype=float))
        out = np.where(s >= 0.0, 1.0, -1.0)
        return out if np.ndim(t) else float(out)


class ModelKind(str, enum.Enum):
    SIGNAL_SPACE = "signal_space"
    SIMPLIFIED_SIGNAL_SPACE = "simplified_signal_space"
    PHASE_SPACE = "phase_space"
    CLASSIC_PHASE_SPACE = "classic_phase_space"
    MODIFIED_SIGNAL_SPACE = "modified_signal_space"

    @property
    def has_lowpass_states(self):
        """True for kinds whose state carries the two low-pass arms."""
        return self in (
            ModelKind.SIGNAL_SPACE,
            ModelKind.SIMPLIFIED_SIGNAL_SPACE,
            ModelKind.PHASE_SPACE,
        )

    @property
    def angle_is_vco_phase(self):
        """True when the stored angle is theta2 rather than theta_delta."""
        return self in (ModelKind.SIGNAL_SPACE, ModelKind.MODIFIED_SIGNAL_SPACE)

    @property
    def is_autonomous(self):
        """True when the right-hand side has no explicit time dependence."""
        return self in (ModelKind.PHASE_SPACE, ModelKind.CLASSIC_PHASE_SPACE)


@dataclass(frozen=True)
class LoopParams:
    """Complete parameter set of one Costas-loop instance.

    vco_gain is L in rad/(s V); omega1, omega2_free in rad/s; theta1_0 in
    rad.  The carrier phase is theta1(t) = omega1 t + theta1_0.
    """

    lpf1: FilterSS
    lpf2: FilterSS
    loop_filter: FilterSS
    vco_gain: float
    omega2_free: float
    omega1: float
    theta1_0: float = 0.0
    data: DataSignal = field(default_factory=DataSignal.constant_one)

    def __post_init__(self):
        if not self.omega1 > 0.0:
            raise ParameterError(f"omega1 must be positive, got {self.omega1!r}")
        if not self.vco_gain > 0.0:
            raise ParameterError(f"vco_gain must be positive, got {self.vco_gain!r}")

    @property
    def omega_delta_free(self):
        """Free-running frequency deviation omega1 - omega2_free."""
        return self.omega1 - self.omega2_free


@dataclass(frozen=True)
class StateLayout:
    """Index map of a flat state vector for one model kind."""

    kind: ModelKind
    n1: int
    n2: int
    nl: int

    @property
    def dim(self):
        return (self.n1 + self.n2 if self.kind.has_lowpass_states else 0) + self.nl + 1

    @property
    def x1(self):
        return slice(0, self.n1)

    @property
    def x2(self):
        return slice(self.n1, self.n1 + self.n2)

    @property
    def x(self):
        off = self.n1 + self.n2 if self.kind.has_lowpass_states else 0
        return slice(off, off + self.nl)

    @property
    def angle(self):
        return self.dim - 1


def state_layout(kind, params):
    kind = ModelKind(kind)
    return StateLayout(kind, params.lpf1.n, params.lpf2.n, params.loop_filter.n)


def pack_state(kind, params, x1=None, x2=None, x=None, theta=0.0):
    """Assemble a flat state vector; omitted blocks are zero."""
    lay = state_layout(kind, params)
    s = np.zeros(lay.dim)
    if lay.kind.has_lowpass_states:
        if x1 is not None:
            s[lay.x1] = x1
        if x2 is not None:
            s[lay.x2] = x2
    elif x1 is not None or x2 is not None:
        raise LayoutError(f"{lay.kind.value} carries no low-pass filter states")
    if x is not None:
        s[lay.x] = x
    s[lay.angle] = theta
    return s


def _check_layout(kind, params, state):
    lay = state_layout(kind, params)
    state = np.asarray(state, dtype=float)
    if state.shape != (lay.dim,):
        raise LayoutError(
            f"{lay.kind.value} expects state of length {lay.dim}, got shape {state.shape}"
        )
    return lay, state


def pd_characteristic(theta_delta):
    """Averaged phase-detector nonlinearity (1/8) sin(2 theta_delta).

    Odd and pi-periodic; peak value exactly 0.125 at theta_delta = pi/4.
    """
    return 0.125 * np.sin(2.0 * theta_delta)


def ideal_lpf_outputs(theta_delta, m):
    """Ideal-filter approximations of the two arm outputs.

    Returns (g1, g2) = (m/2 cos(theta_delta), m/2 sin(theta_delta)); the
    oracle the simulated arm outputs are compared against.
    """
    return 0.5 * m * np.cos(theta_delta), 0.5 * m * np.sin(theta_delta)


def carrier_phase(params, t):
    """theta1(t) = omega1 t + theta1(0)."""
    return params.omega1 * t + params.theta1_0


def wrap_angle(theta, period=2.0 * math.pi):
    """Reduce an unwrapped angle to [-period/2, period/2); plotting helper."""
    return (theta + 0.5 * period) % period - 0.5 * period


def _out(out, dim):
    if out is None:
        return np.empty(dim)
    if out.shape != (dim,):
        raise LayoutError(f"output buffer has shape {out.shape}, expected ({dim},)")
    return out


def rhs_signal_space(t, state, params, out=None):
    """Waveform-level loop: state [x1, x2, x, theta2].

    x1' = A1 x1 + b1 m(t) sin(theta1) sin(theta2)
    x2' = A2 x2 + b2 m(t) sin(theta1) cos(theta2)
    x'  = A x + b (c1.x1)(c2.x2)
    theta2' = omega2_free + L (c.x) + L h (c1.x1)(c2.x2)
    """
    lay, s = _check_layout(ModelKind.SIGNAL_SPACE, params, state)
    d = _out(out, lay.dim)
    p = params
    th1 = carrier_phase(p, t)
    th2 = s[lay.angle]
    m = p.data.value(t)
    u1 = m * math.sin(th1) * math.sin(th2)
    u2 = m * math.sin(th1) * math.cos(th2)
    x1, x2, x = s[lay.x1], s[lay.x2], s[lay.x]
    g1 = float(p.lpf1.c @ x1)
    g2 = float(p.lpf2.c @ x2)
    phi = g1 * g2
    d[lay.x1] = p.lpf1.A @ x1 + p.lpf1.b * u1
    d[lay.x2] = p.lpf2.A @ x2 + p.lpf2.b * u2
    d[lay.x] = p.loop_filter.A @ x + p.loop_filter.b * phi
    g = float(p.loop_filter.c @ x) + p.loop_filter.h * phi
    d[lay.angle] = p.omega2_free + p.vco_gain * g
    return d


def rhs_simplified_signal(t, state, params, out=None):
    """Waveform-level loop with m == 1 in the theta_delta coordinate.

    Exact rewrite of the signal_space system under theta2 = theta1 -
    theta_delta; the data signal is not consulted.  State
    [x1, x2, x, theta_delta].
    """
    lay, s = _check_layout(ModelKind.SIMPLIFIED_SIGNAL_SPACE, params, state)
    d = _out(out, lay.dim)
    p = params
    th1 = carrier_phase(p, t)
    th2 = th1 - s[lay.angle]
    u1 = math.sin(th1) * math.sin(th2)
    u2 = math.sin(th1) * math.cos(th2)
    x1, x2, x = s[lay.x1], s[lay.x2], s[lay.x]
    phi = float(p.lpf1.c @ x1) * float(p.lpf2.c @ x2)
    d[lay.x1] = p.lpf1.A @ x1 + p.lpf1.b * u1
    d[lay.x2] = p.lpf2.A @ x2 + p.lpf2.b * u2
    d[lay.x] = p.loop_filter.A @ x + p.loop_filter.b * phi
    g = float(p.loop_filter.c @ x) + p.loop_filter.h * phi
    d[lay.angle] = p.omega_delta_free - p.vco_gain * g
    return d


def rhs_phase_space(state, params, out=None):
    """Carrier-averaged loop with real low-pass arms; autonomous.

    x1' = A1 x1 + (b1/2) cos(theta_delta)
    x2' = A2 x2 + (b2/2) sin(theta_delta)
    x'  = A x + b (c1.x1)(c2.x2)
    theta_delta' = omega_delta_free - L (c.x) - L h (c1.x1)(c2.x2)
    """
    lay, s = _check_layout(ModelKind.PHASE_SPACE, params, state)
    d = _out(out, lay.dim)
    p = params
    td = s[lay.angle]
    x1, x2, x = s[lay.x1], s[lay.x2], s[lay.x]
    phi = float(p.lpf1.c @ x1) * float(p.lpf2.c @ x2)
    d[lay.x1] = p.lpf1.A @ x1 + p.lpf1.b * (0.5 * math.cos(td))
    d[lay.x2] = p.lpf2.A @ x2 + p.lpf2.b * (0.5 * math.sin(td))
    d[lay.x] = p.loop_filter.A @ x + p.loop_filter.b * phi
    g = float(p.loop_filter.c @ x) + p.loop_filter.h * phi
    d[lay.angle] = p.omega_delta_free - p.vco_gain * g
    return d


def rhs_classic(state, params, out=None):
    """Carrier-averaged loop with ideal low-pass arms; autonomous.

    x' = A x + b phi(theta_delta), theta_delta' = omega_delta_free -
    L c.x - L h phi(theta_delta), with phi the sin(2 theta)/8 detector.
    """
    lay, s = _check_layout(ModelKind.CLASSIC_PHASE_SPACE, params, state)
    d = _out(out, lay.dim)
    p = params
    td = s[lay.angle]
    phi = float(pd_characteristic(td))
    x = s[lay.x]
    d[lay.x] = p.loop_filter.A @ x + p.loop_filter.b * phi
    g = float(p.loop_filter.c @ x) + p.loop_filter.h * phi
    d[lay.angle] = p.omega_delta_free - p.vco_gain * g
    return d


def rhs_modified_signal(t, state, params, out=None):
    """Modified loop: mixer product formed before any filtering.

    phi(t) = sin^2(theta1) sin(theta2) cos(theta2); the data signal cancels
    (m^2 = 1) and is not consulted.  State [x, theta2].
    """
    lay, s = _check_layout(ModelKind.MODIFIED_SIGNAL_SPACE, params, state)
    d = _out(out, lay.dim)
    p = params
    th1 = carrier_phase(p, t)
    th2 = s[lay.angle]
    s1 = math.sin(th1)
    phi = s1 * s1 * math.sin(th2) * math.cos(th2)
    x = s[lay.x]
    d[lay.x] = p.loop_filter.A @ x + p.loop_filter.b * phi
    g = float(p.loop_filter.c @ x) + p.loop_filter.h * phi
    d[lay.angle] = p.omega2_free + p.vco_gain * g
    return d


def rhs(kind, t, state, params, out=None):
    """Uniform (t, state) dispatch over all model kinds."""
    kind = ModelKind(kind)
    if kind is ModelKind.SIGNAL_SPACE:
        return rhs_signal_space(t, state, params, out)
    if kind is ModelKind.SIMPLIFIED_SIGNAL_SPACE:
        return rhs_simplified_signal(t, state, params, out)
    if kind is ModelKind.PHASE_SPACE:
        return rhs_phase_space(state, params, out)
    if kind is ModelKind.CLASSIC_PHASE_SPACE:
        return rhs_classic(state, params, out)
    return rhs_modified_signal(t, state, params, out)


def initial_frequency_difference(kind, params, state):
    """Initial frequency difference theta_delta'(0) in rad/s.

    For kinds carrying low-pass states this is omega_delta_free -
    L c.x(0) - L h (c1.x1(0))(c2.x2(0)); the classic kind substitutes
    phi(theta_delta(0)) for the arm product, the modified kind the raw
    mixer product at t = 0.
    """
    kind = ModelKind(kind)
    lay, s = _check_layout(kind, params, state)
    p = params
    if kind.has_lowpass_states:
        phi = float(p.lpf1.c @ s[lay.x1]) * float(p.lpf2.c @ s[lay.x2])
    elif kind is ModelKind.CLASSIC_PHASE_SPACE:
        phi = float(pd_characteristic(s[lay.angle]))
    else:
        th1 = p.theta1_0
        th2 = s[lay.angle]
        phi = math.sin(th1) ** 2 * math.sin(th2) * math.cos(th2)
    g = float(p.loop_filter.c @ s[lay.x]) + p.loop_filter.h * phi
    return p.omega_delta_free - p.vco_gain * g
