"""Fixed-step and adaptive Runge-Kutta integration of the loop models.

Steps land exactly on data-signal transition instants so no step interior
contains a sign flip of m(t); storage is decimated (sample_dt or stride)
while integration proceeds at full resolution.  Identical inputs give
bit-identical trajectories on one platform.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import (
    DivergenceError,
    LayoutError,
    ParameterError,
    StepUnderflowError,
)
from .models import (
    LoopParams,
    ModelKind,
    carrier_phase,
    pd_characteristic,
    state_layout,
)

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "SectionResult",
    "integrate",
    "integrate_to_section",
    "rk4_step",
    "integrate_ode",
]

FIXED_RK4 = "fixed_rk4"
ADAPTIVE_45 = "adaptive_embedded_45"


@dataclass(frozen=True)
class IntegratorConfig:
    """Scheme selection plus stepping and sampling controls.

    Signal-space models at carrier frequencies around 2.5e6 rad/s need
    dt of a few ns fixed, or max_step around 2e-8 s adaptive, to keep
    >= 50 samples per half-period of the double-frequency ripple.
    """

    t_end: float
    scheme: str = FIXED_RK4
    dt: float = 0.0  # s, fixed scheme
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_step: float = math.inf  # s, adaptive scheme
    sample_dt: float = 0.0  # s; 0 selects stride sampling
    sample_stride: int = 0  # accepted steps per stored sample; 0 = auto

    def __post_init__(self):
        if self.scheme not in (FIXED_RK4, ADAPTIVE_45):
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if not self.t_end > 0.0:
            raise ParameterError(f"t_end must be positive, got {self.t_end!r}")
        if self.scheme == FIXED_RK4 and not self.dt > 0.0:
            raise ParameterError(f"dt must be positive for {FIXED_RK4}, got {self.dt!r}")
        if self.scheme == ADAPTIVE_45:
            if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
                raise ParameterError("rel_tol and abs_tol must be positive")
            if not self.max_step > 0.0:
                raise ParameterError(f"max_step must be positive, got {self.max_step!r}")
        if self.sample_dt < 0.0:
            raise ParameterError(f"sample_dt must be >= 0, got {self.sample_dt!r}")
        if self.sample_stride < 0:
            raise ParameterError(f"sample_stride must be >= 0, got {self.sample_stride!r}")

    def _sampling(self):
        """Resolved (sample_dt, stride); defaults to ~5000 samples per run."""
        if self.sample_dt > 0.0:
            return self.sample_dt, 1
        if self.sample_stride > 0:
            return 0.0, self.sample_stride
        return self.t_end / 5000.0, 1


@dataclass(frozen=True)
class Trajectory:
    """Sampled states of one run; derived signals are recomputed on demand."""

    kind: ModelKind
    params: LoopParams
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise LayoutError("times and states lengths differ")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0.0):
            raise LayoutError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def _layout(self):
        return state_layout(self.kind, self.params)

    @property
    def theta_delta(self):
        """Unwrapped phase difference theta1(t) - theta2(t), rad."""
        lay = self._layout
        ang = self.states[:, lay.angle]
        if self.kind.angle_is_vco_phase:
            return carrier_phase(self.params, self.times) - ang
        return ang.copy()

    @property
    def theta2(self):
        """Unwrapped VCO phase, rad."""
        lay = self._layout
        ang = self.states[:, lay.angle]
        if self.kind.angle_is_vco_phase:
            return ang.copy()
        return carrier_phase(self.params, self.times) - ang

    @property
    def g1(self):
        """Output of the in-phase low-pass arm; None for ideal-arm kinds."""
        if not self.kind.has_lowpass_states:
            return None
        lay = self._layout
        return self.states[:, lay.x1] @ self.params.lpf1.c

    @property
    def g2(self):
        """Output of the quadrature low-pass arm; None for ideal-arm kinds."""
        if not self.kind.has_lowpass_states:
            return None
        lay = self._layout
        return self.states[:, lay.x2] @ self.params.lpf2.c

    @property
    def phi_input(self):
        """Instantaneous loop-filter input."""
        if self.kind.has_lowpass_states:
            return self.g1 * self.g2
        if self.kind is ModelKind.CLASSIC_PHASE_SPACE:
            return pd_characteristic(self.theta_delta)
        th1 = carrier_phase(self.params, self.times)
        th2 = self.theta2
        return np.sin(th1) ** 2 * np.sin(th2) * np.cos(th2)

    @property
    def g(self):
        """Loop-filter output c.x + h*phi."""
        lay = self._layout
        lf = self.params.loop_filter
        return self.states[:, lay.x] @ lf.c + lf.h * self.phi_input

    @property
    def omega2(self):
        """Instantaneous VCO frequency omega2_free + L g(t), rad/s."""
        return self.params.omega2_free + self.params.vco_gain * self.g


@dataclass(frozen=True)
class SectionResult:
    """Outcome of integrating to an angle crossing.

    crossed False signals capture (the trajectory never advanced to the
    section before t_max).
    """

    crossed: bool
    state: np.ndarray
    time: float


def _check_initial(kind, params, s0):
    lay = state_layout(kind, params)
    s0 = np.asarray(s0, dtype=float)
    if s0.shape != (lay.dim,):
        raise LayoutError(
            f"{lay.kind.value} expects initial state of length {lay.dim}, "
            f"got shape {s0.shape}"
        )
    return s0


def integrate(kind, params, s0, cfg):
    """Integrate one model over [0, t_end] and return its Trajectory."""
    kind = ModelKind(kind)
    s0 = _check_initial(kind, params, s0)
    fp, ip = K.pack_params(kind, params)
    half = 0.0
    if kind is ModelKind.SIGNAL_SPACE and params.data.kind == "square":
        half = params.data.transition_period
    sample_dt, stride = cfg._sampling()
    if cfg.scheme == FIXED_RK4:
        ts, ys, count, status, t_fail = K._integrate_fixed(
            s0, fp, ip, cfg.dt, cfg.t_end, half, sample_dt, stride
        )
    else:
        ts, ys, count, status, t_fail = K._integrate_adaptive(
            s0,
            fp,
            ip,
            cfg.rel_tol,
            cfg.abs_tol,
            cfg.max_step,
            0.0,
            cfg.t_end,
            half,
            sample_dt,
            stride,
        )
    if status == K.STATUS_DIVERGED:
        raise DivergenceError(t_fail)
    if status == K.STATUS_UNDERFLOW:
        raise StepUnderflowError(t_fail)
    return Trajectory(kind, params, ts[:count].copy(), ys[:count].copy())


def integrate_to_section(
    kind, params, s0, target_angle, direction=1, *, dt, t_max, fall_back=3.0 * math.pi
):
    """Integrate the classic model until theta_delta crosses target_angle.

    The crossing is localized by bisection to |theta_delta - target| <
    1e-10 rad.  No crossing before t_max (or a retreat beyond fall_back)
    reports capture via SectionResult.crossed = False.
    """
    kind = ModelKind(kind)
    if kind is not ModelKind.CLASSIC_PHASE_SPACE:
        raise LayoutError("section integration is defined for classic_phase_space")
    s0 = _check_initial(kind, params, s0)
    fp, ip = K.pack_params(kind, params)
    y, t, status = K._integrate_to_angle(
        s0, fp, ip, dt, t_max, target_angle, float(direction), fall_back
    )
    if status == K.STATUS_DIVERGED:
        raise DivergenceError(t)
    return SectionResult(status == K.STATUS_OK, y, t)


# ---------------------------------------------------------------------------
# Small generic integrators for plain callables; used by tests and filter
# response checks.  Same tableaus as the compiled drivers.


def rk4_step(f, t, y, h):
    """One classic RK4 step of y' = f(t, y)."""
    k1 = np.asarray(f(t, y))
    k2 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k1))
    k3 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k2))
    k4 = np.asarray(f(t + h, y + h * k3))
    return y + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def _dopri_step_py(f, t, y, h):
    k1 = np.asarray(f(t, y))
    k2 = np.asarray(f(t + K._C2 * h, y + h * K._A21 * k1))
    k3 = np.asarray(f(t + K._C3 * h, y + h * (K._A31 * k1 + K._A32 * k2)))
    k4 = np.asarray(f(t + K._C4 * h, y + h * (K._A41 * k1 + K._A42 * k2 + K._A43 * k3)))
    k5 = np.asarray(
        f(t + K._C5 * h, y + h * (K._A51 * k1 + K._A52 * k2 + K._A53 * k3 + K._A54 * k4))
    )
    k6 = np.asarray(
        f(
            t + h,
            y
            + h
            * (K._A61 * k1 + K._A62 * k2 + K._A63 * k3 + K._A64 * k4 + K._A65 * k5),
        )
    )
    ynew = y + h * (K._B1 * k1 + K._B3 * k3 + K._B4 * k4 + K._B5 * k5 + K._B6 * k6)
    k7 = np.asarray(f(t + h, ynew))
    err = h * (
        K._E1 * k1 + K._E3 * k3 + K._E4 * k4 + K._E5 * k5 + K._E6 * k6 + K._E7 * k7
    )
    return ynew, err


def integrate_ode(
    f,
    y0,
    t_end,
    *,
    dt=None,
    rel_tol=1e-8,
    abs_tol=1e-12,
    max_step=math.inf,
    record=True,
):
    """Integrate y' = f(t, y) over [0, t_end]; fixed RK4 when dt is given,
    adaptive Dormand-Prince otherwise.  Returns (times, states) arrays.
    """
    y = np.asarray(y0, dtype=float).copy()
    t = 0.0
    ts = [0.0]
    ys = [y.copy()]
    if dt is not None:
        n = max(1, int(round(t_end / dt)))
        h = t_end / n
        for i in range(n):
            y = rk4_step(f, t, y, h)
            t = (i + 1) * h
            if record:
                ts.append(t)
                ys.append(y.copy())
    else:
        h = min(max_step, t_end * 1e-3)
        while t < t_end * (1.0 - 1e-12):
            h = min(h, t_end - t)
            if h < 1e-15 * t_end:
                raise StepUnderflowError(t)
            ynew, err = _dopri_step_py(f, t, y, h)
            sc = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(ynew))
            errnorm = math.sqrt(float(np.mean((err / sc) ** 2)))
            if errnorm <= 1.0:
                y = ynew
                t += h
                if record:
                    ts.append(t)
                    ys.append(y.copy())
                fac = 5.0 if errnorm < 1e-30 else min(5.0, max(0.2, 0.9 * errnorm**-0.2))
                h = min(h * fac, max_step)
            else:
                h *= max(0.1, 0.9 * errnorm**-0.2)
    if not record:
        return np.array([0.0, t]), np.array([np.asarray(y0, dtype=float), y])
    return np.array(ts), np.array(ys)
