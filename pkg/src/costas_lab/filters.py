"""Linear SISO state-space filters.

A filter is the quadruple (A, b, c, h): state evolves as x' = A x + b u and
the output is y = c.x + h u.  All loop components (the two low-pass arms and
the loop filter) are instances of :class:`FilterSS`.  Low-pass filters must
have a strictly stable A; the loop filter may be a perfect integrator (A = 0).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import LayoutError, ParameterError

__all__ = [
    "FilterSS",
    "make_first_order_lowpass",
    "make_pi_loop_filter",
    "make_lag_lead_filter",
    "filter_output",
    "zero_input_response",
    "impulse_response",
    "dc_gain",
]


@dataclass(frozen=True, eq=False)
class FilterSS:
    """Continuous-time SISO filter in state-space form.

    A : (n, n) state matrix, units 1/s
    b : (n,) input coupling
    c : (n,) output coupling
    h : direct feedthrough (dimensionless)
    requires_stable : when True, all eigenvalues of A must have strictly
        negative real part (checked at construction).
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    h: float = 0.0
    requires_stable: bool = field(default=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = b.shape[0]
        if A.shape != (n, n) or c.shape != (n,):
            raise ParameterError(
                f"inconsistent filter dimensions: A{A.shape}, b{b.shape}, c{c.shape}"
            )
        for arr in (A, b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "h", float(self.h))
        if self.requires_stable and n > 0:
            top = np.linalg.eigvals(A).real.max()
            if not top < 0.0:
                raise ParameterError(
                    f"filter marked stable but max Re(eig A) = {top:g} >= 0"
                )

    @property
    def n(self):
        """State dimension."""
        return self.b.shape[0]


def make_first_order_lowpass(omega3, dc_gain=1.0):
    """First-order low-pass with corner omega3 [rad/s] and the given DC gain.

    Realization: A = -omega3, b = 1, c = dc_gain * omega3, h = 0.
    """
    if not omega3 > 0.0:
        raise ParameterError(f"omega3 must be positive, got {omega3!r}")
    if not dc_gain > 0.0:
        raise ParameterError(f"dc_gain must be positive, got {dc_gain!r}")
    return FilterSS(
        A=np.array([[-omega3]]),
        b=np.array([1.0]),
        c=np.array([dc_gain * omega3]),
        h=0.0,
        requires_stable=True,
    )


def make_pi_loop_filter(tau1, tau2):
    """Proportional-integral loop filter (tau2*s + 1) / (tau1*s).

    Realization: A = 0, b = 1, c = 1/tau1, h = tau2/tau1.  The perfect
    integrator makes the loop type 2.
    """
    if not tau1 > 0.0:
        raise ParameterError(f"tau1 must be positive, got {tau1!r}")
    if tau2 < 0.0:
        raise ParameterError(f"tau2 must be non-negative, got {tau2!r}")
    return FilterSS(
        A=np.array([[0.0]]),
        b=np.array([1.0]),
        c=np.array([1.0 / tau1]),
        h=tau2 / tau1,
    )


def make_lag_lead_filter(tau1, tau2):
    """First-order lag-lead loop filter (tau2*s + 1) / (tau1*s + 1).

    Realization: A = -1/tau1, b = 1, c = (1 - tau2/tau1)/tau1, h = tau2/tau1.
    Unit DC gain; the finite pole makes the loop type 1 (finite pull-in).
    """
    if not tau1 > 0.0:
        raise ParameterError(f"tau1 must be positive, got {tau1!r}")
    if tau2 < 0.0:
        raise ParameterError(f"tau2 must be non-negative, got {tau2!r}")
    h = tau2 / tau1
    return FilterSS(
        A=np.array([[-1.0 / tau1]]),
        b=np.array([1.0]),
        c=np.array([(1.0 - h) / tau1]),
        h=h,
        requires_stable=True,
    )


def _check_state(f, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (f.n,):
        raise LayoutError(f"filter state has shape {x.shape}, expected ({f.n},)")
    return x


def filter_output(f, x, u):
    """Instantaneous output c.x + h*u."""
    x = _check_state(f, x)
    return float(f.c @ x + f.h * u)


def _expm(A, t):
    if A.shape[0] == 1:
        return np.array([[np.exp(A[0, 0] * t)]])
    from scipy.linalg import expm

    return expm(A * t)


def zero_input_response(f, x0, t):
    """Output c.exp(A t).x0 with the input held at zero.

    Scalar exponential for n = 1, scaling-and-squaring Pade (scipy) above.
    """
    x0 = _check_state(f, x0)
    if f.n == 0:
        return 0.0
    return float(f.c @ (_expm(f.A, t) @ x0))


def impulse_response(f, t):
    """State-path impulse response c.exp(A t).b.

    The direct feedthrough h is not included here; it enters the output
    separately via :func:`filter_output`.
    """
    if f.n == 0:
        return 0.0
    return float(f.c @ (_expm(f.A, t) @ f.b))


def dc_gain(f):
    """Steady-state gain -c.A^-1.b + h (A must be invertible)."""
    if f.n == 0:
        return f.h
    return float(-f.c @ np.linalg.solve(f.A, f.b) + f.h)
