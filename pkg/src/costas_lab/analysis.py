"""Lock detection, averaging checks, return maps, and pull-in probing."""

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from ._parallel import pmap
from .errors import InsufficientDataError, IntegrationError, LayoutError, ParameterError
from .integrators import FIXED_RK4, IntegratorConfig, integrate, integrate_to_section
from .models import ModelKind, pd_characteristic, state_layout

__all__ = [
    "LockCriterion",
    "LockReport",
    "detect_lock",
    "AveragingRow",
    "averaging_discrepancy",
    "ideal_lpf_error",
    "ReturnMapResult",
    "return_map",
    "CycleInfo",
    "CycleReport",
    "find_limit_cycles",
    "PullinVerdict",
    "pullin_probe",
    "classic_equilibria",
]


@dataclass(frozen=True)
class LockCriterion:
    """Quantitative lock definition.

    Locked means: |mean frequency error| over the trailing tail_fraction of
    the run is below freq_tol AND the theta_delta span over that tail is
    below phase_drift_tol.  The span tolerance leaves room for the
    double-frequency ripple a waveform-level model carries in lock
    (~0.02 rad for the bundled scenarios).
    """

    freq_tol: float = 1.0  # rad/s
    phase_drift_tol: float = 0.05  # rad
    tail_fraction: float = 0.2

    def __post_init__(self):
        if not (self.freq_tol > 0.0 and self.phase_drift_tol > 0.0):
            raise ParameterError("lock tolerances must be positive")
        if not 0.0 < self.tail_fraction < 1.0:
            raise ParameterError("tail_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class LockReport:
    locked: bool
    tail_mean_freq_error: float  # rad/s
    tail_phase_span: float  # rad
    steady_theta_delta: float | None = None
    steady_g: float | None = None


def detect_lock(traj, crit=LockCriterion()):
    """Classify the tail of a trajectory as locked or not.

    The mean frequency error is the net theta_delta advance over the tail
    divided by its duration (the signed mean of omega1 - omega2(t), which
    is immune to the double-frequency ripple); the span is max - min of
    theta_delta over the same window.
    """
    n = len(traj)
    if n < 10:
        raise InsufficientDataError(f"need at least 10 samples, got {n}")
    i0 = min(n - 2, int(n * (1.0 - crit.tail_fraction)))
    td = traj.theta_delta[i0:]
    tt = traj.times[i0:]
    duration = tt[-1] - tt[0]
    freq_err = abs(td[-1] - td[0]) / duration
    span = float(td.max() - td.min())
    locked = freq_err < crit.freq_tol and span < crit.phase_drift_tol
    steady_theta = float(td.mean()) if locked else None
    steady_g = float(traj.g[i0:].mean()) if locked else None
    return LockReport(locked, float(freq_err), span, steady_theta, steady_g)


_AVERAGED_OF = {
    ModelKind.MODIFIED_SIGNAL_SPACE: ModelKind.CLASSIC_PHASE_SPACE,
    ModelKind.SIMPLIFIED_SIGNAL_SPACE: ModelKind.PHASE_SPACE,
}


@dataclass(frozen=True)
class AveragingRow:
    omega1: float  # rad/s
    sup_state_error: float
    sup_theta_error: float  # rad
    condition_ratio: float  # omega_delta_free / omega1


def averaging_discrepancy(
    params,
    omega1_list,
    t_end,
    original=ModelKind.MODIFIED_SIGNAL_SPACE,
    *,
    s0=None,
    steps_per_fast_period=200,
    n_samples=3000,
):
    """Deviation of a waveform-level model from its carrier-averaged limit.

    For each carrier frequency, both models are integrated from identical
    initial data (zero states by default) with the frequency deviation held
    fixed, and the sup over a common sample grid of the state and
    theta_delta differences is returned.  In the averaging regime the
    errors shrink like 1/omega1.
    """
    original = ModelKind(original)
    if original not in _AVERAGED_OF:
        raise LayoutError(
            "original model must be modified_signal_space or simplified_signal_space"
        )
    averaged = _AVERAGED_OF[original]
    wdf = params.omega_delta_free

    def one(w1):
        p = dataclasses.replace(params, omega1=w1, omega2_free=w1 - wdf)
        dt = (math.pi / w1) / steps_per_fast_period
        cfg = IntegratorConfig(
            t_end=t_end, scheme=FIXED_RK4, dt=dt, sample_dt=t_end / n_samples
        )
        lay_o = state_layout(original, p)
        lay_a = state_layout(averaged, p)
        if s0 is not None:
            s_o, s_a = s0
        else:
            s_o = np.zeros(lay_o.dim)
            s_a = np.zeros(lay_a.dim)
        try:
            to = integrate(original, p, s_o, cfg)
            ta = integrate(averaged, p, s_a, cfg)
        except IntegrationError as exc:
            raise IntegrationError(f"omega1={w1:g}: {exc}") from exc
        td_o = to.theta_delta
        td_a = np.interp(to.times, ta.times, ta.theta_delta)
        sup_theta = float(np.abs(td_o - td_a).max())
        x_o = to.states[:, lay_o.x]
        x_a_grid = np.empty_like(x_o)
        for j in range(x_o.shape[1]):
            x_a_grid[:, j] = np.interp(to.times, ta.times, ta.states[:, lay_a.x][:, j])
        dx = x_o - x_a_grid
        sup_state = float(
            np.sqrt((dx**2).sum(axis=1) + (td_o - td_a) ** 2).max()
        )
        return AveragingRow(w1, sup_state, sup_theta, abs(wdf) / w1)

    return pmap(one, omega1_list)


def ideal_lpf_error(traj, tail_fraction=0.2):
    """Tail error of the arm outputs against their ideal-filter limits.

    Returns (max |g1 - cos(theta_delta)/2|, max |g2 - sin(theta_delta)/2|)
    over the trailing tail_fraction of the samples.  Requires a kind that
    carries low-pass states.
    """
    if not traj.kind.has_lowpass_states:
        raise LayoutError("ideal_lpf_error needs a model with low-pass states")
    n = len(traj)
    i0 = min(n - 1, int(n * (1.0 - tail_fraction)))
    td = traj.theta_delta[i0:]
    m = 1.0
    if traj.kind is ModelKind.SIGNAL_SPACE and traj.params.data.kind == "square":
        m = traj.params.data.value(traj.times[i0:])
    e1 = np.abs(traj.g1[i0:] - 0.5 * m * np.cos(td)).max()
    e2 = np.abs(traj.g2[i0:] - 0.5 * m * np.sin(td)).max()
    return float(e1), float(e2)


@dataclass(frozen=True)
class ReturnMapResult:
    crossed: bool
    x_out: float | None
    time: float


def _rate_scale(params, x_in, theta_start):
    p = params
    lf = p.loop_filter
    rate0 = abs(
        p.omega_delta_free
        - p.vco_gain * (float(lf.c[0]) * x_in + lf.h * float(pd_characteristic(theta_start)))
    )
    cb = abs(float(lf.c @ lf.b))
    omega_n = math.sqrt(max(p.vco_gain * cb * 0.25, 1e-30))
    return max(rate0, omega_n, 1e-9)


def return_map(params, x_in, theta_start, *, dt=None, t_max=None):
    """Half-turn return map of the classic model on the section theta_start.

    Integrates from (x_in, theta_start) until theta_delta has advanced by
    pi in the direction of the initial rotation and returns the loop-filter
    state there; capture (no crossing) is reported distinctly.  Scalar loop
    filter only.
    """
    if params.loop_filter.n != 1:
        raise LayoutError("return_map needs a scalar loop-filter state")
    scale = _rate_scale(params, x_in, theta_start)
    if dt is None:
        dt = (math.pi / scale) / 3000.0
    if t_max is None:
        t_max = 200.0 * math.pi / scale
    p = params
    lf = p.loop_filter
    rate0 = p.omega_delta_free - p.vco_gain * (
        float(lf.c[0]) * x_in + lf.h * float(pd_characteristic(theta_start))
    )
    direction = 1.0 if rate0 >= 0.0 else -1.0
    s0 = np.array([x_in, theta_start])
    res = integrate_to_section(
        ModelKind.CLASSIC_PHASE_SPACE,
        params,
        s0,
        theta_start + direction * math.pi,
        direction,
        dt=dt,
        t_max=t_max,
    )
    if not res.crossed:
        return ReturnMapResult(False, None, res.time)
    return ReturnMapResult(True, float(res.state[0]), res.time)


@dataclass(frozen=True)
class CycleInfo:
    fixed_point_x: float
    multiplier: float
    stability: str  # "stable" | "unstable"

    @property
    def stable(self):
        return self.stability == "stable"


@dataclass(frozen=True)
class CycleReport:
    cycles: tuple
    section_angle: float


def find_limit_cycles(
    params, x_bracket, theta_start, *, n_grid=129, residual_tol=1e-10, dt=None
):
    """Locate rotational limit cycles as fixed points of the return map.

    Scans n_grid points of P(x) - x over the bracket, bisects every
    sign-change sub-bracket to |P(x) - x| < residual_tol, and classifies
    each root by the finite-difference multiplier dP/dx (stable iff
    |multiplier| < 1).  An empty report means no sign change was found.
    """
    lo, hi = x_bracket
    if not hi > lo:
        raise ParameterError("x_bracket must satisfy lo < hi")
    if n_grid < 64:
        raise ParameterError("n_grid must be at least 64")

    def p_of(x):
        r = return_map(params, x, theta_start, dt=dt)
        return r.x_out if r.crossed else None

    xs = np.linspace(lo, hi, n_grid)
    ds = pmap(lambda x: p_of(float(x)), xs)
    cycles = []
    for i in range(n_grid - 1):
        pa, pb = ds[i], ds[i + 1]
        if pa is None or pb is None:
            continue
        da, db = pa - xs[i], pb - xs[i + 1]
        if da == 0.0:
            cycles.append((float(xs[i]), 0.0))
            continue
        if da * db >= 0.0:
            continue
        a, b, fa = float(xs[i]), float(xs[i + 1]), da
        root = None
        for _ in range(200):
            mid = 0.5 * (a + b)
            pm = p_of(mid)
            if pm is None:
                break
            dm = pm - mid
            if abs(dm) < residual_tol:
                root = (mid, dm)
                break
            if fa * dm < 0.0:
                b = mid
            else:
                a, fa = mid, dm
        if root is not None:
            cycles.append(root)

    infos = []
    for x_star, _ in cycles:
        delta = 1e-6 * abs(x_star) if x_star != 0.0 else 1e-6 * (hi - lo)
        p_plus = p_of(x_star + delta)
        p_minus = p_of(x_star - delta)
        if p_plus is None or p_minus is None:
            mult = math.inf
        else:
            mult = (p_plus - p_minus) / (2.0 * delta)
        infos.append(
            CycleInfo(x_star, mult, "stable" if abs(mult) < 1.0 else "unstable")
        )
    return CycleReport(tuple(infos), theta_start)


@dataclass(frozen=True)
class PullinVerdict:
    omega_delta: float
    all_lock: bool
    n_escaped: int
    n_runs: int

    @property
    def verdict(self):
        return "all-lock" if self.all_lock else "some-escape"


def pullin_probe(
    params, omega_delta_grid, ic_grid, *, cfg=None, crit=LockCriterion()
):
    """For each frequency deviation, check whether every initial condition
    locks.  Divergence counts as escape.  Returns one verdict per
    deviation, in grid order.
    """
    if cfg is None:
        lf = params.loop_filter
        omega_n = math.sqrt(
            max(params.vco_gain * abs(float(lf.c @ lf.b)) * 0.25, 1e-30)
        )
        period = 2.0 * math.pi / omega_n
        cfg = IntegratorConfig(
            t_end=80.0 * period, scheme=FIXED_RK4, dt=period / 2000.0
        )

    def run_one(args):
        wd, s0 = args
        p = dataclasses.replace(params, omega2_free=params.omega1 - wd)
        try:
            traj = integrate(ModelKind.CLASSIC_PHASE_SPACE, p, s0, cfg)
        except IntegrationError:
            return False
        return detect_lock(traj, crit).locked

    verdicts = []
    for wd in omega_delta_grid:
        jobs = [(wd, np.asarray(s0, dtype=float)) for s0 in ic_grid]
        locks = pmap(run_one, jobs)
        n_esc = sum(1 for ok in locks if not ok)
        verdicts.append(PullinVerdict(float(wd), n_esc == 0, n_esc, len(jobs)))
    return verdicts


def classic_equilibria(params):
    """Equilibria of the classic model with their Jacobian eigenvalues.

    Returns a list of (theta_eq in [-pi/2, pi/2) + k pi/2, eigenvalues,
    locally_stable).  For a perfect-integrator loop filter the equilibria
    sit where the detector output vanishes; for a stable loop filter they
    exist only while |omega_delta_free| <= L * H(0) / 8.
    """
    p = params
    lf = p.loop_filter
    if lf.n != 1:
        raise LayoutError("classic_equilibria needs a scalar loop-filter state")
    a = float(lf.A[0, 0])
    b = float(lf.b[0])
    c = float(lf.c[0])
    out = []
    if a == 0.0:
        thetas = [0.0, 0.5 * math.pi]
    else:
        h0 = -c * b / a + lf.h
        phi_star = p.omega_delta_free / (p.vco_gain * h0)
        if abs(phi_star) > 0.125:
            return []
        t0 = 0.5 * math.asin(8.0 * phi_star)
        thetas = [t0, 0.5 * math.pi - t0]
    for th in thetas:
        slope = 0.25 * math.cos(2.0 * th)
        jac = np.array(
            [[a, b * slope], [-p.vco_gain * c, -p.vco_gain * lf.h * slope]]
        )
        eig = np.linalg.eigvals(jac)
        out.append((th, eig, bool(eig.real.max() < 0.0)))
    return out
