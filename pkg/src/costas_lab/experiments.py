"""Canned counterexample scenarios 1-6.

Each scenario runs a small set of simulations with pinned parameters and
checks a qualitative expectation (which run locks, which does not, how the
models disagree).  Reports are machine-readable and deterministic; CSVs are
emitted when an output directory is given.

Common parameters (scenarios 1-5): first-order low-pass arms with cutoff
1.2566e6 rad/s and unit DC gain, PI loop filter (tau2 s + 1)/(tau1 s) with
tau1 = 2e-5 s, tau2 = 3.9789e-6 s, carrier 2*pi*400 kHz, VCO gain 4.8e6
rad/(s V), theta1(0) = theta2(0) = 0.  Scenario-specific deviations are
recorded in the report.
"""

import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ._parallel import pmap
from .analysis import (
    CycleReport,
    LockCriterion,
    classic_equilibria,
    detect_lock,
    find_limit_cycles,
    pullin_probe,
)
from .errors import IntegrationError, ParameterError
from .filters import make_first_order_lowpass, make_lag_lead_filter, make_pi_loop_filter
from .integrators import FIXED_RK4, IntegratorConfig, Trajectory, integrate
from .models import (
    DataSignal,
    LoopParams,
    ModelKind,
    initial_frequency_difference,
    pack_state,
    wrap_angle,
)
from .output import fmt_float, write_keyvalues, write_trajectory_csv

__all__ = [
    "CARRIER_OMEGA",
    "LPF_CUTOFF",
    "PI_TAU1",
    "PI_TAU2",
    "VCO_GAIN",
    "baseline_params",
    "RunResult",
    "ExperimentReport",
    "run_example",
    "compare_models",
    "ComparisonReport",
    "EXAMPLE_IDS",
]

CARRIER_OMEGA = 2.0 * math.pi * 400000.0  # rad/s
LPF_CUTOFF = 1.2566e6  # rad/s
PI_TAU1 = 2e-5  # s
PI_TAU2 = 3.9789e-6  # s
VCO_GAIN = 4.8e6  # rad/(s V)

# Scenario 4 runs the arms at a tenth of the common cutoff.  With the
# common value the averaged models' lock states are comfortably stable
# (tau2 * cutoff = 5) and every model locks within 0.12 ms, so no model
# disagreement is observable; at 1.2566e5 (tau2 * cutoff = 0.5) the arm
# lag destabilizes every lock state of the filtered baseband models while
# leaving the ideal-arm classic model untouched.
LPF_CUTOFF_SLOW_ARMS = 1.2566e5  # rad/s

# Scenario 6: classic model near the pull-in boundary.  A perfect-
# integrator loop filter pulls in globally (the return map drifts one way
# everywhere), so the bistable regime is realized with a first-order
# lag-lead loop filter instead; the report states the values used.
EX6_VCO_GAIN = 1000.0  # rad/(s V)
EX6_OMEGA_DELTA = 89.45  # rad/s
EX6_CARRIER = 10000.0  # rad/s, inert for the classic model
EX6_X0 = 0.0125
EX6_THETA0 = -3.4035  # rad
EX6_LAG_TAU1 = 0.2  # s
EX6_LAG_TAU2 = 0.06  # s

DEFAULT_T_END = 5e-3  # s, scenarios 1-5
MAX_T_END = 20e-3  # s, horizon extension cap
DEFAULT_DT = 2e-9  # s
DEFAULT_SAMPLE_DT = 1e-6  # s
AMBIGUOUS_FREQ_FACTOR = 1000.0  # extension trigger, x freq_tol

EXAMPLE_IDS = (1, 2, 3, 4, 5, 6)


def baseline_params(
    omega2_free,
    *,
    dc_gain=1.0,
    data=None,
    lpf_cutoff=LPF_CUTOFF,
    vco_gain=VCO_GAIN,
    omega1=CARRIER_OMEGA,
):
    """LoopParams for the common scenario parameter set."""
    lpf = make_first_order_lowpass(lpf_cutoff, dc_gain)
    return LoopParams(
        lpf1=lpf,
        lpf2=lpf,
        loop_filter=make_pi_loop_filter(PI_TAU1, PI_TAU2),
        vco_gain=vco_gain,
        omega2_free=omega2_free,
        omega1=omega1,
        theta1_0=0.0,
        data=data if data is not None else DataSignal.constant_one(),
    )


@dataclass(frozen=True)
class RunResult:
    label: str
    kind: ModelKind
    lock: object  # LockReport
    t_end: float
    csv_path: str | None = None


@dataclass
class ExperimentReport:
    example_id: int
    runs: list = field(default_factory=list)
    comparisons: dict = field(default_factory=dict)
    passed: bool = False
    details: list = field(default_factory=list)
    csv_paths: list = field(default_factory=list)

    def lines(self):
        out = [f"example = {self.example_id}", f"passed = {self.passed}"]
        for r in self.runs:
            steady = (
                fmt_float(r.lock.steady_theta_delta)
                if r.lock.steady_theta_delta is not None
                else "nan"
            )
            out.append(
                f"run {r.label}: locked={'true' if r.lock.locked else 'false'} "
                f"freq_err={fmt_float(r.lock.tail_mean_freq_error)} "
                f"steady_theta={steady} t_end={fmt_float(r.t_end)}"
            )
        for k, v in self.comparisons.items():
            out.append(f"{k} = {fmt_float(v) if isinstance(v, float) else v}")
        out.extend(self.details)
        return out

    def write(self, outdir):
        path = os.path.join(outdir, f"example{self.example_id}_summary.txt")
        items = []
        for ln in self.lines():
            if " = " in ln:
                k, v = ln.split(" = ", 1)
                items.append((k, v))
            else:
                items.append(("note", ln))
        write_keyvalues(path, items)
        return path


def _default_cfg(t_end=DEFAULT_T_END):
    return IntegratorConfig(
        t_end=t_end, scheme=FIXED_RK4, dt=DEFAULT_DT, sample_dt=DEFAULT_SAMPLE_DT
    )


def _run_with_extension(kind, params, s0, crit, t_end=DEFAULT_T_END):
    """Simulate, doubling the horizon (up to the cap) while the verdict is
    ambiguous: not locked yet drifting slower than 1000x the lock
    tolerance."""
    while True:
        traj = integrate(kind, params, s0, _default_cfg(t_end))
        report = detect_lock(traj, crit)
        ambiguous = (
            not report.locked
            and report.tail_mean_freq_error < AMBIGUOUS_FREQ_FACTOR * crit.freq_tol
        )
        if report.locked or not ambiguous or t_end >= MAX_T_END:
            return traj, report, t_end
        t_end = min(2.0 * t_end, MAX_T_END)


def _emit(report, traj, label, kind, lock, t_end, outdir):
    path = None
    if outdir is not None and traj is not None:
        path = os.path.join(outdir, f"example{report.example_id}_{label}.csv")
        write_trajectory_csv(traj, path)
        report.csv_paths.append(path)
    report.runs.append(RunResult(label, kind, lock, t_end, path))


def _simulate_runs(report, jobs, crit, outdir):
    """jobs: list of (label, kind, params, s0); returns {label: (traj, LockReport)}."""

    def one(job):
        label, kind, params, s0 = job
        traj, lock, t_end = _run_with_extension(kind, params, s0, crit)
        return label, kind, traj, lock, t_end

    results = {}
    for label, kind, traj, lock, t_end in pmap(one, jobs):
        _emit(report, traj, label, kind, lock, t_end, outdir)
        results[label] = (traj, lock)
    return results


def _example1(report, crit, outdir, dc_gain):
    """Averaged baseband model vs waveform model at a large frequency
    deviation: both lock, at different phases."""
    p = baseline_params(CARRIER_OMEGA - 6e5, dc_gain=dc_gain)
    jobs = [
        ("phase_space", ModelKind.PHASE_SPACE, p, pack_state(ModelKind.PHASE_SPACE, p)),
        ("signal_space", ModelKind.SIGNAL_SPACE, p, pack_state(ModelKind.SIGNAL_SPACE, p)),
    ]
    res = _simulate_runs(report, jobs, crit, outdir)
    lock_p = res["phase_space"][1]
    lock_s = res["signal_space"][1]
    ok = lock_p.locked and lock_s.locked
    if ok:
        raw = abs(lock_s.steady_theta_delta - lock_p.steady_theta_delta)
        report.comparisons["steady_theta_diff"] = raw
        report.comparisons["steady_theta_diff_mod_pi"] = abs(
            wrap_angle(raw, math.pi)
        )
        ok = raw > 0.05
    report.details.append("expect: both lock with steady phases differing by > 0.05 rad")
    return ok


def _example2(report, crit, outdir, dc_gain):
    """Nonzero low-pass arm initial state prevents lock."""
    p = baseline_params(CARRIER_OMEGA - 2.0, dc_gain=dc_gain)
    k = ModelKind.SIGNAL_SPACE
    jobs = [
        ("zero_states", k, p, pack_state(k, p)),
        ("charged_lpf1", k, p, pack_state(k, p, x1=[0.02])),
    ]
    res = _simulate_runs(report, jobs, crit, outdir)
    report.details.append("expect: zero filter states lock, x1(0)=0.02 does not")
    return res["zero_states"][1].locked and not res["charged_lpf1"][1].locked


def _example3(report, crit, outdir, dc_gain):
    """Periodic data prevents the lock that constant data acquires."""
    p_const = baseline_params(3.2e6, dc_gain=dc_gain)
    p_square = baseline_params(
        3.2e6, dc_gain=dc_gain, data=DataSignal.periodic_square(2.0 * math.pi * 1e5)
    )
    k = ModelKind.SIGNAL_SPACE
    jobs = [
        ("constant_data", k, p_const, pack_state(k, p_const)),
        ("square_data", k, p_square, pack_state(k, p_square)),
    ]
    res = _simulate_runs(report, jobs, crit, outdir)
    report.details.append("expect: constant data locks, 100 kHz square data does not")
    return res["constant_data"][1].locked and not res["square_data"][1].locked


def _example4(report, crit, outdir, dc_gain):
    """Real low-pass arms destroy the lock the ideal-arm model acquires."""
    p = baseline_params(
        CARRIER_OMEGA - 5e5, dc_gain=dc_gain, lpf_cutoff=LPF_CUTOFF_SLOW_ARMS
    )
    jobs = [
        ("classic", ModelKind.CLASSIC_PHASE_SPACE, p, pack_state(ModelKind.CLASSIC_PHASE_SPACE, p)),
        ("phase_space", ModelKind.PHASE_SPACE, p, pack_state(ModelKind.PHASE_SPACE, p)),
        ("simplified", ModelKind.SIMPLIFIED_SIGNAL_SPACE, p, pack_state(ModelKind.SIMPLIFIED_SIGNAL_SPACE, p)),
    ]
    res = _simulate_runs(report, jobs, crit, outdir)
    report.details.append(
        f"arm cutoff {fmt_float(LPF_CUTOFF_SLOW_ARMS)} rad/s (tau2*cutoff = 0.5 < 1 "
        "destabilizes every lock state of the arm-filtered baseband models)"
    )
    report.details.append("expect: classic locks; phase_space and simplified do not")
    return (
        res["classic"][1].locked
        and not res["phase_space"][1].locked
        and not res["simplified"][1].locked
    )


def _example5(report, crit, outdir, dc_gain):
    """Nonzero loop-filter initial state prevents lock."""
    p = baseline_params(CARRIER_OMEGA - 10.0, dc_gain=dc_gain)
    k = ModelKind.SIGNAL_SPACE
    s_red = pack_state(k, p, x=[-1e-5])
    jobs = [
        ("zero_state", k, p, pack_state(k, p)),
        ("charged_loop_filter", k, p, s_red),
    ]
    res = _simulate_runs(report, jobs, crit, outdir)
    w0 = initial_frequency_difference(k, p, s_red)
    report.comparisons["initial_freq_difference_charged"] = w0
    report.details.append("expect: zero loop-filter state locks, x(0)=-1e-5 does not")
    return res["zero_state"][1].locked and not res["charged_loop_filter"][1].locked


def _ex6_params(tau1, tau2, pi_filter=False):
    lf = make_pi_loop_filter(tau1, tau2) if pi_filter else make_lag_lead_filter(tau1, tau2)
    return LoopParams(
        lpf1=make_first_order_lowpass(LPF_CUTOFF),
        lpf2=make_first_order_lowpass(LPF_CUTOFF),
        loop_filter=lf,
        vco_gain=EX6_VCO_GAIN,
        omega2_free=EX6_CARRIER - EX6_OMEGA_DELTA,
        omega1=EX6_CARRIER,
    )


def _ex6_bracket(params, v_lo=-90.0, v_hi=-30.0):
    """Loop-filter-state bracket covering upward rotation rates [v_lo, v_hi]."""
    lc = params.vco_gain * float(params.loop_filter.c[0])
    wd = params.omega_delta_free
    return ((v_lo + wd) / lc, (v_hi + wd) / lc)


def _ex6_cycle_scan(params, n_grid=65):
    return find_limit_cycles(
        params, _ex6_bracket(params), EX6_THETA0, n_grid=n_grid
    )


def _has_pair(cycle_report):
    stable = [c for c in cycle_report.cycles if c.stable]
    unstable = [c for c in cycle_report.cycles if not c.stable]
    return len(stable) >= 1 and len(unstable) >= 1


def _example6(report, crit, outdir, dc_gain):
    k = ModelKind.CLASSIC_PHASE_SPACE

    # 1) the documented PI loop filter first, scanning tau1 over two decades
    pi_found = None
    for tau1 in (PI_TAU1, 10.0 * PI_TAU1, 100.0 * PI_TAU1):
        p_pi = _ex6_params(tau1, tau1 * (PI_TAU2 / PI_TAU1), pi_filter=True)
        lc = p_pi.vco_gain * float(p_pi.loop_filter.c[0])
        v_scale = math.sqrt(lc / 4.0)
        bracket = (
            (EX6_OMEGA_DELTA - 6.0 * v_scale) / lc,
            (EX6_OMEGA_DELTA - 1.05 * v_scale) / lc,
        )
        rep = find_limit_cycles(p_pi, bracket, EX6_THETA0, n_grid=65)
        if _has_pair(rep):
            pi_found = (p_pi, rep, tau1)
            break
    if pi_found is not None:
        params, cycles, tau1 = pi_found
        report.details.append(
            f"loop_filter = pi tau1={fmt_float(tau1)} "
            f"tau2={fmt_float(tau1 * (PI_TAU2 / PI_TAU1))}"
        )
    else:
        report.details.append(
            "pi loop filter exhibits no limit-cycle pair over the scanned "
            "tau1 decades (type-2 loop: the return map drifts toward lock "
            "everywhere); falling back to a first-order lag-lead loop filter"
        )
        # 2) lag-lead fallback scan
        cycles = None
        params = None
        for tau1, tau2 in (
            (EX6_LAG_TAU1, EX6_LAG_TAU2),
            (0.25, 0.075),
            (0.3, 0.09),
            (0.15, 0.045),
            (0.35, 0.105),
        ):
            p_try = _ex6_params(tau1, tau2)
            rep = _ex6_cycle_scan(p_try)
            if _has_pair(rep):
                params, cycles = p_try, rep
                report.details.append(
                    f"loop_filter = lag_lead tau1={fmt_float(tau1)} tau2={fmt_float(tau2)}"
                )
                break
        if params is None:
            report.details.append("no bistable regime found; example fails")
            return False

    for c in cycles.cycles:
        report.details.append(
            f"cycle x={fmt_float(c.fixed_point_x)} multiplier={fmt_float(c.multiplier)} "
            f"{c.stability}"
        )
    report.comparisons["n_cycles"] = str(len(cycles.cycles))

    # 3) fixed-step verdict sweep from the pinned initial point
    s0 = pack_state(k, params, x=[EX6_X0], theta=EX6_THETA0)
    t_end = 60.0

    def verdict(dt):
        cfg = IntegratorConfig(
            t_end=t_end, scheme=FIXED_RK4, dt=dt, sample_dt=t_end / 4000.0
        )
        try:
            traj = integrate(k, params, s0, cfg)
        except IntegrationError:
            return None
        return detect_lock(traj, crit).locked

    dts = (1e-3, 5e-3, 1e-2, 2e-2, 3e-2, 4e-2, 6e-2, 8e-2)
    verdicts = pmap(verdict, dts)
    for dt, v in zip(dts, verdicts):
        report.details.append(
            f"fixed_step dt={fmt_float(dt)}: "
            + ("diverged" if v is None else ("locked" if v else "no lock"))
        )
    valid = [(dt, v) for dt, v in zip(dts, verdicts) if v is not None]
    flip = len({v for _, v in valid}) > 1
    report.comparisons["step_verdict_flip"] = "true" if flip else "false"

    # 4) pull-in probe at the pinned deviation
    lay_states = [
        pack_state(k, params, x=[x0], theta=th0)
        for x0 in (0.0, 0.005, EX6_X0)
        for th0 in (EX6_THETA0, 0.0)
    ]
    probe = pullin_probe(params, [EX6_OMEGA_DELTA], lay_states, crit=crit)[0]
    report.comparisons["pullin_verdict"] = probe.verdict
    report.details.append(
        f"pullin omega_delta={fmt_float(EX6_OMEGA_DELTA)}: {probe.verdict} "
        f"({probe.n_escaped}/{probe.n_runs} escaped)"
    )
    for th, eig, stable in classic_equilibria(params):
        report.details.append(
            f"equilibrium theta={fmt_float(th)} max_re_eig={fmt_float(float(eig.real.max()))} "
            f"{'stable' if stable else 'unstable'}"
        )

    # reference fine run for the record
    traj_fine = integrate(
        k,
        params,
        s0,
        IntegratorConfig(t_end=t_end, scheme=FIXED_RK4, dt=1e-4, sample_dt=t_end / 4000.0),
    )
    fine_lock = detect_lock(traj_fine, crit)
    _emit(report, traj_fine, "fine_reference", k, fine_lock, t_end, outdir)

    report.details.append(
        "expect: a stable/unstable cycle pair, step-size dependent verdicts, "
        "and escape at this deviation"
    )
    return _has_pair(cycles) and flip and not probe.all_lock


_EXAMPLES = {
    1: _example1,
    2: _example2,
    3: _example3,
    4: _example4,
    5: _example5,
    6: _example6,
}


def run_example(example_id, outdir=None, *, dc_gain=1.0, crit=LockCriterion()):
    """Execute one bundled scenario and return its ExperimentReport."""
    if example_id not in _EXAMPLES:
        raise ParameterError(f"example id must be in 1..6, got {example_id!r}")
    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
    report = ExperimentReport(example_id=example_id)
    report.passed = _EXAMPLES[example_id](report, crit, outdir, dc_gain)
    if outdir is not None:
        report.write(outdir)
    return report


@dataclass(frozen=True)
class ComparisonReport:
    kinds: tuple
    grid: np.ndarray
    theta_delta: dict
    g: dict
    sup_theta_diff: dict
    sup_g_diff: dict
    steady_theta: dict


def compare_models(kinds, params, initial_states, cfg, *, tail_fraction=0.2):
    """Run several kinds on one parameter set and compare on a common grid.

    initial_states maps kind -> state.  Pairwise sup differences are keyed
    "<kind_a>|<kind_b>".
    """
    kinds = [ModelKind(k) for k in kinds]
    sample_dt, _ = cfg._sampling()
    grid = np.arange(0.0, cfg.t_end + 0.5 * sample_dt, sample_dt)

    def one(kind):
        traj = integrate(kind, params, initial_states[kind], cfg)
        return kind, traj

    td: dict = {}
    gg: dict = {}
    steady: dict = {}
    for kind, traj in pmap(one, kinds):
        td[kind] = np.interp(grid, traj.times, traj.theta_delta)
        gg[kind] = np.interp(grid, traj.times, traj.g)
        i0 = int(len(traj) * (1.0 - tail_fraction))
        steady[kind] = float(traj.theta_delta[i0:].mean())
    sup_t: dict = {}
    sup_g: dict = {}
    for i, ka in enumerate(kinds):
        for kb in kinds[i + 1 :]:
            key = f"{ka.value}|{kb.value}"
            sup_t[key] = float(np.abs(td[ka] - td[kb]).max())
            sup_g[key] = float(np.abs(gg[ka] - gg[kb]).max())
    return ComparisonReport(tuple(kinds), grid, td, gg, sup_t, sup_g, steady)
