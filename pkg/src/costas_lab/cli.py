"""Command-line interface and flat run configuration.

Configs are flat `key = value` text, one entry per line, `#` comments.
Units: rad/s for frequencies, seconds for times.  Unknown keys and keys
that do not apply to the chosen model are rejected with the key named in
the message.

Exit codes: 0 success, 1 configuration/usage error, 2 integration failure,
3 (example command) qualitative outcome mismatch.
"""

import argparse
import math
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .analysis import (
    LockCriterion,
    averaging_discrepancy,
    detect_lock,
    pullin_probe,
)
from .errors import (
    ConfigError,
    CostasLabError,
    IntegrationError,
    ParameterError,
)
from .experiments import EXAMPLE_IDS, run_example
from .filters import (
    make_first_order_lowpass,
    make_lag_lead_filter,
    make_pi_loop_filter,
)
from .integrators import ADAPTIVE_45, FIXED_RK4, IntegratorConfig, integrate
from .models import DataSignal, LoopParams, ModelKind, pack_state
from .output import fmt_float, lock_summary_line, write_keyvalues, write_trajectory_csv

__all__ = ["RunConfig", "parse_config", "serialize_config", "main"]

_MODEL_NAMES = tuple(k.value for k in ModelKind)

_FLOAT_KEYS = (
    "dt",
    "rel_tol",
    "abs_tol",
    "max_step",
    "t_end",
    "sample_dt",
    "omega1",
    "omega2_free",
    "theta1_0",
    "vco_gain",
    "lpf_omega3",
    "lpf_dc_gain",
    "lf_tau1",
    "lf_tau2",
    "data_omega_m",
    "x",
    "x1",
    "x2",
    "theta_delta",
    "theta2",
)
_STR_KEYS = ("model", "scheme", "lf_kind", "data", "out")

_STATE_KEYS = {
    ModelKind.SIGNAL_SPACE: ("x", "x1", "x2", "theta2"),
    ModelKind.SIMPLIFIED_SIGNAL_SPACE: ("x", "x1", "x2", "theta_delta"),
    ModelKind.PHASE_SPACE: ("x", "x1", "x2", "theta_delta"),
    ModelKind.CLASSIC_PHASE_SPACE: ("x", "theta_delta"),
    ModelKind.MODIFIED_SIGNAL_SPACE: ("x", "theta2"),
}


@dataclass(frozen=True)
class RunConfig:
    """Parsed flat configuration; None marks an absent key."""

    model: str | None = None
    scheme: str | None = None
    lf_kind: str | None = None
    data: str | None = None
    out: str | None = None
    dt: float | None = None
    rel_tol: float | None = None
    abs_tol: float | None = None
    max_step: float | None = None
    t_end: float | None = None
    sample_dt: float | None = None
    omega1: float | None = None
    omega2_free: float | None = None
    theta1_0: float | None = None
    vco_gain: float | None = None
    lpf_omega3: float | None = None
    lpf_dc_gain: float | None = None
    lf_tau1: float | None = None
    lf_tau2: float | None = None
    data_omega_m: float | None = None
    x: float | None = None
    x1: float | None = None
    x2: float | None = None
    theta_delta: float | None = None
    theta2: float | None = None


def parse_config(text):
    """Parse flat `key = value` text into a RunConfig."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], f"line {lineno} is not 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(key, "duplicate key")
        if key in _FLOAT_KEYS:
            try:
                values[key] = float(val)
            except ValueError:
                raise ConfigError(key, f"cannot parse {val!r} as a number") from None
        elif key in _STR_KEYS:
            values[key] = val
        else:
            raise ConfigError(key, "unknown key")
    return RunConfig(**values)


def serialize_config(rc):
    """Inverse of parse_config: reparsing the output gives an equal RunConfig."""
    lines = []
    for f in fields(rc):
        v = getattr(rc, f.name)
        if v is None:
            continue
        if isinstance(v, float):
            lines.append(f"{f.name} = {fmt_float(v)}")
        else:
            lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def _require(rc, key):
    v = getattr(rc, key)
    if v is None:
        raise ConfigError(key, "required key is missing")
    return v


def build_runtime(rc):
    """Turn a RunConfig into (kind, LoopParams, initial state, IntegratorConfig)."""
    model = _require(rc, "model")
    if model not in _MODEL_NAMES:
        raise ConfigError("model", f"must be one of {', '.join(_MODEL_NAMES)}")
    kind = ModelKind(model)

    allowed_state = _STATE_KEYS[kind]
    for key in ("x", "x1", "x2", "theta_delta", "theta2"):
        if getattr(rc, key) is not None and key not in allowed_state:
            raise ConfigError(key, f"not applicable to model {model}")
    if not kind.has_lowpass_states:
        for key in ("lpf_omega3", "lpf_dc_gain"):
            if getattr(rc, key) is not None:
                raise ConfigError(key, f"not applicable to model {model}")
    if kind is not ModelKind.SIGNAL_SPACE:
        for key in ("data", "data_omega_m"):
            if getattr(rc, key) is not None:
                raise ConfigError(key, f"not applicable to model {model}")

    lf_kind = rc.lf_kind or "pi"
    if lf_kind not in ("pi", "lag_lead"):
        raise ConfigError("lf_kind", "must be 'pi' or 'lag_lead'")
    try:
        tau1 = _require(rc, "lf_tau1")
        tau2 = _require(rc, "lf_tau2")
        if lf_kind == "pi":
            loop_filter = make_pi_loop_filter(tau1, tau2)
        else:
            loop_filter = make_lag_lead_filter(tau1, tau2)
    except ParameterError as exc:
        raise ConfigError("lf_tau1", str(exc)) from None

    if kind.has_lowpass_states:
        omega3 = _require(rc, "lpf_omega3")
        try:
            lpf = make_first_order_lowpass(omega3, rc.lpf_dc_gain or 1.0)
        except ParameterError as exc:
            raise ConfigError("lpf_omega3", str(exc)) from None
    else:
        lpf = make_first_order_lowpass(1.0, 1.0)  # inert placeholder arms

    data = DataSignal.constant_one()
    if rc.data is not None:
        if rc.data not in ("constant", "square"):
            raise ConfigError("data", "must be 'constant' or 'square'")
        if rc.data == "square":
            if rc.data_omega_m is None:
                raise ConfigError("data_omega_m", "required for square data")
            data = DataSignal.periodic_square(rc.data_omega_m)

    try:
        params = LoopParams(
            lpf1=lpf,
            lpf2=lpf,
            loop_filter=loop_filter,
            vco_gain=_require(rc, "vco_gain"),
            omega2_free=_require(rc, "omega2_free"),
            omega1=_require(rc, "omega1"),
            theta1_0=rc.theta1_0 or 0.0,
            data=data,
        )
    except ParameterError as exc:
        raise ConfigError("omega1", str(exc)) from None

    theta = rc.theta2 if kind.angle_is_vco_phase else rc.theta_delta
    s0 = pack_state(
        kind,
        params,
        x1=None if rc.x1 is None else [rc.x1],
        x2=None if rc.x2 is None else [rc.x2],
        x=None if rc.x is None else [rc.x],
        theta=theta or 0.0,
    )

    scheme = rc.scheme or FIXED_RK4
    if scheme not in (FIXED_RK4, ADAPTIVE_45):
        raise ConfigError("scheme", f"must be {FIXED_RK4} or {ADAPTIVE_45}")
    try:
        cfg = IntegratorConfig(
            t_end=_require(rc, "t_end"),
            scheme=scheme,
            dt=rc.dt if rc.dt is not None else 0.0,
            rel_tol=rc.rel_tol if rc.rel_tol is not None else 1e-8,
            abs_tol=rc.abs_tol if rc.abs_tol is not None else 1e-12,
            max_step=rc.max_step if rc.max_step is not None else math.inf,
            sample_dt=rc.sample_dt if rc.sample_dt is not None else 0.0,
        )
    except ParameterError as exc:
        msg = str(exc)
        key = msg.split()[0] if msg else "t_end"
        raise ConfigError(key, msg) from None
    return kind, params, s0, cfg


def _load_config(path):
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None


def cmd_simulate(config_path, out=None):
    try:
        rc = _load_config(config_path)
        kind, params, s0, cfg = build_runtime(rc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        traj = integrate(kind, params, s0, cfg)
    except IntegrationError as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return 2
    report = detect_lock(traj, LockCriterion())
    print(lock_summary_line(report))
    target = out or rc.out
    if target:
        write_trajectory_csv(traj, target)
    return 0


def cmd_example(example_id, outdir=None):
    if example_id not in EXAMPLE_IDS:
        print(f"usage error: example id must be 1..6, got {example_id}", file=sys.stderr)
        return 1
    try:
        report = run_example(example_id, outdir)
    except IntegrationError as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return 2
    for line in report.lines():
        print(line)
    return 0 if report.passed else 3


def _parse_grid(spec):
    """Grid spec `x=lo:hi:n,theta=lo:hi:n` -> (x values, theta values)."""
    parts = dict()
    for chunk in spec.split(","):
        if "=" not in chunk:
            raise ConfigError("grid", f"bad grid chunk {chunk!r}")
        name, rng = chunk.split("=", 1)
        name = name.strip()
        if name not in ("x", "theta"):
            raise ConfigError("grid", f"unknown grid axis {name!r}")
        bits = rng.split(":")
        if len(bits) != 3:
            raise ConfigError("grid", f"axis {name} needs lo:hi:n")
        lo, hi, n = float(bits[0]), float(bits[1]), int(bits[2])
        if n < 1:
            raise ConfigError("grid", f"axis {name} needs n >= 1")
        parts[name] = np.linspace(lo, hi, n)
    if "x" not in parts or "theta" not in parts:
        raise ConfigError("grid", "grid needs both x= and theta= axes")
    return parts["x"], parts["theta"]


def cmd_portrait(config_path, grid_spec, outdir):
    try:
        rc = _load_config(config_path)
        kind, params, _, cfg = build_runtime(rc)
        if kind is not ModelKind.CLASSIC_PHASE_SPACE:
            raise ConfigError("model", "portrait needs classic_phase_space")
        xs, thetas = _parse_grid(grid_spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    os.makedirs(outdir, exist_ok=True)
    crit = LockCriterion()
    summary = []
    idx = 0
    for x0 in xs:
        for th0 in thetas:
            s0 = pack_state(kind, params, x=[x0], theta=th0)
            try:
                traj = integrate(kind, params, s0, cfg)
            except IntegrationError as exc:
                print(f"integration failure: {exc}", file=sys.stderr)
                return 2
            verdict = "captured" if detect_lock(traj, crit).locked else "rotational"
            path = os.path.join(outdir, f"portrait_{idx:03d}.csv")
            td = traj.theta_delta
            xv = traj.states[:, 0]
            with open(path, "w", newline="") as fh:
                fh.write("t,x,theta_delta\n")
                for i, t in enumerate(traj.times):
                    fh.write(f"{fmt_float(t)},{fmt_float(xv[i])},{fmt_float(td[i])}\n")
            summary.append(
                (f"trajectory_{idx:03d}", f"x0={fmt_float(x0)} theta0={fmt_float(th0)} verdict={verdict}")
            )
            print(f"trajectory_{idx:03d} x0={fmt_float(x0)} theta0={fmt_float(th0)} {verdict}")
            idx += 1
    write_keyvalues(os.path.join(outdir, "portrait_summary.txt"), summary)
    return 0


# Condition-15 heuristic: the averaged model is trustworthy only while the
# deviation stays small against the carrier; flag rows past this ratio.
CONDITION15_RATIO = 0.1


def cmd_avgcheck(config_path, omega1_csv, out=None):
    try:
        rc = _load_config(config_path)
        kind, params, s0, cfg = build_runtime(rc)
        if kind not in (
            ModelKind.MODIFIED_SIGNAL_SPACE,
            ModelKind.SIMPLIFIED_SIGNAL_SPACE,
        ):
            raise ConfigError(
                "model", "avgcheck needs modified_signal_space or simplified_signal_space"
            )
        omega1_list = [float(v) for v in omega1_csv.split(",") if v.strip()]
        if not omega1_list:
            raise ConfigError("omega1", "need at least one carrier frequency")
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        rows = averaging_discrepancy(params, omega1_list, cfg.t_end, original=kind)
    except IntegrationError as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return 2
    for r in rows:
        flag = " condition-15-violated" if r.condition_ratio > CONDITION15_RATIO else ""
        print(
            f"omega1={fmt_float(r.omega1)} sup_theta_err={fmt_float(r.sup_theta_error)} "
            f"sup_state_err={fmt_float(r.sup_state_error)}{flag}"
        )
    if len(rows) >= 2:
        slope = float(
            np.polyfit(
                np.log([r.omega1 for r in rows]),
                np.log([max(r.sup_theta_error, 1e-300) for r in rows]),
                1,
            )[0]
        )
        print(f"slope={fmt_float(slope)}")
    if out:
        with open(out, "w", newline="") as fh:
            fh.write("omega1,sup_theta_err,sup_state_err,condition_ratio\n")
            for r in rows:
                fh.write(
                    f"{fmt_float(r.omega1)},{fmt_float(r.sup_theta_error)},"
                    f"{fmt_float(r.sup_state_error)},{fmt_float(r.condition_ratio)}\n"
                )
    return 0


def cmd_pullin(config_path, range_spec):
    try:
        rc = _load_config(config_path)
        kind, params, s0, cfg = build_runtime(rc)
        if kind is not ModelKind.CLASSIC_PHASE_SPACE:
            raise ConfigError("model", "pullin needs classic_phase_space")
        bits = range_spec.split(":")
        if len(bits) != 3:
            raise ConfigError("range", "expected lo:hi:step")
        lo, hi, step = (float(b) for b in bits)
        if step <= 0 or hi < lo:
            raise ConfigError("range", "need lo <= hi and step > 0")
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    grid = np.arange(lo, hi + 0.5 * step, step)
    x0 = float(s0[0])
    th0 = float(s0[-1])
    ic_grid = [
        pack_state(kind, params, x=[xv], theta=tv)
        for xv in (x0, 0.0)
        for tv in (th0, th0 + 0.5 * math.pi, th0 - 0.5 * math.pi, th0 + math.pi)
    ]
    verdicts = pullin_probe(params, grid, ic_grid, cfg=cfg)
    for v in verdicts:
        print(
            f"omega_delta={fmt_float(v.omega_delta)} verdict={v.verdict} "
            f"escaped={v.n_escaped}/{v.n_runs}"
        )
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="costas-lab",
        description="Simulate nonlinear BPSK Costas-loop models and analyze lock.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one simulation from a config file")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", default=None, help="trajectory CSV path")

    p_ex = sub.add_parser("example", help="run one bundled scenario (1..6)")
    p_ex.add_argument("id", type=int)
    p_ex.add_argument("--outdir", default=None)

    p_por = sub.add_parser("portrait", help="integrate a grid of initial conditions")
    p_por.add_argument("--config", required=True)
    p_por.add_argument("--grid", required=True, help="x=lo:hi:n,theta=lo:hi:n")
    p_por.add_argument("--outdir", required=True)

    p_avg = sub.add_parser("avgcheck", help="waveform vs averaged model discrepancy")
    p_avg.add_argument("--config", required=True)
    p_avg.add_argument("--omega1", required=True, help="comma list of rad/s values")
    p_avg.add_argument("--out", default=None, help="CSV output path")

    p_pull = sub.add_parser("pullin", help="pull-in probe over a deviation range")
    p_pull.add_argument("--config", required=True)
    p_pull.add_argument("--range", required=True, help="lo:hi:step in rad/s")

    args = parser.parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args.config, args.out)
    if args.command == "example":
        return cmd_example(args.id, args.outdir)
    if args.command == "portrait":
        return cmd_portrait(args.config, args.grid, args.outdir)
    if args.command == "avgcheck":
        return cmd_avgcheck(args.config, args.omega1, args.out)
    if args.command == "pullin":
        return cmd_pullin(args.config, args.range)
    parser.error(f"unknown command {args.command!r}")  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
