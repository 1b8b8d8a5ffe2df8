"""CSV and flat key-value emission.

Floats are printed with 17 significant digits so a written value reparses
bit-identically; output is locale-independent (decimal point, LF line
terminators, no separators).
"""

import numpy as np

__all__ = ["fmt_float", "write_trajectory_csv", "write_keyvalues", "lock_summary_line"]

CSV_HEADER = "t,theta_delta,g,g1,g2,omega2"


def fmt_float(x):
    """17-significant-digit decimal form; round-trips exactly."""
    return format(float(x), ".17g")


def write_trajectory_csv(traj, path):
    """Write `t,theta_delta,g,g1,g2,omega2`; columns a model lacks stay empty."""
    td = traj.theta_delta
    g = traj.g
    g1 = traj.g1
    g2 = traj.g2
    w2 = traj.omega2
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for i, t in enumerate(traj.times):
            c1 = fmt_float(g1[i]) if g1 is not None else ""
            c2 = fmt_float(g2[i]) if g2 is not None else ""
            fh.write(
                f"{fmt_float(t)},{fmt_float(td[i])},{fmt_float(g[i])},"
                f"{c1},{c2},{fmt_float(w2[i])}\n"
            )
    return path


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def write_keyvalues(path, items):
    """Flat `key = value` record, one entry per line."""
    with open(path, "w", newline="") as fh:
        for k, v in items:
            fh.write(f"{k} = {_fmt_value(v)}\n")
    return path


def lock_summary_line(report):
    """One-line lock summary printed by the simulate command."""
    steady = report.steady_theta_delta
    steady_s = fmt_float(steady) if steady is not None else "nan"
    return (
        f"locked={'true' if report.locked else 'false'} "
        f"tail_freq_err={fmt_float(report.tail_mean_freq_error)} "
        f"steady_theta={steady_s}"
    )
