"""Compiled integration kernels (numba).

One packed-parameter RHS dispatch plus three drivers: fixed-step RK4,
adaptive Dormand-Prince 5(4), and an angle-crossing integrator used for
return maps.  The public modules keep readable numpy right-hand sides; the
kernels here are the fast path and are pinned to those references by tests.

Packed layout:
  ip = [kind, data_kind, n1, n2, nl]
  fp = [L, omega2_free, omega1, theta1_0, omega_m, h_lf,
        A1.flat, b1, c1, A2.flat, b2, c2, A.flat, b, c]

Data sign flips sit at t_k = k*pi/omega_m; drivers shorten steps to land on
them exactly and evaluate m at the step midpoint, so no Runge-Kutta stage
ever reads a value from the wrong side of a transition.
"""

import math

import numpy as np
from numba import njit

from .models import ModelKind

KIND_SIGNAL = 0
KIND_SIMPLIFIED = 1
KIND_PHASE = 2
KIND_CLASSIC = 3
KIND_MODIFIED = 4

KIND_IDS = {
    ModelKind.SIGNAL_SPACE: KIND_SIGNAL,
    ModelKind.SIMPLIFIED_SIGNAL_SPACE: KIND_SIMPLIFIED,
    ModelKind.PHASE_SPACE: KIND_PHASE,
    ModelKind.CLASSIC_PHASE_SPACE: KIND_CLASSIC,
    ModelKind.MODIFIED_SIGNAL_SPACE: KIND_MODIFIED,
}

STATUS_OK = 0
STATUS_DIVERGED = 1
STATUS_UNDERFLOW = 2
STATUS_NO_CROSSING = 3


def pack_params(kind, params):
    """Flatten LoopParams into (fp, ip) arrays for the kernels."""
    kid = KIND_IDS[ModelKind(kind)]
    data_kind = 1 if params.data.kind == "square" else 0
    f1, f2, fl = params.lpf1, params.lpf2, params.loop_filter
    fp = np.concatenate(
        [
            np.array(
                [
                    params.vco_gain,
                    params.omega2_free,
                    params.omega1,
                    params.theta1_0,
                    params.data.omega_m,
                    fl.h,
                ]
            ),
            f1.A.ravel(),
            f1.b,
            f1.c,
            f2.A.ravel(),
            f2.b,
            f2.c,
            fl.A.ravel(),
            fl.b,
            fl.c,
        ]
    )
    ip = np.array([kid, data_kind, f1.n, f2.n, fl.n], dtype=np.int64)
    return fp, ip


@njit(cache=True, nogil=True)
def _rhs(t, y, dy, fp, ip, m):
    kind = ip[0]
    n1 = ip[2]
    n2 = ip[3]
    nl = ip[4]
    L = fp[0]
    w2f = fp[1]
    w1 = fp[2]
    th10 = fp[3]
    h = fp[5]
    o_a1 = 6
    o_b1 = o_a1 + n1 * n1
    o_c1 = o_b1 + n1
    o_a2 = o_c1 + n1
    o_b2 = o_a2 + n2 * n2
    o_c2 = o_b2 + n2
    o_a = o_c2 + n2
    o_b = o_a + nl * nl
    o_c = o_b + nl

    if kind == KIND_CLASSIC or kind == KIND_MODIFIED:
        ang = nl
        th = y[ang]
        if kind == KIND_CLASSIC:
            phi = 0.125 * math.sin(2.0 * th)
        else:
            s1 = math.sin(w1 * t + th10)
            phi = s1 * s1 * math.sin(th) * math.cos(th)
        g = h * phi
        for i in range(nl):
            acc = 0.0
            for j in range(nl):
                acc += fp[o_a + i * nl + j] * y[j]
            dy[i] = acc + fp[o_b + i] * phi
            g += fp[o_c + i] * y[i]
        if kind == KIND_CLASSIC:
            dy[ang] = (w1 - w2f) - L * g
        else:
            dy[ang] = w2f + L * g
        return

    ang = n1 + n2 + nl
    if kind == KIND_SIGNAL:
        th1 = w1 * t + th10
        th2 = y[ang]
        s1 = m * math.sin(th1)
        u1 = s1 * math.sin(th2)
        u2 = s1 * math.cos(th2)
    elif kind == KIND_SIMPLIFIED:
        th1 = w1 * t + th10
        th2 = th1 - y[ang]
        s1 = math.sin(th1)
        u1 = s1 * math.sin(th2)
        u2 = s1 * math.cos(th2)
    else:
        td = y[ang]
        u1 = 0.5 * math.cos(td)
        u2 = 0.5 * math.sin(td)

    g1 = 0.0
    for i in range(n1):
        acc = 0.0
        for j in range(n1):
            acc += fp[o_a1 + i * n1 + j] * y[j]
        dy[i] = acc + fp[o_b1 + i] * u1
        g1 += fp[o_c1 + i] * y[i]
    g2 = 0.0
    for i in range(n2):
        acc = 0.0
        for j in range(n2):
            acc += fp[o_a2 + i * n2 + j] * y[n1 + j]
        dy[n1 + i] = acc + fp[o_b2 + i] * u2
        g2 += fp[o_c2 + i] * y[n1 + i]
    phi = g1 * g2
    g = h * phi
    for i in range(nl):
        acc = 0.0
        for j in range(nl):
            acc += fp[o_a + i * nl + j] * y[n1 + n2 + j]
        dy[n1 + n2 + i] = acc + fp[o_b + i] * phi
        g += fp[o_c + i] * y[n1 + n2 + i]
    if kind == KIND_SIGNAL:
        dy[ang] = w2f + L * g
    else:
        dy[ang] = (w1 - w2f) - L * g


@njit(cache=True, nogil=True)
def _data_value(t, fp, ip):
    if ip[0] == KIND_SIGNAL and ip[1] == 1:
        return 1.0 if math.sin(fp[4] * t) >= 0.0 else -1.0
    return 1.0


@njit(cache=True, nogil=True)
def _rk4_step(t, h, y, ynew, m, fp, ip, k1, k2, k3, k4, yt):
    dim = y.shape[0]
    _rhs(t, y, k1, fp, ip, m)
    for j in range(dim):
        yt[j] = y[j] + 0.5 * h * k1[j]
    _rhs(t + 0.5 * h, yt, k2, fp, ip, m)
    for j in range(dim):
        yt[j] = y[j] + 0.5 * h * k2[j]
    _rhs(t + 0.5 * h, yt, k3, fp, ip, m)
    for j in range(dim):
        yt[j] = y[j] + h * k3[j]
    _rhs(t + h, yt, k4, fp, ip, m)
    for j in range(dim):
        ynew[j] = y[j] + (h / 6.0) * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j])


@njit(cache=True, nogil=True)
def _all_finite(y):
    for j in range(y.shape[0]):
        if not math.isfinite(y[j]):
            return False
    return True


@njit(cache=True, nogil=True)
def _integrate_fixed(y0, fp, ip, dt, t_end, half_period, sample_dt, stride):
    """Fixed-step RK4 with transition landing and decimated sampling.

    sample_dt > 0 records the first step end at or past each multiple of
    sample_dt; otherwise every `stride`-th accepted step is recorded.
    Returns (times, states, count, status, t_fail).
    """
    dim = y0.shape[0]
    if sample_dt > 0.0:
        cap = int(t_end / sample_dt) + 8
    else:
        cap = int(t_end / dt / stride) + 16
        if half_period > 0.0:
            cap += int(t_end / half_period) + 8
    ts = np.empty(cap)
    ys = np.empty((cap, dim))
    y = y0.copy()
    ynew = np.empty(dim)
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    yt = np.empty(dim)
    t = 0.0
    ts[0] = 0.0
    ys[0] = y
    count = 1
    js = 1
    ktr = 1
    nstep = 0
    tiny = 1e-12 * t_end
    while t < t_end - tiny:
        h = dt
        landed = -1.0
        if t + h >= t_end:
            h = t_end - t
            landed = t_end
        if half_period > 0.0:
            tr = ktr * half_period
            while tr <= t + tiny:
                ktr += 1
                tr = ktr * half_period
            if t + h >= tr - tiny and tr < t_end:
                h = tr - t
                landed = tr
                ktr += 1
        m = _data_value(t + 0.5 * h, fp, ip)
        _rk4_step(t, h, y, ynew, m, fp, ip, k1, k2, k3, k4, yt)
        if not _all_finite(ynew):
            return ts, ys, count, STATUS_DIVERGED, t
        for j in range(dim):
            y[j] = ynew[j]
        t = landed if landed > 0.0 else t + h
        nstep += 1
        record = False
        if sample_dt > 0.0:
            if t >= js * sample_dt - tiny:
                while js * sample_dt <= t + tiny:
                    js += 1
                record = True
        elif nstep % stride == 0:
            record = True
        if record:
            if count == cap:
                cap2 = 2 * cap
                ts2 = np.empty(cap2)
                ys2 = np.empty((cap2, dim))
                ts2[:cap] = ts
                ys2[:cap] = ys
                ts = ts2
                ys = ys2
                cap = cap2
            ts[count] = t
            ys[count] = y
            count += 1
    if ts[count - 1] < t - tiny or count == 1:
        if count == cap:
            cap2 = cap + 2
            ts2 = np.empty(cap2)
            ys2 = np.empty((cap2, dim))
            ts2[:cap] = ts
            ys2[:cap] = ys
            ts = ts2
            ys = ys2
            cap = cap2
        ts[count] = t
        ys[count] = y
        count += 1
    return ts, ys, count, STATUS_OK, t


# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
)
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = (
    35.0 / 384.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
)
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0


@njit(cache=True, nogil=True)
def _dopri_step(t, h, y, ynew, err, m, fp, ip, k1, k2, k3, k4, k5, k6, k7, yt):
    dim = y.shape[0]
    _rhs(t, y, k1, fp, ip, m)
    for j in range(dim):
        yt[j] = y[j] + h * _A21 * k1[j]
    _rhs(t + _C2 * h, yt, k2, fp, ip, m)
    for j in range(dim):
        yt[j] = y[j] + h * (_A31 * k1[j] + _A32 * k2[j])
    _rhs(t + _C3 * h, yt, k3, fp, ip, m)
    for j in range(dim):
        yt[j] = y[j] + h * (_A41 * k1[j] + _A42 * k2[j] + _A43 * k3[j])
    _rhs(t + _C4 * h, yt, k4, fp, ip, m)
    for j in range(dim):
        yt[j] = y[j] + h * (
            _A51 * k1[j] + _A52 * k2[j] + _A53 * k3[j] + _A54 * k4[j]
        )
    _rhs(t + _C5 * h, yt, k5, fp, ip, m)
    for j in range(dim):
        yt[j] = y[j] + h * (
            _A61 * k1[j] + _A62 * k2[j] + _A63 * k3[j] + _A64 * k4[j] + _A65 * k5[j]
        )
    _rhs(t + h, yt, k6, fp, ip, m)
    for j in range(dim):
        ynew[j] = y[j] + h * (
            _B1 * k1[j] + _B3 * k3[j] + _B4 * k4[j] + _B5 * k5[j] + _B6 * k6[j]
        )
    _rhs(t + h, ynew, k7, fp, ip, m)
    for j in range(dim):
        err[j] = h * (
            _E1 * k1[j]
            + _E3 * k3[j]
            + _E4 * k4[j]
            + _E5 * k5[j]
            + _E6 * k6[j]
            + _E7 * k7[j]
        )


@njit(cache=True, nogil=True)
def _integrate_adaptive(
    y0, fp, ip, rtol, atol, max_step, h0, t_end, half_period, sample_dt, stride
):
    """Adaptive Dormand-Prince 5(4) with transition landing and sampling."""
    dim = y0.shape[0]
    cap = int(t_end / sample_dt) + 8 if sample_dt > 0.0 else 4096
    ts = np.empty(cap)
    ys = np.empty((cap, dim))
    y = y0.copy()
    ynew = np.empty(dim)
    errv = np.empty(dim)
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    k5 = np.empty(dim)
    k6 = np.empty(dim)
    k7 = np.empty(dim)
    yt = np.empty(dim)
    t = 0.0
    ts[0] = 0.0
    ys[0] = y
    count = 1
    js = 1
    ktr = 1
    nstep = 0
    tiny = 1e-12 * t_end
    h_min = 1e-15 * t_end
    h_ctrl = h0 if h0 > 0.0 else min(max_step, 1e-4 * t_end)
    if h_ctrl > max_step:
        h_ctrl = max_step
    while t < t_end - tiny:
        h = h_ctrl
        landed = -1.0
        if t + h >= t_end:
            h = t_end - t
            landed = t_end
        if half_period > 0.0:
            tr = ktr * half_period
            while tr <= t + tiny:
                ktr += 1
                tr = ktr * half_period
            if t + h >= tr - tiny and tr < t_end:
                h = tr - t
                landed = tr
        if h < h_min:
            return ts, ys, count, STATUS_UNDERFLOW, t
        m = _data_value(t + 0.5 * h, fp, ip)
        _dopri_step(t, h, y, ynew, errv, m, fp, ip, k1, k2, k3, k4, k5, k6, k7, yt)
        if not _all_finite(ynew):
            return ts, ys, count, STATUS_DIVERGED, t
        acc = 0.0
        for j in range(dim):
            ay = abs(y[j])
            an = abs(ynew[j])
            sc = atol + rtol * (ay if ay > an else an)
            r = errv[j] / sc
            acc += r * r
        errnorm = math.sqrt(acc / dim)
        if errnorm <= 1.0:
            for j in range(dim):
                y[j] = ynew[j]
            if landed > 0.0:
                t = landed
                if half_period > 0.0 and landed != t_end:
                    ktr += 1
            else:
                t = t + h
            nstep += 1
            if errnorm > 1e-30:
                fac = 0.9 * errnorm ** -0.2
            else:
                fac = 5.0
            if fac > 5.0:
                fac = 5.0
            elif fac < 0.2:
                fac = 0.2
            h_ctrl = h * fac
            if h_ctrl > max_step:
                h_ctrl = max_step
            record = False
            if sample_dt > 0.0:
                if t >= js * sample_dt - tiny:
                    while js * sample_dt <= t + tiny:
                        js += 1
                    record = True
            elif nstep % stride == 0:
                record = True
            if record:
                if count == cap:
                    cap2 = 2 * cap
                    ts2 = np.empty(cap2)
                    ys2 = np.empty((cap2, dim))
                    ts2[:cap] = ts
                    ys2[:cap] = ys
                    ts = ts2
                    ys = ys2
                    cap = cap2
                ts[count] = t
                ys[count] = y
                count += 1
        else:
            fac = 0.9 * errnorm ** -0.2
            if fac < 0.1:
                fac = 0.1
            h_ctrl = h * fac
    if ts[count - 1] < t - tiny or count == 1:
        if count == cap:
            cap2 = cap + 2
            ts2 = np.empty(cap2)
            ys2 = np.empty((cap2, dim))
            ts2[:cap] = ts
            ys2[:cap] = ys
            ts = ts2
            ys = ys2
            cap = cap2
        ts[count] = t
        ys[count] = y
        count += 1
    return ts, ys, count, STATUS_OK, t


@njit(cache=True, nogil=True)
def _integrate_to_angle(y0, fp, ip, dt, t_max, target, direction, fall_back):
    """Fixed-step RK4 until the angle crosses `target` moving in `direction`.

    The crossing step is refined by bisection on the substep length until
    the angle matches the target to 1e-12 rad.  A retreat of more than
    `fall_back` rad from the start, or exhausting t_max, reports no
    crossing (capture).  Returns (y, t, status).
    """
    dim = y0.shape[0]
    ang = dim - 1
    y = y0.copy()
    yp = np.empty(dim)
    ynew = np.empty(dim)
    yb = np.empty(dim)
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    yt = np.empty(dim)
    t = 0.0
    start = y[ang]
    while t < t_max:
        for j in range(dim):
            yp[j] = y[j]
        m = _data_value(t + 0.5 * dt, fp, ip)
        _rk4_step(t, dt, y, ynew, m, fp, ip, k1, k2, k3, k4, yt)
        if not _all_finite(ynew):
            return y, t, STATUS_DIVERGED
        for j in range(dim):
            y[j] = ynew[j]
        t += dt
        d_prev = direction * (yp[ang] - target)
        d_new = direction * (y[ang] - target)
        if d_prev < 0.0 and d_new >= 0.0:
            hlo = 0.0
            hhi = dt
            for _ in range(80):
                hm = 0.5 * (hlo + hhi)
                _rk4_step(t - dt, hm, yp, yb, m, fp, ip, k1, k2, k3, k4, yt)
                if abs(yb[ang] - target) < 1e-12:
                    return yb, t - dt + hm, STATUS_OK
                if direction * (yb[ang] - target) < 0.0:
                    hlo = hm
                else:
                    hhi = hm
            return yb, t - dt + hm, STATUS_OK
        if direction * (y[ang] - start) < -fall_back:
            return y, t, STATUS_NO_CROSSING
    return y, t, STATUS_NO_CROSSING
