"""Compiled Dormand-Prince 5(4) integrator for the radial equation.

The state is ``(v, w) = (u - shift, u')`` with ``shift`` 1 near the
constant state and 0 for small central values, and the right-hand side is

    v' = w
    w' = (u - f(u)) / eps - (N - 1) / r * w

with ``f(u) = sum_m c_m sign(u) |u|**e_m``.  Dense output follows the
continuous extension of Hairer, Norsett and Wanner.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_BLOWUP = 1
STATUS_UNDERFLOW = 2
STATUS_MAXSTEPS = 3
STATUS_EVENT = 4

C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0


@njit(cache=True, nogil=True)
def f_eval(u, coef, expo):
    s = 0.0
    au = abs(u)
    if au == 0.0:
        return 0.0
    for m in range(coef.shape[0]):
        s += coef[m] * au ** expo[m]
    return s if u > 0 else -s


@njit(cache=True)
def fprime_eval(u, coef, expo):
    s = 0.0
    au = abs(u)
    if au == 0.0:
        return 0.0
    for m in range(coef.shape[0]):
        s += coef[m] * expo[m] * au ** (expo[m] - 1.0)
    return s


@njit(cache=True, nogil=True)
def _rhs(r, v, w, dim, eps, coef, expo, shift):
    u = shift + v
    g = (u - f_eval(u, coef, expo)) / eps
    return w, g - (dim - 1.0) / r * w


@njit(cache=True, nogil=True)
def integrate(dim, eps, coef, expo, shift, r0, v0, w0, r_end, rtol, atol_v, atol_w,
              ceiling, stop_on_turn, h_init, max_steps):
    """Integrate from ``r0`` to ``r_end``.

    Returns ``(status, n, rs, ys, dense)`` where ``rs[:n]`` are step end
    points, ``ys[:n]`` the states there and ``dense[j]`` the five
    continuous-extension coefficient pairs for step ``j -> j+1``.
    """
    cap = 1024
    rs = np.empty(cap)
    ys = np.empty((cap, 2))
    dense = np.empty((cap, 5, 2))
    rs[0] = r0
    ys[0, 0] = v0
    ys[0, 1] = w0
    n = 1
    r = r0
    v = v0
    w = w0
    h = h_init
    k1v, k1w = _rhs(r, v, w, dim, eps, coef, expo, shift)
    hmin = 1e-14 * max(1.0, abs(r_end))
    status = STATUS_OK
    init_sign = 0.0
    steps = 0
    while r < r_end:
        if steps >= max_steps:
            status = STATUS_MAXSTEPS
            break
        if r + h > r_end:
            h = r_end - r
        if h < hmin and r + h < r_end:
            status = STATUS_UNDERFLOW
            break
        k2v, k2w = _rhs(r + C2 * h, v + h * A21 * k1v, w + h * A21 * k1w, dim, eps, coef, expo, shift)
        k3v, k3w = _rhs(r + C3 * h, v + h * (A31 * k1v + A32 * k2v),
                        w + h * (A31 * k1w + A32 * k2w), dim, eps, coef, expo, shift)
        k4v, k4w = _rhs(r + C4 * h, v + h * (A41 * k1v + A42 * k2v + A43 * k3v),
                        w + h * (A41 * k1w + A42 * k2w + A43 * k3w), dim, eps, coef, expo, shift)
        k5v, k5w = _rhs(r + C5 * h,
                        v + h * (A51 * k1v + A52 * k2v + A53 * k3v + A54 * k4v),
                        w + h * (A51 * k1w + A52 * k2w + A53 * k3w + A54 * k4w),
                        dim, eps, coef, expo, shift)
        k6v, k6w = _rhs(r + h,
                        v + h * (A61 * k1v + A62 * k2v + A63 * k3v + A64 * k4v + A65 * k5v),
                        w + h * (A61 * k1w + A62 * k2w + A63 * k3w + A64 * k4w + A65 * k5w),
                        dim, eps, coef, expo, shift)
        vn = v + h * (A71 * k1v + A73 * k3v + A74 * k4v + A75 * k5v + A76 * k6v)
        wn = w + h * (A71 * k1w + A73 * k3w + A74 * k4w + A75 * k5w + A76 * k6w)
        k7v, k7w = _rhs(r + h, vn, wn, dim, eps, coef, expo, shift)
        ev = h * (E1 * k1v + E3 * k3v + E4 * k4v + E5 * k5v + E6 * k6v + E7 * k7v)
        ew = h * (E1 * k1w + E3 * k3w + E4 * k4w + E5 * k5w + E6 * k6w + E7 * k7w)
        # relative to the smaller of |u - shift| and |u|
        sv = atol_v + rtol * min(max(abs(v), abs(vn)), max(abs(v + shift), abs(vn + shift)))
        sw = atol_w + rtol * max(abs(w), abs(wn))
        err = np.sqrt(0.5 * ((ev / sv) ** 2 + (ew / sw) ** 2))
        steps += 1
        if not np.isfinite(err):
            h *= 0.2
            continue
        if err <= 1.0:
            if n >= cap:
                cap *= 2
                rs2 = np.empty(cap)
                ys2 = np.empty((cap, 2))
                dense2 = np.empty((cap, 5, 2))
                rs2[:n] = rs[:n]
                ys2[:n] = ys[:n]
                dense2[:n - 1] = dense[:n - 1]
                rs, ys, dense = rs2, ys2, dense2
            j = n - 1
            dv = vn - v
            dw = wn - w
            dense[j, 0, 0] = v
            dense[j, 0, 1] = w
            dense[j, 1, 0] = dv
            dense[j, 1, 1] = dw
            dense[j, 2, 0] = h * k1v - dv
            dense[j, 2, 1] = h * k1w - dw
            dense[j, 3, 0] = dv - h * k7v - dense[j, 2, 0]
            dense[j, 3, 1] = dw - h * k7w - dense[j, 2, 1]
            dense[j, 4, 0] = h * (D1 * k1v + D3 * k3v + D4 * k4v + D5 * k5v + D6 * k6v + D7 * k7v)
            dense[j, 4, 1] = h * (D1 * k1w + D3 * k3w + D4 * k4w + D5 * k5w + D6 * k6w + D7 * k7w)
            r = r + h
            if r_end - r < 1e-13 * r_end:
                r = r_end
            v = vn
            w = wn
            rs[n] = r
            ys[n, 0] = v
            ys[n, 1] = w
            n += 1
            k1v, k1w = k7v, k7w
            if abs(shift + v) > ceiling or not np.isfinite(v):
                status = STATUS_BLOWUP
                break
            if stop_on_turn:
                if init_sign == 0.0:
                    if w != 0.0:
                        init_sign = 1.0 if w > 0 else -1.0
                elif w * init_sign <= 0.0:
                    status = STATUS_EVENT
                    break
            fac = 0.9 * err ** -0.2 if err > 0 else 10.0
            h *= min(10.0, max(0.2, fac))
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
    return status, n, rs[:n].copy(), ys[:n].copy(), dense[:max(n - 1, 0)].copy()


@njit(cache=True)
def dense_eval(rs, dense, x, idx_hint):
    """Evaluate the continuous extension at each point of sorted ``x``."""
    m = x.shape[0]
    out = np.empty((m, 2))
    j = idx_hint
    nstep = rs.shape[0] - 1
    for q in range(m):
        xq = x[q]
        while j < nstep - 1 and xq > rs[j + 1]:
            j += 1
        h = rs[j + 1] - rs[j]
        th = (xq - rs[j]) / h
        th1 = 1.0 - th
        for c in range(2):
            out[q, c] = dense[j, 0, c] + th * (dense[j, 1, c] + th1 * (
                dense[j, 2, c] + th * (dense[j, 3, c] + th1 * dense[j, 4, c])))
    return out
