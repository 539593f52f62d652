"""Compiled right-hand side and RK4 loop for the areal-gauge flow.

State per cell: l = ln xi and u = c / x on x_i = (i + 1/2) h, with b = x held
fixed by the gauge.  Both fields are even at the origin.  The ghost past the
outer edge is the quadratic extrapolation plus a constant offset kappa that is
fixed from the initial data (see flow_engine.boundary_offsets).

The first cell is not evolved by its own stencil: the terms of the form f / x^2
make it about six times stiffer than the rest of the grid, beyond the RK4
stability interval at the default cfl, and they let l(0) and u(0) - 1 drift off
zero.  Instead the first cell holds the regular even fit a x^2 + b x^4 + c x^6 of
l and u - 1 through cells 1..3, re-imposed at every RK stage.  This keeps the
scheme second order and the spectral radius near 6 / (xi h)^2.
"""

import numpy as np
from numba import njit

OK, MAX_STEPS, ABORT, UNDERFLOW = 0, 1, 2, 3
MAX_REJECTIONS = 5
DT_MIN = 1e-14
ORIGIN_WEIGHTS = (1.0 / 5.0, -1.0 / 25.0, 1.0 / 245.0)


@njit(cache=True)
def rates(l, u, h, kl, ku, lt, ut):
    n = l.size
    gl = 3.0 * l[n - 1] - 3.0 * l[n - 2] + l[n - 3] + kl
    gu = 3.0 * u[n - 1] - 3.0 * u[n - 2] + u[n - 3] + ku
    inv2h = 0.5 / h
    invh2 = 1.0 / (h * h)
    for i in range(n):
        x = (i + 0.5) * h
        lc, uc = l[i], u[i]
        lm = l[i - 1] if i > 0 else lc
        um = u[i - 1] if i > 0 else uc
        lp = l[i + 1] if i < n - 1 else gl
        up = u[i + 1] if i < n - 1 else gu
        lx = (lp - lm) * inv2h
        lxx = (lp - 2.0 * lc + lm) * invh2
        ux = (up - um) * inv2h
        uxx = (up - 2.0 * uc + um) * invh2
        e = np.exp(-2.0 * lc)
        uu = uc * uc
        x2 = x * x
        k01 = e * (lx / x)
        k12 = (4.0 - 3.0 * uu - e) / x2
        k13 = (uu - e) / x2 - e * ux / (x * uc)
        k03 = -e * (uxx / uc + 2.0 * ux / (x * uc) - lx / x - lx * ux / uc)
        a = 4.0 - 2.0 * uu - 2.0 * e
        w = e * lx + a / x - e * ux / uc
        ax = -4.0 * uc * ux + 4.0 * lx * e
        wx = e * (lxx - 2.0 * lx * lx) + ax / x - a / x2 - e * (uxx / uc - ux * ux / uu - 2.0 * lx * ux / uc)
        lt[i] = -(2.0 * k01 + k03) + wx + w * lx
        ut[i] = uc * ((k01 - k03) + (k12 - k13)) + x * (k01 + k12 + k13) * ux
    w1, w2, w3 = ORIGIN_WEIGHTS
    lt[0] = w1 * lt[1] + w2 * lt[2] + w3 * lt[3]
    ut[0] = w1 * ut[1] + w2 * ut[2] + w3 * ut[3]


@njit(cache=True)
def regularize(l, u):
    """Overwrite the first cell with the regular fit through cells 1..3."""
    w1, w2, w3 = ORIGIN_WEIGHTS
    l[0] = w1 * l[1] + w2 * l[2] + w3 * l[3]
    u[0] = 1.0 + w1 * (u[1] - 1.0) + w2 * (u[2] - 1.0) + w3 * (u[3] - 1.0)


@njit(cache=True)
def rk4_step(l, u, h, kl, ku, dt, out_l, out_u, work):
    """One classical RK4 step from (l, u) into (out_l, out_u)."""
    n = l.size
    k1l, k1u, k2l, k2u = work[0], work[1], work[2], work[3]
    k3l, k3u, k4l, k4u = work[4], work[5], work[6], work[7]
    tl, tu = work[8], work[9]
    rates(l, u, h, kl, ku, k1l, k1u)
    for i in range(n):
        tl[i] = l[i] + 0.5 * dt * k1l[i]
        tu[i] = u[i] + 0.5 * dt * k1u[i]
    regularize(tl, tu)
    rates(tl, tu, h, kl, ku, k2l, k2u)
    for i in range(n):
        tl[i] = l[i] + 0.5 * dt * k2l[i]
        tu[i] = u[i] + 0.5 * dt * k2u[i]
    regularize(tl, tu)
    rates(tl, tu, h, kl, ku, k3l, k3u)
    for i in range(n):
        tl[i] = l[i] + dt * k3l[i]
        tu[i] = u[i] + dt * k3u[i]
    regularize(tl, tu)
    rates(tl, tu, h, kl, ku, k4l, k4u)
    for i in range(n):
        out_l[i] = l[i] + dt / 6.0 * (k1l[i] + 2.0 * k2l[i] + 2.0 * k3l[i] + k4l[i])
        out_u[i] = u[i] + dt / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i])
    regularize(out_l, out_u)


@njit(cache=True)
def first_breach(l, u, u_max):
    """Index of the first cell violating finiteness, u > 0 or u <= u_max; -1 if none."""
    for i in range(l.size):
        if not (np.isfinite(l[i]) and np.isfinite(u[i])) or u[i] <= 0.0 or u[i] > u_max:
            return i
    return -1


@njit(cache=True)
def stable_dt(l, h, cfl):
    lmin = l[0]
    for i in range(1, l.size):
        if l[i] < lmin:
            lmin = l[i]
    step = np.exp(lmin) * h
    return cfl * step * step


@njit(cache=True)
def advance(l, u, h, kl, ku, cfl, t, t_target, max_steps, u_max):
    """Integrate in place until t_target, max_steps steps, or failure.

    Returns (status, t, steps, rejections, breach_index).
    """
    n = l.size
    work = np.empty((10, n))
    nl = np.empty(n)
    nu = np.empty(n)
    steps = 0
    rejections = 0
    while t < t_target:
        if steps >= max_steps:
            return MAX_STEPS, t, steps, rejections, -1
        dt = stable_dt(l, h, cfl)
        if dt < DT_MIN:
            return UNDERFLOW, t, steps, rejections, -1
        last = t + dt >= t_target
        if last:
            dt = t_target - t
        tries = 0
        while True:
            rk4_step(l, u, h, kl, ku, dt, nl, nu, work)
            bad = first_breach(nl, nu, u_max)
            if bad < 0:
                break
            tries += 1
            rejections += 1
            if tries >= MAX_REJECTIONS:
                return ABORT, t, steps, rejections, bad
            dt *= 0.5
            last = False
        l[:] = nl
        u[:] = nu
        t = t_target if last else t + dt
        steps += 1
    return OK, t, steps, rejections, -1
