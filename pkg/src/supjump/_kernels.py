"""
Compiled time loops for the Riccati and Lyapunov systems.

All three systems have the form ``u' = L u + N(u)`` with diagonal ``L`` and
are advanced by the fourth-order exponential time-differencing Runge-Kutta
scheme (ETDRK4). The linear part is ``-r_i (1 - w M1)`` on the grid nodes and
zero on the extra components that accumulate time integrals, so the
integrals are computed to the same order as the states.

State layouts (``n`` grid nodes):

* mode 0, Riccati: ``[B_1..B_n, int sum pi B dt]``
* mode 1, first Lyapunov: ``[E1_1..E1_n, I1, Q]``
* mode 2, both Lyapunov: ``[E1_1..E1_n, E2_1..E2_n, I1, Q, I2]``
"""

import numpy as np
from numba import njit

RICCATI, LYAP1, LYAP2 = 0, 1, 2

OK, STOPPED, LOWER_BOUND, UPPER_BOUND, NOT_FINITE = 0, 1, 2, 3, 4


def etd_coefficients(z, h, m=64):
    """ETDRK4 weights for scalar (diagonal) ``z = h L``, by contour averaging.

    The circle of unit radius around each ``z`` avoids the cancellation of
    the closed forms near ``z = 0``.
    """
    z = np.asarray(z, dtype=float)
    roots = np.exp(1j * np.pi * (np.arange(1, m + 1) - 0.5) / m)
    zc = z[:, None] + roots[None, :]
    ez = np.exp(zc)
    q = h * np.mean((np.exp(zc / 2) - 1) / zc, axis=1).real
    f1 = h * np.mean((-4 - zc + ez * (4 - 3 * zc + zc**2)) / zc**3, axis=1).real
    f2 = h * np.mean((2 + zc + ez * (-2 + zc)) / zc**3, axis=1).real
    f3 = h * np.mean((-4 - 3 * zc - zc**2 + ez * (4 - zc)) / zc**3, axis=1).real
    return np.exp(z), np.exp(z / 2), q, f1, f2, f3


@njit(cache=True)
def _nonlinear(mode, u, out, r, pi, w, mu, lam, m1, m2):
    n = r.size
    if mode == RICCATI:
        agg = 0.0
        s = 0.0
        for j in range(n):
            phi = mu * u[j] / (lam + u[j])
            agg += pi[j] * phi
            s += pi[j] * u[j]
        for i in range(n):
            phi = mu * u[i] / (lam + u[i])
            out[i] = r[i] * (w * (phi - m1 * u[i]) + (1.0 - w) * agg)
        out[n] = s
    else:
        s = 0.0
        p = 0.0
        for j in range(n):
            s += pi[j] * u[j]
            p += pi[j] * u[j] * u[j]
        for i in range(n):
            out[i] = r[i] * (1.0 - w) * m1 * s
        if mode == LYAP1:
            out[n] = s
            out[n + 1] = s * s
        else:
            s2 = 0.0
            for j in range(n):
                s2 += pi[j] * u[n + j]
            for i in range(n):
                e1 = u[i]
                out[n + i] = r[i] * ((1.0 - w) * m1 * s2 + m2 * (w * e1 * e1 + (1.0 - w) * p))
            out[2 * n] = s
            out[2 * n + 1] = s * s
            out[2 * n + 2] = s2


@njit(cache=True)
def _check(mode, u, n, lower, upper, tol, peak2):
    """Return (status, stop_flag) after a step."""
    mx = 0.0
    for i in range(n):
        v = u[i]
        if not np.isfinite(v):
            return NOT_FINITE, False
        if v < lower:
            return LOWER_BOUND, False
        if v > upper:
            return UPPER_BOUND, False
        if v > mx:
            mx = v
    stop = mx < tol
    if mode == LYAP2:
        mx2 = 0.0
        for i in range(n, 2 * n):
            v = u[i]
            if not np.isfinite(v):
                return NOT_FINITE, False
            if v < lower:
                return LOWER_BOUND, False
            if v > mx2:
                mx2 = v
        stop = stop and mx2 < tol * peak2
    return OK, stop


@njit(cache=True)
def run(mode, u, E, E2, q, f1, f2, f3, r, pi, w, mu, lam, m1, m2,
        nsteps, record_every, rec, lower, upper, tol, peak2):
    """Advance ``u`` in place by up to ``nsteps`` steps.

    Every ``record_every``-th state is copied into consecutive rows of
    ``rec``. Returns ``(status, steps_taken, rows_written, peak2)``; ``peak2``
    tracks the running maximum of the second-order state in mode 2.
    """
    n = r.size
    d = u.size
    nu = np.empty(d)
    na = np.empty(d)
    nb = np.empty(d)
    nc = np.empty(d)
    a = np.empty(d)
    bb = np.empty(d)
    c = np.empty(d)
    rows = 0
    for k in range(nsteps):
        _nonlinear(mode, u, nu, r, pi, w, mu, lam, m1, m2)
        for i in range(d):
            a[i] = E2[i] * u[i] + q[i] * nu[i]
        _nonlinear(mode, a, na, r, pi, w, mu, lam, m1, m2)
        for i in range(d):
            bb[i] = E2[i] * u[i] + q[i] * na[i]
        _nonlinear(mode, bb, nb, r, pi, w, mu, lam, m1, m2)
        for i in range(d):
            c[i] = E2[i] * a[i] + q[i] * (2.0 * nb[i] - nu[i])
        _nonlinear(mode, c, nc, r, pi, w, mu, lam, m1, m2)
        for i in range(d):
            u[i] = (E[i] * u[i] + f1[i] * nu[i]
                    + 2.0 * f2[i] * (na[i] + nb[i]) + f3[i] * nc[i])
        if mode == LYAP2:
            for i in range(n, 2 * n):
                if u[i] > peak2:
                    peak2 = u[i]
        status, stop = _check(mode, u, n, lower, upper, tol, peak2)
        if status != OK:
            return status, k + 1, rows, peak2
        if (k + 1) % record_every == 0 and rows < rec.shape[0]:
            rec[rows, :] = u
            rows += 1
        if stop:
            return STOPPED, k + 1, rows, peak2
    return OK, nsteps, rows, peak2
