"""
Generalized Riccati and Lyapunov equations of the aggregation (AG) model.

On a grid ``{(r_i, pi_i)}`` the Riccati system reads

    dB_i/dt = r_i (-B_i + w phi(B_i) + (1 - w) sum_j pi_j phi(B_j)),
    phi(B) = mu B / (lam + B),    B_i(0) = theta,

and the Laplace transform of the stationary law is
``E[exp(-theta Z)] = exp(-A)`` with ``A = b int sum_i pi_i B_i dt``.
Its first two theta-derivatives at zero obey linear (Lyapunov) systems whose
time integrals give the mean and variance.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .closedform import ModelKind, ModelParams, superposed_mean
from .exceptions import (
    NumericsError,
    SolverInstabilityError,
    TruncationWarning,
    UnsupportedModelError,
)
from .measures import RGrid, discretize

_CHUNK = 200_000
_MAX_RECORDS = 20_000


@dataclass(frozen=True)
class Numerics:
    """Discretization settings shared by the Riccati and Lyapunov solvers.

    Parameters
    ----------
    n : int
        Grid size used when no grid is passed explicitly.
    dt : float
        Time step.
    tol : float
        Stop once every state has decayed below ``tol`` times its scale.
    t_max : float
        Hard horizon of the time integration.
    record_every : int
        Keep every k-th step of the trajectory.
    """

    n: int = 512
    dt: float = 1e-3
    tol: float = 1e-10
    t_max: float = 1e4
    record_every: int = 100

    def __post_init__(self):
        if not (self.dt > 0 and self.tol > 0 and self.t_max > self.dt):
            raise ValueError("need dt > 0, tol > 0 and t_max > dt")
        if self.n < 1 or self.record_every < 1:
            raise ValueError("n and record_every must be positive")


@dataclass(frozen=True)
class RiccatiSolution:
    grid: RGrid
    theta: float
    dt: float
    T: float
    t: np.ndarray
    B: np.ndarray
    A: float
    tail_bound: float
    converged: bool
    monotone_decay: bool

    @property
    def mgf(self) -> float:
        return math.exp(-self.A)


@dataclass(frozen=True)
class LyapunovSolution:
    grid: RGrid
    order: int
    dt: float
    T: float
    t: np.ndarray
    E1: np.ndarray
    E2: Optional[np.ndarray]
    I1: float
    Q: float
    I2: Optional[float]
    tail_I1: float
    tail_I2: Optional[float]
    converged: bool


@dataclass(frozen=True)
class VarianceRoutes:
    """Both numerical routes to the AG variance and their relative gap."""

    lyapunov: float
    identity: float
    rel_gap: float
    solution: LyapunovSolution = field(repr=False)


def _require_ag(p: ModelParams):
    if p.kind is ModelKind.MF:
        raise UnsupportedModelError(
            "the Riccati system describes the AG model (or w = 1); convert with p.with_kind('ag')"
        )


def _integrate(mode, u0, grid, p, dt, tol, t_max, record_every, lower, upper):
    """Drive the compiled loop in chunks; returns times, records and final state."""
    n = grid.n
    jm = p.jump
    r = np.ascontiguousarray(grid.r)
    pi = np.ascontiguousarray(grid.pi)
    lin = np.zeros(u0.size)
    blocks = 2 if mode == K.LYAP2 else 1
    lin[: blocks * n] = np.tile(-r * (1.0 - p.w * jm.m1), blocks)
    coef = K.etd_coefficients(lin * dt, dt)

    total = int(math.ceil(t_max / dt - 1e-9))
    # keep the stored trajectory bounded whatever the horizon
    record_every = max(record_every, int(math.ceil(total / _MAX_RECORDS)))
    u = u0.copy()
    times = [0.0]
    rows = [u0.copy()]
    done = 0
    peak2 = 0.0
    status = K.OK
    chunk = max(1, _CHUNK // record_every) * record_every
    while done < total:
        steps = min(chunk, total - done)
        rec = np.empty((steps // record_every + 1, u.size))
        status, taken, nrec, peak2 = K.run(
            mode, u, *coef, r, pi, p.w, jm.mu, jm.lam, jm.m1, jm.moment(2),
            steps, record_every, rec, lower, upper, tol, peak2,
        )
        for j in range(nrec):
            times.append((done + (j + 1) * record_every) * dt)
            rows.append(rec[j].copy())
        done += taken
        if status != K.OK:
            break
    t_end = done * dt
    if times[-1] != t_end:
        times.append(t_end)
        rows.append(u.copy())
    if status in (K.LOWER_BOUND, K.UPPER_BOUND, K.NOT_FINITE):
        what = {K.LOWER_BOUND: "went negative", K.UPPER_BOUND: "exceeded its a-priori bound",
                K.NOT_FINITE: "became non-finite"}[status]
        raise SolverInstabilityError(
            f"solution {what} at t = {t_end:.6g} (dt = {dt:g}); reduce the time step"
        )
    return np.array(times), np.array(rows), u, status == K.STOPPED, t_end


def solve_riccati(p: ModelParams, grid: RGrid, theta: float, dt: float = 1e-3,
                  tol: float = 1e-10, t_max: float = 1e4, record_every: int = 100) -> RiccatiSolution:
    """Integrate the generalized Riccati system from ``B = theta``.

    Integration stops once ``max_i B_i < tol * theta`` or at ``t_max``. The
    exponent ``A`` is accumulated alongside the states; ``tail_bound`` is
    the upper bound ``b sum_i pi_i B_i(T) / (r_i (1 - M1))`` on the part of
    the time integral beyond the final time.

    Raises
    ------
    SolverInstabilityError
        If any node leaves ``[0, theta / (1 - M1)]``.

    Warns
    -----
    TruncationWarning
        If ``t_max`` is reached with ``tail_bound > tol * A``.
    """
    _require_ag(p)
    if not theta >= 0:
        raise ValueError(f"theta must be nonnegative, got {theta}")
    n = grid.n
    m1 = p.m1
    if theta == 0:
        B = np.zeros((1, n))
        return RiccatiSolution(grid, 0.0, dt, 0.0, np.zeros(1), B, 0.0, 0.0, True, True)
    u0 = np.empty(n + 1)
    u0[:n] = theta
    u0[n] = 0.0
    ub = theta / (1.0 - m1)
    t, rows, u, stopped, t_end = _integrate(
        K.RICCATI, u0, grid, p, dt, tol * theta, t_max, record_every,
        -1e-12, ub * (1 + 1e-12) + 1e-9,
    )
    A = p.b * u[n]
    tail = p.b * float(np.sum(grid.pi * u[:n] / grid.r)) / (1.0 - m1)
    if not stopped and tail > tol * A:
        warnings.warn(
            f"Riccati integration truncated at t = {t_end:g} with tail bound {tail:.3e} on A = {A:.6g}",
            TruncationWarning, stacklevel=2,
        )
    B = rows[:, :n]
    peak = B.max(axis=1)
    monotone = bool(np.all(np.diff(peak) <= 1e-12 * theta))
    return RiccatiSolution(grid, float(theta), dt, t_end, t, B, float(A), tail, stopped, monotone)


def mgf(sol: RiccatiSolution) -> float:
    """``E[exp(-theta Z)] = exp(-A)`` of the stationary law."""
    return sol.mgf


def solve_lyapunov(p: ModelParams, grid: RGrid, k: int = 1, dt: float = 1e-3,
                   tol: float = 1e-10, t_max: float = 1e4, record_every: int = 100) -> LyapunovSolution:
    """Integrate the first (``k = 1``) or first and second (``k = 2``) Lyapunov systems.

    ``E1`` starts at 1 and ``E2`` at 0; the second system is forced by
    ``E1`` so both are advanced together. Returned integrals are
    ``I1 = int sum pi E1``, ``Q = int (sum pi E1)^2`` and, for ``k = 2``,
    ``I2 = int sum pi E2``. The tail of ``I1`` beyond the final time is
    known exactly, ``sum_i pi_i E1_i(T) / r_i / (1 - M1)``, and is reported.
    """
    _require_ag(p)
    if k not in (1, 2):
        raise ValueError(f"Lyapunov order must be 1 or 2, got {k}")
    n = grid.n
    m1 = p.m1
    e_max = (1.0 - p.w * m1) / (1.0 - m1)
    mode = K.LYAP1 if k == 1 else K.LYAP2
    u0 = np.zeros(n + 2 if k == 1 else 2 * n + 3)
    u0[:n] = 1.0
    t, rows, u, stopped, t_end = _integrate(
        mode, u0, grid, p, dt, tol, t_max, record_every, -1e-12, e_max * (1 + 1e-12) + 1e-9,
    )
    inv_r = grid.pi / grid.r
    tail1 = float(inv_r @ u[:n]) / (1.0 - m1)
    if k == 1:
        I1, Q, I2, E2, tail2 = u[n], u[n + 1], None, None, None
    else:
        I1, Q, I2 = u[2 * n], u[2 * n + 1], float(u[2 * n + 2])
        E2 = rows[:, n:2 * n]
        tail2 = float(inv_r @ u[n:2 * n]) / (1.0 - m1)
    if not stopped and tail1 > tol * I1:
        warnings.warn(
            f"Lyapunov integration truncated at t = {t_end:g}; I1 tail = {tail1:.3e}",
            TruncationWarning, stacklevel=2,
        )
    return LyapunovSolution(grid, k, dt, t_end, t, rows[:, :n], E2, float(I1), float(Q), I2,
                            tail1, tail2, stopped)


def _setup(p, grid, numerics):
    numerics = numerics or Numerics()
    if grid is None:
        grid = discretize(p.mixture, numerics.n)
    return grid, numerics


def ag_mean(p: ModelParams, grid: Optional[RGrid] = None, numerics: Optional[Numerics] = None) -> float:
    """Stationary mean ``b I1`` from the first Lyapunov system."""
    p = p if p.kind is ModelKind.AG else p.with_kind(ModelKind.AG)
    grid, nm = _setup(p, grid, numerics)
    sol = solve_lyapunov(p, grid, 1, nm.dt, nm.tol, nm.t_max, nm.record_every)
    return p.b * sol.I1


def variance_routes(p: ModelParams, grid: Optional[RGrid] = None,
                    numerics: Optional[Numerics] = None) -> VarianceRoutes:
    """AG variance by the second Lyapunov system and by the ``Q`` identity.

    The identity route is
    ``b M2 / ((1 - M1)(1 - w M1)) * (R / 2 + (1 - w) M1 Q)`` with ``R`` taken
    from the grid, so both routes see the same discretization.
    """
    p = p if p.kind is ModelKind.AG else p.with_kind(ModelKind.AG)
    grid, nm = _setup(p, grid, numerics)
    sol = solve_lyapunov(p, grid, 2, nm.dt, nm.tol, nm.t_max, nm.record_every)
    m1, m2 = p.m1, p.jump.moment(2)
    R = grid.inv_speed_mass()
    ident = p.b * m2 / ((1.0 - m1) * (1.0 - p.w * m1)) * (0.5 * R + (1.0 - p.w) * m1 * sol.Q)
    lyap = p.b * sol.I2
    return VarianceRoutes(lyap, ident, abs(lyap - ident) / ident, sol)


def ag_variance(p: ModelParams, grid: Optional[RGrid] = None, numerics: Optional[Numerics] = None,
                max_gap: float = 0.02) -> float:
    """Stationary variance of the AG model.

    Returns the identity route; raises :class:`NumericsError` when the two
    routes of :func:`variance_routes` differ by more than ``max_gap``.
    """
    v = variance_routes(p, grid, numerics)
    if v.rel_gap > max_gap:
        raise NumericsError(
            f"AG variance routes disagree by {100 * v.rel_gap:.2f}% "
            f"({v.lyapunov:.6g} vs {v.identity:.6g}); refine the grid or time step"
        )
    return v.identity


def mean_identity_gap(p: ModelParams, grid: Optional[RGrid] = None,
                      numerics: Optional[Numerics] = None) -> float:
    """Relative gap between :func:`ag_mean` and the closed-form mean."""
    m = superposed_mean(p.with_kind(ModelKind.AG) if p.kind is not ModelKind.AG else p)
    return abs(ag_mean(p, grid, numerics) - m) / m


def write_trajectory(sol, path, stride: int = 1, header: Optional[str] = None):
    """Write a Riccati or Lyapunov trajectory as CSV with columns ``t, r_1..r_n``.

    ``header`` is written first as a comment line when given.
    """
    values = sol.B if isinstance(sol, RiccatiSolution) else sol.E1
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header.rstrip("\n") + "\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t"] + [f"r={x:.6g}" for x in sol.grid.r])
        for t, row in zip(sol.t[::stride], values[::stride]):
            wr.writerow([repr(float(t))] + [repr(float(x)) for x in row])
