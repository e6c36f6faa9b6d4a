"""
Monte Carlo simulation of the finite-dimensional interacting system.

Each grid component ``Y_i`` reverts exactly toward ``b pi_i / r_i`` between
steps of length ``dt``; at the end of every step one jump happens with
probability ``min(Lambda dt, 1)`` where ``Lambda = M0 sum_i rate_i`` and

* previous: ``rate_i = r_i Y_i``
* MF:       ``rate_i = w r_i Y_i + (1 - w) pi_i b / (1 - M1)``
* AG:       ``rate_i = w r_i Y_i + (1 - w) pi_i sum_j r_j Y_j``

The receiving component is drawn proportionally to ``rate_i`` and the jump
size is exponential with mean ``1 / lam``.

Between jumps the state is deterministic, so instead of drawing one
Bernoulli variable per step the loop jumps ahead by a geometric number of
steps under a majorant of ``Lambda`` and accepts the candidate step with the
ratio of the true to the majorant probability. This is the same law as the
step-by-step scheme, only cheaper when jumps are rare.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .closedform import ModelKind, ModelParams
from .exceptions import ConfigError, SimulationError, StepSizeWarning
from .measures import RGrid

WARN_PROB = 0.1


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``burn_in = None`` means ``20 * t_bar`` with ``t_bar = R / (1 - M1)``,
    the time unit of the nondimensional scaling.
    """

    n: int = 512
    dt: float = 5e-4
    burn_in: Optional[float] = None
    horizon: float = 200.0
    sample_interval: float = 0.1
    replicates: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.burn_in is not None and self.burn_in < 0:
            raise ConfigError(f"burn-in must be nonnegative, got {self.burn_in}")
        if self.replicates < 1:
            raise ConfigError("need at least one replicate")
        if not (self.horizon > 0 and self.sample_interval > 0):
            raise ConfigError("horizon and sample interval must be positive")
        if self.sample_interval < self.dt * (1 - 1e-9):
            raise ConfigError("sample interval is shorter than the time step")
        if self.n < 1:
            raise ConfigError("grid size must be positive")

    def burn_in_for(self, p: ModelParams) -> float:
        if self.burn_in is not None:
            return self.burn_in
        return 20.0 * p.mixture.inv_speed_mass() / (1.0 - p.m1)


@dataclass(frozen=True)
class SamplePath:
    times: np.ndarray
    z: np.ndarray
    seed: int
    replicate_index: int
    jumps: int
    duration: float

    @property
    def jump_rate(self) -> float:
        return self.jumps / self.duration


@dataclass(frozen=True)
class EnsembleStats:
    """Ensemble estimates with Monte Carlo standard errors (``*_se``)."""

    mean: float
    mean_se: float
    variance: float
    variance_se: float
    skewness: float
    skewness_se: float
    jump_rate: float
    jump_rate_se: float
    lags: np.ndarray
    acf: np.ndarray
    acf_se: np.ndarray
    replicates: int


def replicate_rng(seed: int, replicate_index: int) -> np.random.Generator:
    """Counter-based stream that depends only on (seed, replicate index)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate_index),))
    return np.random.Generator(np.random.Philox(ss))


def _steps(x: float, dt: float) -> int:
    return int(round(x / dt))


def simulate_path(p: ModelParams, grid: RGrid, cfg: SimConfig, replicate_index: int = 0,
                  y0: Optional[np.ndarray] = None) -> SamplePath:
    """Simulate one path and return ``Z = sum_i Y_i`` on the sampling grid.

    Sampling starts at the end of the burn-in and covers ``cfg.horizon``;
    ``times`` are measured from that point. ``jumps`` counts jumps inside
    the sampled window only.

    Raises
    ------
    SimulationError
        If ``Lambda * dt > 1`` at a visited step.

    Warns
    -----
    StepSizeWarning
        If ``Lambda * dt > 0.1`` at a visited step.
    """
    rng = replicate_rng(cfg.seed, replicate_index)
    jm = p.jump
    m0, m1, lam = jm.mu, jm.m1, jm.lam
    r, pi = grid.r, grid.pi
    dt, b, w = cfg.dt, p.b, p.w
    kind = p.kind
    base = b * pi / r
    mf_const = b / (1.0 - m1)

    y = base / (1.0 - m1) if y0 is None else np.asarray(y0, dtype=float)
    if y.shape != r.shape or np.any(y < 0):
        raise ConfigError("initial state must be a nonnegative vector of grid length")
    d = y - base
    burn = _steps(cfg.burn_in_for(p), dt)
    every = max(1, _steps(cfg.sample_interval, dt))
    n_samples = _steps(cfg.horizon, dt) // every + 1
    end = burn + (n_samples - 1) * every
    z = np.empty(n_samples)
    base_sum = base.sum()

    def rates(dd):
        y = base + dd
        ry = r * y
        if kind is ModelKind.PREVIOUS:
            return ry
        if kind is ModelKind.MF:
            return w * ry + (1.0 - w) * pi * mf_const
        return w * ry + (1.0 - w) * pi * ry.sum()

    def intensity_bound(dd):
        s_bar = b + np.maximum(r * dd, 0.0).sum()
        if kind is ModelKind.MF:
            return m0 * (w * s_bar + (1.0 - w) * mf_const)
        return m0 * s_bar

    warned = False

    def guard(prob, step):
        nonlocal warned
        if prob > 1.0:
            raise SimulationError(
                f"jump probability per step {prob:.3g} > 1 at t = {step * dt:g}; decrease dt"
            )
        if prob > WARN_PROB and not warned:
            warned = True
            warnings.warn(
                f"jump probability per step {prob:.3g} > {WARN_PROB} at t = {step * dt:g}; "
                "first-order thinning is biased, decrease dt",
                StepSizeWarning, stacklevel=3,
            )

    k = 0
    next_sample = 0  # index into z of the first sample not yet written
    jumps = 0
    while True:
        p_bar = min(intensity_bound(d) * dt, 1.0)
        k_next = end + 1 if p_bar <= 0 else k + int(rng.geometric(p_bar))
        # samples strictly before the candidate step follow the deterministic decay
        last = min(k_next - 1, end)
        if next_sample < n_samples and burn + next_sample * every <= last:
            hi = (last - burn) // every + 1
            steps = burn + np.arange(next_sample, hi) * every
            decay = np.exp(-np.outer((steps - k) * dt, r))
            z[next_sample:hi] = base_sum + decay @ d
            next_sample = hi
        if k_next > end:
            break
        d = d * np.exp(-r * ((k_next - k) * dt))
        k = k_next
        rt = rates(d)
        lam_k = m0 * rt.sum()
        prob = lam_k * dt
        guard(prob, k)
        if rng.random() * p_bar < min(prob, 1.0):
            cum = np.cumsum(rt)
            i = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), r.size - 1)
            d[i] += rng.exponential(1.0 / lam)
            if k > burn:
                jumps += 1
            guard(m0 * rates(d).sum() * dt, k)
        if next_sample < n_samples and k == burn + next_sample * every:
            z[next_sample] = base_sum + d.sum()
            next_sample += 1

    times = np.arange(n_samples) * every * dt
    return SamplePath(times, z, int(cfg.seed), int(replicate_index), jumps, (end - burn) * dt)


def _one(args):
    p, grid, cfg, i = args
    return simulate_path(p, grid, cfg, i)


def _jackknife(values: np.ndarray, stat) -> tuple:
    """Delete-one jackknife over replicates; ``stat`` maps an index mask to a value."""
    m = values.shape[0]
    full = stat(np.ones(m, dtype=bool))
    loo = np.empty(m)
    mask = np.ones(m, dtype=bool)
    for i in range(m):
        mask[i] = False
        loo[i] = stat(mask)
        mask[i] = True
    se = math.sqrt((m - 1) / m * np.sum((loo - loo.mean()) ** 2))
    return full, se


def ensemble_stats(p: ModelParams, grid: RGrid, cfg: SimConfig, lags: Sequence[float] = (),
                   workers: int = 1, paths: Optional[list] = None) -> EnsembleStats:
    """Ensemble mean, variance, skewness, jump rate and ACF with standard errors.

    Moments are centred at the grand mean over all replicates; each
    replicate contributes time averages of its centred powers and lagged
    products. Standard errors come from the dispersion across replicates
    (plain for linear statistics, delete-one jackknife for the ratios).
    """
    if cfg.replicates < 2:
        raise ConfigError("ensemble statistics need at least two replicates")
    lags = np.asarray(list(lags), dtype=float)
    if lags.size and lags.max() > cfg.horizon:
        raise ConfigError(f"largest lag {lags.max():g} exceeds the horizon {cfg.horizon:g}")
    every = max(1, _steps(cfg.sample_interval, cfg.dt)) * cfg.dt
    shifts = np.rint(lags / every).astype(int)
    if np.any(np.abs(shifts * every - lags) > 1e-9 * np.maximum(1.0, lags)):
        raise ConfigError("lags must be multiples of the sample interval")

    if paths is None:
        jobs = [(p, grid, cfg, i) for i in range(cfg.replicates)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                paths = list(ex.map(_one, jobs))
        else:
            paths = [_one(j) for j in jobs]
    zs = np.array([path.z for path in paths])
    m = zs.shape[0]
    means = zs.mean(axis=1)
    grand = means.mean()
    c = zs - grand
    c2 = (c**2).mean(axis=1)
    c3 = (c**3).mean(axis=1)
    cov = np.array([[(c[i, : c.shape[1] - s] * c[i, s:]).mean() for s in shifts] for i in range(m)])
    cov = cov.reshape(m, shifts.size)
    rates = np.array([path.jump_rate for path in paths])

    def se(x):
        return float(x.std(ddof=1) / math.sqrt(m))

    # a path without jumps has zero variance; its ratios are NaN, not errors
    with np.errstate(invalid="ignore", divide="ignore"):
        skew, skew_se = _jackknife(c2, lambda k: c3[k].mean() / c2[k].mean() ** 1.5)
        acf = np.empty(shifts.size)
        acf_se = np.empty(shifts.size)
        for j in range(shifts.size):
            acf[j], acf_se[j] = _jackknife(c2, lambda k, j=j: cov[k, j].mean() / c2[k].mean())
    return EnsembleStats(
        mean=float(grand), mean_se=se(means),
        variance=float(c2.mean()), variance_se=se(c2),
        skewness=float(skew), skewness_se=float(skew_se),
        jump_rate=float(rates.mean()), jump_rate_se=se(rates),
        lags=lags, acf=acf, acf_se=acf_se, replicates=m,
    )
