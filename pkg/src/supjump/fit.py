"""
Parameter identification from a count series.

The pipeline has three stages:

1. least squares of the sample ACF against ``(1 + beta_t tau)^-(alpha-1)``
   at lags 1..14, giving ``alpha`` and the effective scale ``beta_t``;
2. moment matching of Ave, Var and Jmp, giving ``lam``, ``b``, ``mu`` and
   ``beta = beta_t / (1 - w M1)`` for a chosen weight ``w``;
3. optionally, choosing ``w`` so that the model skewness matches Skw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .closedform import ModelKind, ModelParams, hurst_exponent, skewness_from_moments
from .empirical import CountSeries, SummaryStats, sample_acf, summary, trim
from .exceptions import FitFailure
from .measures import GammaMixture, JumpMeasure

DEFAULT_LAGS = tuple(range(1, 15))
_START_SHAPE = (0.1, 1.0, 10.0)
_START_SCALE = (0.01, 1.0, 100.0)


@dataclass(frozen=True)
class AcfFit:
    alpha: float
    beta_tilde: float
    sse: float
    start_sse: tuple = field(default=(), repr=False)


def gamma_acf(lags, alpha: float, beta_tilde: float):
    return np.exp(-(alpha - 1.0) * np.log1p(beta_tilde * np.asarray(lags, dtype=float)))


def fit_acf(lags: Sequence[float], rho: Sequence[float]) -> AcfFit:
    """Least-squares fit of ``(1 + beta_t tau)^-(alpha-1)`` to sample ACF values.

    Works in ``(log(alpha - 1), log beta_t)`` from nine starting points and
    keeps the best local minimum.

    Raises
    ------
    FitFailure
        When every start fails or the data show no decay, in which case the
        optimum sits on the degenerate boundary where the kernel is 1.
    """
    lags = np.asarray(lags, dtype=float)
    rho = np.asarray(rho, dtype=float)
    ok = np.isfinite(lags) & np.isfinite(rho)
    lags, rho = lags[ok], rho[ok]
    if lags.size < 3:
        raise FitFailure(f"need at least 3 finite ACF values, got {lags.size}")

    def resid(x):
        return gamma_acf(lags, 1.0 + math.exp(x[0]), math.exp(x[1])) - rho

    def jac(x):
        a1, bt = math.exp(x[0]), math.exp(x[1])
        lg = np.log1p(bt * lags)
        k = np.exp(-a1 * lg)
        return np.column_stack([-k * lg * a1, -k * a1 * bt * lags / (1.0 + bt * lags)])

    best = None
    starts = []
    for a0 in _START_SHAPE:
        for b0 in _START_SCALE:
            x0 = np.log([a0, b0])
            starts.append(float(resid(x0) @ resid(x0)))
            try:
                # the exponential limit drives log(alpha - 1) upward without bound
                with np.errstate(over="ignore", invalid="ignore"):
                    sol = optimize.least_squares(resid, x0, jac=jac, method="lm", xtol=1e-15,
                                                 ftol=1e-15, gtol=1e-15, max_nfev=20000)
            except (ValueError, FloatingPointError, OverflowError):
                continue
            if not np.all(np.isfinite(sol.x)) or not np.isfinite(sol.cost):
                continue
            if best is None or sol.cost < best.cost:
                best = sol
    if best is None:
        raise FitFailure("ACF least squares failed from every starting point")
    sse = 2.0 * best.cost
    alpha, bt = 1.0 + math.exp(best.x[0]), math.exp(best.x[1])
    if gamma_acf(lags.max(), alpha, bt) > 1.0 - 1e-6:
        raise FitFailure("sample ACF shows no decay; the memory kernel is not identifiable", sse)
    return AcfFit(alpha, bt, sse, tuple(starts))


@dataclass(frozen=True)
class MomentMatch:
    lam: float
    b: float
    mu: float
    beta: float
    m1: float

    @property
    def negative_b(self) -> bool:
        return not self.b > 0


def moment_match(stats: SummaryStats, alpha: float, beta_tilde: float, w: float) -> MomentMatch:
    """Solve for ``lam, b, mu, beta`` so the model reproduces Ave, Var and Jmp.

    A nonpositive ``b`` is returned as is (check :attr:`MomentMatch.negative_b`);
    such parameter sets are reported rather than rejected.
    """
    if not alpha > 1 or not beta_tilde > 0:
        raise ValueError("need alpha > 1 and beta_tilde > 0")
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"w must lie in [0, 1], got {w}")
    s = beta_tilde * (alpha - 1.0)
    lam = math.sqrt(stats.jmp / (s * stats.var))
    b = stats.ave * s - (1.0 - w) * stats.jmp / lam
    mu = stats.jmp * lam / (stats.jmp + b * lam)
    m1 = mu / lam
    return MomentMatch(lam, b, mu, beta_tilde / (1.0 - w * m1), m1)


def realizability_bound(stats: SummaryStats, alpha: float, beta_tilde: float) -> float:
    """Smallest ``w`` for which moment matching gives ``b > 0``."""
    return max(0.0, 1.0 - math.sqrt(beta_tilde * (alpha - 1.0) / (stats.jmp * stats.cv**2)))


@dataclass(frozen=True)
class FitResult:
    alpha: float
    beta_tilde: float
    beta: float
    lam: float
    b: float
    mu: float
    w: float
    m1: float
    H: Optional[float]
    realizable_w_lower_bound: float
    skewness_theory: float
    skewness_empirical: float
    skewness_relative_error: float
    negative_b: bool
    long_memory: bool
    acf_sse: float = math.nan
    label: Optional[str] = None

    def to_params(self, kind=ModelKind.MF) -> ModelParams:
        """Model parameters of a realizable fit (raises for ``b <= 0``)."""
        kind = ModelKind(kind)
        w = 1.0 if kind is ModelKind.PREVIOUS else self.w
        return ModelParams(kind, self.b, w, JumpMeasure(self.mu, self.lam),
                           GammaMixture(self.alpha, self.beta))

    def as_row(self) -> dict:
        return {
            "label": self.label or "", "alpha": self.alpha, "beta": self.beta,
            "H": "" if self.H is None else self.H, "b": self.b, "lambda": self.lam,
            "mu": self.mu, "w": self.w, "M1": self.m1, "beta_tilde": self.beta_tilde,
            "Skw": self.skewness_empirical, "Skw_model": self.skewness_theory,
            "Skw_rel_err": self.skewness_relative_error,
            "w_lower_bound": self.realizable_w_lower_bound,
            "negative_b": int(self.negative_b), "long_memory": int(self.long_memory),
        }


def _model_skewness(mm: MomentMatch, w: float, alpha: float) -> float:
    m2 = 2.0 * mm.mu / mm.lam**2
    m3 = 6.0 * mm.mu / mm.lam**3
    R = 1.0 / (mm.beta * (alpha - 1.0))
    return skewness_from_moments(mm.b, w, mm.m1, m2, m3, R)


def assemble(stats: SummaryStats, alpha: float, beta_tilde: float, w: float,
             acf_sse: float = math.nan) -> FitResult:
    """Moment-match at ``w`` and package the result with its diagnostics."""
    mm = moment_match(stats, alpha, beta_tilde, w)
    sk = _model_skewness(mm, w, alpha)
    err = abs(sk - stats.skw) / abs(stats.skw) if stats.skw else math.nan
    return FitResult(
        alpha=alpha, beta_tilde=beta_tilde, beta=mm.beta, lam=mm.lam, b=mm.b, mu=mm.mu,
        w=w, m1=mm.m1, H=hurst_exponent(alpha),
        realizable_w_lower_bound=realizability_bound(stats, alpha, beta_tilde),
        skewness_theory=sk, skewness_empirical=stats.skw, skewness_relative_error=err,
        negative_b=mm.negative_b, long_memory=alpha <= 2.0, acf_sse=acf_sse, label=stats.label,
    )


def fit_w(stats: SummaryStats, alpha: float, beta_tilde: float, acf_sse: float = math.nan):
    """Choose ``w`` in [0, 1] minimizing the relative skewness error.

    A grid with step 1e-3 locates the best cell, then a bounded scalar
    search refines inside it. Returns ``(w, FitResult)``.
    """
    if not math.isfinite(stats.skw) or stats.skw == 0:
        raise FitFailure("fitting w needs a finite nonzero empirical skewness")

    def err(w):
        e = assemble(stats, alpha, beta_tilde, float(w)).skewness_relative_error
        return e if math.isfinite(e) else math.inf

    grid = np.linspace(0.0, 1.0, 1001)
    errs = np.array([err(w) for w in grid])
    if not np.any(np.isfinite(errs)):
        raise FitFailure("model skewness is undefined for every w")
    i = int(np.argmin(errs))
    w_best, e_best = float(grid[i]), float(errs[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(err, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-10})
        if res.fun < e_best:
            w_best = float(res.x)
    return w_best, assemble(stats, alpha, beta_tilde, w_best, acf_sse)


def fit_series(series: CountSeries, w="fixed", w_value: float = 1.0,
               lags: Sequence[int] = DEFAULT_LAGS) -> FitResult:
    """Full pipeline on a raw series: trim, summarize, fit the ACF, match moments.

    ``w="fixed"`` uses ``w_value``; ``w="fit"`` chooses ``w`` from the skewness.
    """
    s = trim(series)
    stats = summary(s)
    lags = [int(k) for k in lags]
    if max(lags) >= len(s):
        raise FitFailure(f"series of length {len(s)} is too short for lag {max(lags)}")
    rho = sample_acf(s, max(lags))
    af = fit_acf(lags, rho[lags])
    if w == "fit":
        return fit_w(stats, af.alpha, af.beta_tilde, af.sse)[1]
    if w != "fixed":
        raise ValueError(f"w mode must be 'fixed' or 'fit', got {w!r}")
    return assemble(stats, af.alpha, af.beta_tilde, float(w_value), af.sse)


def kappa_regression(datasets: Sequence[SummaryStats]):
    """Fit ``Skw = kappa CV`` through the origin.

    Returns ``(kappa, R2)`` with the uncentred coefficient of determination
    that belongs to a no-intercept fit.
    """
    if len(datasets) < 2:
        raise ValueError("need at least two datasets")
    cv = np.array([d.cv for d in datasets], dtype=float)
    sk = np.array([d.skw for d in datasets], dtype=float)
    den = float(cv @ cv)
    if den == 0:
        raise ValueError("all coefficients of variation are zero")
    kappa = float(sk @ cv) / den
    res = sk - kappa * cv
    return kappa, 1.0 - float(res @ res) / float(sk @ sk)


def m1_from_kappa(w: float, kappa: float):
    """Positive root of ``w^2 M1^2 + (kappa/2) M1 - 1 = 0``.

    Returns ``(M1, feasible)`` with ``feasible = M1 < 1``; ``w = 0`` is the
    linear case ``M1 = 2 / kappa``.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    if w == 0:
        m1 = 2.0 / kappa
    else:
        # rationalized form avoids cancellation for small w
        m1 = 4.0 / (kappa + math.sqrt(kappa * kappa + 16.0 * w * w))
    return m1, m1 < 1.0
