"""
Jump-size and reversion-speed measures.

Every model in the package is parameterized by two measures:

* a Lévy measure ``nu(dz) = mu * lam * exp(-lam z) dz`` on jump sizes
  (:class:`JumpMeasure`), whose moments are ``M_k = mu k! / lam**k``;
* a probability measure ``pi(dr)`` on reversion speeds
  (:class:`GammaMixture`, :class:`DiracMixture`, :class:`DiscreteMixture`).

The long-memory behaviour comes entirely from ``pi``: the stationary
autocorrelation of a superposition is the kernel

    rho(tau) = (1/R) * int r^-1 exp(-r c tau) pi(dr),   R = int r^-1 pi(dr),

with a model dependent decay factor ``c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import optimize, special

from .exceptions import DivergentMassError, NumericalError

_QUANTILE_TOL = 1e-12


@dataclass(frozen=True)
class JumpMeasure:
    """Exponential jump-size Lévy measure.

    Parameters
    ----------
    mu : float
        Total mass ``M_0`` (jump frequency per unit intensity).
    lam : float
        Rate of the exponential density; mean jump size is ``1/lam``.
    """

    mu: float
    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"jump rate lambda must be positive, got {self.lam}")
        # mu = 0 is the degenerate no-jump measure, kept for deterministic limits
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise ValueError(f"jump frequency mu must be nonnegative, got {self.mu}")

    def moment(self, k: int) -> float:
        if k < 0 or int(k) != k:
            raise ValueError(f"moment order must be a nonnegative integer, got {k}")
        return self.mu * math.factorial(int(k)) / self.lam ** int(k)

    @property
    def m1(self) -> float:
        return self.mu / self.lam

    @property
    def is_stationary(self) -> bool:
        """True when ``M_1 < 1``; larger values are representable but flagged."""
        return self.m1 < 1.0

    def laplace_exponent(self, B):
        """``int (1 - exp(-B z)) nu(dz) = mu B / (lam + B)``, vectorized."""
        B = np.asarray(B, dtype=float)
        return self.mu * B / (self.lam + B)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "lambda": self.lam}


def moment(jm: JumpMeasure, k: int) -> float:
    """k-th moment ``M_k = mu k! / lam**k`` of the jump measure."""
    return jm.moment(k)


@dataclass(frozen=True)
class RGrid:
    """Finite atomic approximation ``sum_i pi_i delta_{r_i}`` of a mixture."""

    r: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.r, dtype=float))
        pi = np.atleast_1d(np.asarray(self.pi, dtype=float))
        if r.shape != pi.shape or r.ndim != 1 or r.size == 0:
            raise ValueError("grid nodes and weights must be 1-D arrays of equal length")
        if np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise ValueError("grid nodes must be positive and strictly increasing")
        if np.any(pi <= 0):
            raise ValueError("grid weights must be positive")
        if abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError(f"grid weights sum to {pi.sum()!r}, expected 1")
        r.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "pi", pi)

    @property
    def n(self) -> int:
        return self.r.size

    def inv_speed_mass(self) -> float:
        return float(np.sum(self.pi / self.r))

    def acf_kernel(self, c: float, tau):
        tau = np.asarray(tau, dtype=float)
        w = self.pi / self.r
        out = np.exp(-np.multiply.outer(tau, self.r) * c) @ w
        return out / w.sum()


@dataclass(frozen=True)
class GammaMixture:
    """Gamma law with density proportional to ``r**(alpha-1) exp(-r/beta)``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"Gamma shape and scale must be positive, got {self.alpha}, {self.beta}")

    def inv_speed_mass(self) -> float:
        if self.alpha <= 1:
            raise DivergentMassError(
                f"int r^-1 pi(dr) diverges for Gamma shape alpha={self.alpha} <= 1"
            )
        return 1.0 / (self.beta * (self.alpha - 1.0))

    def acf_kernel(self, c: float, tau):
        self.inv_speed_mass()
        tau = np.asarray(tau, dtype=float)
        return np.exp(-(self.alpha - 1.0) * np.log1p(self.beta * c * tau))

    def quantile(self, p):
        """Quantiles of the scaled Gamma law, polished to 1e-12 in probability."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        x = special.gammaincinv(self.alpha, p)
        for i in np.flatnonzero(np.abs(special.gammainc(self.alpha, x) - p) > _QUANTILE_TOL):
            x[i] = _gamma_quantile_bisect(self.alpha, p[i], i)
        return x * self.beta

    def discretize(self, n: int) -> RGrid:
        if n < 1:
            raise ValueError(f"grid size must be positive, got {n}")
        self.inv_speed_mass()
        if n == 1:
            return RGrid(np.array([self.beta * (self.alpha - 1.0)]), np.array([1.0]))
        q = self.quantile(np.arange(1, n) / n) / self.beta
        # r^-1 * Gamma(alpha) density = Gamma(alpha - 1) density / (beta (alpha - 1)),
        # so the per-bin harmonic mean keeps int r^-1 pi(dr) exact
        cdf = np.concatenate([[0.0], special.gammainc(self.alpha - 1.0, q), [1.0]])
        r = self.beta * (self.alpha - 1.0) / (n * np.diff(cdf))
        bad = np.flatnonzero(~(r > 0) | ~np.isfinite(r))
        if bad.size:
            raise NumericalError(f"node of Gamma bin {bad[0]} is not a positive number")
        if np.any(np.diff(r) <= 0):
            i = int(np.flatnonzero(np.diff(r) <= 0)[0])
            raise NumericalError(f"Gamma bins {i} and {i + 1} collapsed (n={n} too large)")
        return RGrid(r, np.full(n, 1.0 / n))

    def to_dict(self) -> dict:
        return {"type": "gamma", "alpha": self.alpha, "beta": self.beta}


def _gamma_quantile_bisect(a: float, p: float, index: int) -> float:
    f = lambda x: special.gammainc(a, x) - p
    lo, hi = 0.0, max(1.0, a)
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e300:
            raise NumericalError(f"could not bracket Gamma quantile for bin {index}")
    try:
        return optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)
    except (ValueError, RuntimeError) as exc:
        raise NumericalError(f"Gamma quantile failed for bin {index}: {exc}") from exc


@dataclass(frozen=True)
class DiracMixture:
    """All components share one reversion speed ``r0`` (exponential memory)."""

    r0: float

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError(f"Dirac location must be positive, got {self.r0}")

    def inv_speed_mass(self) -> float:
        return 1.0 / self.r0

    def acf_kernel(self, c: float, tau):
        return np.exp(-self.r0 * c * np.asarray(tau, dtype=float))

    def discretize(self, n: int) -> RGrid:
        if n < 1:
            raise ValueError(f"grid size must be positive, got {n}")
        return RGrid(np.array([self.r0]), np.array([1.0]))

    def to_dict(self) -> dict:
        return {"type": "dirac", "r0": self.r0}


@dataclass(frozen=True)
class DiscreteMixture:
    """Finitely many speeds ``r_i`` with probabilities ``pi_i``."""

    r: tuple
    pi: tuple
    _grid: RGrid = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(float(x) for x in self.r))
        object.__setattr__(self, "pi", tuple(float(x) for x in self.pi))
        object.__setattr__(self, "_grid", RGrid(np.array(self.r), np.array(self.pi)))

    def inv_speed_mass(self) -> float:
        return self._grid.inv_speed_mass()

    def acf_kernel(self, c: float, tau):
        return self._grid.acf_kernel(c, tau)

    def discretize(self, n: int = 1) -> RGrid:
        return self._grid

    def to_dict(self) -> dict:
        return {"type": "discrete", "r": list(self.r), "pi": list(self.pi)}


ReversionMixture = Union[GammaMixture, DiracMixture, DiscreteMixture]


def inv_speed_mass(mix: ReversionMixture) -> float:
    """``R = int r^-1 pi(dr)``."""
    return mix.inv_speed_mass()


def acf_kernel(mix: ReversionMixture, c: float, tau):
    """Normalized kernel ``(1/R) int r^-1 exp(-r c tau) pi(dr)``.

    Scalar ``tau`` gives a float, array ``tau`` an array of the same shape.
    """
    if not c > 0:
        raise ValueError(f"decay factor must be positive, got {c}")
    if np.any(np.asarray(tau) < 0):
        raise ValueError("lag must be nonnegative")
    out = mix.acf_kernel(c, tau)
    return float(out) if np.ndim(out) == 0 else out


def discretize(mix: ReversionMixture, n: int) -> RGrid:
    """Equal-probability binning.

    Gamma mixtures are split at the ``k/n`` quantiles and each bin gets
    weight ``1/n`` and the node ``1 / E[r^-1 | bin]``. Using the conditional
    harmonic mean rather than the arithmetic one keeps ``R`` exact at every
    ``n``; the arithmetic mean underestimates it badly when ``alpha < 2``. A Dirac mixture
    returns its single atom and a discrete mixture returns itself.
    """
    return mix.discretize(n)


def mixture_from_dict(d: dict) -> ReversionMixture:
    kind = str(d.get("type", "")).lower()
    if kind == "gamma":
        return GammaMixture(float(d["alpha"]), float(d["beta"]))
    if kind == "dirac":
        return DiracMixture(float(d["r0"]))
    if kind == "discrete":
        return DiscreteMixture(tuple(d["r"]), tuple(d["pi"]))
    raise ValueError(f"unknown mixture type {d.get('type')!r}")


def jump_from_dict(d: dict) -> JumpMeasure:
    return JumpMeasure(float(d["mu"]), float(d["lambda"]))
