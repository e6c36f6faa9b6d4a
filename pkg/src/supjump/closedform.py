"""
Closed-form stationary statistics.

Covers the nominal (single-speed) process, the previous superposition where
components are independent, and the mean-field (MF) superposition. The
aggregation (AG) model shares the mean and jump rate with the other two but
its variance needs the Lyapunov solver in :mod:`supjump.riccati`.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .exceptions import NonstationaryError, ParseError, UnsupportedModelError
from .measures import (
    GammaMixture,
    JumpMeasure,
    ReversionMixture,
    acf_kernel,
    jump_from_dict,
    mixture_from_dict,
)


class ModelKind(str, enum.Enum):
    PREVIOUS = "previous"
    MF = "mf"
    AG = "ag"


@dataclass(frozen=True)
class ModelParams:
    """Full specification of one superposed process.

    Parameters
    ----------
    kind : ModelKind
        Interaction type. ``PREVIOUS`` requires ``w == 1``.
    b : float
        Source rate (individuals per unit time).
    w : float
        Self-excitation weight in [0, 1]; ``1 - w`` goes to the interaction.
    jump : JumpMeasure
    mixture : ReversionMixture
    """

    kind: ModelKind
    b: float
    w: float
    jump: JumpMeasure
    mixture: ReversionMixture

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ValueError(f"source rate b must be positive, got {self.b}")
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"weight w must lie in [0, 1], got {self.w}")
        if self.kind is ModelKind.PREVIOUS and self.w != 1.0:
            raise ValueError(f"the previous model has w = 1, got {self.w}")
        if not self.jump.is_stationary:
            raise NonstationaryError(f"M1 = {self.jump.m1:.6g} must be < 1 for a stationary model")

    @property
    def m1(self) -> float:
        return self.jump.m1

    def with_kind(self, kind: ModelKind, w: Optional[float] = None) -> "ModelParams":
        kind = ModelKind(kind)
        if w is None:
            w = 1.0 if kind is ModelKind.PREVIOUS else self.w
        return replace(self, kind=kind, w=w)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "b": self.b,
            "w": self.w,
            "jump": self.jump.to_dict(),
            "mixture": self.mixture.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        try:
            kind = ModelKind(str(d.get("kind", "mf")).lower())
            w = float(d.get("w", 1.0))
            return cls(kind, float(d["b"]), w, jump_from_dict(d["jump"]), mixture_from_dict(d["mixture"]))
        except KeyError as exc:
            raise ParseError(f"params file is missing key {exc}") from exc


def load_params(path) -> ModelParams:
    """Read a params JSON file into :class:`ModelParams`."""
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(d, dict):
        raise ParseError(f"{path}: top level must be an object")
    return ModelParams.from_dict(d)


@dataclass(frozen=True)
class StationaryStats:
    mean: float
    variance: float
    skewness: float
    jump_rate: float
    acf: Callable

    @property
    def cv(self) -> float:
        return math.sqrt(self.variance) / self.mean


def _check_m1(jump: JumpMeasure):
    if not jump.is_stationary:
        raise NonstationaryError(f"M1 = {jump.m1:.6g} must be < 1 for a stationary model")


def skewness_from_moments(b, w, m1, m2, m3, R, corrected: bool = False) -> float:
    """Superposed skewness from raw ingredients.

    No stationarity check: the fitting code evaluates it on moment-matched
    parameter sets whose ``b`` may be negative.

    ``corrected=True`` divides the ``w M2^2 / 2`` term by ``1 - w M1``, which
    is what a direct third-cumulant computation of the MF model gives and
    what Monte Carlo supports for ``w > 0``. The default keeps the established
    form, which reproduces the tabulated fitted skewness values. Both agree
    at ``w = 0``.
    """
    denom = (1.0 - m1) * (1.0 - w * m1)
    var = m2 * b * R / (2.0 * denom)
    cross = 0.5 * w * m2 * m2
    if corrected:
        cross /= 1.0 - w * m1
    third = b / denom * (m3 / 3.0 + cross) * R
    if not var > 0:
        return math.nan
    return third * var ** -1.5


def nominal_stats(r: float, b: float, jump: JumpMeasure, w: float = 1.0) -> StationaryStats:
    """Stationary statistics of a single component with reversion speed ``r``.

    At ``w = 1`` these are the statistics of the nominal self-exciting
    process; for ``w < 1`` they describe one MF component in isolation.
    """
    _check_m1(jump)
    if not r > 0:
        raise ValueError(f"reversion speed must be positive, got {r}")
    m1, m2, m3 = jump.m1, jump.moment(2), jump.moment(3)
    c = 1.0 - w * m1
    return StationaryStats(
        mean=b / (r * (1.0 - m1)),
        variance=m2 * b / (2.0 * r * (1.0 - m1) * c),
        skewness=skewness_from_moments(b, w, m1, m2, m3, 1.0 / r),
        jump_rate=jump.mu * b / (r * (1.0 - m1)),
        acf=lambda tau: np.exp(-r * c * np.asarray(tau, dtype=float)),
    )


def superposed_mean(p: ModelParams) -> float:
    """``b R / (1 - M1)``, common to all three model kinds."""
    return p.b * p.mixture.inv_speed_mass() / (1.0 - p.m1)


def superposed_variance(p: ModelParams) -> float:
    """Stationary variance of the previous or MF superposition."""
    if p.kind is ModelKind.AG:
        raise UnsupportedModelError("AG variance has no closed form; use riccati.ag_variance")
    m1 = p.m1
    return p.jump.moment(2) * p.b * p.mixture.inv_speed_mass() / (2.0 * (1.0 - m1) * (1.0 - p.w * m1))


def decay_factor(p: ModelParams) -> float:
    """Speed multiplier ``c`` of the ACF kernel: ``1 - M1`` or ``1 - w M1``."""
    if p.kind is ModelKind.AG:
        raise UnsupportedModelError("AG autocorrelation has no closed form; use simulate.ensemble_stats")
    return 1.0 - p.w * p.m1


def superposed_acf(p: ModelParams, tau):
    """Stationary autocorrelation at lag(s) ``tau``."""
    return acf_kernel(p.mixture, decay_factor(p), tau)


def superposed_skewness_mf(p: ModelParams, corrected: bool = False) -> float:
    """Stationary skewness of the previous or MF superposition.

    See :func:`skewness_from_moments` for ``corrected``.
    """
    if p.kind is ModelKind.AG:
        raise UnsupportedModelError("AG skewness has no closed form")
    j = p.jump
    return skewness_from_moments(p.b, p.w, j.m1, j.moment(2), j.moment(3),
                                 p.mixture.inv_speed_mass(), corrected)


def superposed_jump_rate(p: ModelParams) -> float:
    """Expected jumps per unit time ``M0 b / (1 - M1)``, same for all kinds."""
    return p.jump.mu * p.b / (1.0 - p.m1)


def stationary_stats(p: ModelParams) -> StationaryStats:
    return StationaryStats(
        mean=superposed_mean(p),
        variance=superposed_variance(p),
        skewness=superposed_skewness_mf(p),
        jump_rate=superposed_jump_rate(p),
        acf=lambda tau: superposed_acf(p, tau),
    )


def hurst_exponent(alpha: float) -> Optional[float]:
    """``H = 3/2 - alpha/2`` for ``alpha`` in (1, 3), otherwise ``None``."""
    if not alpha > 1:
        raise ValueError(f"Hurst exponent needs alpha > 1, got {alpha}")
    if alpha >= 3:
        return None
    return 1.5 - 0.5 * alpha


def nondimensionalize(p: ModelParams):
    """Rescale time and counts so that ``b = 1`` and the mean is 1.

    Returns
    -------
    t_bar : float
        Time unit ``1 / ((1 - M1) beta (alpha - 1))``.
    x_bar : float
        Count unit ``b * t_bar``.
    p_nd : ModelParams
        Parameters in the new units. Jump sizes scale as ``z / x_bar`` so
        both ``lam`` and ``mu`` are multiplied by ``x_bar``, which leaves M1
        unchanged.
    """
    mix = p.mixture
    if not isinstance(mix, GammaMixture):
        raise UnsupportedModelError("nondimensionalize needs a Gamma mixture")
    mix.inv_speed_mass()
    t_bar = 1.0 / ((1.0 - p.m1) * mix.beta * (mix.alpha - 1.0))
    x_bar = p.b * t_bar
    jump = JumpMeasure(p.jump.mu * x_bar, p.jump.lam * x_bar)
    p_nd = replace(p, b=1.0, jump=jump, mixture=GammaMixture(mix.alpha, mix.beta * t_bar))
    return t_bar, x_bar, p_nd
