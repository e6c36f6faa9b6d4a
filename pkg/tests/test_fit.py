import csv
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import NAGARA
from supjump import GammaMixture, JumpMeasure, ModelParams
from supjump.closedform import (
    hurst_exponent,
    superposed_jump_rate,
    superposed_mean,
    superposed_skewness_mf,
    superposed_variance,
)
from supjump.empirical import CountSeries, SummaryStats
from supjump.exceptions import FitFailure
from supjump.fit import (
    DEFAULT_LAGS,
    assemble,
    fit_acf,
    fit_series,
    fit_w,
    gamma_acf,
    kappa_regression,
    m1_from_kappa,
    moment_match,
    realizability_bound,
)

DATA = Path(__file__).parent / "data" / "river_summary_stats.csv"
NAGARA_STATS = SummaryStats.from_moments(7.287e3, 2.136e8, 2.756e-1, label="Nagara 2023")


def river_stats():
    with open(DATA) as fh:
        return [SummaryStats(float(r["Ave"]), float(r["Var"]), float(r["CV"]), float(r["Jmp"]),
                             float(r["Skw"]), 0, f'{r["river"]} {r["year"]}') for r in csv.DictReader(fh)]


def model_stats(p):
    return SummaryStats.from_moments(superposed_mean(p), superposed_variance(p), superposed_jump_rate(p),
                                     superposed_skewness_mf(p))


class TestFitAcf:
    def test_noiseless_roundtrip(self):
        lags = np.array(DEFAULT_LAGS)
        f = fit_acf(lags, gamma_acf(lags, 1.8, 0.5))
        assert f.alpha == pytest.approx(1.8, abs=1e-6)
        assert f.beta_tilde == pytest.approx(0.5, abs=1e-6)
        assert f.sse < 1e-20

    @pytest.mark.parametrize("alpha,bt", [(1.3, 2.0), (2.5, 0.05), (6.0, 1.0)])
    def test_objective_not_worse_than_starts(self, alpha, bt):
        lags = np.array(DEFAULT_LAGS)
        rng = np.random.default_rng(1)
        rho = gamma_acf(lags, alpha, bt) + 0.02 * rng.standard_normal(lags.size)
        f = fit_acf(lags, rho)
        assert len(f.start_sse) == 9
        assert f.sse <= min(f.start_sse)
        assert f.sse == pytest.approx(float(np.sum((gamma_acf(lags, f.alpha, f.beta_tilde) - rho) ** 2)))

    def test_exponential_limit(self):
        lags = np.array(DEFAULT_LAGS, dtype=float)
        f = fit_acf(lags, np.exp(-0.3 * lags))
        assert f.alpha > 100
        assert f.beta_tilde * (f.alpha - 1) == pytest.approx(0.3, rel=1e-3)

    def test_no_decay(self):
        with pytest.raises(FitFailure):
            fit_acf(DEFAULT_LAGS, np.ones(len(DEFAULT_LAGS)))

    def test_too_few_points(self):
        with pytest.raises(FitFailure):
            fit_acf([1, 2], [0.5, 0.3])


class TestMomentMatch:
    def test_nagara_row(self):
        bt = NAGARA["beta"] * (1 - NAGARA["mu"] / NAGARA["lam"])
        mm = moment_match(NAGARA_STATS, NAGARA["alpha"], bt, 1.0)
        for key in ("lam", "b", "mu", "beta"):
            assert getattr(mm, key) == pytest.approx(NAGARA[key], rel=5e-3)
        assert not mm.negative_b

    @settings(max_examples=60, deadline=None)
    @given(ave=st.floats(1, 1e5), cv=st.floats(0.2, 5), jmp=st.floats(0.01, 0.6),
           alpha=st.floats(1.05, 8), bt=st.floats(0.01, 50), u=st.floats(0, 1))
    def test_reproduces_moments(self, ave, cv, jmp, alpha, bt, u):
        stats = SummaryStats.from_moments(ave, (cv * ave) ** 2, jmp)
        lo = realizability_bound(stats, alpha, bt)
        w = lo + (1 - lo) * u
        mm = moment_match(stats, alpha, bt, w)
        # b = Ave s - (1 - w) Jmp / lam cancels near the bound, so keep away from it
        assume(mm.b > 1e-3 * ave * bt * (alpha - 1) and mm.m1 < 1)
        p = ModelParams("mf", mm.b, w, JumpMeasure(mm.mu, mm.lam), GammaMixture(alpha, mm.beta))
        assert superposed_mean(p) == pytest.approx(ave, rel=1e-10)
        assert superposed_variance(p) == pytest.approx(stats.var, rel=1e-10)
        assert superposed_jump_rate(p) == pytest.approx(jmp, rel=1e-10)
        assert p.mixture.beta * (1 - w * p.m1) == pytest.approx(bt, rel=1e-10)

    def test_negative_b_reported(self):
        stats = SummaryStats.from_moments(10.0, 100.0, 0.5)
        mm = moment_match(stats, 2.0, 0.1, 0.0)
        assert mm.negative_b and mm.b < 0

    def test_invalid(self):
        with pytest.raises(ValueError):
            moment_match(NAGARA_STATS, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            moment_match(NAGARA_STATS, 2.0, 1.0, 1.5)


class TestRealizability:
    def test_nagara_bound_zero(self):
        bt = NAGARA["beta"] * (1 - NAGARA["mu"] / NAGARA["lam"])
        assert realizability_bound(NAGARA_STATS, NAGARA["alpha"], bt) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_sign_sweep(self, seed):
        rng = np.random.default_rng(seed)
        stats = SummaryStats.from_moments(100.0, (rng.uniform(1, 4) * 100) ** 2, rng.uniform(0.1, 0.4))
        alpha = rng.uniform(1.2, 4)
        bt = rng.uniform(0.05, 0.9) * stats.jmp * stats.cv**2 / (alpha - 1)
        lo = realizability_bound(stats, alpha, bt)
        assert 0 < lo < 1
        for w in np.linspace(0, 1, 100):
            if abs(w - lo) < 1e-9:
                continue
            assert (moment_match(stats, alpha, bt, w).b > 0) == (w > lo)


class TestFitW:
    def test_planted_weight(self):
        p = ModelParams("mf", 1.0, 0.6, JumpMeasure(0.3, 0.5), GammaMixture(1.7, 2.0))
        stats = model_stats(p)
        w, res = fit_w(stats, 1.7, 2.0 * (1 - 0.6 * p.m1))
        assert w == pytest.approx(0.6, abs=0.02)
        assert res.skewness_relative_error < 1e-8

    def test_boundary_match(self):
        p = ModelParams("mf", 1.0, 1.0, JumpMeasure(0.3, 0.5), GammaMixture(2.5, 1.0))
        w, res = fit_w(model_stats(p), 2.5, 1.0 * (1 - p.m1))
        assert w == 1.0 and res.skewness_relative_error == pytest.approx(0.0, abs=1e-12)

    def test_nagara_prefers_w0(self):
        bt = NAGARA["beta"] * (1 - NAGARA["mu"] / NAGARA["lam"])
        stats = SummaryStats.from_moments(7.287e3, 2.136e8, 2.756e-1, skw=2.672)
        w, res = fit_w(stats, NAGARA["alpha"], bt)
        assert w == 0.0
        assert res.b == pytest.approx(7.775e3, rel=5e-3)
        fixed = assemble(stats, NAGARA["alpha"], bt, 1.0)
        assert res.skewness_relative_error <= fixed.skewness_relative_error

    def test_needs_skewness(self):
        with pytest.raises(FitFailure):
            fit_w(NAGARA_STATS, 1.5, 1.0)


class TestFlags:
    @pytest.mark.parametrize("alpha", [1.2, 2.0, 2.5, 3.0, 5.0])
    def test_hurst_and_long_memory(self, alpha):
        res = assemble(NAGARA_STATS, alpha, 1.0, 1.0)
        assert (res.H is not None) == (1 < alpha < 3)
        assert res.H == hurst_exponent(alpha)
        assert res.long_memory == (alpha <= 2)


class TestKappa:
    def test_exact_line(self):
        pts = [SummaryStats(1, 1, 1.0, 0.1, 2.0, 3), SummaryStats(1, 1, 2.0, 0.1, 4.0, 3)]
        k, r2 = kappa_regression(pts)
        assert k == pytest.approx(2.0) and r2 == pytest.approx(1.0)

    def test_construction(self):
        pts = [SummaryStats(1, 1, c, 0.1, 1.5875 * c, 3) for c in (0.5, 1.3, 2.2)]
        assert kappa_regression(pts)[0] == pytest.approx(1.5875)

    def test_published_river_stats(self):
        rows = river_stats()
        assert len(rows) == 68
        k, r2 = kappa_regression(rows)
        assert k == pytest.approx(1.59, rel=0.02)
        assert r2 == pytest.approx(0.95, abs=0.005)

    def test_m1_values(self):
        m1, ok = m1_from_kappa(1.0, 1.5875)
        assert m1 == pytest.approx(0.6790, abs=1e-4) and ok
        m1, ok = m1_from_kappa(0.0, 1.5875)
        assert m1 == pytest.approx(1.2598, abs=1e-4) and not ok

    @given(kappa=st.floats(0.1, 20))
    def test_m1_monotone(self, kappa):
        ws = np.linspace(1e-6, 1.0, 50)
        m = np.array([m1_from_kappa(w, kappa)[0] for w in ws])
        assert np.all(m > 0) and np.all(m <= 2 / kappa)
        # the root of w^2 M^2 + (kappa/2) M - 1 = 0 shrinks as w grows
        assert np.all(np.diff(m) < 0)
        for w, x in zip(ws, m):
            assert w * w * x * x + kappa / 2 * x - 1 == pytest.approx(0, abs=1e-12)
