import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from supjump.exceptions import DivergentMassError
from supjump.measures import (
    DiracMixture,
    DiscreteMixture,
    GammaMixture,
    JumpMeasure,
    RGrid,
    acf_kernel,
    discretize,
    inv_speed_mass,
    jump_from_dict,
    mixture_from_dict,
    moment,
)


def gamma_kernel_quad(alpha, beta, c, tau):
    """(1/R) int r^-1 exp(-r c tau) Gamma(alpha, beta)(dr) by adaptive quadrature.

    r^-1 pi(dr) / R is the Gamma(alpha - 1, beta) law, so this is its Laplace
    transform at c tau, integrated in log r and split at the integrand peak.
    """
    a, s = alpha - 1.0, c * tau
    norm = special.gammaln(a) + a * math.log(beta)
    def f(t):
        if t > 700.0:
            return 0.0
        return math.exp(a * t - math.exp(t) * (1.0 / beta + s) - norm)

    t0 = math.log(a / (1.0 / beta + s))
    kw = dict(epsabs=0.0, epsrel=1e-12, limit=500)
    return integrate.quad(f, -np.inf, t0, **kw)[0] + integrate.quad(f, t0, np.inf, **kw)[0]


class TestJumpMeasure:
    def test_first_moment_nagara(self):
        assert moment(JumpMeasure(8.190e-6, 2.130e-5), 1) == pytest.approx(0.38451, abs=5e-6)

    def test_zeroth_moment(self):
        assert moment(JumpMeasure(1.0, 1.0), 0) == 1.0

    def test_second_moment_nagara(self):
        assert moment(JumpMeasure(8.190e-6, 2.130e-5), 2) == pytest.approx(3.6104e4, rel=1e-4)

    def test_low_moments_closed_form(self):
        jm = JumpMeasure(0.3, 0.7)
        assert jm.moment(2) == pytest.approx(2 * 0.3 / 0.49)
        assert jm.moment(3) == pytest.approx(6 * 0.3 / 0.343)

    @given(mu=st.floats(1e-8, 1e3), lam=st.floats(1e-6, 1e3))
    def test_moment_recursion(self, mu, lam):
        jm = JumpMeasure(mu, lam)
        for k in range(7):
            assert jm.moment(k + 1) == pytest.approx(jm.moment(k) * (k + 1) / lam, rel=1e-13)

    def test_nonstationary_flagged_not_forbidden(self):
        jm = JumpMeasure(2.0, 1.0)
        assert not jm.is_stationary
        assert JumpMeasure(0.5, 1.0).is_stationary

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            JumpMeasure(1.0, 0.0)
        with pytest.raises(ValueError):
            JumpMeasure(-1.0, 1.0)

    def test_negative_order(self):
        with pytest.raises(ValueError):
            JumpMeasure(1.0, 1.0).moment(-1)

    def test_laplace_exponent(self):
        jm = JumpMeasure(0.4, 2.0)
        B = np.array([0.0, 1.0, 10.0])
        # int (1 - e^{-Bz}) mu lam e^{-lam z} dz by quadrature
        ref = [integrate.quad(lambda z: (1 - math.exp(-b * z)) * 0.4 * 2.0 * math.exp(-2.0 * z), 0, np.inf)[0]
               for b in B]
        np.testing.assert_allclose(jm.laplace_exponent(B), ref, rtol=1e-10, atol=1e-14)


class TestInvSpeedMass:
    def test_gamma_nagara(self):
        assert inv_speed_mass(GammaMixture(1.438, 10.53)) == pytest.approx(0.2168, abs=5e-5)

    def test_dirac(self):
        assert inv_speed_mass(DiracMixture(2.0)) == 0.5

    def test_discrete(self):
        assert inv_speed_mass(DiscreteMixture((1, 2), (0.5, 0.5))) == pytest.approx(0.75)

    def test_divergent(self):
        with pytest.raises(DivergentMassError):
            inv_speed_mass(GammaMixture(1.0, 2.0))
        with pytest.raises(DivergentMassError):
            inv_speed_mass(GammaMixture(0.5, 2.0))


class TestAcfKernel:
    def test_gamma_closed_form(self):
        assert acf_kernel(GammaMixture(2.0, 1.0), 1.0, 1.0) == pytest.approx(0.5)

    def test_gamma_matches_quadrature(self):
        assert acf_kernel(GammaMixture(2.0, 1.0), 1.0, 3.0) == pytest.approx(0.25)
        assert gamma_kernel_quad(2.0, 1.0, 1.0, 3.0) == pytest.approx(0.25, rel=1e-8)

    @pytest.mark.parametrize("mix", [GammaMixture(1.5, 3.0), DiracMixture(2.0),
                                     DiscreteMixture((0.5, 1.0, 4.0), (0.2, 0.3, 0.5))])
    def test_unit_at_zero_and_monotone(self, mix):
        assert acf_kernel(mix, 0.7, 0.0) == pytest.approx(1.0)
        taus = np.linspace(0, 20, 41)
        k = acf_kernel(mix, 0.7, taus)
        assert np.all(np.diff(k) <= 0)
        assert np.all(acf_kernel(mix, 0.9, taus) <= k + 1e-15)

    def test_dirac_and_discrete(self):
        assert acf_kernel(DiracMixture(3.0), 0.5, 2.0) == pytest.approx(math.exp(-3.0))
        mix = DiscreteMixture((1.0, 2.0), (0.5, 0.5))
        want = (0.5 * math.exp(-1.0) + 0.25 * math.exp(-2.0)) / 0.75
        assert acf_kernel(mix, 1.0, 1.0) == pytest.approx(want)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            acf_kernel(DiracMixture(1.0), 0.0, 1.0)
        with pytest.raises(ValueError):
            acf_kernel(DiracMixture(1.0), 1.0, -1.0)

    @settings(max_examples=60, deadline=None)
    @given(alpha=st.floats(1.1, 10), beta=st.floats(0.01, 100), c=st.floats(0.1, 2), tau=st.floats(0, 50))
    def test_gamma_property_quadrature(self, alpha, beta, c, tau):
        got = acf_kernel(GammaMixture(alpha, beta), c, tau)
        assert got == pytest.approx(gamma_kernel_quad(alpha, beta, c, tau), rel=1e-8)


class TestDiscretize:
    def test_dirac_single_node(self):
        g = discretize(DiracMixture(3.0), 10)
        assert g.n == 1 and g.r[0] == 3.0 and g.pi[0] == 1.0

    def test_discrete_returns_itself(self):
        g = discretize(DiscreteMixture((1.0, 2.0), (0.25, 0.75)), 99)
        np.testing.assert_array_equal(g.r, [1.0, 2.0])

    def test_gamma_2_1(self):
        g = discretize(GammaMixture(2.0, 1.0), 512)
        assert abs(g.inv_speed_mass() - 1.0) <= 1e-3
        assert g.pi.sum() == pytest.approx(1.0, abs=1e-12)

    def test_gamma_nagara_2048(self):
        g = discretize(GammaMixture(1.438, 10.53), 2048)
        assert g.inv_speed_mass() == pytest.approx(0.21683, rel=2e-3)

    def test_refinement_converges(self):
        mix = GammaMixture(1.438, 10.53)
        errs = [abs(discretize(mix, n).inv_speed_mass() - mix.inv_speed_mass()) for n in (64, 256, 1024, 4096)]
        # harmonic-mean nodes keep R exact, so errors are at rounding level
        assert max(errs) < 1e-12 * mix.inv_speed_mass()

    def test_nodes_inside_their_bins(self):
        mix = GammaMixture(2.5, 0.7)
        g = discretize(mix, 100)
        q = np.concatenate([[0.0], mix.quantile(np.arange(1, 100) / 100), [np.inf]])
        assert np.all(g.r > q[:-1]) and np.all(g.r < q[1:])

    def test_grid_mean_speed_close(self):
        mix = GammaMixture(3.0, 2.0)
        g = discretize(mix, 4096)
        assert float(g.pi @ g.r) == pytest.approx(6.0, rel=2e-3)

    def test_quantile_precision(self):
        mix = GammaMixture(1.438, 10.53)
        p = np.linspace(0.01, 0.99, 50)
        np.testing.assert_allclose(special.gammainc(1.438, mix.quantile(p) / 10.53), p, atol=1e-12)

    def test_bad_n(self):
        with pytest.raises(ValueError):
            discretize(GammaMixture(2.0, 1.0), 0)


class TestRGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            RGrid(np.array([2.0, 1.0]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            RGrid(np.array([1.0, 2.0]), np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            RGrid(np.array([1.0]), np.array([1.0, 0.0]))

    def test_immutable(self):
        g = RGrid(np.array([1.0, 2.0]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            g.r[0] = 3.0


def test_json_roundtrip():
    d = json.loads('{"jump": {"mu": 0.2, "lambda": 0.5}, "mixture": {"type": "gamma", "alpha": 2, "beta": 3}}')
    assert jump_from_dict(d["jump"]) == JumpMeasure(0.2, 0.5)
    assert mixture_from_dict(d["mixture"]) == GammaMixture(2.0, 3.0)
    assert mixture_from_dict({"type": "dirac", "r0": 2}) == DiracMixture(2.0)
    with pytest.raises(ValueError):
        mixture_from_dict({"type": "weibull"})
