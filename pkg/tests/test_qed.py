import math

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from erlangr import (
    DomainError,
    LimitInputs,
    erlang_b_tail,
    gaussian_mix_integral,
    halfin_whitt_delay,
    limits_blocking,
    loss_model_limits,
)
from oracles import mmsn_distribution, trapezoid_mix_integral

# Reference limit table: (r, beta, gamma) -> (g, f, h), frozen from the
# published tables for the three content-fraction cases.
BLOCKING_TABLE = {
    (0.10, 1.0, 1.0): (0.1767, 0.0981, 0.1437),
    (0.10, 1.0, 2.0): (0.2108, 0.0217, 0.1947),
    (0.10, 2.0, 1.0): (0.0188, 0.0914, 0.0084),
    (0.10, 2.0, 2.0): (0.0247, 0.0177, 0.0118),
    (0.25, 1.0, 1.0): (0.1429, 0.1569, 0.0940),
    (0.25, 1.0, 2.0): (0.1976, 0.0391, 0.1617),
    (0.25, 2.0, 1.0): (0.0126, 0.1445, 0.0048),
    (0.25, 2.0, 2.0): (0.0220, 0.0284, 0.0097),
    (0.50, 1.0, 1.0): (0.1011, 0.2185, 0.0478),
    (0.50, 1.0, 2.0): (0.1792, 0.0605, 0.1199),
    (0.50, 2.0, 1.0): (0.0052, 0.2039, 0.0014),
    (0.50, 2.0, 2.0): (0.0173, 0.0404, 0.0063),
}


class TestLimitInputs:
    def test_eta_omega(self):
        inp = LimitInputs.from_coefficients(1.0, 1.0, 0.25)
        assert inp.eta == pytest.approx((1.0 - 0.5) / math.sqrt(0.75))
        assert inp.omega == pytest.approx((1.0 - 2.0) / math.sqrt(0.75))

    def test_domain(self):
        with pytest.raises(DomainError):
            LimitInputs.from_coefficients(1.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            LimitInputs.from_coefficients(math.inf, 1.0, 0.5)


class TestGaussianMixIntegral:
    @pytest.mark.parametrize(
        "beta,gamma,r",
        [(1.0, 1.0, 0.25), (2.0, 1.0, 0.10), (0.0, 2.0, 0.50), (-1.0, 0.5, 0.25)],
    )
    def test_vs_trapezoid(self, beta, gamma, r):
        assert gaussian_mix_integral(beta, gamma, r) == pytest.approx(
            trapezoid_mix_integral(beta, gamma, r), abs=1e-9
        )

    def test_gamma_large_reduces_to_phi(self):
        # With unbounded capacity the inner factor is 1.
        assert gaussian_mix_integral(1.0, 40.0, 0.25) == pytest.approx(
            norm.cdf(1.0), abs=1e-12
        )


class TestBlockingLimits:
    @pytest.mark.parametrize("key,expected", sorted(BLOCKING_TABLE.items()))
    def test_reference_table(self, key, expected):
        r, beta, gamma = key
        g, f, h = limits_blocking(beta, gamma, r)
        assert g == pytest.approx(expected[0], abs=5e-4)
        assert f == pytest.approx(expected[1], abs=5e-4)
        assert h == pytest.approx(expected[2], abs=5e-4)

    def test_mu_scaling(self):
        g1, f1, h1 = limits_blocking(1.0, 1.0, 0.25, mu=1.0)
        g2, f2, h2 = limits_blocking(1.0, 1.0, 0.25, mu=4.0)
        assert g2 == pytest.approx(g1)
        assert f2 == pytest.approx(f1)
        assert h2 == pytest.approx(h1 / 4.0)

    def test_beta_zero_continuity(self):
        g0, _, _ = limits_blocking(0.0, 1.0, 0.25)
        for eps in (1e-6, -1e-6):
            g, _, _ = limits_blocking(eps, 1.0, 0.25)
            assert abs(g - g0) < 1e-4

    def test_deep_negative_beta_saturates(self):
        g, f, h = limits_blocking(-60.0, 1.0, 0.25)
        assert g == 1.0
        assert math.isinf(f) and math.isinf(h)

    @given(
        beta=st.floats(-3, 4),
        gamma=st.floats(-2, 4),
        r=st.floats(0.05, 0.95),
    )
    @settings(max_examples=60, deadline=None)
    def test_ranges(self, beta, gamma, r):
        g, f, h = limits_blocking(beta, gamma, r)
        assert 0.0 <= g <= 1.0
        assert f >= 0.0
        assert h >= 0.0

    @pytest.mark.parametrize("beta", [0.25, 0.5, 1.0, 2.0])
    @pytest.mark.parametrize("gamma", [-1.0, 0.0, 1.0, 2.0])
    @pytest.mark.parametrize("r", [0.1, 0.25, 0.5])
    def test_bounded_by_pure_delay(self, beta, gamma, r):
        g, _, _ = limits_blocking(beta, gamma, r)
        assert g <= halfin_whitt_delay(beta) + 1e-12

    @pytest.mark.parametrize("beta", [0.25, 0.5, 1.0, 2.0])
    @pytest.mark.parametrize("r", [0.1, 0.25, 0.5])
    def test_converges_to_pure_delay(self, beta, r):
        g, _, _ = limits_blocking(beta, 40.0, r)
        assert abs(g - halfin_whitt_delay(beta)) < 1e-3

    @pytest.mark.parametrize("gamma", [0.0, 1.0, 2.0])
    def test_large_beta_blocking_dominates(self, gamma):
        # With overwhelming staffing only the bed constraint binds, so the
        # scaled blocking approaches the pure-loss tail.
        _, f, _ = limits_blocking(8.0, gamma, 0.5)
        assert abs(f - erlang_b_tail(gamma, 0.5)) < 0.02

    def test_domain(self):
        with pytest.raises(DomainError):
            limits_blocking(1.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            limits_blocking(1.0, 1.0, 0.5, mu=0.0)


class TestPureDelay:
    def test_value(self):
        # 1 / (1 + beta Phi(beta) / phi(beta)) at beta = 1.
        expected = 1.0 / (1.0 + norm.cdf(1.0) / norm.pdf(1.0))
        assert halfin_whitt_delay(1.0) == pytest.approx(expected)

    def test_domain(self):
        with pytest.raises(DomainError):
            halfin_whitt_delay(0.0)
        with pytest.raises(DomainError):
            halfin_whitt_delay(-1.0)

    def test_monotone(self):
        vals = [halfin_whitt_delay(b) for b in (0.1, 0.5, 1.0, 2.0, 3.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))


class TestLossLimits:
    def test_domain(self):
        with pytest.raises(DomainError):
            loss_model_limits(1.0, 1.0)
        with pytest.raises(DomainError):
            loss_model_limits(2.0, 1.0)

    def test_vs_birth_death(self):
        # No returns: the facility is an M/M/s/n system with offered load R.
        beta, gamma, big_r = 1.0, 2.0, 10_000.0
        s = math.ceil(big_r + beta * math.sqrt(big_r))
        n = round(big_r + gamma * math.sqrt(big_r))
        pi = mmsn_distribution(s, n, big_r)
        g_exact = float(pi[s:].sum())
        f_exact = float(pi[n]) * math.sqrt(big_r)
        g, f = loss_model_limits(beta, gamma)
        assert abs(g - g_exact) < 0.01
        assert abs(f - f_exact) < 0.01


class TestErlangBTail:
    def test_value(self):
        assert erlang_b_tail(1.0, 0.25) == pytest.approx(
            0.5 * norm.pdf(1.0) / norm.cdf(1.0)
        )

    def test_domain(self):
        with pytest.raises(DomainError):
            erlang_b_tail(1.0, 0.0)
        with pytest.raises(DomainError):
            erlang_b_tail(1.0, 1.5)
