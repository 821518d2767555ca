import math
import time
import warnings

import pytest

from erlangr import (
    DomainError,
    InfeasibleTarget,
    ModelParams,
    QedPair,
    derive_loads,
    dimension_blocking,
    dimension_holding,
    halfin_whitt_delay,
    holding_approx,
    limits_blocking,
    solve_alpha,
)
from oracles import bisect_alpha, case_params

# Reference holding approximation table: (r, beta, gamma) -> (g_h, h_h).
HOLDING_TABLE = {
    (0.10, 1.0, 1.0): (0.2076, 0.1777),
    (0.10, 1.0, 2.0): (0.2187, 0.2050),
    (0.10, 2.0, 1.0): (0.0229, 0.0104),
    (0.10, 2.0, 2.0): (0.0257, 0.0124),
    (0.25, 1.0, 1.0): (0.1840, 0.1277),
    (0.25, 1.0, 2.0): (0.2109, 0.1759),
    (0.25, 2.0, 1.0): (0.0169, 0.0066),
    (0.25, 2.0, 2.0): (0.0234, 0.0104),
    (0.50, 1.0, 1.0): (0.1442, 0.0711),
    (0.50, 1.0, 2.0): (0.1981, 0.1354),
    (0.50, 2.0, 1.0): (0.0078, 0.0022),
    (0.50, 2.0, 2.0): (0.0188, 0.0069),
}

MU_PARAMS = ModelParams(lam=0.32, mu=4.0, delta=0.4, p=0.975)


def _f_b(beta, gamma, r):
    return limits_blocking(beta, gamma, r)[1]


class TestSolveAlpha:
    @pytest.mark.parametrize(
        "beta,gamma,r", [(1.0, 1.0, 0.25), (2.0, 2.0, 0.10), (0.5, 1.5, 0.50)]
    )
    def test_vs_bisection(self, beta, gamma, r):
        sol = solve_alpha(QedPair(beta=beta, gamma=gamma), r)
        oracle = bisect_alpha(_f_b, beta, gamma, r)
        assert sol.alpha == pytest.approx(oracle, abs=1e-8)
        assert sol.residual < 1e-10

    def test_fixed_point_property(self):
        sol = solve_alpha(QedPair(beta=1.0, gamma=1.0), 0.25)
        assert sol.alpha == pytest.approx(
            _f_b(sol.effective_beta, sol.effective_gamma, 0.25), abs=1e-9
        )
        assert sol.effective_beta == pytest.approx(1.0 - sol.alpha)

    def test_infeasible_when_gamma_collapses(self):
        with pytest.raises(InfeasibleTarget):
            solve_alpha(QedPair(beta=-2.0, gamma=0.1), 0.25)

    def test_domain(self):
        with pytest.raises(DomainError):
            solve_alpha(QedPair(beta=1.0, gamma=1.0), 1.0)


class TestHoldingApprox:
    @pytest.mark.parametrize("key,expected", sorted(HOLDING_TABLE.items()))
    def test_reference_table(self, key, expected):
        r, beta, gamma = key
        g_h, h_h = holding_approx(QedPair(beta=beta, gamma=gamma), r)
        assert g_h == pytest.approx(expected[0], abs=5e-4)
        assert h_h == pytest.approx(expected[1], abs=5e-4)

    def test_dominates_blocking(self):
        for (r, beta, gamma), _ in HOLDING_TABLE.items():
            g_b, _, h_b = limits_blocking(beta, gamma, r)
            g_h, h_h = holding_approx(QedPair(beta=beta, gamma=gamma), r)
            assert g_h >= g_b
            assert h_h >= h_b


class TestDimensionBlocking:
    def test_medical_unit_example(self):
        t0 = time.time()
        loads = derive_loads(MU_PARAMS)
        result = dimension_blocking(0.5, loads, gamma=1.0, mu=MU_PARAMS.mu)
        assert (result.cap.s, result.cap.n) == (4, 40)
        assert result.pair.beta == pytest.approx(0.3590, abs=5e-4)
        assert result.predicted.p_boundary == pytest.approx(0.0706, abs=5e-4)
        assert time.time() - t0 < 1.0

    def test_medical_unit_gamma_two(self):
        loads = derive_loads(MU_PARAMS)
        result = dimension_blocking(0.5, loads, gamma=2.0, mu=MU_PARAMS.mu)
        assert (result.cap.s, result.cap.n) == (5, 46)
        assert result.pair.beta == pytest.approx(0.4598, abs=5e-4)

    def test_beta_pinned(self):
        loads = derive_loads(MU_PARAMS)
        result = dimension_blocking(0.3, loads, beta=0.5, mu=MU_PARAMS.mu)
        g, _, _ = limits_blocking(0.5, result.pair.gamma, loads.r)
        assert g == pytest.approx(0.3, abs=1e-9)

    def test_infeasible_beta_pin(self):
        loads = derive_loads(MU_PARAMS)
        assert halfin_whitt_delay(2.0) < 0.9
        with pytest.raises(InfeasibleTarget):
            dimension_blocking(0.9, loads, beta=2.0, mu=MU_PARAMS.mu)

    def test_extreme_target_saturates_without_crash(self):
        # Delay targets near 1 push beta far negative; the tail product
        # saturates instead of overflowing and either outcome is acceptable.
        loads = derive_loads(MU_PARAMS)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            try:
                result = dimension_blocking(1.0 - 1e-12, loads, gamma=40.0)
                assert result.pair.beta < 0
            except InfeasibleTarget:
                pass

    def test_pin_validation(self):
        loads = derive_loads(MU_PARAMS)
        with pytest.raises(DomainError):
            dimension_blocking(0.5, loads)
        with pytest.raises(DomainError):
            dimension_blocking(0.5, loads, beta=1.0, gamma=1.0)
        with pytest.raises(DomainError):
            dimension_blocking(1.5, loads, gamma=1.0)


class TestDimensionHolding:
    def test_medical_unit_n_pinned(self):
        t0 = time.time()
        result = dimension_holding(0.5, MU_PARAMS, n=40)
        assert result.cap.n == 40
        assert result.cap.s == 5
        assert result.star_pair.beta == pytest.approx(0.3526, abs=5e-4)
        assert result.alpha == pytest.approx(0.1321, abs=5e-4)
        assert result.pair.beta == pytest.approx(0.4847, abs=5e-4)
        assert time.time() - t0 < 1.0

    def test_inflation_consistency(self):
        # The inflated pair must solve the alpha fixed point with the star
        # pair as its effective coordinates.
        result = dimension_holding(0.5, MU_PARAMS, n=40)
        r = derive_loads(MU_PARAMS).r
        sol = solve_alpha(result.pair, r)
        assert sol.alpha == pytest.approx(result.alpha, abs=1e-8)
        assert sol.effective_beta == pytest.approx(result.star_pair.beta, abs=1e-8)
        g_h, _ = holding_approx(result.pair, r, MU_PARAMS.mu)
        assert g_h == pytest.approx(0.5, abs=1e-8)

    def test_gamma_pinned(self):
        result = dimension_holding(0.3, MU_PARAMS, gamma=1.0)
        assert result.star_pair.gamma == pytest.approx(1.0)
        r = derive_loads(MU_PARAMS).r
        g, _, _ = limits_blocking(result.star_pair.beta, 1.0, r)
        assert g == pytest.approx(0.3, abs=1e-9)

    def test_beta_pinned(self):
        result = dimension_holding(0.2, MU_PARAMS, beta=1.0)
        r = derive_loads(MU_PARAMS).r
        g, _, _ = limits_blocking(1.0, result.star_pair.gamma, r)
        assert g == pytest.approx(0.2, abs=1e-9)

    def test_pin_validation(self):
        with pytest.raises(DomainError):
            dimension_holding(0.5, MU_PARAMS)
        with pytest.raises(DomainError):
            dimension_holding(0.5, MU_PARAMS, beta=1.0, n=40)
