import math

import pytest
from hypothesis import given, strategies as st

from erlangr import (
    CapacityPair,
    DomainError,
    ModelParams,
    QedPair,
    derive_loads,
    invert_capacity,
    qed_capacity,
)


class TestModelParams:
    def test_valid(self):
        params = ModelParams(lam=2.0, mu=1.0, delta=0.25, p=0.75)
        assert params.p == 0.75

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(lam=0.0, mu=1.0, delta=0.25, p=0.75),
            dict(lam=2.0, mu=-1.0, delta=0.25, p=0.75),
            dict(lam=2.0, mu=1.0, delta=0.0, p=0.75),
            dict(lam=2.0, mu=1.0, delta=0.25, p=1.0),
            dict(lam=2.0, mu=1.0, delta=0.25, p=-0.1),
            dict(lam=math.inf, mu=1.0, delta=0.25, p=0.5),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            ModelParams(**kwargs)

    def test_p_zero_allowed(self):
        ModelParams(lam=1.0, mu=1.0, delta=1.0, p=0.0)


class TestDerivedLoads:
    def test_reference_values(self):
        loads = derive_loads(ModelParams(lam=2.0, mu=1.0, delta=0.25, p=0.75))
        assert loads.r1 == pytest.approx(8.0)
        assert loads.r2 == pytest.approx(24.0)
        assert loads.r == pytest.approx(0.25)

    def test_rate_conversion_example(self):
        loads = derive_loads(ModelParams(lam=0.32, mu=4.0, delta=0.4, p=0.975))
        assert loads.r1 == pytest.approx(3.2)
        assert loads.r == pytest.approx(0.4 / (0.4 + 0.975 * 4.0))
        assert loads.r1 / loads.r == pytest.approx(34.4, abs=1e-10)

    def test_rho(self):
        loads = derive_loads(ModelParams(lam=2.0, mu=1.0, delta=0.25, p=0.75), s=10)
        assert loads.rho == pytest.approx(0.8)
        with pytest.raises(DomainError):
            derive_loads(ModelParams(lam=2.0, mu=1.0, delta=0.25, p=0.75), s=0)

    @given(
        lam=st.floats(0.01, 100),
        mu=st.floats(0.01, 100),
        delta=st.floats(0.01, 100),
        p=st.floats(0.0, 0.99),
    )
    def test_load_identity(self, lam, mu, delta, p):
        loads = derive_loads(ModelParams(lam=lam, mu=mu, delta=delta, p=p))
        assert loads.r1 / loads.r == pytest.approx(loads.r1 + loads.r2, rel=1e-9)
        assert 0 < loads.r <= 1


class TestQedCapacity:
    @pytest.mark.parametrize(
        "r1,r,beta,gamma,expected",
        [
            (3.2, 0.4 / (0.4 + 3.9), 0.359, 1.0, (4, 40)),
            (3.2, 0.4 / (0.4 + 3.9), 0.4598, 2.0, (5, 46)),
            (25.0, 0.25, 1.0, 1.0, (30, 110)),
            (250.0, 0.25, 1.0, 1.0, (266, 1032)),
            (250.0, 0.10, 2.0, 2.0, (282, 2600)),
        ],
    )
    def test_reference_pairs(self, r1, r, beta, gamma, expected):
        cap = qed_capacity(r1, r, QedPair(beta=beta, gamma=gamma))
        assert (cap.s, cap.n) == expected

    def test_clamped_at_one(self):
        cap = qed_capacity(0.01, 0.9, QedPair(beta=-5.0, gamma=-5.0))
        assert cap.s == 1 and cap.n == 1

    def test_invalid_domain(self):
        with pytest.raises(DomainError):
            qed_capacity(-1.0, 0.5, QedPair(beta=1.0, gamma=1.0))
        with pytest.raises(DomainError):
            qed_capacity(1.0, 1.5, QedPair(beta=1.0, gamma=1.0))

    @given(
        r1=st.floats(0.5, 500),
        r=st.floats(0.05, 0.95),
        beta=st.floats(-2, 4),
        gamma=st.floats(-2, 4),
    )
    def test_invert_roundtrip(self, r1, r, beta, gamma):
        cap = qed_capacity(r1, r, QedPair(beta=beta, gamma=gamma))
        back = invert_capacity(cap, r1, r)
        # Rounding moves the coefficients by at most one grid step.
        assert abs(back.beta - beta) <= 1.0 / math.sqrt(r1) + 1e-9 or cap.s == 1
        assert abs(back.gamma - gamma) <= 0.5 / math.sqrt(r1 / r) + 1e-9 or cap.n == 1

    def test_invert_exact(self):
        pair = invert_capacity(CapacityPair(s=30, n=110), 25.0, 0.25)
        assert pair.beta == pytest.approx(1.0)
        assert pair.gamma == pytest.approx(1.0)


class TestCapacityPair:
    def test_invalid(self):
        with pytest.raises(DomainError):
            CapacityPair(s=0, n=5)
        with pytest.raises(DomainError):
            CapacityPair(s=2, n=0)

    def test_s_may_exceed_n(self):
        # Permitted (the extra servers simply sit idle); the CLI warns.
        CapacityPair(s=5, n=3)


class TestQedPair:
    def test_nonfinite_rejected(self):
        with pytest.raises(DomainError):
            QedPair(beta=math.nan, gamma=1.0)
        with pytest.raises(DomainError):
            QedPair(beta=1.0, gamma=math.inf)
