"""Model primitives: parameters, offered loads, and square-root capacity rules.

The system is a two-station service network. Customers arrive at rate ``lam``
and require service from one of ``s`` servers at rate ``mu``. After each
service they return for another round with probability ``p``, first spending
an exponential "content" period at rate ``delta`` in an infinite-server
station. At most ``n`` customers may be inside the facility (in service,
waiting for a server, or content) at any time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import DomainError


@dataclass(frozen=True)
class ModelParams:
    """Primitive rates of the service network.

    lam: external arrival rate, lam > 0.
    mu: service rate per server, mu > 0.
    delta: content-phase completion rate, delta > 0.
    p: return probability after a service, 0 <= p < 1.
    """

    lam: float
    mu: float
    delta: float
    p: float

    def __post_init__(self):
        for name in ("lam", "mu", "delta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and positive, got {value!r}")
        if not (0.0 <= self.p < 1.0):
            raise DomainError(f"p must satisfy 0 <= p < 1, got {self.p!r}")


@dataclass(frozen=True)
class DerivedLoads:
    """Offered loads implied by the primitive rates.

    r1: offered load at the servers, lam / ((1 - p) mu).
    r2: offered load at the content station, p lam / ((1 - p) delta).
    r: long-run fraction of in-facility time spent needy, delta / (delta + p mu).
    rho: server utilization r1 / s when a server count was supplied.
    """

    r1: float
    r2: float
    r: float
    rho: Optional[float] = None


@dataclass(frozen=True)
class QedPair:
    """Square-root staffing coefficients (beta for servers, gamma for capacity)."""

    beta: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.beta) and math.isfinite(self.gamma)):
            raise DomainError(f"beta and gamma must be finite, got {self!r}")


@dataclass(frozen=True)
class CapacityPair:
    """Integer capacity decision: s servers and n in-facility slots."""

    s: int
    n: int

    def __post_init__(self):
        if not (isinstance(self.s, int) and isinstance(self.n, int)):
            raise DomainError(f"s and n must be integers, got {self!r}")
        if self.s < 1 or self.n < 1:
            raise DomainError(f"s and n must be at least 1, got {self!r}")


@dataclass(frozen=True)
class PerformanceReport:
    """Stationary performance measures shared by the exact and simulated models.

    p_delay: probability a service request waits for a server.
    p_boundary: probability the facility census is at capacity (the chance an
        arrival is blocked, or held outside, depending on the model).
    e_wait: expected in-facility wait for a server per service request.
    e_holding_queue: expected number of customers held outside the facility
        (zero for the blocking model).
    rho_s: server utilization.
    rho_n: facility (bed) utilization.
    """

    p_delay: float
    p_boundary: float
    e_wait: float
    e_holding_queue: float
    rho_s: float
    rho_n: float


def derive_loads(params: ModelParams, s: Optional[int] = None) -> DerivedLoads:
    """Compute offered loads r1, r2, the needy-time fraction r, and optionally rho.

    The identity r1 / r == r1 + r2 holds exactly in real arithmetic and ties
    the per-station loads to the total in-facility load.
    """
    q = 1.0 - params.p
    r1 = params.lam / (q * params.mu)
    r2 = params.p * params.lam / (q * params.delta)
    r = params.delta / (params.delta + params.p * params.mu)
    rho = None
    if s is not None:
        if s < 1:
            raise DomainError(f"s must be at least 1, got {s!r}")
        rho = r1 / s
    return DerivedLoads(r1=r1, r2=r2, r=r, rho=rho)


def qed_capacity(r1: float, r: float, pair: QedPair) -> CapacityPair:
    """Map square-root coefficients to integer capacity.

    s = ceil(r1 + beta sqrt(r1)) (conservative on servers) and
    n = round(r1/r + gamma sqrt(r1/r)) (nearest integer, half up),
    each clamped below at 1.
    """
    if not (r1 > 0):
        raise DomainError(f"r1 must be positive, got {r1!r}")
    if not (0 < r <= 1):
        raise DomainError(f"r must lie in (0, 1], got {r!r}")
    s = max(1, math.ceil(r1 + pair.beta * math.sqrt(r1)))
    total = r1 / r
    n = max(1, math.floor(total + pair.gamma * math.sqrt(total) + 0.5))
    return CapacityPair(s=s, n=n)


def invert_capacity(cap: CapacityPair, r1: float, r: float) -> QedPair:
    """Recover the (real-valued) square-root coefficients of a capacity pair.

    beta = (s - r1) / sqrt(r1) and gamma = (n - r1/r) / sqrt(r1/r). Composing
    with qed_capacity is not an exact inverse because of integer rounding.
    """
    if not (r1 > 0):
        raise DomainError(f"r1 must be positive, got {r1!r}")
    if not (0 < r <= 1):
        raise DomainError(f"r must lie in (0, 1], got {r!r}")
    total = r1 / r
    beta = (cap.s - r1) / math.sqrt(r1)
    gamma = (cap.n - total) / math.sqrt(total)
    return QedPair(beta=beta, gamma=gamma)
