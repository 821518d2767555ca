"""Many-server diffusion limits for the blocking model.

For capacity scaled as s = r1 + beta sqrt(r1), n = r1/r + gamma sqrt(r1/r),
the delay probability converges to a constant g(beta, gamma, r), while the
blocking probability and the expected wait vanish like 1/sqrt(r1):

    P(block) ~ f(beta, gamma, r) / sqrt(r1)
    E[W]     ~ h(beta, gamma, r) / sqrt(r1)

This module evaluates g, f and h, together with two classical benchmarks:
the pure delay (infinite capacity) limit and the pure loss (r = 1) limit.

All tail products of the form exp(x^2/2) * Phi(y) are evaluated in log space
through scipy.special.log_ndtr so the formulas stay accurate for large
arguments instead of overflowing or cancelling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.integrate import quad
from scipy.special import log_ndtr, ndtr

from .errors import DomainError

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# Below this magnitude the beta != 0 formulas lose all precision to
# cancellation, so the exact beta == 0 branch is used instead.
_BETA_SWITCH = 1e-8


def _phi(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT_2PI


@dataclass(frozen=True)
class LimitInputs:
    """Scaled coefficients entering the limit formulas.

    eta and omega are the capacity slack seen from the server and the
    content station respectively:
        eta   = (gamma - beta sqrt(r)) / sqrt(1 - r)
        omega = (gamma - beta / sqrt(r)) / sqrt(1 - r)
    """

    beta: float
    gamma: float
    r: float
    eta: float
    omega: float

    @classmethod
    def from_coefficients(cls, beta: float, gamma: float, r: float) -> "LimitInputs":
        if not (0.0 < r < 1.0):
            raise DomainError(f"r must lie in (0, 1), got {r!r}")
        if not (math.isfinite(beta) and math.isfinite(gamma)):
            raise DomainError(f"beta and gamma must be finite, got {beta!r}, {gamma!r}")
        root = math.sqrt(1.0 - r)
        eta = (gamma - beta * math.sqrt(r)) / root
        omega = (gamma - beta / math.sqrt(r)) / root
        return cls(beta=beta, gamma=gamma, r=r, eta=eta, omega=omega)


def gaussian_mix_integral(beta: float, gamma: float, r: float) -> float:
    """Integral of Phi((gamma - t sqrt(r)) / sqrt(1 - r)) dPhi(t) over t <= beta.

    Evaluated by adaptive quadrature to absolute tolerance 1e-12; the lower
    tail is truncated where the Gaussian weight is negligible.
    """
    if not (0.0 < r < 1.0):
        raise DomainError(f"r must lie in (0, 1), got {r!r}")
    sr = math.sqrt(r)
    omr = math.sqrt(1.0 - r)

    def integrand(t: float) -> float:
        return ndtr((gamma - t * sr) / omr) * _phi(t)

    lower = min(-10.0, beta - 10.0)
    value, _ = quad(integrand, lower, beta, epsabs=1e-13, epsrel=1e-12, limit=400)
    return value


def _stable_tail_product(beta: float, eta: float, omega: float) -> float:
    """phi(sqrt(beta^2 + eta^2)) * exp(omega^2 / 2) * Phi(omega), log-space.

    Saturates to inf for deeply negative beta (blocking-dominated regime)
    instead of raising, so callers can take the g -> 1 limit gracefully.
    """
    log_value = -_LOG_SQRT_2PI - 0.5 * (beta * beta + eta * eta) + 0.5 * omega * omega
    log_value += log_ndtr(omega)
    if log_value > 700.0:
        return math.inf
    return math.exp(log_value)


def limits_blocking(beta: float, gamma: float, r: float, mu: float = 1.0) -> tuple[float, float, float]:
    """Limiting (g, f, h) for the blocking model.

    g is the limiting delay probability, f the sqrt(r1)-scaled blocking
    probability, and h the sqrt(r1)-scaled expected wait (h carries the 1/mu
    time unit). beta and gamma may take any sign.
    """
    if not (mu > 0):
        raise DomainError(f"mu must be positive, got {mu!r}")
    inputs = LimitInputs.from_coefficients(beta, gamma, r)
    eta, omega = inputs.eta, inputs.omega
    if abs(beta) < _BETA_SWITCH:
        return _limits_blocking_beta0(gamma, r, mu, inputs)

    a_int = gaussian_mix_integral(beta, gamma, r)
    tail = _stable_tail_product(beta, eta, omega)
    phi_beta = _phi(beta)
    if math.isinf(tail):
        # Deep blocking regime (beta << 0): delay is certain and the scaled
        # blocking and wait grow without bound on this scale.
        return 1.0, math.inf, math.inf
    top = phi_beta * ndtr(eta) - tail
    b_term = top / beta

    g = 1.0 / (1.0 + a_int / b_term) if b_term != 0.0 else 1.0
    f_num = math.sqrt(r) * _phi(gamma) * ndtr(-omega * math.sqrt(r)) + tail
    denom = a_int + b_term
    f = f_num / denom
    h_num = (
        phi_beta * ndtr(eta) / (beta * beta)
        + (beta / r - gamma / math.sqrt(r) - 1.0 / beta) * tail / beta
        - math.sqrt((1.0 - r) / r) * phi_beta * _phi(eta) / beta
    )
    h = h_num / denom / mu
    return g, f, h


def _limits_blocking_beta0(gamma: float, r: float, mu: float, inputs: LimitInputs) -> tuple[float, float, float]:
    """Exact beta -> 0 limits, which the general formulas approach continuously."""
    eta, omega = inputs.eta, inputs.omega
    a_int = gaussian_mix_integral(0.0, gamma, r)
    slack = math.sqrt((1.0 - r) / r)
    b_term = slack * (eta * ndtr(eta) + _phi(eta)) / _SQRT_2PI

    g = 1.0 / (1.0 + a_int / b_term)
    f_num = math.sqrt(r) * _phi(gamma) * ndtr(-omega * math.sqrt(r)) + ndtr(eta) / _SQRT_2PI
    f = f_num / (a_int + b_term)
    # xi = r / (1 - r) is the content-to-needy time ratio entering the wait.
    xi = r / (1.0 - r)
    h_num = ((eta * eta + 1.0) * ndtr(eta) + eta * _phi(eta)) / xi
    h_den = _SQRT_2PI * a_int + (eta * ndtr(eta) + _phi(eta)) / math.sqrt(xi)
    h = 0.5 * h_num / h_den / mu
    return g, f, h


def halfin_whitt_delay(beta: float) -> float:
    """Limiting delay probability of the infinite-capacity many-server queue.

    An upper bound for the blocking-model g at every gamma; the bound is
    approached as gamma -> infinity.
    """
    if not (beta > 0):
        raise DomainError(f"beta must be positive, got {beta!r}")
    return 1.0 / (1.0 + beta * ndtr(beta) / _phi(beta))


def loss_model_limits(beta: float, gamma: float) -> tuple[float, float]:
    """Limiting (g, f) when customers never return (r = 1, pure loss regime).

    Requires gamma > beta so the facility is strictly larger than the server
    pool on the sqrt(r1) scale.
    """
    if not (gamma > beta):
        raise DomainError(f"gamma must exceed beta, got beta={beta!r}, gamma={gamma!r}")
    gap = 1.0 - math.exp(-beta * (gamma - beta))
    denom = gap + beta * ndtr(beta) / _phi(beta)
    g = gap / denom
    f = beta * math.exp(-beta * (gamma - beta)) / denom
    return g, f


def erlang_b_tail(gamma: float, r: float) -> float:
    """sqrt(r1)-scaled blocking of the pure loss system with n = r1/r + gamma sqrt(r1/r)."""
    if not (0.0 < r <= 1.0):
        raise DomainError(f"r must lie in (0, 1], got {r!r}")
    return math.sqrt(r) * _phi(gamma) / ndtr(gamma)
