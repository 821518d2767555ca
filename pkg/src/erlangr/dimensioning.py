"""Fixed-point heuristic for the holding model and capacity dimensioning.

The holding model admits every arrival eventually, so the volume that the
blocking model would reject comes back as extra load. On the square-root
scale that extra load is a constant alpha solving

    alpha = f_b(beta - alpha, gamma - alpha / sqrt(r))

and holding-model performance is approximated by the blocking limits at the
effective pair (beta - alpha, gamma - alpha / sqrt(r)).

Dimensioning picks (beta, gamma) so the (approximate) delay probability hits
a target epsilon, with one coordinate pinned by the caller, then maps to
integer capacity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import DomainError, InfeasibleTarget, NoConvergence
from .model import (
    CapacityPair,
    DerivedLoads,
    ModelParams,
    PerformanceReport,
    QedPair,
    derive_loads,
    invert_capacity,
    qed_capacity,
)
from .qed import halfin_whitt_delay, limits_blocking

_BRACKET_LIMIT = 60.0


class Infeasible(InfeasibleTarget):
    """The effective bed hedge would be driven nonpositive."""


@dataclass(frozen=True)
class FixedPointSolution:
    """Solution of the re-admitted-volume fixed point."""

    alpha: float
    effective_beta: float
    effective_gamma: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class DimensioningResult:
    """Capacity decision plus the hedges that produced it.

    pair holds the final (beta, gamma); star_pair the pre-adjustment values
    (identical to pair for the blocking model, strictly smaller for holding).
    predicted is limit-based, not exact.
    """

    pair: QedPair
    star_pair: QedPair
    cap: CapacityPair
    predicted: PerformanceReport
    alpha: float = 0.0


def _f_b(beta: float, gamma: float, r: float) -> float:
    return limits_blocking(beta, gamma, r)[1]


def solve_alpha(pair: QedPair, r: float, damping: float = 0.5,
                tol: float = 1e-10, max_iter: int = 10_000) -> FixedPointSolution:
    """Damped fixed-point iteration for alpha, started from 0."""
    if not (0.0 < r < 1.0):
        raise DomainError(f"r must lie in (0, 1), got {r!r}")
    beta, gamma = pair.beta, pair.gamma
    sqrt_r = math.sqrt(r)
    alpha = 0.0
    for iteration in range(1, max_iter + 1):
        eff_gamma = gamma - alpha / sqrt_r
        if eff_gamma <= 0.0:
            raise Infeasible(
                f"effective bed hedge nonpositive: gamma - alpha/sqrt(r) = {eff_gamma:.6g}"
            )
        target = _f_b(beta - alpha, eff_gamma, r)
        residual = abs(alpha - target)
        if residual < tol:
            return FixedPointSolution(
                alpha=alpha,
                effective_beta=beta - alpha,
                effective_gamma=eff_gamma,
                iterations=iteration,
                residual=residual,
            )
        alpha = (1.0 - damping) * alpha + damping * target
    raise NoConvergence(
        f"alpha iteration did not reach tol={tol} in {max_iter} iterations",
        iterations=max_iter,
        residual=residual,
    )


def holding_approx(pair: QedPair, r: float, mu: float = 1.0) -> tuple[float, float]:
    """(g_h, h_h): blocking limits evaluated at the effective pair."""
    sol = solve_alpha(pair, r)
    g, _, h = limits_blocking(sol.effective_beta, sol.effective_gamma, r, mu)
    return g, h


def _root_find(func, fixed_is_beta: bool, epsilon: float) -> float:
    """Root of func on the free coordinate with a geometrically expanded bracket.

    func is decreasing in beta and increasing in gamma; exhaustion of the
    bracket means the target is unreachable.
    """
    lo, hi = -5.0, 5.0
    while hi <= _BRACKET_LIMIT:
        try:
            f_lo, f_hi = func(lo), func(hi)
        except Infeasible:
            # Shrink from below: very negative gamma candidates are infeasible.
            lo = lo / 2.0 + 1.0
            if hi - lo < 1e-6:
                break
            continue
        if f_lo == 0.0:
            return lo
        if f_hi == 0.0:
            return hi
        if f_lo * f_hi < 0.0:
            return brentq(func, lo, hi, xtol=1e-12)
        lo *= 2.0
        hi *= 2.0
    raise InfeasibleTarget(
        f"no {'gamma' if fixed_is_beta else 'beta'} reaches target delay {epsilon}"
    )


def _predicted_report(g: float, f: float, h: float, loads: DerivedLoads,
                      cap: CapacityPair, e_holding: float = 0.0) -> PerformanceReport:
    sqrt_r1 = math.sqrt(loads.r1)
    return PerformanceReport(
        p_delay=g,
        p_boundary=f / sqrt_r1,
        e_wait=h / sqrt_r1,
        e_holding_queue=e_holding,
        rho_s=min(1.0, loads.r1 / cap.s),
        rho_n=min(1.0, (loads.r1 / loads.r) / cap.n),
    )


def dimension_blocking(epsilon: float, loads: DerivedLoads, *,
                       beta: float | None = None, gamma: float | None = None,
                       mu: float = 1.0) -> DimensioningResult:
    """Capacity for the blocking model hitting delay target epsilon.

    Exactly one of beta, gamma must be pinned; the other is solved from
    g_b(beta, gamma, r) = epsilon.
    """
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"target delay must lie in (0, 1), got {epsilon!r}")
    if (beta is None) == (gamma is None):
        raise DomainError("exactly one of beta, gamma must be pinned")
    r = loads.r
    if beta is not None:
        if beta > 0 and epsilon >= halfin_whitt_delay(beta):
            raise InfeasibleTarget(
                f"target {epsilon} exceeds the infinite-capacity delay bound for beta={beta}"
            )
        func = lambda gam: limits_blocking(beta, gam, r)[0] - epsilon
        gamma = _root_find(func, True, epsilon)
    else:
        func = lambda bet: limits_blocking(bet, gamma, r)[0] - epsilon
        beta = _root_find(func, False, epsilon)
    pair = QedPair(beta=beta, gamma=gamma)
    cap = qed_capacity(loads.r1, r, pair)
    g, f, h = limits_blocking(beta, gamma, r, mu)
    return DimensioningResult(
        pair=pair,
        star_pair=pair,
        cap=cap,
        predicted=_predicted_report(g, f, h, loads, cap),
    )


def dimension_holding(epsilon: float, params: ModelParams, *,
                      beta: float | None = None, gamma: float | None = None,
                      n: int | None = None) -> DimensioningResult:
    """Capacity for the holding model hitting approximate delay target epsilon.

    Pins one pre-inflation coordinate (beta* or gamma* directly, or gamma*
    via a fixed bed count n), solves g_b(beta*, gamma*) = epsilon on the
    free coordinate, then inflates both hedges by the re-admitted volume
    alpha = f_b(beta*, gamma*):
        beta = beta* + alpha,  gamma = gamma* + alpha / sqrt(r).
    The inflated pair is self-consistent with the alpha fixed point, so the
    holding-model delay approximation at (beta, gamma) equals epsilon.
    """
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"target delay must lie in (0, 1), got {epsilon!r}")
    loads = derive_loads(params)
    r = loads.r
    pinned = sum(x is not None for x in (beta, gamma, n))
    if pinned != 1:
        raise DomainError("exactly one of beta, gamma, n must be pinned")
    if n is not None:
        gamma = invert_capacity(CapacityPair(s=1, n=n), loads.r1, r).gamma

    if beta is not None:
        if beta > 0 and epsilon >= halfin_whitt_delay(beta):
            raise InfeasibleTarget(
                f"target {epsilon} exceeds the infinite-capacity delay bound for beta={beta}"
            )
        func = lambda gam: limits_blocking(beta, gam, r)[0] - epsilon
        gamma = _root_find(func, True, epsilon)
    else:
        func = lambda bet: limits_blocking(bet, gamma, r)[0] - epsilon
        beta = _root_find(func, False, epsilon)

    star = QedPair(beta=beta, gamma=gamma)
    g, alpha, h = limits_blocking(star.beta, star.gamma, r, params.mu)
    pair = QedPair(beta=star.beta + alpha, gamma=star.gamma + alpha / math.sqrt(r))
    cap = qed_capacity(loads.r1, r, pair)
    if n is not None:
        cap = CapacityPair(s=cap.s, n=n)
    return DimensioningResult(
        pair=pair,
        star_pair=star,
        cap=cap,
        predicted=_predicted_report(g, alpha, h, loads, cap),
        alpha=alpha,
    )
