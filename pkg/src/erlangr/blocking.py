"""Exact stationary analysis of the blocking model.

The state is (j, k): j customers needy (in service or waiting inside the
facility) and k content, with j + k <= n. The chain has the product form

    pi(j, k) = pi0 * r1^j * r2^k / (kappa(j) * k!)

with kappa(j) = j! for j <= s and s! * s^(j-s) above. Everything is
evaluated in log space so large n poses no overflow or underflow problem;
probabilities are exponentiated relative to the largest log weight.
"""
from __future__ import annotations

import math
from typing import IO, Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from .model import CapacityPair, ModelParams, PerformanceReport, derive_loads


class BlockingDistribution:
    """Normalized stationary law over {(j, k): j + k <= n}.

    Rows (fixed j) are generated on demand from the stored log weights, so
    memory stays O(n) even for n in the thousands; a dense matrix is only
    materialized by probs() when explicitly requested.
    """

    def __init__(self, params: ModelParams, cap: CapacityPair):
        self.params = params
        self.s = cap.s
        self.n = cap.n
        loads = derive_loads(params)
        self._log_r1 = math.log(loads.r1)
        # r2 == 0 when p == 0: the content column collapses to k == 0.
        self._log_r2 = math.log(loads.r2) if loads.r2 > 0 else -math.inf
        j = np.arange(self.n + 1)
        log_kappa = np.where(
            j <= self.s,
            gammaln(j + 1.0),
            gammaln(self.s + 1.0) + (j - self.s) * math.log(self.s),
        )
        self._row_base = j * self._log_r1 - log_kappa
        # k log(r2) with the k == 0 term pinned to 0 so r2 == 0 stays finite.
        k = np.arange(self.n + 1)
        k_term = np.zeros(self.n + 1)
        if self._log_r2 == -math.inf:
            k_term[1:] = -math.inf
        else:
            k_term[1:] = k[1:] * self._log_r2
        self._k_weights = k_term - gammaln(k + 1.0)
        self._row_logsum = np.array(
            [logsumexp(self._row_base[jj] + self._k_weights[: self.n - jj + 1]) for jj in range(self.n + 1)]
        )
        self._log_z = logsumexp(self._row_logsum)

    def log_row(self, j: int) -> np.ndarray:
        """Log probabilities of (j, k) for k = 0..n-j."""
        return self._row_base[j] + self._k_weights[: self.n - j + 1] - self._log_z

    def row(self, j: int) -> np.ndarray:
        return np.exp(self.log_row(j))

    def needy_marginal(self) -> np.ndarray:
        """P(j needy customers), j = 0..n."""
        return np.exp(self._row_logsum - self._log_z)

    def boundary_probability(self) -> float:
        """P(j + k == n), the census-full probability seen by arrivals."""
        diag = np.array([self._row_base[j] + self._k_weights[self.n - j] for j in range(self.n + 1)])
        return float(np.exp(logsumexp(diag) - self._log_z))

    def total_mass(self) -> float:
        return float(np.exp(logsumexp(self._row_logsum) - self._log_z))

    def probs(self) -> np.ndarray:
        """Dense (n+1) x (n+1) matrix of probabilities; 0 outside j + k <= n."""
        out = np.zeros((self.n + 1, self.n + 1))
        for j in range(self.n + 1):
            out[j, : self.n - j + 1] = self.row(j)
        return out

    def export_csv(self, fp: IO[str]) -> None:
        fp.write("j,k,prob\n")
        for j in range(self.n + 1):
            row = self.row(j)
            for k in range(self.n - j + 1):
                fp.write(f"{j},{k},{row[k]:.16e}\n")


def stationary_blocking(params: ModelParams, cap: CapacityPair) -> BlockingDistribution:
    """Stationary distribution of the blocking model (always stable)."""
    return BlockingDistribution(params, cap)


def perf_blocking(dist: BlockingDistribution, arrival_theorem: bool = True) -> PerformanceReport:
    """Stationary performance measures of the blocking model.

    p_boundary is the blocking probability (census at capacity). With
    arrival_theorem set (the default, exact for delay and wait), p_delay and
    e_wait are read from the population-(n-1) law an admitted arrival sees;
    otherwise from the same-population law.
    """
    s, n, params = dist.s, dist.n, dist.params
    marginal = dist.needy_marginal()
    j = np.arange(n + 1)
    rho_s = float(np.sum(np.minimum(j, s) * marginal)) / s
    e_census = float(np.sum(j * marginal)) + _mean_content(dist)
    rho_n = e_census / n

    if arrival_theorem:
        if n >= 2:
            seen = BlockingDistribution(params, CapacityPair(s=s, n=n - 1))
            seen_marginal = seen.needy_marginal()
        else:
            # An admitted arrival sees an empty facility; it never waits.
            seen_marginal = np.array([1.0])
    else:
        seen_marginal = marginal
    jj = np.arange(len(seen_marginal))
    delay_mask = jj >= s
    p_delay = float(np.sum(seen_marginal[delay_mask]))
    e_wait = float(np.sum((jj[delay_mask] - s + 1) * seen_marginal[delay_mask])) / (s * params.mu)

    return PerformanceReport(
        p_delay=p_delay,
        p_boundary=dist.boundary_probability(),
        e_wait=e_wait,
        e_holding_queue=0.0,
        rho_s=rho_s,
        rho_n=rho_n,
    )


def _mean_content(dist: BlockingDistribution) -> float:
    total = 0.0
    for j in range(dist.n + 1):
        row = dist.row(j)
        total += float(np.dot(np.arange(dist.n - j + 1), row))
    return total
