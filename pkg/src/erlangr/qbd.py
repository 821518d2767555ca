"""Matrix-geometric analysis of the holding model.

States are (i, j): i customers admitted or waiting outside (the level) and
j of the admitted ones needy. Levels 0..n-1 are boundary levels (census
below capacity, nobody held outside); from level n upward the chain repeats
with blocks (A0, A1, A2) and the tail is matrix-geometric,
pi_{n+i} = pi_n G^i, where G is the minimal nonnegative solution of
A0 + G A1 + G^2 A2 = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, List

import numpy as np
from scipy.sparse import csc_matrix, lil_matrix
from scipy.sparse.linalg import splu
from scipy.special import gammaln, logsumexp

from .errors import NoConvergence, NotStable, SingularSystem
from .model import CapacityPair, ModelParams, PerformanceReport, derive_loads


def _nu(j: np.ndarray | int, s: int) -> np.ndarray | int:
    return np.minimum(j, s)


@dataclass
class QbdBlocks:
    """Generator blocks of the level process."""

    params: ModelParams
    s: int
    n: int
    boundary_diag: List[np.ndarray] = field(repr=False, default_factory=list)
    boundary_up: List[np.ndarray] = field(repr=False, default_factory=list)
    boundary_down: List[np.ndarray] = field(repr=False, default_factory=list)
    a0: np.ndarray = field(repr=False, default=None)
    a1: np.ndarray = field(repr=False, default=None)
    a2: np.ndarray = field(repr=False, default=None)

    def export_csv(self, name: str, fp: IO[str]) -> None:
        """Dump one block ('a0', 'a1', 'a2', or 'diag:<level>') as row,col,value."""
        if name.startswith("diag:"):
            mat = self.boundary_diag[int(name.split(":", 1)[1])]
        else:
            mat = {"a0": self.a0, "a1": self.a1, "a2": self.a2}[name]
        fp.write("row,col,value\n")
        rows, cols = np.nonzero(mat)
        for rr, cc in zip(rows, cols):
            fp.write(f"{rr},{cc},{mat[rr, cc]:.16e}\n")


@dataclass
class RateMatrixG:
    """Minimal nonnegative solution of A0 + G A1 + G^2 A2 = 0."""

    g: np.ndarray = field(repr=False)
    iterations: int
    residual: float

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.g))))

    def export_csv(self, fp: IO[str]) -> None:
        fp.write("row,col,value\n")
        rows, cols = np.nonzero(self.g)
        for rr, cc in zip(rows, cols):
            fp.write(f"{rr},{cc},{self.g[rr, cc]:.16e}\n")


@dataclass
class HoldingDistribution:
    """Boundary vectors pi_0..pi_n plus the matrix-geometric tail."""

    params: ModelParams
    s: int
    n: int
    boundary: List[np.ndarray] = field(repr=False, default_factory=list)
    g: RateMatrixG = None

    def tail_level(self, i: int) -> np.ndarray:
        """pi_{n+i} for i >= 0."""
        vec = self.boundary[self.n]
        return vec @ np.linalg.matrix_power(self.g.g, i)

    def total_mass(self) -> float:
        mass = sum(float(v.sum()) for v in self.boundary[: self.n])
        eye = np.eye(self.n + 1)
        mass += float((self.boundary[self.n] @ np.linalg.inv(eye - self.g.g)).sum())
        return mass

    def needy_marginal(self) -> np.ndarray:
        """P(j needy), j = 0..n, summed over all levels."""
        out = np.zeros(self.n + 1)
        for i in range(self.n):
            out[: i + 1] += self.boundary[i]
        eye = np.eye(self.n + 1)
        out += self.boundary[self.n] @ np.linalg.inv(eye - self.g.g)
        return out

    def level_marginal(self, max_level: int) -> np.ndarray:
        """P(level == i) for i = 0..max_level."""
        out = np.zeros(max_level + 1)
        for i in range(min(self.n, max_level) + 1):
            if i < self.n:
                out[i] = float(self.boundary[i].sum())
        vec = self.boundary[self.n]
        for i in range(self.n, max_level + 1):
            out[i] = float(vec.sum())
            vec = vec @ self.g.g
        return out

    def export_csv(self, fp: IO[str], max_level: int | None = None) -> None:
        fp.write("level,j,prob\n")
        top = self.n if max_level is None else max_level
        for i in range(min(self.n, top) + 1):
            vec = self.boundary[i] if i < self.n else self.boundary[self.n]
            for j, v in enumerate(vec):
                fp.write(f"{i},{j},{v:.16e}\n")
        vec = self.boundary[self.n]
        for i in range(self.n + 1, top + 1):
            vec = vec @ self.g.g
            for j, v in enumerate(vec):
                fp.write(f"{i},{j},{v:.16e}\n")


def rho_max(params: ModelParams, cap: CapacityPair) -> tuple[float, float]:
    """Stability boundary of the holding model.

    Returns (rho_max, r_max) where the model is stable iff
    lam / ((1-p) mu s) < rho_max, equivalently r1 < r_max = s * rho_max.
    rho_max is the server utilization of the closed ward on n customers,
    evaluated in log space so large n and s pose no overflow problem.
    """
    s, n = cap.s, cap.n
    if params.p == 0.0:
        # No returns: the closed-ward servers are saturated, utilization 1.
        return 1.0, float(s)
    log_b = math.log(params.delta) - math.log(params.p * params.mu)
    i = np.arange(n + 1)
    log_choose = gammaln(n + 1.0) - gammaln(i + 1.0) - gammaln(n - i + 1.0)
    log_w = log_choose + i * log_b
    high = i > s
    log_w = np.where(
        high,
        log_w + gammaln(i + 1.0) - gammaln(s + 1.0) + (s - i) * math.log(s),
        log_w,
    )
    # Utilization weight min(i, s)/s per closed-ward state.
    util = np.minimum(i, s) / s
    log_den = logsumexp(log_w)
    positive = util > 0
    log_num = logsumexp(log_w[positive] + np.log(util[positive]))
    value = float(np.exp(log_num - log_den))
    return value, s * value


def build_qbd_blocks(params: ModelParams, cap: CapacityPair) -> QbdBlocks:
    """Generator blocks: boundary levels 0..n and the repeating (A0, A1, A2)."""
    lam, mu, delta, p = params.lam, params.mu, params.delta, params.p
    s, n = cap.s, cap.n
    blocks = QbdBlocks(params=params, s=s, n=n)

    for i in range(n + 1):
        j = np.arange(i + 1)
        nu = np.minimum(j, s) * mu
        content = (i - j) * delta
        diag = np.diag(-(lam + nu + content))
        if i >= 1:
            diag += np.diag(content[:-1], 1) + np.diag(p * nu[1:], -1)
        blocks.boundary_diag.append(diag)
        if i < n:
            up = np.zeros((i + 1, i + 2))
            up[j, j + 1] = lam
            blocks.boundary_up.append(up)
        if i >= 1:
            down = np.zeros((i + 1, i))
            down[j[1:], j[1:] - 1] = (1.0 - p) * nu[1:]
            blocks.boundary_down.append(down)

    j = np.arange(n + 1)
    nu = np.minimum(j, s) * mu
    content = (n - j) * delta
    blocks.a0 = lam * np.eye(n + 1)
    blocks.a1 = (
        np.diag(-(lam + nu + content))
        + np.diag(content[:-1], 1)
        + np.diag(p * nu[1:], -1)
    )
    blocks.a2 = np.diag((1.0 - p) * nu)
    return blocks


def solve_rate_matrix(
    blocks: QbdBlocks,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
    check_stability: bool = True,
) -> RateMatrixG:
    """Functional iteration G <- -(A0 + G^2 A2) A1^{-1} from G = 0.

    Iterates are monotone nondecreasing toward the minimal nonnegative
    solution. Convergence slows near the stability boundary; the closed-form
    stability check fires first unless explicitly disabled.
    """
    params = blocks.params
    cap = CapacityPair(s=blocks.s, n=blocks.n)
    if check_stability:
        bound, _ = rho_max(params, cap)
        rho = derive_loads(params, s=blocks.s).rho
        if rho >= bound:
            raise NotStable(
                f"holding model unstable: rho={rho:.6g} >= rho_max={bound:.6g}",
                rho=rho,
                rho_max=bound,
            )
    neg_inv_a1 = -np.linalg.inv(blocks.a1)
    a2_diag = np.diag(blocks.a2).copy()
    g = np.zeros_like(blocks.a0)
    for iteration in range(1, max_iter + 1):
        g_next = (blocks.a0 + (g @ g) * a2_diag) @ neg_inv_a1
        diff = float(np.max(np.abs(g_next - g)))
        g = g_next
        if diff < tol:
            residual = float(
                np.max(np.abs(blocks.a0 + g @ blocks.a1 + (g @ g) * a2_diag).sum(axis=1))
            )
            return RateMatrixG(g=g, iterations=iteration, residual=residual)
    raise NoConvergence(
        f"rate-matrix iteration did not reach tol={tol} in {max_iter} iterations",
        iterations=max_iter,
        residual=float(np.max(np.abs(g - (blocks.a0 + (g @ g) * a2_diag) @ neg_inv_a1))),
    )


def stationary_holding(blocks: QbdBlocks, g: RateMatrixG) -> HoldingDistribution:
    """Solve the boundary balance equations plus normalization.

    Unknowns are pi_0..pi_n stacked (dimension sum of level sizes). One
    balance equation is replaced by the normalization row; the sparse system
    is solved by LU factorization.
    """
    n = blocks.n
    sizes = [i + 1 for i in range(n + 1)]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    dim = int(offsets[-1])

    eye = np.eye(n + 1)
    try:
        inv_ig = np.linalg.inv(eye - g.g)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"I - G is singular: {exc}") from exc

    # Balance equations in columns: for target level i, contributions from
    # pi_{i-1} B_{i-1,i}, pi_i B_ii, pi_{i+1} B_{i+1,i}; at the top level the
    # diagonal block is B_nn + G A2 and there is no block from above.
    # Assemble transposed (A^T x = b) for the sparse column solver.
    mat = lil_matrix((dim, dim))

    def put(row_level: int, col_level: int, block: np.ndarray) -> None:
        r0, c0 = offsets[row_level], offsets[col_level]
        mat[c0 : c0 + block.shape[1], r0 : r0 + block.shape[0]] += block.T

    for i in range(n + 1):
        if i < n:
            put(i, i, blocks.boundary_diag[i])
        else:
            put(n, n, blocks.boundary_diag[n] + g.g @ blocks.a2)
        if i < n:
            put(i, i + 1, blocks.boundary_up[i])
        if i >= 1:
            put(i, i - 1, blocks.boundary_down[i - 1])

    # Replace the first equation with normalization:
    # sum_{i<n} pi_i 1 + pi_n (I-G)^{-1} 1 = 1.
    norm_row = np.ones(dim)
    norm_row[offsets[n] :] = inv_ig.sum(axis=1)
    mat[0, :] = norm_row
    rhs = np.zeros(dim)
    rhs[0] = 1.0

    try:
        lu = splu(csc_matrix(mat))
        x = lu.solve(rhs)
    except RuntimeError as exc:
        raise SingularSystem(f"boundary system factorization failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("boundary solve produced non-finite entries")
    # Clip the tiny negative round-off the replaced equation can leave.
    x = np.where(np.abs(x) < 1e-14, np.abs(x), x)
    if np.any(x < -1e-9):
        raise SingularSystem(f"boundary solve produced negative mass {x.min():.3e}")
    x = np.clip(x, 0.0, None)

    boundary = [x[offsets[i] : offsets[i + 1]].copy() for i in range(n + 1)]
    return HoldingDistribution(params=blocks.params, s=blocks.s, n=n, boundary=boundary, g=g)


def perf_holding(dist: HoldingDistribution) -> PerformanceReport:
    """Stationary performance measures of the holding model."""
    s, n = dist.s, dist.n
    params = dist.params
    eye = np.eye(n + 1)
    inv_ig = np.linalg.inv(eye - dist.g.g)
    pi_n = dist.boundary[n]

    marginal = dist.needy_marginal()
    j = np.arange(n + 1)
    delay_mask = j >= s
    p_delay = float(marginal[delay_mask].sum())
    e_wait = float(((j[delay_mask] - s + 1) * marginal[delay_mask]).sum()) / (s * params.mu)
    p_boundary = float((pi_n @ inv_ig).sum())
    e_holding = float((pi_n @ (dist.g.g @ inv_ig @ inv_ig)).sum())
    rho_s = float((np.minimum(j, s) * marginal).sum()) / s
    e_census = sum(i * float(dist.boundary[i].sum()) for i in range(n))
    e_census += n * p_boundary
    rho_n = e_census / n

    return PerformanceReport(
        p_delay=p_delay,
        p_boundary=p_boundary,
        e_wait=e_wait,
        e_holding_queue=e_holding,
        rho_s=rho_s,
        rho_n=rho_n,
    )
