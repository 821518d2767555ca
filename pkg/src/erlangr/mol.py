"""Time-varying offered load and square-root staffing schedules.

With a time-varying arrival rate, the offered loads of the unrestricted
system solve the linear ODE system

    dR1/dt = lam(t) + delta R2(t) - mu R1(t)
    dR2/dt = p mu R1(t) - delta R2(t)

and capacity is staffed against them interval by interval with the same
square-root hedges as in the stationary case.
"""
from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import IO, List, Optional

import numpy as np

from .errors import DomainError
from .model import ModelParams, QedPair, derive_loads


@dataclass(frozen=True)
class ArrivalProfile:
    """Piecewise-linear arrival rate over [0, T], optionally cycled with a period."""

    breakpoints: tuple
    rates: tuple
    period: Optional[float] = None

    def __post_init__(self):
        bp = tuple(float(x) for x in self.breakpoints)
        rt = tuple(float(x) for x in self.rates)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "rates", rt)
        if len(bp) != len(rt) or len(bp) < 2:
            raise DomainError("profile needs matching breakpoints and rates (>= 2 points)")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise DomainError("breakpoints must be strictly ascending")
        if any(x < 0 for x in rt):
            raise DomainError("rates must be nonnegative")
        if self.period is not None and self.period <= 0:
            raise DomainError("period must be positive")

    def rate(self, t: float) -> float:
        if self.period is not None:
            t = t % self.period
        bp, rt = self.breakpoints, self.rates
        if t <= bp[0]:
            return rt[0]
        if t >= bp[-1]:
            return rt[-1]
        i = bisect_right(bp, t) - 1
        frac = (t - bp[i]) / (bp[i + 1] - bp[i])
        return rt[i] + frac * (rt[i + 1] - rt[i])

    def max_rate(self) -> float:
        return max(self.rates)

    def mean_rate(self) -> float:
        """Time-average rate over the profile span (trapezoid of the linear pieces)."""
        bp, rt = self.breakpoints, self.rates
        area = sum(
            0.5 * (rt[i] + rt[i + 1]) * (bp[i + 1] - bp[i]) for i in range(len(bp) - 1)
        )
        return area / (bp[-1] - bp[0])

    @classmethod
    def from_json(cls, fp: IO[str]) -> "ArrivalProfile":
        data = json.load(fp)
        return cls(
            breakpoints=tuple(data["breakpoints"]),
            rates=tuple(data["rates"]),
            period=data.get("period"),
        )


@dataclass(frozen=True)
class LoadTrajectory:
    """Offered loads on a uniform time grid."""

    grid: np.ndarray = field(repr=False)
    r1_t: np.ndarray = field(repr=False)
    r2_t: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class StaffingSchedule:
    """Integer capacity per adjustment interval."""

    interval: float
    t_start: np.ndarray = field(repr=False)
    t_end: np.ndarray = field(repr=False)
    s_t: np.ndarray = field(repr=False)
    n_t: np.ndarray = field(repr=False)
    pair: QedPair = QedPair(beta=0.0, gamma=0.0)

    def export_csv(self, fp: IO[str]) -> None:
        fp.write("t_start,t_end,s,n\n")
        for a, b, sv, nv in zip(self.t_start, self.t_end, self.s_t, self.n_t):
            fp.write(f"{a:.10g},{b:.10g},{sv},{nv}\n")


def _ode_rhs(t: float, r1: float, r2: float, profile: ArrivalProfile, params: ModelParams):
    d1 = profile.rate(t) + params.delta * r2 - params.mu * r1
    d2 = params.p * params.mu * r1 - params.delta * r2
    return d1, d2


def integrate_offered_load(
    profile: ArrivalProfile,
    params: ModelParams,
    horizon: float,
    step: float = 0.01,
) -> LoadTrajectory:
    """Fixed-step RK4 integration of the offered-load ODEs over [0, horizon].

    Starts from the periodic steady state when the profile is periodic
    (three warm-up periods from the stationary loads at the mean rate),
    otherwise from the stationary loads at lam(0).
    """
    if not (step > 0):
        raise DomainError(f"step must be positive, got {step!r}")

    def stationary(lam0: float) -> tuple[float, float]:
        fake = ModelParams(lam=max(lam0, 1e-12), mu=params.mu, delta=params.delta, p=params.p)
        loads = derive_loads(fake)
        return loads.r1, loads.r2

    def rk4_advance(t0: float, r1: float, r2: float, span: float):
        steps = max(1, math.ceil(span / step))
        h = span / steps
        t_local = t0
        for _ in range(steps):
            k1 = _ode_rhs(t_local, r1, r2, profile, params)
            k2 = _ode_rhs(t_local + h / 2, r1 + h / 2 * k1[0], r2 + h / 2 * k1[1], profile, params)
            k3 = _ode_rhs(t_local + h / 2, r1 + h / 2 * k2[0], r2 + h / 2 * k2[1], profile, params)
            k4 = _ode_rhs(t_local + h, r1 + h * k3[0], r2 + h * k3[1], profile, params)
            r1 += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            r2 += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            t_local += h
        return r1, r2

    if profile.period is not None:
        r1, r2 = stationary(profile.mean_rate())
        # Three warm-up periods, ending at time 0 mod period.
        period = profile.period
        for cycle in range(3):
            r1, r2 = rk4_advance(-(3 - cycle) * period, r1, r2, period)
    else:
        r1, r2 = stationary(profile.rate(0.0))

    steps = max(1, math.ceil(horizon / step))
    h = horizon / steps
    grid = np.linspace(0.0, horizon, steps + 1)
    r1_t = np.empty(steps + 1)
    r2_t = np.empty(steps + 1)
    r1_t[0], r2_t[0] = r1, r2
    t = 0.0
    for i in range(steps):
        k1 = _ode_rhs(t, r1, r2, profile, params)
        k2 = _ode_rhs(t + h / 2, r1 + h / 2 * k1[0], r2 + h / 2 * k1[1], profile, params)
        k3 = _ode_rhs(t + h / 2, r1 + h / 2 * k2[0], r2 + h / 2 * k2[1], profile, params)
        k4 = _ode_rhs(t + h, r1 + h * k3[0], r2 + h * k3[1], profile, params)
        r1 += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        r2 += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        t += h
        r1_t[i + 1], r2_t[i + 1] = r1, r2
    return LoadTrajectory(grid=grid, r1_t=r1_t, r2_t=r2_t)


def mol_schedule(traj: LoadTrajectory, pair: QedPair, interval: float = 0.5) -> StaffingSchedule:
    """Interval staffing from a load trajectory.

    Loads are read at each interval midpoint; s is rounded up, n to the
    nearest integer, both clamped at 1.
    """
    if not (interval > 0):
        raise DomainError(f"interval must be positive, got {interval!r}")
    horizon = float(traj.grid[-1])
    count = max(1, round(horizon / interval))
    t_start = np.array([i * interval for i in range(count)])
    t_end = np.minimum(t_start + interval, horizon)
    mids = (t_start + t_end) / 2.0
    r1_m = np.interp(mids, traj.grid, traj.r1_t)
    r2_m = np.interp(mids, traj.grid, traj.r2_t)
    s_t = np.maximum(1, np.ceil(r1_m + pair.beta * np.sqrt(r1_m)).astype(int))
    total = r1_m + r2_m
    n_t = np.maximum(1, np.floor(total + pair.gamma * np.sqrt(total) + 0.5).astype(int))
    return StaffingSchedule(
        interval=interval, t_start=t_start, t_end=t_end, s_t=s_t, n_t=n_t, pair=pair
    )
