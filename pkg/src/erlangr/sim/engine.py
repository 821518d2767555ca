"""Simulation orchestration: replications, confidence intervals, experiments.

Builds on the stationary kernel (compiled or pure Python) for the three
stationary models, and implements the time-varying run (nonhomogeneous
arrivals by thinning, staffing changes at schedule boundaries) directly in
Python since capacity changes dominate its cost profile.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import IO, Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import t as student_t

from ..errors import DomainError, ScheduleGap
from ..model import CapacityPair, ModelParams, PerformanceReport, derive_loads
from ..qbd import rho_max
from . import _kernel_py
from ._backend import BACKEND, run_stationary, run_stationary_python

MODEL_CODES = {
    "blocking": _kernel_py.BLOCKING,
    "holding": _kernel_py.HOLDING,
    "closed_ward": _kernel_py.CLOSED_WARD,
}

EVENT_NAMES = {
    _kernel_py.EV_ARRIVAL: "arrival",
    _kernel_py.EV_HOLD_START: "hold_start",
    _kernel_py.EV_NEEDY_START: "needy_start",
    _kernel_py.EV_SERVICE_START: "service_start",
    _kernel_py.EV_CONTENT_START: "content_start",
    _kernel_py.EV_DEPARTURE: "departure",
    _kernel_py.EV_BLOCKED: "blocked",
}

# Estimates derived from time averages / per-request events, available per
# batch as well as per replication.
_METRICS = (
    "p_delay",
    "p_boundary",
    "e_holding_queue",
    "rho_s",
    "rho_n",
    "q1_queue_len",
    "census_mean",
    "e_wait",
    "delayed_fraction",
)


@dataclass(frozen=True)
class SimConfig:
    """Run-length and model selection for a simulation study."""

    horizon: float
    warmup: Optional[float] = None
    replications: int = 1
    seed: Optional[int] = None
    model: str = "holding"
    record_paths: bool = False
    n_batches: int = 30
    n_strata: int = 40
    r_init: float = 0.5

    def __post_init__(self):
        if not (self.horizon > 0):
            raise DomainError(f"horizon must be positive, got {self.horizon!r}")
        if self.warmup is not None and not (0 <= self.warmup < self.horizon):
            raise DomainError("warmup must lie in [0, horizon)")
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        if self.model not in MODEL_CODES:
            raise DomainError(f"model must be one of {sorted(MODEL_CODES)}, got {self.model!r}")
        if self.n_batches < 1 or self.n_strata < 1:
            raise DomainError("n_batches and n_strata must be >= 1")

    @property
    def effective_warmup(self) -> float:
        return 0.2 * self.horizon if self.warmup is None else self.warmup


@dataclass(frozen=True)
class VisitStrata:
    """Waiting statistics stratified by the realized number of service visits.

    Index k holds patients whose final visit count is k (the last index pools
    all higher counts). Means are over departed patients; hw_total is the 95%
    across-replication half-width of the total-wait mean (NaN for one rep).
    """

    counts: np.ndarray = field(repr=False)
    mean_hold: np.ndarray = field(repr=False)
    mean_needy: np.ndarray = field(repr=False)
    mean_total: np.ndarray = field(repr=False)
    hw_total: np.ndarray = field(repr=False)

    def visit_distribution(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total > 0 else self.counts


@dataclass(frozen=True)
class SimResult:
    """Point estimates with 95% half-widths, plus path-level summaries."""

    estimates: Dict[str, Tuple[float, float]]
    report: PerformanceReport
    visit_strata: VisitStrata
    hist_census: np.ndarray = field(repr=False)
    hist_q1: np.ndarray = field(repr=False)
    backend: str = BACKEND
    replications: int = 1
    event_log: Optional[list] = None
    time_series: Optional[Dict[str, np.ndarray]] = None

    def mean(self, name: str) -> float:
        return self.estimates[name][0]

    def half_width(self, name: str) -> float:
        return self.estimates[name][1]

    def export_time_series_csv(self, fp: IO[str]) -> None:
        if self.time_series is None:
            raise DomainError("no time series recorded")
        ts = self.time_series
        metrics = [k for k in ts if k not in ("t_start", "t_end")]
        fp.write("t,metric,value\n")
        mids = (ts["t_start"] + ts["t_end"]) / 2.0
        for name in metrics:
            for t_mid, v in zip(mids, ts[name]):
                fp.write(f"{t_mid:.10g},{name},{v:.10g}\n")

    def export_event_log_csv(self, fp: IO[str]) -> None:
        if self.event_log is None:
            raise DomainError("no event log recorded (set record_paths)")
        fp.write("patient_id,event,t\n")
        for pid, code, t in self.event_log:
            fp.write(f"{pid},{EVENT_NAMES[code]},{t:.10g}\n")


def _half_widths(samples: np.ndarray) -> np.ndarray:
    """95% half-widths per column; NaN with fewer than two samples."""
    ns = samples.shape[0]
    if ns < 2:
        return np.full(samples.shape[1], np.nan)
    crit = student_t.ppf(0.975, ns - 1)
    return crit * np.nanstd(samples, axis=0, ddof=1) / math.sqrt(ns)


def _metrics_from_raw(raw: dict, s: int, n: int) -> np.ndarray:
    """Per-batch metric rows from one replication's raw accumulators."""
    acc_time = raw["acc_time"]
    acc_evt = raw["acc_evt"]
    nb = acc_time.shape[0]
    span = raw["elapsed"] / nb
    rows = np.empty((nb, len(_METRICS)))
    rows[:, 0] = acc_time[:, 0] / span
    rows[:, 1] = acc_time[:, 1] / span
    rows[:, 2] = acc_time[:, 2] / span
    rows[:, 3] = acc_time[:, 3] / (span * s)
    rows[:, 4] = acc_time[:, 4] / (span * n)
    rows[:, 5] = acc_time[:, 5] / span
    rows[:, 6] = acc_time[:, 4] / span
    with np.errstate(invalid="ignore", divide="ignore"):
        rows[:, 7] = np.where(acc_evt[:, 1] > 0, acc_evt[:, 0] / acc_evt[:, 1], np.nan)
        rows[:, 8] = np.where(acc_evt[:, 1] > 0, acc_evt[:, 2] / acc_evt[:, 1], np.nan)
    return rows


def _check_stability(params: ModelParams, cap: CapacityPair) -> None:
    loads = derive_loads(params, s=cap.s)
    cap_rho, _ = rho_max(params, cap)
    if loads.rho >= cap_rho:
        warnings.warn(
            f"holding model is unstable: rho={loads.rho:.4g} >= rho_max={cap_rho:.4g}; "
            "estimates will not converge",
            RuntimeWarning,
            stacklevel=3,
        )


def simulate(params: ModelParams, cap: CapacityPair, cfg: SimConfig) -> SimResult:
    """Run a stationary simulation study and aggregate replication results.

    With one replication, confidence intervals come from batch means over
    cfg.n_batches slices of the post-warmup window; with several, from the
    across-replication spread. An event log (and binned trajectories derived
    from it) is kept for the first replication when record_paths is set,
    which forces that replication onto the pure-Python kernel.
    """
    model = MODEL_CODES[cfg.model]
    if cfg.model == "holding":
        _check_stability(params, cap)
    warmup = cfg.effective_warmup
    reps = cfg.replications
    kernel_batches = cfg.n_batches if reps == 1 else 1

    streams = np.random.SeedSequence(cfg.seed).spawn(reps)
    sample_rows: List[np.ndarray] = []
    hist_census = np.zeros(cap.n + 1)
    hist_q1 = np.zeros(cap.n + 1)
    strata_sum = np.zeros((4, cfg.n_strata + 1))
    rep_total_means = np.full((reps, cfg.n_strata + 1), np.nan)
    event_log: Optional[list] = [] if cfg.record_paths else None

    for i, ss in enumerate(streams):
        rng = np.random.Generator(np.random.Philox(ss))
        log = event_log if (cfg.record_paths and i == 0) else None
        runner = run_stationary_python if log is not None else run_stationary
        raw = runner(
            model, params.lam, params.mu, params.delta, params.p,
            cap.s, cap.n, cfg.horizon, warmup, rng,
            n_strata=cfg.n_strata, n_batches=kernel_batches,
            r_init=cfg.r_init, event_log=log,
        )
        in_facility = raw["in_system_end"] - raw["hq_end"]
        if raw["admitted_all"] != raw["departed_all"] + in_facility:
            raise AssertionError("flow conservation violated (kernel bug)")
        sample_rows.append(_metrics_from_raw(raw, cap.s, cap.n))
        hist_census += raw["hist_census"]
        hist_q1 += raw["hist_q1"]
        strata = raw["strata"]
        strata_sum += strata
        with np.errstate(invalid="ignore", divide="ignore"):
            rep_total_means[i] = np.where(strata[0] > 0, strata[3] / strata[0], np.nan)

    samples = np.vstack(sample_rows)
    means = np.nanmean(samples, axis=0)
    hws = _half_widths(samples)
    estimates = {name: (float(m), float(h)) for name, m, h in zip(_METRICS, means, hws)}

    total_time = hist_census.sum()
    hist_census /= total_time
    hist_q1 /= total_time

    with np.errstate(invalid="ignore", divide="ignore"):
        counts = strata_sum[0]
        mean_hold = np.where(counts > 0, strata_sum[1] / counts, np.nan)
        mean_needy = np.where(counts > 0, strata_sum[2] / counts, np.nan)
        mean_total = np.where(counts > 0, strata_sum[3] / counts, np.nan)
    if reps >= 2:
        valid = np.sum(~np.isnan(rep_total_means), axis=0)
        crit = student_t.ppf(0.975, np.maximum(valid - 1, 1))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            spread = np.nanstd(rep_total_means, axis=0, ddof=1)
        hw_total = np.where(valid >= 2, crit * spread / np.sqrt(np.maximum(valid, 1)), np.nan)
    else:
        hw_total = np.full(cfg.n_strata + 1, np.nan)
    visit_strata = VisitStrata(
        counts=counts, mean_hold=mean_hold, mean_needy=mean_needy,
        mean_total=mean_total, hw_total=hw_total,
    )

    report = PerformanceReport(
        p_delay=estimates["p_delay"][0],
        p_boundary=estimates["p_boundary"][0],
        e_wait=estimates["e_wait"][0],
        e_holding_queue=estimates["e_holding_queue"][0],
        rho_s=estimates["rho_s"][0],
        rho_n=estimates["rho_n"][0],
    )
    time_series = None
    if event_log is not None:
        time_series = binned_trajectories(event_log, cfg.horizon, n_bins=200)
    return SimResult(
        estimates=estimates,
        report=report,
        visit_strata=visit_strata,
        hist_census=hist_census,
        hist_q1=hist_q1,
        backend="python" if cfg.record_paths and reps == 1 else BACKEND,
        replications=reps,
        event_log=event_log,
        time_series=time_series,
    )


def binned_trajectories(event_log: list, horizon: float, n_bins: int = 200) -> Dict[str, np.ndarray]:
    """Time-averaged hold-queue, needy-count and census trajectories from a log."""
    edges = np.linspace(0.0, horizon, n_bins + 1)
    acc = np.zeros((n_bins, 3))  # h, needy, census
    state: Dict[int, str] = {}
    h = j = k = 0

    def deposit(t0: float, t1: float) -> None:
        if t1 <= t0:
            return
        b0 = min(int(t0 / horizon * n_bins), n_bins - 1)
        b1 = min(int(t1 / horizon * n_bins), n_bins - 1)
        for b in range(b0, b1 + 1):
            lo = max(t0, edges[b])
            hi = min(t1, edges[b + 1])
            if hi > lo:
                acc[b, 0] += (hi - lo) * h
                acc[b, 1] += (hi - lo) * j
                acc[b, 2] += (hi - lo) * (j + k)

    t_prev = 0.0
    for pid, code, t in event_log:
        deposit(t_prev, min(t, horizon))
        t_prev = min(t, horizon)
        if code == _kernel_py.EV_HOLD_START:
            h += 1
            state[pid] = "hold"
        elif code == _kernel_py.EV_NEEDY_START:
            prev = state.get(pid)
            if prev == "hold":
                h -= 1
                j += 1
            elif prev == "content":
                k -= 1
                j += 1
            elif prev != "needy":  # fresh admission; closed-ward recycle keeps j
                j += 1
            state[pid] = "needy"
        elif code == _kernel_py.EV_CONTENT_START:
            j -= 1
            k += 1
            state[pid] = "content"
        elif code == _kernel_py.EV_DEPARTURE:
            j -= 1
            state.pop(pid, None)
    deposit(t_prev, horizon)

    widths = np.diff(edges)
    return {
        "t_start": edges[:-1],
        "t_end": edges[1:],
        "hold_queue": acc[:, 0] / widths,
        "needy_count": acc[:, 1] / widths,
        "census": acc[:, 2] / widths,
    }


@dataclass(frozen=True)
class OrderingReport:
    """Cross-model comparison on matched parameters.

    survival_census[m][k] estimates P(census >= k) and survival_q1[m][k]
    estimates P(needy count >= k) under model m. The ordering flags allow the
    stated CI slack so sampling noise does not flip a true ordering.
    """

    results: Dict[str, SimResult]
    survival_census: Dict[str, np.ndarray] = field(repr=False)
    survival_q1: Dict[str, np.ndarray] = field(repr=False)
    orderings: Dict[str, bool] = field(default_factory=dict)


def _survival(hist: np.ndarray) -> np.ndarray:
    return np.concatenate([[1.0], 1.0 - np.cumsum(hist)[:-1]]).clip(0.0, 1.0)


def ordering_experiment(
    params: ModelParams, cap: CapacityPair, cfg: SimConfig, slack: float = 0.0
) -> OrderingReport:
    """Run blocking, holding and closed-ward on matched parameters.

    Checks, within CI slack plus the given absolute slack, that the blocking
    model is the least congested and the closed ward the most: facility
    census, boundary probability, bed utilization, and the pointwise needy
    count survival curve are each ordered blocking <= holding <= closed ward
    (the closed-ward census is identically n).
    """
    results: Dict[str, SimResult] = {}
    for name in ("blocking", "holding", "closed_ward"):
        sub = SimConfig(
            horizon=cfg.horizon, warmup=cfg.warmup, replications=cfg.replications,
            seed=cfg.seed, model=name, record_paths=False,
            n_batches=cfg.n_batches, n_strata=cfg.n_strata, r_init=cfg.r_init,
        )
        results[name] = simulate(params, cap, sub)
    surv_census = {m: _survival(r.hist_census) for m, r in results.items()}
    surv_q1 = {m: _survival(r.hist_q1) for m, r in results.items()}

    def le(metric: str, a: str, b: str) -> bool:
        ra, rb = results[a], results[b]
        tol = ra.half_width(metric) + rb.half_width(metric)
        if math.isnan(tol):
            tol = 0.0
        return ra.mean(metric) <= rb.mean(metric) + tol + slack

    def curve_le(a: str, b: str) -> bool:
        # Deep-tail survival estimates carry O(1e-3) noise even on long runs.
        return bool(np.all(surv_q1[a] <= surv_q1[b] + slack + 5e-3))

    orderings = {
        "census": le("census_mean", "blocking", "holding")
        and results["holding"].mean("census_mean") <= cap.n + 1e-9,
        "p_boundary": le("p_boundary", "blocking", "holding"),
        "rho_n": le("rho_n", "blocking", "holding")
        and le("rho_n", "holding", "closed_ward"),
        "p_delay": le("p_delay", "blocking", "holding")
        and le("p_delay", "holding", "closed_ward"),
        "q1_curve": curve_le("blocking", "holding") and curve_le("holding", "closed_ward"),
    }
    return OrderingReport(
        results=results, survival_census=surv_census, survival_q1=surv_q1, orderings=orderings
    )


def time_varying_simulate(profile, schedule, params: ModelParams, cfg: SimConfig) -> SimResult:
    """Simulate one schedule day (or horizon) under a time-varying arrival rate.

    Arrivals are nonhomogeneous Poisson via thinning against the profile
    maximum. Capacity changes at schedule boundaries: a server-count decrease
    is non-preemptive (excess in-progress services finish, and no new service
    starts while the active count is at or above the current s); a capacity
    decrease never ejects anyone, admissions simply pause until the census
    drops below the new n. The returned time series is binned per schedule
    interval and averaged across replications.
    """
    if cfg.model not in ("blocking", "holding"):
        raise DomainError("time-varying runs support the blocking and holding models")
    t0 = np.asarray(schedule.t_start, dtype=float)
    t1 = np.asarray(schedule.t_end, dtype=float)
    if len(t0) == 0 or t0[0] > 1e-12 or np.any(t0[1:] - t1[:-1] > 1e-9):
        raise ScheduleGap("schedule does not cover the horizon from time 0")
    if t1[-1] < cfg.horizon - 1e-9:
        raise ScheduleGap(
            f"schedule ends at {t1[-1]:.6g} before the horizon {cfg.horizon:.6g}"
        )
    blocking = cfg.model == "blocking"
    warmup = cfg.effective_warmup
    lam_max = profile.max_rate()
    if lam_max <= 0:
        raise DomainError("profile has zero arrival rate everywhere")
    mu, delta, p = params.mu, params.delta, params.p

    # Start replications at the fluid offered-load state instead of empty, so
    # no multi-hour startup transient leaks into the binned series.
    from ..mol import integrate_offered_load

    warm = integrate_offered_load(profile, params, horizon=0.01, step=0.01)
    needy0 = int(round(float(warm.r1_t[0])))
    content0 = int(round(float(warm.r2_t[0])))
    n0 = int(schedule.n_t[0])
    content0 = min(content0, max(0, n0 - needy0))
    needy0 = min(needy0, n0)

    nbins = int(np.searchsorted(t0, cfg.horizon - 1e-12, side="right"))
    t0, t1 = t0[:nbins], np.minimum(t1[:nbins], cfg.horizon)
    s_t = np.asarray(schedule.s_t, dtype=int)[:nbins]
    n_t = np.asarray(schedule.n_t, dtype=int)[:nbins]
    # Columns: time, delay, boundary, holdlen, census, busy, q1len
    acc = np.zeros((nbins, 7))
    agg = np.zeros((cfg.replications, 3))  # p_delay, p_boundary, e_hold per rep

    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)
    for rep, ss in enumerate(streams):
        rng = np.random.Generator(np.random.Philox(ss))
        nsrv = 0
        nq: List[float] = [0.0] * needy0  # queued needy (no identity needed)
        hq: List[float] = []
        ncont = content0
        b = 0
        t = 0.0
        agg_time = 0.0

        def census() -> int:
            return nsrv + len(nq) + ncont + 0  # hold queue sits outside

        while t < cfg.horizon:
            s_cur, n_cur = int(s_t[b]), int(n_t[b])
            # Start services up to the current server count.
            while nsrv < s_cur and nq:
                nq.pop()
                nsrv += 1
            total = lam_max + nsrv * mu + ncont * delta
            t_next = t + rng.exponential(1.0 / total)
            boundary = t1[b]
            t_seg = min(t_next, boundary, cfg.horizon)
            w = t_seg - t
            j = nsrv + len(nq)
            cen = j + ncont
            acc_row = (
                w,
                w * (1.0 if j >= s_cur else 0.0),
                w * (1.0 if cen >= n_cur else 0.0),
                w * len(hq),
                w * cen,
                w * nsrv,
                w * len(nq),
            )
            if t_seg > warmup:
                eff = t_seg - max(t, warmup)
                scale = eff / w if w > 0 else 0.0
                acc[b] += np.array(acc_row) * scale
                agg[rep, 0] += eff * (1.0 if j >= s_cur else 0.0)
                agg[rep, 1] += eff * (1.0 if cen >= n_cur else 0.0)
                agg[rep, 2] += eff * len(hq)
                agg_time += eff
            if t_next >= boundary or t_next >= cfg.horizon:
                t = min(boundary, cfg.horizon)
                if t >= cfg.horizon:
                    break
                b += 1
                n_new = int(n_t[b])
                # Capacity increase may admit waiting patients immediately.
                while hq and census() < n_new:
                    hq.pop(0)
                    nq.append(0.0)
                continue
            t = t_next
            v = rng.random() * total
            if v < lam_max:
                if rng.random() < profile.rate(t) / lam_max:
                    if census() >= n_cur:
                        if not blocking:
                            hq.append(t)
                    else:
                        nq.append(t)
            elif v < lam_max + nsrv * mu:
                nsrv -= 1
                if rng.random() < p:
                    ncont += 1
                elif not blocking and hq and census() < n_cur:
                    hq.pop(0)
                    nq.append(t)
            else:
                ncont -= 1
                nq.append(t)
        if agg_time > 0:
            agg[rep] /= agg_time

    widths = acc[:, 0].copy()
    with np.errstate(invalid="ignore", divide="ignore"):
        binned = {
            "p_delay": np.where(widths > 0, acc[:, 1] / widths, np.nan),
            "p_boundary": np.where(widths > 0, acc[:, 2] / widths, np.nan),
            "hold_queue": np.where(widths > 0, acc[:, 3] / widths, np.nan),
            "census": np.where(widths > 0, acc[:, 4] / widths, np.nan),
            "busy_servers": np.where(widths > 0, acc[:, 5] / widths, np.nan),
            "needy_queue": np.where(widths > 0, acc[:, 6] / widths, np.nan),
        }
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(binned["census"] > 0, s_t / binned["census"], np.nan)
    time_series = {
        "t_start": t0,
        "t_end": t1,
        "s": s_t.astype(float),
        "n": n_t.astype(float),
        "staff_ratio": ratio,
        **binned,
    }
    hws = _half_widths(agg)
    estimates = {
        "p_delay": (float(np.nanmean(agg[:, 0])), float(hws[0])),
        "p_boundary": (float(np.nanmean(agg[:, 1])), float(hws[1])),
        "e_holding_queue": (float(np.nanmean(agg[:, 2])), float(hws[2])),
    }
    report = PerformanceReport(
        p_delay=estimates["p_delay"][0],
        p_boundary=estimates["p_boundary"][0],
        e_wait=float("nan"),
        e_holding_queue=estimates["e_holding_queue"][0],
        rho_s=float(np.nansum(acc[:, 5]) / max(np.nansum(widths * s_t), 1e-300)),
        rho_n=float(np.nansum(acc[:, 4]) / max(np.nansum(widths * n_t), 1e-300)),
    )
    empty = np.zeros(1)
    return SimResult(
        estimates=estimates,
        report=report,
        visit_strata=VisitStrata(
            counts=empty, mean_hold=empty, mean_needy=empty,
            mean_total=empty, hw_total=empty,
        ),
        hist_census=empty,
        hist_q1=empty,
        backend="python",
        replications=cfg.replications,
        time_series=time_series,
    )
