"""Pure-Python stationary simulation kernel.

Mirrors the compiled kernel exactly: same state updates and the same random
number draw sequence (scalar uniforms from the supplied generator, with
exponentials obtained by inversion), so a given seed produces bit-identical
statistics on either backend.

Models: 0 = blocking, 1 = holding, 2 = closed ward.
"""
from __future__ import annotations

import math

import numpy as np

BLOCKING = 0
HOLDING = 1
CLOSED_WARD = 2

EV_ARRIVAL = 0
EV_HOLD_START = 1
EV_NEEDY_START = 2
EV_SERVICE_START = 3
EV_CONTENT_START = 4
EV_DEPARTURE = 5
EV_BLOCKED = 6


class _State:
    """Mutable simulation state with doubling patient arrays."""

    __slots__ = (
        "s", "n", "srv", "nsrv", "cont", "ncont",
        "nq", "nq_head", "nq_len", "hq", "hq_head", "hq_len",
        "visits", "needy_acc", "hold_acc", "mark", "free", "nfree", "top",
    )

    def __init__(self, s: int, n: int):
        self.s = s
        self.n = n
        cap = max(2 * n + 64, 256)
        self.srv = np.zeros(s, dtype=np.int64)
        self.nsrv = 0
        self.cont = np.zeros(n + 1, dtype=np.int64)
        self.ncont = 0
        self.nq = np.zeros(cap, dtype=np.int64)
        self.nq_head = 0
        self.nq_len = 0
        self.hq = np.zeros(cap, dtype=np.int64)
        self.hq_head = 0
        self.hq_len = 0
        self.visits = np.zeros(cap, dtype=np.int64)
        self.needy_acc = np.zeros(cap)
        self.hold_acc = np.zeros(cap)
        self.mark = np.zeros(cap)
        self.free = np.zeros(cap, dtype=np.int64)
        self.nfree = 0
        self.top = 0

    def new_patient(self) -> int:
        if self.nfree > 0:
            self.nfree -= 1
            pid = int(self.free[self.nfree])
        else:
            if self.top >= len(self.visits):
                grow = len(self.visits) * 2
                for name in ("visits", "needy_acc", "hold_acc", "mark", "free"):
                    old = getattr(self, name)
                    new = np.zeros(grow, dtype=old.dtype)
                    new[: len(old)] = old
                    setattr(self, name, new)
            pid = self.top
            self.top += 1
        self.visits[pid] = 0
        self.needy_acc[pid] = 0.0
        self.hold_acc[pid] = 0.0
        return pid

    def push_nq(self, pid: int) -> None:
        if self.nq_len >= len(self.nq):
            self.nq = np.concatenate([self.nq, np.zeros(len(self.nq), dtype=np.int64)])
        self.nq[(self.nq_head + self.nq_len) % len(self.nq)] = pid
        self.nq_len += 1

    def pop_nq(self) -> int:
        pid = int(self.nq[self.nq_head])
        self.nq_head = (self.nq_head + 1) % len(self.nq)
        self.nq_len -= 1
        return pid

    def push_hq(self, pid: int) -> None:
        if self.hq_len >= len(self.hq):
            self.hq = np.concatenate([self.hq, np.zeros(len(self.hq), dtype=np.int64)])
        self.hq[(self.hq_head + self.hq_len) % len(self.hq)] = pid
        self.hq_len += 1

    def pop_hq(self) -> int:
        pid = int(self.hq[self.hq_head])
        self.hq_head = (self.hq_head + 1) % len(self.hq)
        self.hq_len -= 1
        return pid


def run_stationary(
    model: int,
    lam: float,
    mu: float,
    delta: float,
    p: float,
    s: int,
    n: int,
    horizon: float,
    warmup: float,
    rng: np.random.Generator,
    n_strata: int = 40,
    n_batches: int = 1,
    r_init: float = 0.5,
    event_log: list | None = None,
) -> dict:
    """Simulate one replication; return raw accumulators.

    Time-average metrics are accumulated into n_batches equal slices of the
    post-warmup window so a single long run can produce batch-means CIs.
    """
    st = _State(s, n)
    acc_time = np.zeros((n_batches, 6))  # delay, full, h, busy, census, q1queue
    acc_evt = np.zeros((n_batches, 3))  # wait_sum, req_total, req_delayed
    hist_census = np.zeros(n + 1)
    hist_q1 = np.zeros(n + 1)
    strata = np.zeros((4, n_strata + 1))  # count, hold, needy, total
    arrivals = 0
    blocked = 0
    admitted_all = 0
    departed_all = 0
    t_hpos = 0.0
    batch_len = (horizon - warmup) / n_batches

    log = event_log

    def begin_needy(pid: int, t: float) -> None:
        st.visits[pid] += 1
        st.mark[pid] = t
        st.push_nq(pid)
        if log is not None:
            log.append((pid, EV_NEEDY_START, t))

    def fill(t: float) -> None:
        nonlocal _wait_sum, _req_total, _req_delayed
        while st.nsrv < s and st.nq_len > 0:
            pid = st.pop_nq()
            w = t - st.mark[pid]
            st.needy_acc[pid] += w
            if t >= warmup:
                b = min(int((t - warmup) / batch_len), n_batches - 1)
                acc_evt[b, 0] += w
                acc_evt[b, 1] += 1.0
                if w > 0.0:
                    acc_evt[b, 2] += 1.0
            st.srv[st.nsrv] = pid
            st.nsrv += 1
            if log is not None:
                log.append((pid, EV_SERVICE_START, t))

    _wait_sum = _req_total = _req_delayed = 0.0

    if model == CLOSED_WARD:
        j0 = min(n, max(0, int(r_init * n + 0.5)))
        for _ in range(j0):
            pid = st.new_patient()
            begin_needy(pid, 0.0)
        fill(0.0)
        for _ in range(n - j0):
            pid = st.new_patient()
            st.cont[st.ncont] = pid
            st.ncont += 1
        admitted_all = n

    t = 0.0
    while True:
        j = st.nsrv + st.nq_len
        k = st.ncont
        rate_arr = 0.0 if model == CLOSED_WARD else lam
        total = rate_arr + st.nsrv * mu + k * delta
        if total <= 0.0:
            t_next = horizon
        else:
            u = rng.random()
            t_next = t + (-math.log(1.0 - u) / total)
        t_end = min(t_next, horizon)
        if t_end > warmup:
            w = t_end - max(t, warmup)
            mid = max(t, warmup)
            b = min(int((mid - warmup) / batch_len), n_batches - 1)
            acc_time[b, 0] += w * (1.0 if j >= s else 0.0)
            acc_time[b, 1] += w * (1.0 if j + k >= n else 0.0)
            acc_time[b, 2] += w * st.hq_len
            acc_time[b, 3] += w * st.nsrv
            acc_time[b, 4] += w * (j + k)
            acc_time[b, 5] += w * st.nq_len
            if st.hq_len > 0:
                t_hpos += w
            hist_census[min(j + k, n)] += w
            hist_q1[min(j, n)] += w
        if t_next >= horizon or total <= 0.0:
            break
        t = t_next

        v = rng.random() * total
        if v < rate_arr:
            # External arrival.
            if t >= warmup:
                arrivals += 1
            if j + k >= n:
                if model == BLOCKING:
                    if t >= warmup:
                        blocked += 1
                    if log is not None:
                        pid = -1
                        log.append((pid, EV_BLOCKED, t))
                else:
                    pid = st.new_patient()
                    st.mark[pid] = t
                    st.push_hq(pid)
                    if log is not None:
                        log.append((pid, EV_HOLD_START, t))
            else:
                pid = st.new_patient()
                admitted_all += 1
                if log is not None:
                    log.append((pid, EV_ARRIVAL, t))
                begin_needy(pid, t)
                fill(t)
        elif v < rate_arr + st.nsrv * mu:
            # Service completion.
            idx = int(rng.random() * st.nsrv)
            if idx >= st.nsrv:
                idx = st.nsrv - 1
            pid = int(st.srv[idx])
            st.srv[idx] = st.srv[st.nsrv - 1]
            st.nsrv -= 1
            u2 = rng.random()
            if u2 < p:
                st.cont[st.ncont] = pid
                st.ncont += 1
                if log is not None:
                    log.append((pid, EV_CONTENT_START, t))
            elif model == CLOSED_WARD:
                # The freed bed is taken instantly by a fresh needy patient.
                st.visits[pid] = 0
                st.needy_acc[pid] = 0.0
                st.hold_acc[pid] = 0.0
                begin_needy(pid, t)
            else:
                departed_all += 1
                if t >= warmup:
                    bucket = min(int(st.visits[pid]), n_strata)
                    strata[0, bucket] += 1.0
                    strata[1, bucket] += st.hold_acc[pid]
                    strata[2, bucket] += st.needy_acc[pid]
                    strata[3, bucket] += st.hold_acc[pid] + st.needy_acc[pid]
                if log is not None:
                    log.append((pid, EV_DEPARTURE, t))
                st.free[st.nfree] = pid
                st.nfree += 1
                if model == HOLDING and st.hq_len > 0:
                    qid = st.pop_hq()
                    st.hold_acc[qid] = t - st.mark[qid]
                    admitted_all += 1
                    begin_needy(qid, t)
            fill(t)
        else:
            # Content completion: the patient becomes needy again.
            idx = int(rng.random() * st.ncont)
            if idx >= st.ncont:
                idx = st.ncont - 1
            pid = int(st.cont[idx])
            st.cont[idx] = st.cont[st.ncont - 1]
            st.ncont -= 1
            begin_needy(pid, t)
            fill(t)
        if st.nsrv + st.nq_len + st.ncont > n:
            raise AssertionError("census exceeded capacity (kernel bug)")

    in_system_end = st.nsrv + st.nq_len + st.ncont + st.hq_len
    return {
        "hq_end": st.hq_len,
        "elapsed": horizon - warmup,
        "acc_time": acc_time,
        "acc_evt": acc_evt,
        "hist_census": hist_census,
        "hist_q1": hist_q1,
        "strata": strata,
        "arrivals": arrivals,
        "blocked": blocked,
        "admitted_all": admitted_all,
        "departed_all": departed_all,
        "in_system_end": in_system_end,
        "t_hpos": t_hpos,
    }
