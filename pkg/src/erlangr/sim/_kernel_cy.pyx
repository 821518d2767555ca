# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stationary simulation kernel.

State updates and random draw order are identical to the pure-Python kernel
(_kernel_py), so the two backends produce bit-identical statistics for the
same seed. Uniforms come one at a time from the generator's bit stream and
exponentials are sampled by inversion.
"""
from libc.math cimport log
from libc.stdlib cimport free, malloc
from cpython.pycapsule cimport PyCapsule_GetPointer

import numpy as np

cimport numpy as cnp
from numpy.random cimport bitgen_t

cnp.import_array()

cdef extern from "Python.h":
    pass


cdef inline double next_u(bitgen_t *bg) noexcept nogil:
    return bg.next_double(bg.state)


def run_stationary(
    int model,
    double lam,
    double mu,
    double delta,
    double p,
    int s,
    int n,
    double horizon,
    double warmup,
    rng,
    int n_strata=40,
    int n_batches=1,
    double r_init=0.5,
    event_log=None,
):
    """Simulate one replication; see the pure-Python kernel for semantics."""
    if event_log is not None:
        raise ValueError("event logging requires the pure-Python backend")

    capsule = rng.bit_generator.capsule
    cdef bitgen_t *bg = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    cdef cnp.ndarray[cnp.float64_t, ndim=2] acc_time = np.zeros((n_batches, 6))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] acc_evt = np.zeros((n_batches, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] hist_census = np.zeros(n + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] hist_q1 = np.zeros(n + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] strata = np.zeros((4, n_strata + 1))
    cdef double[:, :] acc_time_v = acc_time
    cdef double[:, :] acc_evt_v = acc_evt
    cdef double[:] hist_census_v = hist_census
    cdef double[:] hist_q1_v = hist_q1
    cdef double[:, :] strata_v = strata

    cdef long arrivals = 0, blocked = 0, admitted_all = 0, departed_all = 0
    cdef double t_hpos = 0.0
    cdef double batch_len = (horizon - warmup) / n_batches

    # Patient arrays with manual doubling.
    cdef long cap = 2 * n + 64
    if cap < 256:
        cap = 256
    cdef long *srv = <long *> malloc(s * sizeof(long))
    cdef long *cont = <long *> malloc((n + 1) * sizeof(long))
    cdef long nq_cap = cap, hq_cap = cap
    cdef long *nq = <long *> malloc(nq_cap * sizeof(long))
    cdef long *hq = <long *> malloc(hq_cap * sizeof(long))
    cdef long pat_cap = cap
    cdef long *visits = <long *> malloc(pat_cap * sizeof(long))
    cdef double *needy_acc = <double *> malloc(pat_cap * sizeof(double))
    cdef double *hold_acc = <double *> malloc(pat_cap * sizeof(double))
    cdef double *mark = <double *> malloc(pat_cap * sizeof(double))
    cdef long *freelist = <long *> malloc(pat_cap * sizeof(long))
    if not (srv and cont and nq and hq and visits and needy_acc and hold_acc and mark and freelist):
        raise MemoryError()

    cdef long nsrv = 0, ncont = 0, nq_head = 0, nq_len = 0, hq_head = 0, hq_len = 0
    cdef long nfree = 0, top = 0
    cdef long pid, qid, idx, bucket, i
    cdef long j, k
    cdef double t = 0.0, t_next, t_end, w, u, v, u2, total, rate_arr, mid
    cdef long b
    cdef long in_system_end, hq_end

    cdef long *tmp_l
    cdef double *tmp_d

    try:
        # --- helpers inlined below (Cython closures cannot be nogil) ---

        # closed-ward initialization
        if model == 2:
            j = <long> (r_init * n + 0.5)
            if j > n:
                j = n
            if j < 0:
                j = 0
            for i in range(j):
                pid = top; top += 1
                visits[pid] = 1
                needy_acc[pid] = 0.0
                hold_acc[pid] = 0.0
                mark[pid] = 0.0
                nq[(nq_head + nq_len) % nq_cap] = pid
                nq_len += 1
            while nsrv < s and nq_len > 0:
                pid = nq[nq_head]
                nq_head = (nq_head + 1) % nq_cap
                nq_len -= 1
                needy_acc[pid] += 0.0
                srv[nsrv] = pid
                nsrv += 1
            for i in range(n - j):
                pid = top; top += 1
                visits[pid] = 0
                needy_acc[pid] = 0.0
                hold_acc[pid] = 0.0
                cont[ncont] = pid
                ncont += 1
            admitted_all = n

        while True:
            j = nsrv + nq_len
            k = ncont
            rate_arr = 0.0 if model == 2 else lam
            total = rate_arr + nsrv * mu + k * delta
            if total <= 0.0:
                t_next = horizon
            else:
                u = next_u(bg)
                t_next = t + (-log(1.0 - u) / total)
            t_end = t_next if t_next < horizon else horizon
            if t_end > warmup:
                mid = t if t > warmup else warmup
                w = t_end - mid
                b = <long> ((mid - warmup) / batch_len)
                if b > n_batches - 1:
                    b = n_batches - 1
                if j >= s:
                    acc_time_v[b, 0] += w
                if j + k >= n:
                    acc_time_v[b, 1] += w
                acc_time_v[b, 2] += w * hq_len
                acc_time_v[b, 3] += w * nsrv
                acc_time_v[b, 4] += w * (j + k)
                acc_time_v[b, 5] += w * nq_len
                if hq_len > 0:
                    t_hpos += w
                idx = j + k
                if idx > n:
                    idx = n
                hist_census_v[idx] += w
                idx = j
                if idx > n:
                    idx = n
                hist_q1_v[idx] += w
            if t_next >= horizon or total <= 0.0:
                break
            t = t_next

            v = next_u(bg) * total
            if v < rate_arr:
                if t >= warmup:
                    arrivals += 1
                if j + k >= n:
                    if model == 0:
                        if t >= warmup:
                            blocked += 1
                    else:
                        # new held patient
                        if nfree > 0:
                            nfree -= 1
                            pid = freelist[nfree]
                        else:
                            if top >= pat_cap:
                                pat_cap *= 2
                                tmp_l = <long *> malloc(pat_cap * sizeof(long))
                                for i in range(top): tmp_l[i] = visits[i]
                                free(visits); visits = tmp_l
                                tmp_d = <double *> malloc(pat_cap * sizeof(double))
                                for i in range(top): tmp_d[i] = needy_acc[i]
                                free(needy_acc); needy_acc = tmp_d
                                tmp_d = <double *> malloc(pat_cap * sizeof(double))
                                for i in range(top): tmp_d[i] = hold_acc[i]
                                free(hold_acc); hold_acc = tmp_d
                                tmp_d = <double *> malloc(pat_cap * sizeof(double))
                                for i in range(top): tmp_d[i] = mark[i]
                                free(mark); mark = tmp_d
                                tmp_l = <long *> malloc(pat_cap * sizeof(long))
                                for i in range(nfree): tmp_l[i] = freelist[i]
                                free(freelist); freelist = tmp_l
                            pid = top
                            top += 1
                        visits[pid] = 0
                        needy_acc[pid] = 0.0
                        hold_acc[pid] = 0.0
                        mark[pid] = t
                        if hq_len >= hq_cap:
                            tmp_l = <long *> malloc(2 * hq_cap * sizeof(long))
                            for i in range(hq_len):
                                tmp_l[i] = hq[(hq_head + i) % hq_cap]
                            free(hq); hq = tmp_l
                            hq_head = 0
                            hq_cap *= 2
                        hq[(hq_head + hq_len) % hq_cap] = pid
                        hq_len += 1
                else:
                    if nfree > 0:
                        nfree -= 1
                        pid = freelist[nfree]
                    else:
                        if top >= pat_cap:
                            pat_cap *= 2
                            tmp_l = <long *> malloc(pat_cap * sizeof(long))
                            for i in range(top): tmp_l[i] = visits[i]
                            free(visits); visits = tmp_l
                            tmp_d = <double *> malloc(pat_cap * sizeof(double))
                            for i in range(top): tmp_d[i] = needy_acc[i]
                            free(needy_acc); needy_acc = tmp_d
                            tmp_d = <double *> malloc(pat_cap * sizeof(double))
                            for i in range(top): tmp_d[i] = hold_acc[i]
                            free(hold_acc); hold_acc = tmp_d
                            tmp_d = <double *> malloc(pat_cap * sizeof(double))
                            for i in range(top): tmp_d[i] = mark[i]
                            free(mark); mark = tmp_d
                            tmp_l = <long *> malloc(pat_cap * sizeof(long))
                            for i in range(nfree): tmp_l[i] = freelist[i]
                            free(freelist); freelist = tmp_l
                        pid = top
                        top += 1
                    visits[pid] = 1
                    needy_acc[pid] = 0.0
                    hold_acc[pid] = 0.0
                    mark[pid] = t
                    admitted_all += 1
                    if nq_len >= nq_cap:
                        tmp_l = <long *> malloc(2 * nq_cap * sizeof(long))
                        for i in range(nq_len):
                            tmp_l[i] = nq[(nq_head + i) % nq_cap]
                        free(nq); nq = tmp_l
                        nq_head = 0
                        nq_cap *= 2
                    nq[(nq_head + nq_len) % nq_cap] = pid
                    nq_len += 1
                    # fill
                    while nsrv < s and nq_len > 0:
                        qid = nq[nq_head]
                        nq_head = (nq_head + 1) % nq_cap
                        nq_len -= 1
                        w = t - mark[qid]
                        needy_acc[qid] += w
                        if t >= warmup:
                            b = <long> ((t - warmup) / batch_len)
                            if b > n_batches - 1:
                                b = n_batches - 1
                            acc_evt_v[b, 0] += w
                            acc_evt_v[b, 1] += 1.0
                            if w > 0.0:
                                acc_evt_v[b, 2] += 1.0
                        srv[nsrv] = qid
                        nsrv += 1
            elif v < rate_arr + nsrv * mu:
                idx = <long> (next_u(bg) * nsrv)
                if idx >= nsrv:
                    idx = nsrv - 1
                pid = srv[idx]
                srv[idx] = srv[nsrv - 1]
                nsrv -= 1
                u2 = next_u(bg)
                if u2 < p:
                    cont[ncont] = pid
                    ncont += 1
                elif model == 2:
                    visits[pid] = 1
                    needy_acc[pid] = 0.0
                    hold_acc[pid] = 0.0
                    mark[pid] = t
                    nq[(nq_head + nq_len) % nq_cap] = pid
                    nq_len += 1
                else:
                    departed_all += 1
                    if t >= warmup:
                        bucket = visits[pid]
                        if bucket > n_strata:
                            bucket = n_strata
                        strata_v[0, bucket] += 1.0
                        strata_v[1, bucket] += hold_acc[pid]
                        strata_v[2, bucket] += needy_acc[pid]
                        strata_v[3, bucket] += hold_acc[pid] + needy_acc[pid]
                    freelist[nfree] = pid
                    nfree += 1
                    if model == 1 and hq_len > 0:
                        qid = hq[hq_head]
                        hq_head = (hq_head + 1) % hq_cap
                        hq_len -= 1
                        hold_acc[qid] = t - mark[qid]
                        admitted_all += 1
                        visits[qid] += 1
                        mark[qid] = t
                        nq[(nq_head + nq_len) % nq_cap] = qid
                        nq_len += 1
                # fill
                while nsrv < s and nq_len > 0:
                    qid = nq[nq_head]
                    nq_head = (nq_head + 1) % nq_cap
                    nq_len -= 1
                    w = t - mark[qid]
                    needy_acc[qid] += w
                    if t >= warmup:
                        b = <long> ((t - warmup) / batch_len)
                        if b > n_batches - 1:
                            b = n_batches - 1
                        acc_evt_v[b, 0] += w
                        acc_evt_v[b, 1] += 1.0
                        if w > 0.0:
                            acc_evt_v[b, 2] += 1.0
                    srv[nsrv] = qid
                    nsrv += 1
            else:
                idx = <long> (next_u(bg) * ncont)
                if idx >= ncont:
                    idx = ncont - 1
                pid = cont[idx]
                cont[idx] = cont[ncont - 1]
                ncont -= 1
                visits[pid] += 1
                mark[pid] = t
                nq[(nq_head + nq_len) % nq_cap] = pid
                nq_len += 1
                # fill
                while nsrv < s and nq_len > 0:
                    qid = nq[nq_head]
                    nq_head = (nq_head + 1) % nq_cap
                    nq_len -= 1
                    w = t - mark[qid]
                    needy_acc[qid] += w
                    if t >= warmup:
                        b = <long> ((t - warmup) / batch_len)
                        if b > n_batches - 1:
                            b = n_batches - 1
                        acc_evt_v[b, 0] += w
                        acc_evt_v[b, 1] += 1.0
                        if w > 0.0:
                            acc_evt_v[b, 2] += 1.0
                    srv[nsrv] = qid
                    nsrv += 1
            if nsrv + nq_len + ncont > n:
                raise AssertionError("census exceeded capacity (kernel bug)")

        in_system_end = nsrv + nq_len + ncont + hq_len
        hq_end = hq_len
    finally:
        free(srv); free(cont); free(nq); free(hq)
        free(visits); free(needy_acc); free(hold_acc); free(mark); free(freelist)

    return {
        "hq_end": hq_end,
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
