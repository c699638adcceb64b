# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled daily mass-balance and hypervolume sampling kernels.

Each realization is simulated independently, so the outer loop over
realizations runs in an OpenMP ``prange``; results do not depend on the
thread count.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp

cnp.import_array()


cdef inline double _interp(double x, const double[::1] xp, const double[::1] fp) noexcept nogil:
    cdef Py_ssize_t n = xp.shape[0]
    cdef Py_ssize_t j
    if x <= xp[0]:
        return fp[0]
    if x >= xp[n - 1]:
        return fp[n - 1]
    j = 0
    while xp[j + 1] <= x:
        j += 1
    return fp[j] + (fp[j + 1] - fp[j]) / (xp[j + 1] - xp[j]) * (x - xp[j])


cdef inline double _rbf(double ns, const double[::1] centers, const double[::1] radii,
                        double qhp) noexcept nogil:
    cdef Py_ssize_t k, K = centers.shape[0]
    cdef double acc = 0.0, d
    for k in range(K):
        d = ns - centers[k]
        acc += exp(-(d * d) / (radii[k] * radii[k]))
    acc = qhp * (acc / K)
    if acc > qhp:
        return qhp
    return acc


cdef inline double _power(double flow, double head, double eta, double gamma,
                          double cap) noexcept nogil:
    # flow in Mm3/day -> m3/s; watts -> GW
    cdef double p = eta * gamma * (flow * 1.0e6 / 86400.0) * head * 1.0e-9
    if p > cap:
        return cap
    return p


def simulate_batch(const double[:, ::1] inflows, const long[::1] cyc,
                   const double[::1] mef, const double[::1] demand,
                   double s0, double capacity, double qhp, double denom,
                   const double[::1] centers, const double[::1] radii, bint mef_first,
                   const double[::1] storage_tbl, const double[::1] head_tbl,
                   int threads=1):
    """Full per-day traces for every realization.

    Returns arrays (storage, efr, dr, hpr, ewr, head), each shaped (NR, T).
    """
    cdef Py_ssize_t NR = inflows.shape[0], T = inflows.shape[1]
    out_s = np.empty((NR, T))
    out_e = np.empty((NR, T))
    out_d = np.empty((NR, T))
    out_h = np.empty((NR, T))
    out_w = np.empty((NR, T))
    out_H = np.empty((NR, T))
    cdef double[:, ::1] S = out_s, E = out_e, D = out_d, HP = out_h, W = out_w, HD = out_H
    cdef Py_ssize_t j, t
    cdef long c
    cdef double s, avail, efr, dr, hpr, ewr, want
    for j in prange(NR, nogil=True, num_threads=threads, schedule="static"):
        s = s0
        for t in range(T):
            c = cyc[t]
            want = _rbf(s / denom, centers, radii, qhp)
            avail = s + inflows[j, t]
            if mef_first:
                efr = mef[c] if mef[c] < avail else avail
                avail = avail - efr
                dr = demand[c] if demand[c] < avail else avail
                avail = avail - dr
                hpr = want if want < avail else avail
                avail = avail - hpr
            else:
                dr = demand[c] if demand[c] < avail else avail
                avail = avail - dr
                hpr = want if want < avail else avail
                avail = avail - hpr
                efr = mef[c] if mef[c] < avail else avail
                avail = avail - efr
            if avail > capacity:
                ewr = avail - capacity
                s = capacity
            else:
                ewr = 0.0
                s = avail
            S[j, t] = s
            E[j, t] = efr
            D[j, t] = dr
            HP[j, t] = hpr
            W[j, t] = ewr
            HD[j, t] = _interp(s, storage_tbl, head_tbl)
    return out_s, out_e, out_d, out_h, out_w, out_H


def objective_sums(const double[:, ::1] inflows, const long[::1] cyc,
                   const double[::1] mef, const double[::1] demand, const double[::1] flood,
                   double s0, double capacity, double qhp, double denom,
                   const double[::1] centers, const double[::1] radii, bint mef_first,
                   const double[::1] storage_tbl, const double[::1] head_tbl,
                   double eta, double gamma, double hp_cap,
                   double canal_cap, double canal_head, bint total_basis,
                   int threads=1):
    """Per-realization sums (energy GWh, deficit Mm3, MEF-met days, flood-safe days).

    Same dynamics as :func:`simulate_batch` without materializing traces.
    """
    cdef Py_ssize_t NR = inflows.shape[0], T = inflows.shape[1]
    out = np.zeros((NR, 4))
    cdef double[:, ::1] O = out
    cdef Py_ssize_t j, t
    cdef long c
    cdef double s, avail, efr, dr, hpr, ewr, want, rel, basis, head
    cdef double energy, deficit, nef, nft
    for j in prange(NR, nogil=True, num_threads=threads, schedule="static"):
        s = s0
        energy = 0.0
        deficit = 0.0
        nef = 0.0
        nft = 0.0
        for t in range(T):
            c = cyc[t]
            want = _rbf(s / denom, centers, radii, qhp)
            avail = s + inflows[j, t]
            if mef_first:
                efr = mef[c] if mef[c] < avail else avail
                avail = avail - efr
                dr = demand[c] if demand[c] < avail else avail
                avail = avail - dr
                hpr = want if want < avail else avail
                avail = avail - hpr
            else:
                dr = demand[c] if demand[c] < avail else avail
                avail = avail - dr
                hpr = want if want < avail else avail
                avail = avail - hpr
                efr = mef[c] if mef[c] < avail else avail
                avail = avail - efr
            if avail > capacity:
                ewr = avail - capacity
                s = capacity
            else:
                ewr = 0.0
                s = avail
            head = _interp(s, storage_tbl, head_tbl)
            energy = energy + 24.0 * _power(hpr, head, eta, gamma, hp_cap)
            if canal_cap > 0.0:
                energy = energy + 24.0 * _power(dr, canal_head, eta, gamma, canal_cap)
            if demand[c] > dr:
                deficit = deficit + (demand[c] - dr)
            rel = efr + hpr + ewr
            basis = rel if total_basis else efr
            if basis >= mef[c]:
                nef = nef + 1.0
            if rel < flood[c]:
                nft = nft + 1.0
        O[j, 0] = energy
        O[j, 1] = deficit
        O[j, 2] = nef
        O[j, 3] = nft
    return out


def dominated_count(const double[:, ::1] points, const double[:, ::1] samples, int threads=1):
    """Number of ``samples`` weakly dominated (minimization) by any of ``points``."""
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1], N = samples.shape[0]
    cdef Py_ssize_t i, k, a
    cdef long total = 0
    cdef bint dom
    hits = np.zeros(N, dtype=np.int8)
    cdef signed char[::1] H = hits
    for i in prange(N, nogil=True, num_threads=threads, schedule="static"):
        for k in range(n):
            dom = True
            for a in range(d):
                if points[k, a] > samples[i, a]:
                    dom = False
                    break
            if dom:
                H[i] = 1
                break
    for i in range(N):
        total += H[i]
    return total
