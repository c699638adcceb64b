"""Pure NumPy versions of the compiled kernels.

Vectorized across realizations and sequential in time. Signatures match
``resopt._kernels``; ``threads`` is accepted and ignored.
"""

from __future__ import annotations

import numpy as np


def _rbf(ns, centers, radii, qhp):
    acc = np.zeros_like(ns)
    for c, r in zip(centers, radii):
        d = ns - c
        acc += np.exp(-(d * d) / (r * r))
    return np.minimum(qhp * (acc / len(centers)), qhp)


def _step(s, q, m, dd, want, capacity, mef_first):
    avail = s + q
    if mef_first:
        efr = np.minimum(m, avail)
        avail = avail - efr
        dr = np.minimum(dd, avail)
        avail = avail - dr
        hpr = np.minimum(want, avail)
        avail = avail - hpr
    else:
        dr = np.minimum(dd, avail)
        avail = avail - dr
        hpr = np.minimum(want, avail)
        avail = avail - hpr
        efr = np.minimum(m, avail)
        avail = avail - efr
    spill = avail > capacity
    ewr = np.where(spill, avail - capacity, 0.0)
    s = np.where(spill, capacity, avail)
    return s, efr, dr, hpr, ewr


def _power(flow, head, eta, gamma, cap):
    return np.minimum(eta * gamma * (flow * 1.0e6 / 86400.0) * head * 1.0e-9, cap)


def simulate_batch(inflows, cyc, mef, demand, s0, capacity, qhp, denom, centers, radii,
                   mef_first, storage_tbl, head_tbl, threads=1):
    inflows = np.asarray(inflows, dtype=np.float64)
    NR, T = inflows.shape
    out = [np.empty((NR, T)) for _ in range(6)]
    s = np.full(NR, float(s0))
    for t in range(T):
        c = cyc[t]
        want = _rbf(s / denom, centers, radii, qhp)
        s, efr, dr, hpr, ewr = _step(s, inflows[:, t], mef[c], demand[c], want, capacity, mef_first)
        out[0][:, t] = s
        out[1][:, t] = efr
        out[2][:, t] = dr
        out[3][:, t] = hpr
        out[4][:, t] = ewr
        out[5][:, t] = np.interp(s, storage_tbl, head_tbl)
    return tuple(out)


def objective_sums(inflows, cyc, mef, demand, flood, s0, capacity, qhp, denom, centers, radii,
                   mef_first, storage_tbl, head_tbl, eta, gamma, hp_cap, canal_cap, canal_head,
                   total_basis, threads=1):
    inflows = np.asarray(inflows, dtype=np.float64)
    NR, T = inflows.shape
    s = np.full(NR, float(s0))
    energy = np.zeros(NR)
    deficit = np.zeros(NR)
    nef = np.zeros(NR)
    nft = np.zeros(NR)
    for t in range(T):
        c = cyc[t]
        want = _rbf(s / denom, centers, radii, qhp)
        s, efr, dr, hpr, ewr = _step(s, inflows[:, t], mef[c], demand[c], want, capacity, mef_first)
        head = np.interp(s, storage_tbl, head_tbl)
        energy += 24.0 * _power(hpr, head, eta, gamma, hp_cap)
        if canal_cap > 0.0:
            energy += 24.0 * _power(dr, canal_head, eta, gamma, canal_cap)
        deficit += np.maximum(demand[c] - dr, 0.0)
        rel = efr + hpr + ewr
        basis = rel if total_basis else efr
        nef += basis >= mef[c]
        nft += rel < flood[c]
    return np.column_stack([energy, deficit, nef, nft])


def dominated_count(points, samples, threads=1, chunk=65536):
    points = np.asarray(points, dtype=np.float64)
    samples = np.asarray(samples, dtype=np.float64)
    total = 0
    for i in range(0, samples.shape[0], chunk):
        block = samples[i:i + chunk]
        hit = np.zeros(block.shape[0], dtype=bool)
        for p in points:
            hit |= np.all(p <= block, axis=1)
        total += int(hit.sum())
    return total
