"""Real-valued variation operators.

Each operator maps a (k, n) parent array to one child genome. Results may
fall outside the box; callers apply :func:`reflect`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

_TINY = 1e-14


def reflect(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Fold values back into [lower, upper] by mirror reflection at the bounds."""
    width = upper - lower
    y = np.mod(x - lower, 2.0 * width)
    y = np.where(y > width, 2.0 * width - y, y)
    folded = np.clip(lower + y, lower, upper)
    # in-bounds genes pass through untouched (the fold is not exact in floating point)
    return np.where((x >= lower) & (x <= upper), x, folded)


def sbx(parents, lower, upper, rng, eta=15.0, swap=0.5):
    """Simulated binary crossover (bounded form); returns one of the two children."""
    p1, p2 = parents[0], parents[1]
    c1, c2 = p1.copy(), p2.copy()
    for i in range(p1.size):
        if rng.random() > swap or abs(p1[i] - p2[i]) <= _TINY:
            continue
        y1, y2 = min(p1[i], p2[i]), max(p1[i], p2[i])
        lb, ub = lower[i], upper[i]
        u = rng.random()
        dy = y2 - y1
        expo = 1.0 / (eta + 1.0)

        def betaq(beta):
            alpha = 2.0 - beta ** -(eta + 1.0)
            if u <= 1.0 / alpha:
                return (u * alpha) ** expo
            return (1.0 / (2.0 - u * alpha)) ** expo

        a = 0.5 * ((y1 + y2) - betaq(1.0 + 2.0 * (y1 - lb) / dy) * dy)
        b = 0.5 * ((y1 + y2) + betaq(1.0 + 2.0 * (ub - y2) / dy) * dy)
        a, b = min(max(a, lb), ub), min(max(b, lb), ub)
        if rng.random() < 0.5:
            a, b = b, a
        c1[i], c2[i] = a, b
    return c1 if rng.random() < 0.5 else c2


def polynomial_mutation(x, lower, upper, rng, eta=20.0, rate=None):
    y = x.copy()
    n = y.size
    rate = 1.0 / n if rate is None else rate
    for i in range(n):
        if rng.random() >= rate:
            continue
        lb, ub = lower[i], upper[i]
        span = ub - lb
        if span <= 0:
            continue
        d1 = (y[i] - lb) / span
        d2 = (ub - y[i]) / span
        u = rng.random()
        p = 1.0 / (eta + 1.0)
        if u < 0.5:
            val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
            dq = val ** p - 1.0
        else:
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
            dq = 1.0 - val ** p
        y[i] = min(max(y[i] + dq * span, lb), ub)
    return y


def differential_evolution(parents, lower, upper, rng, cr=0.1, f=0.5):
    """DE/rand/1/bin: target ``parents[0]``, base ``parents[1]``, difference of the rest."""
    target, base, a, b = parents[:4]
    n = target.size
    child = target.copy()
    jrand = rng.integers(n)
    for i in range(n):
        if i == jrand or rng.random() < cr:
            child[i] = base[i] + f * (a[i] - b[i])
    return child


def _orthogonalize(v, basis):
    for e in basis:
        v = v - np.dot(v, e) * e
    return v


def pcx(parents, lower, upper, rng, eta=0.1, zeta=0.1):
    """Parent-centric crossover around the last parent."""
    k = parents.shape[0]
    g = parents.mean(axis=0)
    d = parents[-1] - g
    basis = []
    dn = np.linalg.norm(d)
    if dn > _TINY:
        basis.append(d / dn)
    dist = 0.0
    perp = []
    for i in range(k - 1):
        v = _orthogonalize(parents[i] - g, basis + perp)
        vn = np.linalg.norm(v)
        if vn > _TINY:
            dist += vn
            perp.append(v / vn)
    dist /= max(k - 1, 1)
    child = parents[-1] + rng.normal(0.0, zeta) * d
    for e in perp:
        child = child + rng.normal(0.0, eta) * dist * e
    return child


def spx(parents, lower, upper, rng, expansion=3.0):
    """Simplex crossover with the given expansion rate."""
    k = parents.shape[0]
    g = parents.mean(axis=0)
    x = g + expansion * (parents - g)
    c = np.zeros_like(g)
    for i in range(1, k):
        r = rng.random() ** (1.0 / i)
        c = r * (x[i - 1] - x[i] + c)
    return x[-1] + c


def undx(parents, lower, upper, rng, zeta=0.5, eta=0.35):
    """Unimodal normal distribution crossover (multi-parent form).

    The first k-1 parents span the primary search directions; the distance of
    the last parent from that subspace scales the orthogonal noise.
    """
    k, n = parents.shape
    g = parents[:-1].mean(axis=0)
    primary, mags = [], []
    for i in range(k - 1):
        v = parents[i] - g
        w = _orthogonalize(v, primary)
        wn = np.linalg.norm(w)
        if wn > _TINY:
            primary.append(w / wn)
            mags.append(np.linalg.norm(v))
    dist = np.linalg.norm(_orthogonalize(parents[-1] - g, primary))
    child = g.copy()
    for e, mag in zip(primary, mags):
        child = child + rng.normal(0.0, zeta) * mag * e
    # orthonormal complement of the primary subspace
    rest = n - len(primary)
    if rest > 0 and dist > _TINY:
        q, _ = np.linalg.qr(np.column_stack(primary + [np.eye(n)[:, i] for i in range(n)])
                            if primary else np.eye(n))
        for j in range(len(primary), n):
            child = child + rng.normal(0.0, eta / np.sqrt(n)) * dist * q[:, j]
    return child


def uniform_mutation(parents, lower, upper, rng, rate=None):
    x = parents[0].copy()
    rate = 1.0 / x.size if rate is None else rate
    for i in range(x.size):
        if rng.random() < rate:
            x[i] = rng.uniform(lower[i], upper[i])
    return x


@dataclass(frozen=True)
class Operator:
    name: str
    arity: int
    apply: Callable
    mutate_after: bool = True


OPERATORS = {
    "sbx": Operator("sbx", 2, sbx),
    "de": Operator("de", 4, differential_evolution),
    "pcx": Operator("pcx", 10, pcx),
    "spx": Operator("spx", 10, spx),
    "undx": Operator("undx", 10, undx),
    "um": Operator("um", 1, uniform_mutation, mutate_after=False),
}
DEFAULT_OPERATORS = tuple(OPERATORS)
