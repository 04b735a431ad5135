"""Compiled inner loops of the continuous-matching simulator.

Each event is processed by one call. Per-vertex state lives in flat arrays
owned by the Python simulator; the kernel returns how much was matched to
each neighbor so the caller can update its edge map.

Prices:
  WATER    price(v) = x_v
  EAGER    price(v) = f(x_v)
  HISTORY  price(v) = g(a_v, x_v), the inverse of v's frozen h-row
  GREEDY   no price; duals are split evenly
"""

from __future__ import annotations

import numpy as np
from numba import njit

GREEDY, WATER, EAGER, HISTORY = 0, 1, 2, 3

LEVEL_EPS = 1e-12
LINEAR_EPS = 1e-14


@njit(cache=True)
def f_from_diagonal(x, diag, offsum, n):
    """Inverse of the interpolated diagonal ``d(tau) = h(tau, tau)``.

    On cell i, ``d = a (1-z)^2 + b z (1-z) + c z^2`` with a, c the diagonal
    corners and b the sum of the two off-diagonal corners.
    """
    if x <= diag[0]:
        return 0.0
    if x >= diag[n]:
        return 1.0
    lo, hi = 0, n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if diag[mid] <= x:
            lo = mid
        else:
            hi = mid
    a = diag[lo]
    c = diag[lo + 1]
    b = offsum[lo]
    q = a - b + c
    if abs(q) <= LINEAR_EPS:
        z = (x - a) / (c - a)
    else:
        zl, zh = 0.0, 1.0
        for _ in range(64):
            zm = 0.5 * (zl + zh)
            d = a + (b - 2.0 * a) * zm + q * zm * zm
            if d <= x:
                zl = zm
            else:
                zh = zm
        z = 0.5 * (zl + zh)
    return (lo + z) / n


@njit(cache=True)
def row_inverse(row, x, n):
    """``sup{theta : row(theta) <= x}`` for a strictly increasing piecewise-linear row."""
    if x >= row[n]:
        return 1.0
    if x <= row[0]:
        return 0.0
    lo, hi = 0, n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if row[mid] <= x:
            lo = mid
        else:
            hi = mid
    return (lo + (x - row[lo]) / (row[lo + 1] - row[lo])) / n


@njit(cache=True)
def interpolated_row(values, tau, n, out):
    i = int(np.floor(tau * n))
    if i >= n:
        i = n - 1
    if i < 0:
        i = 0
    z = tau * n - i
    for j in range(n + 1):
        out[j] = (1.0 - z) * values[i, j] + z * values[i + 1, j]


@njit(cache=True)
def _price(mode, v, x, rows, diag, offsum, n):
    if mode == WATER:
        return x[v]
    if mode == EAGER:
        return f_from_diagonal(x[v], diag, offsum, n)
    return row_inverse(rows[v], x[v], n)


# -- a small binary heap keyed by (price, vertex id) -------------------------

@njit(cache=True)
def _less(k1, i1, k2, i2):
    return k1 < k2 or (k1 == k2 and i1 < i2)


@njit(cache=True)
def _push(keys, ids, size, k, i):
    pos = size
    keys[pos] = k
    ids[pos] = i
    while pos > 0:
        parent = (pos - 1) // 2
        if _less(keys[pos], ids[pos], keys[parent], ids[parent]):
            keys[pos], keys[parent] = keys[parent], keys[pos]
            ids[pos], ids[parent] = ids[parent], ids[pos]
            pos = parent
        else:
            break
    return size + 1


@njit(cache=True)
def _pop(keys, ids, size):
    size -= 1
    keys[0] = keys[size]
    ids[0] = ids[size]
    pos = 0
    while True:
        l = 2 * pos + 1
        r = l + 1
        best = pos
        if l < size and _less(keys[l], ids[l], keys[best], ids[best]):
            best = l
        if r < size and _less(keys[r], ids[r], keys[best], ids[best]):
            best = r
        if best == pos:
            break
        keys[pos], keys[best] = keys[best], keys[pos]
        ids[pos], ids[best] = ids[best], ids[pos]
        pos = best
    return size


@njit(cache=True)
def fill(u, nbrs, slot, x, alpha, departed, rows, diag, offsum, n, mode, step,
         priced_stop, amounts):
    """Water-fill ``u`` into its cheapest eligible neighbors.

    With ``priced_stop`` the loop ends once ``f(x_u) + price > 1`` (arrival
    rule); otherwise it runs until ``x_u`` reaches one or no neighbor is
    eligible (deadline rule). ``slot[v]`` maps a neighbor id to its position
    in ``nbrs`` / ``amounts``.
    """
    m = nbrs.size
    keys = np.empty(m)
    ids = np.empty(m, dtype=np.int64)
    size = 0
    for k in range(m):
        v = nbrs[k]
        if departed[v] or x[v] >= 1.0 - LEVEL_EPS:
            continue
        size = _push(keys, ids, size, _price(mode, v, x, rows, diag, offsum, n), v)
    while size > 0 and x[u] < 1.0 - LEVEL_EPS:
        p = keys[0]
        v = ids[0]
        if priced_stop:
            fu = x[u] if mode == WATER else f_from_diagonal(x[u], diag, offsum, n)
            if fu + p > 1.0:
                break
        d = step
        if 1.0 - x[u] <= d:
            d = 1.0 - x[u]
        if 1.0 - x[v] <= d:
            d = 1.0 - x[v]
        x[u] += d
        x[v] += d
        alpha[u] += (1.0 - p) * d
        alpha[v] += p * d
        amounts[slot[v]] += d
        size = _pop(keys, ids, size)
        if x[v] < 1.0 - LEVEL_EPS:
            size = _push(keys, ids, size, _price(mode, v, x, rows, diag, offsum, n), v)
    return amounts


@njit(cache=True)
def greedy_fill(u, nbrs, x, alpha, departed, amounts):
    """Match ``u`` maximally to eligible neighbors in ascending id order; duals split evenly."""
    for k in range(nbrs.size):
        if x[u] >= 1.0 - LEVEL_EPS:
            break
        v = nbrs[k]
        if departed[v] or x[v] >= 1.0 - LEVEL_EPS:
            continue
        d = min(1.0 - x[u], 1.0 - x[v])
        x[u] += d
        x[v] += d
        alpha[u] += 0.5 * d
        alpha[v] += 0.5 * d
        amounts[k] += d
    return amounts
