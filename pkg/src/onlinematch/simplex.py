"""A small dense two-phase tableau simplex.

It exists as a second, independent LP backend for cross-checking HiGHS on
small models (a few thousand variables at most). Dantzig pricing, with a
switch to Bland's rule after a run of degenerate pivots.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-9


def _pivot(T, r, c):
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    nz = np.flatnonzero(np.abs(col) > 0)
    if nz.size:
        T[nz] -= np.outer(col[nz], T[r])


def _run(T, basis, allowed, max_iter):
    """Minimise the objective in the last row of T; returns (status, iterations)."""
    m = T.shape[0] - 1
    it = 0
    degenerate = 0
    while it < max_iter:
        cost = T[m, :-1]
        cand = np.flatnonzero((cost < -EPS) & allowed)
        if cand.size == 0:
            return "optimal", it
        if degenerate > 50:
            c = int(cand[0])
        else:
            c = int(cand[np.argmin(cost[cand])])
        col = T[:m, c]
        pos = np.flatnonzero(col > EPS)
        if pos.size == 0:
            return "unbounded", it
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + EPS * max(1.0, abs(best))]
        r = int(ties[np.argmin(basis[ties])])
        degenerate = degenerate + 1 if best <= EPS else 0
        _pivot(T, r, c)
        basis[r] = c
        it += 1
    return "limit", it


def solve_dense(c, A, rel, b, lb, ub, maximize=False, max_iter=50_000):
    """Solve ``opt c.x  s.t.  A x (rel) b,  lb <= x <= ub``.

    ``rel`` holds one of '<=', '=', '>=' per row. Returns
    ``(status, x, objective, iterations)`` with status in
    {'optimal', 'infeasible', 'unbounded', 'limit'}.
    """
    c = np.asarray(c, float)
    A = np.asarray(A, float).reshape(-1, c.size)
    b = np.asarray(b, float)
    lb = np.asarray(lb, float)
    ub = np.asarray(ub, float)
    nvar = c.size
    if maximize:
        c = -c

    # x = shift + M y, y >= 0
    cols = []  # (original var, sign)
    shift = np.zeros(nvar)
    extra_rows = []
    for j in range(nvar):
        if np.isfinite(lb[j]):
            shift[j] = lb[j]
            cols.append((j, 1.0))
            if np.isfinite(ub[j]):
                extra_rows.append((len(cols) - 1, ub[j] - lb[j]))
        elif np.isfinite(ub[j]):
            shift[j] = ub[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    M = np.zeros((nvar, ny))
    for k, (j, s) in enumerate(cols):
        M[j, k] = s

    rows = A @ M
    rhs = b - A @ shift
    rels = list(rel)
    if extra_rows:
        ext = np.zeros((len(extra_rows), ny))
        for r, (k, cap) in enumerate(extra_rows):
            ext[r, k] = 1.0
        rows = np.vstack([rows, ext])
        rhs = np.concatenate([rhs, [cap for _, cap in extra_rows]])
        rels += ["<="] * len(extra_rows)
    m = rows.shape[0]
    for i in range(m):
        if rhs[i] < 0:
            rows[i] *= -1
            rhs[i] *= -1
            rels[i] = {"<=": ">=", ">=": "<=", "=": "="}[rels[i]]

    n_slack = sum(1 for r in rels if r != "=")
    n_art = sum(1 for r in rels if r != "<=")
    N = ny + n_slack + n_art
    T = np.zeros((m + 1, N + 1))
    T[:m, :ny] = rows
    T[:m, -1] = rhs
    basis = np.empty(m, dtype=np.int64)
    s_idx, a_idx = ny, ny + n_slack
    art_cols = []
    for i, r in enumerate(rels):
        if r == "<=":
            T[i, s_idx] = 1.0
            basis[i] = s_idx
            s_idx += 1
        else:
            if r == ">=":
                T[i, s_idx] = -1.0
                s_idx += 1
            T[i, a_idx] = 1.0
            basis[i] = a_idx
            art_cols.append(a_idx)
            a_idx += 1

    total_it = 0
    is_art = np.zeros(N, dtype=bool)
    is_art[art_cols] = True
    if art_cols:
        T[m, :] = 0.0
        T[m, art_cols] = 1.0
        for i in range(m):
            if is_art[basis[i]]:
                T[m] -= T[i]
        status, it = _run(T, basis, np.ones(N, dtype=bool), max_iter)
        total_it += it
        if status == "limit":
            return "limit", None, None, total_it
        if -T[m, -1] > 1e-7 * max(1.0, np.abs(rhs).max(initial=0.0)):
            return "infeasible", None, None, total_it
        # drive artificials out of the basis; drop redundant rows
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if is_art[basis[i]]:
                nz = np.flatnonzero((np.abs(T[i, :N]) > EPS) & ~is_art)
                if nz.size:
                    _pivot(T, i, int(nz[0]))
                    basis[i] = int(nz[0])
                else:
                    keep[i] = False
        if not keep.all():
            T = np.vstack([T[:m][keep], T[m:]])
            basis = basis[keep]
            m = basis.size

    cy = M.T @ c
    T[m, :] = 0.0
    T[m, :ny] = cy
    for i in range(m):
        if T[m, basis[i]] != 0:
            T[m] -= T[m, basis[i]] * T[i]
    status, it = _run(T, basis, ~is_art, max_iter - total_it)
    total_it += it
    if status != "optimal":
        return status, None, None, total_it
    y = np.zeros(N)
    y[basis] = T[:m, -1]
    x = shift + M @ y[:ny]
    obj = float(np.dot(c, x))
    return "optimal", x, (-obj if maximize else obj), total_it
