"""Dense tableau simplex kernels (numba-compiled).

Standard form: ``max c @ y  s.t.  A y (<=|=|>=) b,  y >= 0`` with row senses
encoded as -1 (<=), 0 (=), +1 (>=).

Tableau layout: rows ``0..m-1`` are constraints, row ``m`` holds reduced
profits ``c_j - c_B B^-1 A_j`` (optimal when all are <= 0) and ``-z`` in the
last column. Columns: structural, slacks (one per inequality row, in row
order), artificials (one per >= or = row). Artificial columns are dropped
after phase 1; bound changes only touch structural and slack columns, so the
remaining tableau is enough for warm re-solves. Rows whose basic variable is
still an artificial (redundant equalities) keep its original index, which is
``>= art_start``.
"""

import numpy as np
from numba import njit

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3

PIVOT_TOL = 1e-9
COST_TOL = 1e-9


@njit(cache=True, nogil=True)
def _pivot(T, r, e):
    nrow, ncol = T.shape
    piv = T[r, e]
    for j in range(ncol):
        T[r, j] /= piv
    T[r, e] = 1.0
    for i in range(nrow):
        if i == r:
            continue
        f = T[i, e]
        if f != 0.0:
            for j in range(ncol):
                T[i, j] -= f * T[r, j]
            T[i, e] = 0.0


@njit(cache=True, nogil=True)
def primal(T, basis, m, n_allowed, max_iter):
    """Primal simplex over the first ``n_allowed`` columns.

    Dantzig's rule, switching to Bland's rule after ``5 * (rows + cols)``
    iterations. Returns ``(status, iterations)``.
    """
    last = T.shape[1] - 1
    bland_after = 5 * (m + n_allowed)
    it = 0
    while True:
        e = -1
        if it < bland_after:
            best = COST_TOL
            for j in range(n_allowed):
                if T[m, j] > best:
                    best = T[m, j]
                    e = j
        else:
            for j in range(n_allowed):
                if T[m, j] > COST_TOL:
                    e = j
                    break
        if e == -1:
            return OPTIMAL, it

        r = -1
        best_ratio = np.inf
        for i in range(m):
            a = T[i, e]
            if a > PIVOT_TOL:
                ratio = T[i, last] / a
                if r == -1 or ratio < best_ratio - 1e-12:
                    r = i
                    best_ratio = ratio
                elif ratio <= best_ratio + 1e-12 and basis[i] < basis[r]:
                    r = i
                    best_ratio = min(ratio, best_ratio)
        if r == -1:
            return UNBOUNDED, it

        _pivot(T, r, e)
        basis[r] = e
        for i in range(m):
            if T[i, last] < 0.0 and T[i, last] > -1e-11:
                T[i, last] = 0.0
        it += 1
        if it >= max_iter:
            return ITERATION_LIMIT, it


@njit(cache=True, nogil=True)
def dual(T, basis, m, n_allowed, art_start, feas_tol, max_iter):
    """Dual simplex from a dual-feasible tableau with some negative rhs.

    Rows whose basic variable is an artificial (redundant equalities) are
    inert. Bland-style lowest-index choices after ``5 * (rows + cols)``.
    """
    last = T.shape[1] - 1
    bland_after = 5 * (m + n_allowed)
    it = 0
    while True:
        r = -1
        worst = -feas_tol
        for i in range(m):
            if basis[i] >= art_start:
                continue
            if T[i, last] < worst:
                r = i
                if it >= bland_after:
                    break
                worst = T[i, last]
        if r == -1:
            return OPTIMAL, it

        e = -1
        best = np.inf
        for j in range(n_allowed):
            a = T[r, j]
            if a < -PIVOT_TOL:
                ratio = T[m, j] / a
                if ratio < best - 1e-12:
                    best = ratio
                    e = j
        if e == -1:
            return INFEASIBLE, it

        _pivot(T, r, e)
        basis[r] = e
        it += 1
        if it >= max_iter:
            return ITERATION_LIMIT, it


@njit(cache=True, nogil=True)
def solve_cold(A, b, senses, c, feas_tol):
    """Two-phase solve from scratch.

    Returns ``(status, T, basis, slack_col, art_start, iterations)``;
    ``slack_col[i]`` is the slack column of row ``i`` (-1 for equalities).
    """
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    senses = senses.copy()
    for i in range(m):
        if b[i] < 0.0:
            A[i, :] = -A[i, :]
            b[i] = -b[i]
            senses[i] = -senses[i]

    n_slack = 0
    n_art = 0
    for i in range(m):
        if senses[i] != 0:
            n_slack += 1
        if senses[i] >= 0:
            n_art += 1
    art_start = n + n_slack
    ncol = art_start + n_art
    last = ncol

    T = np.zeros((m + 1, ncol + 1))
    basis = np.empty(m, dtype=np.int64)
    slack_col = np.full(m, -1, dtype=np.int64)
    s = n
    a = art_start
    for i in range(m):
        T[i, :n] = A[i, :]
        T[i, last] = b[i]
        if senses[i] == -1:
            T[i, s] = 1.0
            slack_col[i] = s
            basis[i] = s
            s += 1
        elif senses[i] == 1:
            T[i, s] = -1.0
            slack_col[i] = s
            s += 1
            T[i, a] = 1.0
            basis[i] = a
            a += 1
        else:
            T[i, a] = 1.0
            basis[i] = a
            a += 1

    max_iter = 50 * (m + ncol) + 1000
    total_it = 0

    if n_art > 0:
        for j in range(art_start, ncol):
            T[m, j] = -1.0
        for i in range(m):
            if basis[i] >= art_start:
                for j in range(ncol + 1):
                    T[m, j] += T[i, j]
        status, it = primal(T, basis, m, ncol, max_iter)
        total_it += it
        if status == ITERATION_LIMIT:
            return ITERATION_LIMIT, T, basis, slack_col, art_start, total_it
        if T[m, last] > feas_tol:
            return INFEASIBLE, T, basis, slack_col, art_start, total_it
        # drive zero-level artificials out; rows with nothing to pivot on are redundant
        for i in range(m):
            if basis[i] >= art_start:
                e = -1
                big = PIVOT_TOL
                for j in range(art_start):
                    if abs(T[i, j]) > big:
                        big = abs(T[i, j])
                        e = j
                if e >= 0:
                    _pivot(T, i, e)
                    basis[i] = e

    for j in range(ncol + 1):
        T[m, j] = 0.0
    for j in range(n):
        T[m, j] = c[j]
    for i in range(m):
        bi = basis[i]
        if bi < n and c[bi] != 0.0:
            cb = c[bi]
            for j in range(ncol + 1):
                T[m, j] -= cb * T[i, j]
    T2 = np.empty((m + 1, art_start + 1))
    T2[:, :art_start] = T[:, :art_start]
    T2[:, art_start] = T[:, last]
    status, it = primal(T2, basis, m, art_start, max_iter)
    total_it += it
    return status, T2, basis, slack_col, art_start, total_it


@njit(cache=True, nogil=True)
def resolve(T, basis, art_start, feas_tol):
    """Re-optimize after a right-hand-side change: dual simplex, then primal cleanup."""
    m = T.shape[0] - 1
    max_iter = 50 * T.shape[1] + 1000
    status, it = dual(T, basis, m, art_start, art_start, feas_tol, max_iter)
    if status != OPTIMAL:
        return status, it
    status, it2 = primal(T, basis, m, art_start, max_iter)
    return status, it + it2


@njit(cache=True, nogil=True)
def extract(T, basis, n):
    m = T.shape[0] - 1
    last = T.shape[1] - 1
    y = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            y[basis[i]] = T[i, last]
    return y


@njit(cache=True, nogil=True)
def shift_column(T, col, delta):
    """rhs -= delta * column: the effect of raising a variable's lower bound by delta."""
    last = T.shape[1] - 1
    for i in range(T.shape[0]):
        T[i, last] -= delta * T[i, col]


def simplex(A, b, senses, c, feas_tol):
    """Cold two-phase solve; returns ``(status, y, iterations)``."""
    status, T, basis, _, _, it = solve_cold(A, b, senses, c, feas_tol)
    y = extract(T, basis, A.shape[1]) if status == OPTIMAL else np.zeros(A.shape[1])
    return status, y, it
