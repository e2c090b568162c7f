"""Numba-compiled inner loops for tree induction and the lasso solver."""
from __future__ import annotations

import numpy as np
from numba import njit

# kind codes used inside kernels
KIND_NUMERIC = 0
KIND_CATEGORICAL = 1


@njit(cache=True, nogil=True)
def best_split(X, y, kinds, min_leaf):
    """Scan candidate features for the lowest weighted Gini split.

    X: (n, k) float64 node rows over candidate columns, already in ascending
    global-feature order; y: (n,) uint8; kinds: (k,) int8.  Numeric features
    test `<= midpoint`, categorical features test `== code`.  Ties keep the
    first (lowest feature, then lowest threshold) candidate; a split must
    strictly reduce impurity and leave at least `min_leaf` rows per child.

    Returns (found, local_feature, value).
    """
    n, k = X.shape
    n1_total = 0
    for i in range(n):
        n1_total += y[i]
    n0_total = n - n1_total
    fn = float(n)
    parent = 1.0 - (n0_total / fn) ** 2 - (n1_total / fn) ** 2

    # improvements must clear an absolute epsilon so that mathematically tied
    # candidates (whose computed impurities differ only in the last ulps)
    # resolve to the first one scanned: lowest feature, then lowest threshold
    tie_eps = 1e-12
    best_imp = parent
    best_feat = -1
    best_value = 0.0
    found = False

    for j in range(k):
        col = np.empty(n)
        for i in range(n):
            col[i] = X[i, j]
        order = np.argsort(col)

        if kinds[j] == KIND_NUMERIC:
            c1 = 0
            for pos in range(n - 1):
                c1 += y[order[pos]]
                nl = pos + 1
                if col[order[pos]] == col[order[pos + 1]]:
                    continue
                nr = n - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                l1 = c1
                l0 = nl - l1
                r1 = n1_total - l1
                r0 = nr - r1
                gl = 1.0 - (l0 / nl) ** 2 - (l1 / nl) ** 2
                gr = 1.0 - (r0 / nr) ** 2 - (r1 / nr) ** 2
                imp = (nl * gl + nr * gr) / fn
                if imp < best_imp - tie_eps:
                    best_imp = imp
                    best_feat = j
                    best_value = 0.5 * (col[order[pos]] + col[order[pos + 1]])
                    found = True
        else:
            start = 0
            while start < n:
                stop = start
                g1 = 0
                while stop < n and col[order[stop]] == col[order[start]]:
                    g1 += y[order[stop]]
                    stop += 1
                nl = stop - start
                nr = n - nl
                if nl >= min_leaf and nr >= min_leaf and nr > 0:
                    l1 = g1
                    l0 = nl - l1
                    r1 = n1_total - l1
                    r0 = nr - r1
                    gl = 1.0 - (l0 / nl) ** 2 - (l1 / nl) ** 2
                    gr = 1.0 - (r0 / nr) ** 2 - (r1 / nr) ** 2
                    imp = (nl * gl + nr * gr) / fn
                    if imp < best_imp - tie_eps:
                        best_imp = imp
                        best_feat = j
                        best_value = col[order[start]]
                        found = True
                start = stop

    return found, best_feat, best_value


@njit(cache=True, nogil=True, fastmath=True, inline="always")
def _cd_pass(X, w, z, coef, b0, lam, r, wsum, denom, active, full):
    """One coordinate-descent sweep; returns (new_b0, max coefficient change).

    `full` sweeps every coordinate (refreshing the active mask), otherwise
    only coordinates currently marked active are updated.  The threshold
    carries a relative slack so a coordinate sitting exactly on the penalty
    boundary (lambda = lambda_max) lands on zero regardless of summation
    order.
    """
    n, p = X.shape
    delta = 0.0
    slack = lam * 1e-12

    num = 0.0
    for i in range(n):
        num += w[i] * r[i]
    db0 = num / wsum
    if db0 != 0.0:
        b0 += db0
        for i in range(n):
            r[i] -= db0
        if abs(db0) > delta:
            delta = abs(db0)

    for j in range(p):
        if not full and active[j] == 0:
            continue
        if denom[j] <= 0.0:
            continue
        old = coef[j]
        num = 0.0
        for i in range(n):
            num += w[i] * X[i, j] * r[i]
        num = num / n + denom[j] * old
        if num > lam + slack:
            new = (num - lam) / denom[j]
        elif num < -lam - slack:
            new = (num + lam) / denom[j]
        else:
            new = 0.0
        d = new - old
        if d != 0.0:
            coef[j] = new
            for i in range(n):
                r[i] -= X[i, j] * d
            if abs(d) > delta:
                delta = abs(d)
        active[j] = 1 if new != 0.0 else 0

    return b0, delta


@njit(cache=True, nogil=True, fastmath=True)
def cd_weighted_lasso(X, w, z, coef, b0, lam, tol, max_pass):
    """Cyclic coordinate descent on a weighted penalized least-squares model:

        (1/(2N)) sum_i w_i (z_i - b0 - x_i . coef)^2 + lam * sum_j |coef_j|

    with an unpenalized intercept.  `coef` is updated in place; returns the
    new intercept.  Soft-thresholding maps |numerator| <= lam to exactly zero.

    After each full sweep, only the active (nonzero) coordinates are cycled
    until they stabilize; convergence requires a full sweep to move nothing.
    """
    n, p = X.shape
    r = np.empty(n)
    for i in range(n):
        acc = z[i] - b0
        for j in range(p):
            if coef[j] != 0.0:
                acc -= X[i, j] * coef[j]
        r[i] = acc

    wsum = 0.0
    for i in range(n):
        wsum += w[i]

    denom = np.empty(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += w[i] * X[i, j] * X[i, j]
        denom[j] = s / n

    active = np.zeros(p, dtype=np.uint8)
    for j in range(p):
        if coef[j] != 0.0:
            active[j] = 1

    passes = 0
    while passes < max_pass:
        b0, delta = _cd_pass(X, w, z, coef, b0, lam, r, wsum, denom, active, True)
        passes += 1
        if delta < tol:
            break
        while passes < max_pass:
            b0, delta = _cd_pass(X, w, z, coef, b0, lam, r, wsum, denom, active, False)
            passes += 1
            if delta < tol:
                break

    return b0
