"""Pure-Python implementations of the hot kernels.

These mirror the Cython versions in ``_core.pyx`` exactly; the package
selects whichever is available at import time (see ``__init__``).
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

# State relabelling when a pair's orientation flips under a permutation:
# 0 none, 1 lo->hi, 2 hi->lo, 3 bi, 4 lo->hi+bi, 5 hi->lo+bi.
_FLIP = (0, 2, 1, 3, 5, 4)


def min_code_over_perms(digits, src, flip):
    """Minimum base-8 pair-state code over node permutations.

    ``digits`` holds one state per node pair in lexicographic pair order.
    ``src[p][k]`` is the source pair index feeding target position ``k``
    under permutation ``p``; ``flip[p][k]`` is 1 when that permutation
    reverses the pair's orientation.
    """
    best = -1
    n_perms = len(src)
    npairs = len(digits)
    for p in range(n_perms):
        sp = src[p]
        fp = flip[p]
        code = 0
        for k in range(npairs):
            d = digits[sp[k]]
            if fp[k]:
                d = _FLIP[d]
            code = (code << 3) | d
        if best < 0 or code < best:
            best = code
    return best


def bareiss_rank(mat):
    """Exact rank of an integer matrix by fraction-free elimination."""
    m = [list(row) for row in mat]
    nrows = len(m)
    ncols = len(m[0]) if nrows else 0
    rank = 0
    prev = 1
    row = 0
    for col in range(ncols):
        if row >= nrows:
            break
        piv_row = -1
        for i in range(row, nrows):
            if m[i][col] != 0:
                piv_row = i
                break
        if piv_row < 0:
            continue
        if piv_row != row:
            m[piv_row], m[row] = m[row], m[piv_row]
        p = m[row][col]
        mr = m[row]
        for i in range(row + 1, nrows):
            mi = m[i]
            mic = mi[col]
            for j in range(col + 1, ncols):
                mi[j] = (mi[j] * p - mic * mr[j]) // prev
            mi[col] = 0
        prev = p
        row += 1
        rank += 1
    return rank


def _sigma_hat(lam, om):
    ident = np.eye(lam.shape[0])
    t = np.linalg.inv(ident - lam)
    return t.T @ om @ t


def _loglik(sigma, s, n_samples):
    n = sigma.shape[0]
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        return None
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    trace = float(np.sum(s * np.linalg.inv(sigma)))
    return -0.5 * n_samples * (n * math.log(2.0 * math.pi) + logdet + trace)


def ricf_core(s, n_samples, pa, sib, lam0, om0, tol, max_iter, single_sweep):
    """Block-coordinate maximum-likelihood sweeps for one mixed graph.

    Returns ``(lam, om, loglik, iterations, converged, status)`` with status
    0 = ok, 1 = singular linear algebra, 2 = covariance not positive
    definite, 3 = likelihood decreased (numerical failure).
    """
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    lam = np.array(lam0, dtype=float)
    om = np.array(om0, dtype=float)
    ascent_slack = 1e-7

    sigma = _sigma_hat(lam, om)
    ll = _loglik(sigma, s, n_samples)
    if ll is None:
        return lam, om, float("nan"), 0, False, 2

    iterations = 0
    converged = False
    limit = 1 if single_sweep else max_iter
    while iterations < limit:
        ll_prev_sweep = ll
        for v in range(n):
            rest = [w for w in range(n) if w != v]
            pav = pa[v]
            sibv = sib[v]
            k = len(pav) + len(sibv)
            if k == 0:
                om[v, v] = s[v, v]
            else:
                bmat = (np.eye(n) - lam).T[rest, :]
                om_rest = om[np.ix_(rest, rest)]
                try:
                    oinv = np.linalg.inv(om_rest)
                except np.linalg.LinAlgError:
                    return lam, om, ll, iterations, False, 1
                cov_rows = np.zeros((k, n))
                for idx, u in enumerate(pav):
                    cov_rows[idx, u] = 1.0
                pos_in_rest = {w: i for i, w in enumerate(rest)}
                zrows = oinv @ bmat
                for idx, w in enumerate(sibv):
                    cov_rows[len(pav) + idx, :] = zrows[pos_in_rest[w], :]
                m1 = cov_rows @ s @ cov_rows.T
                m2 = cov_rows @ s[:, v]
                try:
                    coef = np.linalg.solve(m1, m2)
                except np.linalg.LinAlgError:
                    return lam, om, ll, iterations, False, 1
                lam[:, v] = 0.0
                for idx, u in enumerate(pav):
                    lam[u, v] = coef[idx]
                wcoef = coef[len(pav):]
                om[v, :] = 0.0
                om[:, v] = 0.0
                for idx, w in enumerate(sibv):
                    om[v, w] = wcoef[idx]
                    om[w, v] = wcoef[idx]
                resid = float(s[v, v] - coef @ m2)
                corr = 0.0
                if len(sibv) > 0:
                    sidx = [pos_in_rest[w] for w in sibv]
                    corr = float(wcoef @ oinv[np.ix_(sidx, sidx)] @ wcoef)
                om[v, v] = resid + corr
            sigma = _sigma_hat(lam, om)
            ll_new = _loglik(sigma, s, n_samples)
            if ll_new is None:
                return lam, om, ll, iterations, False, 2
            if ll_new < ll - ascent_slack * (1.0 + abs(ll)):
                return lam, om, ll_new, iterations, False, 3
            ll = ll_new
        iterations += 1
        if single_sweep:
            converged = True
            break
        if abs(ll - ll_prev_sweep) < tol * (1.0 + abs(ll)):
            converged = True
            break
    return lam, om, ll, iterations, converged, 0
