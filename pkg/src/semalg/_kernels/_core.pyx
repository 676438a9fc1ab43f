# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: canonical-code search, exact integer rank, RICF sweeps.

Semantics must match ``_pure.py`` exactly; the test suite runs both backends
against each other.
"""
import numpy as np

cimport cython
from libc.math cimport fabs, log, sqrt, isnan

cdef double _TWO_PI = 6.283185307179586476925287

BACKEND = "compiled"

cdef int[6] _FLIP
_FLIP[0] = 0
_FLIP[1] = 2
_FLIP[2] = 1
_FLIP[3] = 3
_FLIP[4] = 5
_FLIP[5] = 4


def min_code_over_perms(const unsigned char[::1] digits,
                        const int[:, ::1] src,
                        const unsigned char[:, ::1] flip):
    cdef Py_ssize_t n_perms = src.shape[0]
    cdef Py_ssize_t npairs = digits.shape[0]
    cdef unsigned long long best = 0
    cdef unsigned long long code
    cdef int have = 0
    cdef Py_ssize_t p, k
    cdef int d
    for p in range(n_perms):
        code = 0
        for k in range(npairs):
            d = digits[src[p, k]]
            if flip[p, k]:
                d = _FLIP[d]
            code = (code << 3) | <unsigned long long>d
        if not have or code < best:
            best = code
            have = 1
    return best


def bareiss_rank(mat):
    """Exact rank of an integer matrix (arbitrary-precision entries)."""
    cdef list m = [list(r_) for r_ in mat]
    cdef Py_ssize_t nrows = len(m)
    cdef Py_ssize_t ncols = len(<list>m[0]) if nrows else 0
    cdef Py_ssize_t rank = 0, row = 0, col, i, j, piv_row
    cdef list mi, mr
    cdef object prev = 1
    cdef object p, mic
    for col in range(ncols):
        if row >= nrows:
            break
        piv_row = -1
        for i in range(row, nrows):
            if (<list>m[i])[col] != 0:
                piv_row = i
                break
        if piv_row < 0:
            continue
        if piv_row != row:
            m[piv_row], m[row] = m[row], m[piv_row]
        mr = <list>m[row]
        p = mr[col]
        for i in range(row + 1, nrows):
            mi = <list>m[i]
            mic = mi[col]
            for j in range(col + 1, ncols):
                mi[j] = (mi[j] * p - mic * mr[j]) // prev
            mi[col] = 0
        prev = p
        row += 1
        rank += 1
    return rank


cdef int _inv(double[:, ::1] a, double[:, ::1] out, int n) nogil:
    """Gauss-Jordan inverse; destroys ``a``.  Returns 0 on success."""
    cdef int i, j, k, piv
    cdef double best, factor, tmp
    for i in range(n):
        for j in range(n):
            out[i, j] = 1.0 if i == j else 0.0
    for k in range(n):
        piv = -1
        best = 0.0
        for i in range(k, n):
            if fabs(a[i, k]) > best:
                best = fabs(a[i, k])
                piv = i
        if piv < 0 or best < 1e-300:
            return 1
        if piv != k:
            for j in range(n):
                tmp = a[k, j]; a[k, j] = a[piv, j]; a[piv, j] = tmp
                tmp = out[k, j]; out[k, j] = out[piv, j]; out[piv, j] = tmp
        factor = a[k, k]
        for j in range(n):
            a[k, j] /= factor
            out[k, j] /= factor
        for i in range(n):
            if i == k:
                continue
            factor = a[i, k]
            if factor != 0.0:
                for j in range(n):
                    a[i, j] -= factor * a[k, j]
                    out[i, j] -= factor * out[k, j]
    return 0


cdef int _chol_logdet(double[:, ::1] a, int n, double* logdet) nogil:
    """In-place Cholesky; returns 1 when not positive definite."""
    cdef int i, j, k
    cdef double acc
    logdet[0] = 0.0
    for j in range(n):
        acc = a[j, j]
        for k in range(j):
            acc -= a[j, k] * a[j, k]
        if acc <= 0.0 or isnan(acc):
            return 1
        a[j, j] = sqrt(acc)
        logdet[0] += 2.0 * log(a[j, j])
        for i in range(j + 1, n):
            acc = a[i, j]
            for k in range(j):
                acc -= a[i, k] * a[j, k]
            a[i, j] = acc / a[j, j]
    return 0


def ricf_core(s_in, n_samples, pa, sib, lam0, om0, double tol,
              int max_iter, bint single_sweep):
    """Mirror of ``_pure.ricf_core``; see there for the contract."""
    cdef double[:, ::1] s = np.ascontiguousarray(s_in, dtype=np.float64)
    cdef int n = s.shape[0]
    lam_arr = np.array(lam0, dtype=np.float64, order="C")
    om_arr = np.array(om0, dtype=np.float64, order="C")
    cdef double[:, ::1] lam = lam_arr
    cdef double[:, ::1] om = om_arr

    cdef int kmax = 2 * (n - 1) if n > 1 else 1
    scratch_n = np.empty((n, n), dtype=np.float64)
    tmat_a = np.empty((n, n), dtype=np.float64)
    sig_a = np.empty((n, n), dtype=np.float64)
    siginv_a = np.empty((n, n), dtype=np.float64)
    omrest_a = np.empty((max(n - 1, 1), max(n - 1, 1)), dtype=np.float64)
    oinv_a = np.empty_like(omrest_a)
    covrows_a = np.empty((kmax, n), dtype=np.float64)
    m1_a = np.empty((kmax, kmax), dtype=np.float64)
    m2_a = np.empty(kmax, dtype=np.float64)
    coef_a = np.empty(kmax, dtype=np.float64)
    srow_a = np.empty(kmax, dtype=np.float64)
    cdef double[:, ::1] scr = scratch_n
    cdef double[:, ::1] tmat = tmat_a
    cdef double[:, ::1] sig = sig_a
    cdef double[:, ::1] siginv = siginv_a
    cdef double[:, ::1] omrest = omrest_a
    cdef double[:, ::1] oinv = oinv_a
    cdef double[:, ::1] covrows = covrows_a
    cdef double[:, ::1] m1 = m1_a
    cdef double[::1] m2 = m2_a
    cdef double[::1] coef = coef_a

    # Flatten the adjacency lists once.
    pa_idx = [np.asarray(p, dtype=np.int32) for p in pa]
    sib_idx = [np.asarray(p, dtype=np.int32) for p in sib]

    cdef double ascent_slack = 1e-7
    cdef double ll, ll_new, ll_prev_sweep, logdet, trace, resid, corr, acc
    cdef int iterations = 0, limit, status
    cdef bint converged = False
    cdef int v, i, j, k, u, w, npa, nsib, kdim, idx, jdx, rest_i

    status = _loglik_c(lam, om, s, n, n_samples, scr, tmat, sig, siginv, &ll)
    if status != 0:
        return lam_arr, om_arr, float("nan"), 0, False, 2

    limit = 1 if single_sweep else max_iter
    cdef int[::1] pav
    cdef int[::1] sibv
    while iterations < limit:
        ll_prev_sweep = ll
        for v in range(n):
            pav = pa_idx[v]
            sibv = sib_idx[v]
            npa = pav.shape[0]
            nsib = sibv.shape[0]
            kdim = npa + nsib
            if kdim == 0:
                om[v, v] = s[v, v]
            else:
                # omrest = om with row/col v removed; invert it.
                for i in range(n):
                    if i == v:
                        continue
                    idx = i if i < v else i - 1
                    for j in range(n):
                        if j == v:
                            continue
                        jdx = j if j < v else j - 1
                        scr[idx, jdx] = om[i, j]
                for i in range(n - 1):
                    for j in range(n - 1):
                        omrest[i, j] = scr[i, j]
                if _inv(omrest, oinv, n - 1) != 0:
                    return lam_arr, om_arr, ll, iterations, False, 1
                # covariate rows: parents give unit rows, siblings give
                # pseudo-variable rows oinv[w,:] @ (I - lam)^T[rest,:].
                for i in range(kdim):
                    for j in range(n):
                        covrows[i, j] = 0.0
                for idx in range(npa):
                    covrows[idx, pav[idx]] = 1.0
                for idx in range(nsib):
                    w = sibv[idx]
                    rest_i = w if w < v else w - 1
                    for j in range(n):
                        acc = 0.0
                        for i in range(n):
                            if i == v:
                                continue
                            jdx = i if i < v else i - 1
                            # (I - lam)^T[i, j] = (I - lam)[j, i]
                            acc += oinv[rest_i, jdx] * \
                                ((1.0 if j == i else 0.0) - lam[j, i])
                        covrows[npa + idx, j] = acc
                # m1 = covrows @ s @ covrows.T ; m2 = covrows @ s[:, v]
                for i in range(kdim):
                    for j in range(n):
                        acc = 0.0
                        for k in range(n):
                            acc += covrows[i, k] * s[k, j]
                        srow_a[j] = acc
                    for j in range(kdim):
                        acc = 0.0
                        for k in range(n):
                            acc += srow_a[k] * covrows[j, k]
                        m1[i, j] = acc
                    acc = 0.0
                    for k in range(n):
                        acc += covrows[i, k] * s[k, v]
                    m2[i] = acc
                    coef[i] = m2[i]
                if _solve_c(m1, coef, kdim) != 0:
                    return lam_arr, om_arr, ll, iterations, False, 1
                for i in range(n):
                    lam[i, v] = 0.0
                for idx in range(npa):
                    lam[pav[idx], v] = coef[idx]
                for i in range(n):
                    om[v, i] = 0.0
                    om[i, v] = 0.0
                for idx in range(nsib):
                    w = sibv[idx]
                    om[v, w] = coef[npa + idx]
                    om[w, v] = coef[npa + idx]
                resid = s[v, v]
                for i in range(kdim):
                    resid -= coef[i] * m2[i]
                corr = 0.0
                for idx in range(nsib):
                    for jdx in range(nsib):
                        i = sibv[idx]
                        j = sibv[jdx]
                        corr += coef[npa + idx] * coef[npa + jdx] * \
                            oinv[i if i < v else i - 1, j if j < v else j - 1]
                om[v, v] = resid + corr
            status = _loglik_c(lam, om, s, n, n_samples,
                               scr, tmat, sig, siginv, &ll_new)
            if status != 0:
                return lam_arr, om_arr, ll, iterations, False, 2
            if ll_new < ll - ascent_slack * (1.0 + fabs(ll)):
                return lam_arr, om_arr, ll_new, iterations, False, 3
            ll = ll_new
        iterations += 1
        if single_sweep:
            converged = True
            break
        if fabs(ll - ll_prev_sweep) < tol * (1.0 + fabs(ll)):
            converged = True
            break
    return lam_arr, om_arr, ll, iterations, converged, 0


cdef int _solve_c(double[:, ::1] a, double[::1] b, int k) nogil:
    """Solve a k-by-k system in place with partial pivoting."""
    cdef int i, j, p, piv
    cdef double best, factor, tmp
    for p in range(k):
        piv = -1
        best = 0.0
        for i in range(p, k):
            if fabs(a[i, p]) > best:
                best = fabs(a[i, p])
                piv = i
        if piv < 0 or best < 1e-300:
            return 1
        if piv != p:
            for j in range(k):
                tmp = a[p, j]; a[p, j] = a[piv, j]; a[piv, j] = tmp
            tmp = b[p]; b[p] = b[piv]; b[piv] = tmp
        for i in range(p + 1, k):
            factor = a[i, p] / a[p, p]
            if factor != 0.0:
                for j in range(p, k):
                    a[i, j] -= factor * a[p, j]
                b[i] -= factor * b[p]
    for p in range(k - 1, -1, -1):
        tmp = b[p]
        for j in range(p + 1, k):
            tmp -= a[p, j] * b[j]
        b[p] = tmp / a[p, p]
    return 0


cdef int _loglik_c(double[:, ::1] lam, double[:, ::1] om, double[:, ::1] s,
                   int n, double n_samples,
                   double[:, ::1] scr, double[:, ::1] tmat,
                   double[:, ::1] sig, double[:, ::1] siginv,
                   double* out) nogil:
    """Gaussian profile log-likelihood at sigma = (I-lam)^-T om (I-lam)^-1."""
    cdef int i, j, k
    cdef double acc, logdet, trace
    for i in range(n):
        for j in range(n):
            scr[i, j] = (1.0 if i == j else 0.0) - lam[i, j]
    if _inv(scr, tmat, n) != 0:
        return 1
    # sig = tmat^T @ om @ tmat
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += tmat[k, i] * om[k, j]
            scr[i, j] = acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += scr[i, k] * tmat[k, j]
            sig[i, j] = acc
    for i in range(n):
        for j in range(n):
            scr[i, j] = sig[i, j]
    if _chol_logdet(scr, n, &logdet) != 0:
        return 1
    for i in range(n):
        for j in range(n):
            scr[i, j] = sig[i, j]
    if _inv(scr, siginv, n) != 0:
        return 1
    trace = 0.0
    for i in range(n):
        for j in range(n):
            trace += s[i, j] * siginv[i, j]
    out[0] = -0.5 * n_samples * (n * log(_TWO_PI) + logdet + trace)
    return 0
