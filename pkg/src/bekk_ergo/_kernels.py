"""Compiled inner loops for long simulations."""
import numpy as np
from numba import njit

PSD = 0
CHOLESKY = 1


@njit(cache=True, nogil=True)
def _unvech(v, rows, cols, d):
    S = np.empty((d, d))
    for k in range(v.shape[0]):
        S[rows[k], cols[k]] = v[k]
        S[cols[k], rows[k]] = v[k]
    return S


@njit(cache=True, nogil=True)
def _root(S, mode):
    if mode == CHOLESKY:
        return np.linalg.cholesky(S)
    w, Q = np.linalg.eigh(S)
    d = S.shape[0]
    R = np.zeros((d, d))
    for k in range(d):
        s = np.sqrt(w[k]) if w[k] > 0.0 else 0.0
        for i in range(d):
            for j in range(d):
                R[i, j] += Q[i, k] * s * Q[j, k]
    return R


@njit(cache=True, nogil=True)
def garch_path(vech_c, A, B, sig_hist, x_hist, eps, rows, cols, mode, limit, out_sig, out_x):
    """
    Iterate the vech-form recursion for ``eps.shape[0]`` steps.

    ``sig_hist`` (p, h) and ``x_hist`` (q, d) hold the start state, most recent
    lag first; they are used as ring buffers and modified in place.  Returns
    the number of completed steps, which is smaller than requested when the
    Frobenius norm of Sigma exceeds ``limit`` or becomes non-finite.
    """
    n = eps.shape[0]
    h = vech_c.shape[0]
    p = B.shape[0]
    q = A.shape[0]
    d = x_hist.shape[1]
    sig_head = 0
    x_head = 0
    xx = np.empty(h)
    new = np.empty(h)
    for t in range(n):
        for k in range(h):
            new[k] = vech_c[k]
        for i in range(q):
            xi = x_hist[(x_head + i) % q]
            for k in range(h):
                xx[k] = xi[rows[k]] * xi[cols[k]]
            Ai = A[i]
            for r in range(h):
                acc = 0.0
                for c in range(h):
                    acc += Ai[r, c] * xx[c]
                new[r] += acc
        for j in range(p):
            sj = sig_hist[(sig_head + j) % p]
            Bj = B[j]
            for r in range(h):
                acc = 0.0
                for c in range(h):
                    acc += Bj[r, c] * sj[c]
                new[r] += acc
        fro = 0.0
        for k in range(h):
            v = new[k]
            fro += v * v if rows[k] == cols[k] else 2.0 * v * v
        if not np.isfinite(fro) or np.sqrt(fro) > limit:
            return t
        S = _unvech(new, rows, cols, d)
        R = _root(S, mode)
        sig_head = (sig_head + p - 1) % p
        x_head = (x_head + q - 1) % q
        for k in range(h):
            sig_hist[sig_head, k] = new[k]
            out_sig[t, k] = new[k]
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += R[i, j] * eps[t, j]
            x_hist[x_head, i] = acc
            out_x[t, i] = acc
    return n
