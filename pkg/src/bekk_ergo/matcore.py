"""
Dense kernels for symmetric matrices.

Symmetric matrices are plain ``(d, d)`` ndarrays and half-vectorisations are
1-d arrays of length ``d(d+1)/2``.  The half-vectorisation order is the
column-stacked lower triangle (diagonal included)::

    [[a, b, c],
     [b, d, e],   ->  (a, b, c, d, e, f)
     [c, e, f]]

and it is the wire order used by every file format in this package.

The index helpers work on ``object`` arrays as well, so the same code can be
driven with sympy symbols to check closed forms.
"""
from functools import lru_cache

import numpy as np

from .exceptions import DimensionError, DomainError, NumericalError

__all__ = [
    "vec",
    "unvec",
    "vech",
    "unvech",
    "vech_length",
    "vech_dim",
    "elimination_duplication",
    "kron",
    "spectral_radius",
    "psd_sqrt",
    "default_tol",
    "is_positive_definite",
    "is_psd",
    "psd_order_geq",
    "symmetrize",
]


def vech_length(d):
    """Number of free entries of a symmetric ``d x d`` matrix."""
    return d * (d + 1) // 2


def vech_dim(n):
    """Inverse of :func:`vech_length`; raise if ``n`` is not triangular."""
    d = int(round((np.sqrt(8 * n + 1) - 1) / 2))
    if d < 1 or vech_length(d) != n:
        raise DimensionError(f"length {n} is not of the form d(d+1)/2")
    return d


@lru_cache(maxsize=None)
def _lower_indices(d):
    # triu_indices walks (i, j), i <= j, row by row; swapping the roles gives
    # the lower triangle column by column.
    cols, rows = np.triu_indices(d)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def _square(M, name="matrix"):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    return M


def vec(M):
    """Stack the columns of ``M`` into a single vector."""
    M = np.asarray(M)
    if M.ndim != 2:
        raise DimensionError(f"vec expects a 2-d array, got ndim={M.ndim}")
    return M.reshape(-1, order="F")


def unvec(v, shape=None):
    """Inverse of :func:`vec`.  ``shape`` defaults to a square matrix."""
    v = np.asarray(v)
    if shape is None:
        d = int(round(np.sqrt(v.size)))
        if d * d != v.size:
            raise DimensionError(f"length {v.size} is not a perfect square")
        shape = (d, d)
    return v.reshape(shape, order="F")


def vech(S):
    """Half-vectorise a symmetric matrix (lower triangle, column by column)."""
    S = _square(S)
    rows, cols = _lower_indices(S.shape[0])
    return S[rows, cols]


def unvech(v):
    """Rebuild the symmetric matrix whose :func:`vech` is ``v``."""
    v = np.asarray(v)
    if v.ndim != 1:
        raise DimensionError(f"unvech expects a 1-d array, got ndim={v.ndim}")
    d = vech_dim(v.size)
    rows, cols = _lower_indices(d)
    S = np.zeros((d, d), dtype=v.dtype)
    S[rows, cols] = v
    S[cols, rows] = v
    return S


@lru_cache(maxsize=None)
def _elim_dup(d):
    n = vech_length(d)
    H = np.zeros((n, d * d), dtype=np.int64)
    K = np.zeros((n, d * d), dtype=np.int64)
    rows, cols = _lower_indices(d)
    for k, (i, j) in enumerate(zip(rows, cols)):
        H[k, j * d + i] = 1
        K[k, j * d + i] = 1
        K[k, i * d + j] = 1
    H.setflags(write=False)
    K.setflags(write=False)
    return H, K


def elimination_duplication(d):
    """
    Elimination and (transposed) duplication matrices.

    Returns integer matrices ``H, K`` of shape ``(d(d+1)/2, d**2)`` with
    ``vech(D) = H @ vec(D)``, ``vec(D) = K.T @ vech(D)`` for every symmetric
    ``D`` and ``H @ K.T = I``.

    Examples
    --------
    >>> H, K = elimination_duplication(2)
    >>> K
    array([[1, 0, 0, 0],
           [0, 1, 1, 0],
           [0, 0, 0, 1]])
    """
    if d < 1:
        raise DimensionError(f"d must be >= 1, got {d}")
    return _elim_dup(int(d))


def kron(A, B):
    """Kronecker product ``A (x) B``."""
    return np.kron(np.asarray(A), np.asarray(B))


def spectral_radius(M):
    """Largest modulus among the (complex) eigenvalues of a square matrix."""
    M = _square(M)
    if M.size == 0:
        return 0.0
    if not np.all(np.isfinite(M)):
        raise NumericalError("spectral_radius: non-finite entries")
    try:
        eig = np.linalg.eigvals(np.asarray(M, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue solver failed: {exc}") from exc
    return float(np.max(np.abs(eig)))


def symmetrize(S):
    S = np.asarray(S, dtype=float)
    return 0.5 * (S + S.T)


def default_tol(S):
    """Default eigenvalue tolerance ``1e-10 * (1 + ||S||_F)``."""
    return 1e-10 * (1.0 + float(np.linalg.norm(S)))


def psd_sqrt(S, tol=None):
    """
    Unique positive semi-definite square root.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything more negative
    means ``S`` is not PSD and raises :class:`DomainError`.
    """
    S = symmetrize(_square(S))
    if tol is None:
        tol = default_tol(S)
    w, Q = np.linalg.eigh(S)
    if w[0] < -tol:
        raise DomainError(f"matrix is indefinite (smallest eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    R = (Q * np.sqrt(w)) @ Q.T
    return 0.5 * (R + R.T)


def _min_eig(S):
    return float(np.linalg.eigvalsh(symmetrize(S))[0])


def is_positive_definite(S, tol=None):
    """True iff the smallest eigenvalue of ``S`` exceeds ``tol``."""
    S = _square(S)
    if not np.all(np.isfinite(S)):
        return False
    if tol is None:
        tol = default_tol(S)
    return _min_eig(S) > tol


def is_psd(S, tol=None):
    S = _square(S)
    if tol is None:
        tol = default_tol(S)
    return _min_eig(S) >= -tol


def psd_order_geq(S1, S2, tol=None):
    """Loewner order test ``S1 >= S2``, i.e. ``S1 - S2`` is PSD up to ``tol``."""
    D = np.asarray(S1, dtype=float) - np.asarray(S2, dtype=float)
    if tol is None:
        tol = 1e-10 * (1.0 + max(np.linalg.norm(S1), np.linalg.norm(S2)))
    return is_psd(D, tol)
