"""Dense symmetric linear algebra kernels (desk scale, n <= 64).

Everything here is deterministic: the Jacobi eigensolver uses a fixed
cyclic rotation order and a stable descending sort, so repeated calls on
the same input produce bit-identical output.
"""

import numpy as np

# Eigenvalues within RANK_TOL_FACTOR * max|lambda| of zero are snapped to
# zero wherever an index partition is built.  A single shared tolerance
# keeps the partitions consistent across modules.
RANK_TOL_FACTOR = 1e-9

_MAX_SWEEPS = 100


class JacobiOverflowError(RuntimeError):
    """Internal fault: the Jacobi sweep cap was exceeded."""


def sym_eig(S):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi.

    Returns (values, vectors): eigenvalues sorted descending (stable sort,
    preserving Jacobi output order on ties) and orthonormal eigenvector
    columns, so that vectors @ diag(values) @ vectors.T reconstructs S.
    """
    A = np.array(S, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("sym_eig expects a square matrix")
    n = A.shape[0]
    if n == 1:
        return np.array([A[0, 0]]), np.eye(1)
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = np.max(np.abs(A))
    if scale == 0.0:
        return np.zeros(n), np.eye(n)
    thresh = 1e-15 * scale
    for _ in range(_MAX_SWEEPS):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= thresh:
                    continue
                off = max(off, abs(apq))
                theta = 0.5 * (A[q, q] - A[p, p]) / apq
                t = np.sign(theta) / (abs(theta) + np.hypot(1.0, theta))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                _rotate(A, V, p, q, c, s)
        if off <= thresh:
            break
    else:
        raise JacobiOverflowError("Jacobi sweep cap exceeded")
    vals = np.diag(A).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], V[:, order]


def _rotate(A, V, p, q, c, s):
    n = A.shape[0]
    app, aqq, apq = A[p, p], A[q, q], A[p, q]
    A[p, p] = c * c * app - 2.0 * s * c * apq + s * s * aqq
    A[q, q] = s * s * app + 2.0 * s * c * apq + c * c * aqq
    A[p, q] = A[q, p] = 0.0
    for k in range(n):
        if k == p or k == q:
            continue
        akp, akq = A[k, p], A[k, q]
        A[k, p] = A[p, k] = c * akp - s * akq
        A[k, q] = A[q, k] = s * akp + c * akq
    for k in range(n):
        vkp, vkq = V[k, p], V[k, q]
        V[k, p] = c * vkp - s * vkq
        V[k, q] = s * vkp + c * vkq


def nullspace(M, tol=1e-10):
    """Orthonormal basis of ker(M) as columns; empty (n, 0) when trivial."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if tol <= 0:
        raise ValueError("tol must be positive")
    if M.size == 0 or not np.any(M):
        return np.eye(M.shape[1])
    _, s, Vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return Vt[rank:].T.copy()


def lstsq(M, r):
    """Minimum-norm minimizer of ||M v - r||."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    r = np.asarray(r, dtype=float)
    if M.size == 0:
        return np.zeros(M.shape[1])
    v, _, _, _ = np.linalg.lstsq(M, r, rcond=None)
    return v


def rank_tol_for(values, rank_tol=None):
    """Absolute snap tolerance from the spectral scale, floored at unit
    scale so numerically-zero data (entries near machine epsilon) snaps
    to exactly zero on desk-scale problems."""
    if rank_tol is not None:
        return rank_tol
    vmax = float(np.max(np.abs(values))) if len(values) else 0.0
    return RANK_TOL_FACTOR * max(vmax, 1.0)


def pseudo_inverse(S, rank_tol=None):
    """Moore-Penrose inverse of a symmetric matrix via its eigen-frame."""
    vals, vecs = sym_eig(S)
    tol = rank_tol_for(vals, rank_tol)
    if tol <= 0:
        raise ValueError("rank_tol must be positive")
    inv = np.where(np.abs(vals) > tol, 1.0 / np.where(vals == 0, 1.0, vals), 0.0)
    return (vecs * inv) @ vecs.T
