"""One-sided (Hestenes) Jacobi SVD for small dense matrices."""
from __future__ import annotations

import numpy as np


def jacobi_svd(a, tol=1e-15, max_sweeps=60):
    """Thin SVD ``a = U @ diag(s) @ Vt`` by cyclic one-sided Jacobi rotations.

    Columns of a working copy are rotated pairwise until mutually orthogonal;
    singular values are then the column norms. Accurate to a few ulps of
    ``max(s)`` for the ``<= 200 x 50`` sizes used here.

    Parameters
    ----------
    a : array_like, shape (m, n)
    tol : float
        Pair is considered orthogonal when ``|u_p . u_q| <= tol * |u_p| |u_q|``.
    max_sweeps : int

    Returns
    -------
    U : ndarray (m, k), s : ndarray (k,), Vt : ndarray (k, n) with ``k = min(m, n)``,
    singular values sorted in decreasing order. Columns of ``U`` belonging to
    zero singular values are zero.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("jacobi_svd expects a matrix")
    m, n = a.shape
    if m < n:
        u, s, vt = jacobi_svd(a.T, tol, max_sweeps)
        return vt.T, s, u.T
    work = a.copy()
    v = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                up, uq = work[:, p], work[:, q]
                alpha = up @ up
                beta = uq @ uq
                gamma = up @ uq
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s_ = c * t
                new_p = c * up - s_ * uq
                work[:, q] = s_ * up + c * uq
                work[:, p] = new_p
                vp = v[:, p].copy()
                v[:, p] = c * vp - s_ * v[:, q]
                v[:, q] = s_ * vp + c * v[:, q]
        if not rotated:
            break
    sig = np.sqrt(np.sum(work * work, axis=0))
    order = np.argsort(-sig, kind="stable")
    sig = sig[order]
    work = work[:, order]
    v = v[:, order]
    u = np.zeros_like(work)
    nz = sig > 0
    u[:, nz] = work[:, nz] / sig[nz]
    return u, sig, v.T


def numerical_rank(s, shape, rtol=None):
    """Count singular values above ``rtol * s_max`` (default ``max(shape) * eps``)."""
    if s.size == 0 or s[0] == 0:
        return 0
    rtol = max(shape) * np.finfo(float).eps if rtol is None else rtol
    return int(np.sum(s > rtol * s[0]))


def truncated_svd(a, k):
    """Top-``k`` factors ``(U_k, s_k, Vt_k)`` and the discarded squared mass."""
    u, s, vt = jacobi_svd(a)
    k = min(int(k), s.size)
    return u[:, :k], s[:k], vt[:k], float(np.sum(s[k:] ** 2))


def lstsq(a, b, rtol=None):
    """Minimum-norm least-squares solution of ``a x = b`` via the Jacobi SVD."""
    u, s, vt = jacobi_svd(a)
    r = numerical_rank(s, a.shape, rtol)
    b = np.asarray(b, dtype=float)
    coef = (u[:, :r].T @ b) / (s[:r, None] if b.ndim == 2 else s[:r])
    return vt[:r].T @ coef
