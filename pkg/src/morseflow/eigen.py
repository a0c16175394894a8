"""Cyclic Jacobi eigensolver for small symmetric matrices."""

import numpy as np


def jacobi_eigh(A, max_sweeps: int = 64):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, V)`` with eigenvalues ascending and orthonormal eigenvectors
    in the columns of ``V``. Intended for n <= 10; runs to machine precision.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    n = A.shape[0]
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0 or n == 1:
        return np.diag(A).copy(), V
    eps = np.finfo(float).eps
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2))
        if off <= eps * scale * 1e-2:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if tau == 0.0:
                    t = 1.0
                else:
                    t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def normalize_sign(v, tol: float = 1e-12):
    """Flip ``v`` so its first component of magnitude above ``tol`` is positive."""
    v = np.asarray(v, dtype=float)
    big = np.flatnonzero(np.abs(v) > tol * max(1.0, np.abs(v).max()))
    if big.size and v[big[0]] < 0:
        return -v
    return v


def spd_power(M, power: float):
    """M**power for a symmetric positive-definite M via its eigen-decomposition."""
    w, U = jacobi_eigh(M)
    if np.any(w <= 0):
        raise np.linalg.LinAlgError("matrix is not positive definite")
    P = (U * w ** power) @ U.T
    return 0.5 * (P + P.T)
