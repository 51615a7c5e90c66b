"""Cyclic Jacobi eigendecomposition for small dense symmetric matrices.

The training path decomposes an N x N Gram matrix where N is the number of
training chips (a few hundred at desk scale), so an O(N^3) Jacobi sweep
schedule is plenty and keeps the numerics self-contained and reproducible.
"""

from __future__ import annotations

import numpy as np

DEFAULT_TOL = 1e-10
DEFAULT_MAX_SWEEPS = 100


def offdiag_frobenius(a: np.ndarray) -> float:
    """Frobenius norm of the off-diagonal part."""
    off = a - np.diag(np.diag(a))
    return float(np.sqrt((off * off).sum()))


def jacobi_eigh(
    matrix: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps row-major over all (p, q) pairs until the off-diagonal Frobenius
    norm drops below ``tol`` relative to the initial Frobenius norm of the
    matrix, or ``max_sweeps`` is reached.

    Returns (eigenvalues, eigenvectors) sorted by descending eigenvalue;
    eigenvectors are the columns of the second array.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-12 * max(1.0, float(np.abs(a).max(initial=0.0)))):
        raise ValueError("matrix must be symmetric")
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v

    scale = float(np.linalg.norm(a))
    threshold = tol * max(scale, np.finfo(np.float64).tiny)

    for _ in range(max_sweeps):
        if offdiag_frobenius(a) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0.0 else 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                # A <- J^T A J, applied as column then row rotation
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vcol_p = v[:, p].copy()
                vcol_q = v[:, q].copy()
                v[:, p] = c * vcol_p - s * vcol_q
                v[:, q] = s * vcol_p + c * vcol_q

    eigenvalues = a.diagonal().copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]
