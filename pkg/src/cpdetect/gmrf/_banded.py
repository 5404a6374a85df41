"""Thin wrappers around LAPACK banded Cholesky for s.p.d. tridiagonal systems."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded


def tridiag_cholesky(diag: np.ndarray, off: np.ndarray):
    """Cholesky factor (scipy upper-banded form) of a tridiagonal matrix.

    Raises ``numpy.linalg.LinAlgError`` when the matrix is not positive
    definite.
    """
    m = diag.size
    ab = np.zeros((2, m))
    ab[1] = diag
    if m > 1:
        ab[0, 1:] = off
    try:
        return cholesky_banded(ab, lower=False, check_finite=False)
    except Exception as exc:  # scipy raises LinAlgError subclasses
        raise np.linalg.LinAlgError(str(exc)) from exc


def tridiag_logdet(factor: np.ndarray) -> float:
    """Log determinant from a banded Cholesky factor."""
    return 2.0 * float(np.log(factor[1]).sum())


def tridiag_solve(factor: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve with a precomputed banded Cholesky factor; b may hold columns."""
    return cho_solve_banded((factor, False), b, check_finite=False)


def tridiag_quadform(diag: np.ndarray, off: np.ndarray, x: np.ndarray) -> float:
    """x' Q x for tridiagonal Q given by its diagonal and first off-diagonal."""
    q = float((diag * x * x).sum())
    if x.size > 1:
        q += 2.0 * float((off * x[:-1] * x[1:]).sum())
    return q
