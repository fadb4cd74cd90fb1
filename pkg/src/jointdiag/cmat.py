"""Dense complex matrix kernels.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Every function
also accepts stacks of shape ``(..., n, n)`` where that makes sense, so the
ensemble code can work on a ``(K, n, n)`` block in one call.

The space of ``n x n`` complex matrices is treated as a *real* inner product
space with ``<U, V> = Re sum(U * conj(V))``; gradients and Hessians in the rest
of the package are defined with respect to this inner product.
"""
from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

__all__ = [
    "SingularMatrix",
    "NoConvergence",
    "DimensionMismatch",
    "real_inner",
    "offdiag",
    "commutator",
    "inverse",
    "lu_ok",
    "spectral_radius_bound",
    "spectral_radius",
    "eig",
]


class SingularMatrix(np.linalg.LinAlgError):
    """Raised when a pivot falls below ``n * eps * max|M_ij|``."""


class NoConvergence(np.linalg.LinAlgError):
    pass


class DimensionMismatch(ValueError):
    pass


def _check_square(M):
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise DimensionMismatch(f"expected square matrix, got shape {M.shape}")


def real_inner(U, V):
    """Real inner product ``Re sum_ij U_ij conj(V_ij)``.

    For stacked inputs the sum runs over *all* entries, which is the inner
    product on the product space.
    """
    U = np.asarray(U)
    V = np.asarray(V)
    if U.shape != V.shape:
        raise DimensionMismatch(f"shapes {U.shape} and {V.shape} differ")
    # vdot conjugates its first argument
    return float(np.vdot(V, U).real)


def offdiag(M):
    """Copy of ``M`` with the diagonal zeroed (Hadamard product with J)."""
    M = np.asarray(M)
    _check_square(M)
    out = M.copy()
    n = M.shape[-1]
    idx = np.arange(n)
    out[..., idx, idx] = 0
    return out


def commutator(A, B):
    """``A @ B - B @ A``; broadcasts over leading stack dimensions."""
    A = np.asarray(A)
    B = np.asarray(B)
    _check_square(A)
    _check_square(B)
    if A.shape[-1] != B.shape[-1]:
        raise DimensionMismatch(f"shapes {A.shape} and {B.shape} differ")
    return A @ B - B @ A


def _lu(M):
    M = np.asarray(M, dtype=complex)
    _check_square(M)
    if M.ndim != 2:
        raise DimensionMismatch("inverse expects a single matrix")
    if not np.all(np.isfinite(M)):
        raise SingularMatrix("matrix has non-finite entries")
    n = M.shape[0]
    scale = np.max(np.abs(M)) if M.size else 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or pivots.min() <= n * np.finfo(float).eps * scale:
        raise SingularMatrix(
            f"pivot {pivots.min():.3e} below threshold {n * np.finfo(float).eps * scale:.3e}"
        )
    return lu, piv


def inverse(M):
    """Inverse of a square complex matrix by LU with partial pivoting.

    Raises
    ------
    SingularMatrix
        If any pivot magnitude is at or below ``n * eps * max|M_ij|``.
    """
    lu, piv = _lu(M)
    n = lu.shape[0]
    return scipy.linalg.lu_solve((lu, piv), np.eye(n, dtype=complex), check_finite=False)


def lu_ok(M):
    """True when ``M`` factorizes without tripping the singularity threshold."""
    try:
        _lu(M)
    except SingularMatrix:
        return False
    return True


def spectral_radius_bound(M):
    """Frobenius norm of ``M``, a cheap upper bound on its spectral radius."""
    M = np.asarray(M)
    _check_square(M)
    return float(np.linalg.norm(M))


def spectral_radius(M):
    values, _ = eig(M)
    return float(np.max(np.abs(values)))


def eig(M):
    """Eigendecomposition of a general complex matrix.

    Returns ``(values, vectors)`` with ``M @ vectors ~= vectors * values`` and
    unit Euclidean norm columns.
    """
    M = np.asarray(M, dtype=complex)
    _check_square(M)
    try:
        values, vectors = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    return values, vectors
