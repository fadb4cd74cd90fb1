"""Off-diagonal objective, gradient and Hessian for joint diagonalization.

For an ensemble ``A = {A_1, ..., A_K}`` and invertible ``U``

    f_A(U) = 1/2 sum_k || J o (U^-1 A_k U) ||_F^2

where ``J o`` zeroes the diagonal. All derivatives are with respect to the
real inner product ``Re<U, V>`` on complex matrices (see :mod:`jointdiag.cmat`),
so the gradient is a complex ``n x n`` matrix and the Hessian is either a
real bilinear form or a real-linear operator on matrices. Nothing of size
``n^4`` is ever formed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cmat import DimensionMismatch, commutator, inverse, offdiag, real_inner

__all__ = [
    "MatrixEnsemble",
    "TransformedEnsemble",
    "objective_value",
    "gradient",
    "hessian_bilinear",
    "hessian_apply",
    "gauss_newton_form",
    "taylor_model",
    "f_at",
]


class MatrixEnsemble:
    """An ordered collection of ``K`` square complex matrices of equal size.

    Stored as a read-only ``(K, n, n)`` complex array.
    """

    def __init__(self, matrices):
        arr = np.array(matrices, dtype=complex)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise DimensionMismatch(f"expected (K, n, n) stack, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch("ensemble must contain at least one non-empty matrix")
        arr.setflags(write=False)
        self._matrices = arr

    @property
    def matrices(self):
        return self._matrices

    @property
    def K(self):
        return self._matrices.shape[0]

    @property
    def n(self):
        return self._matrices.shape[1]

    def __len__(self):
        return self.K

    def __getitem__(self, k):
        return self._matrices[k]

    def __iter__(self):
        return iter(self._matrices)

    def __eq__(self, other):
        if not isinstance(other, MatrixEnsemble):
            return NotImplemented
        return self._matrices.shape == other._matrices.shape and np.array_equal(
            self._matrices, other._matrices
        )

    def __repr__(self):
        return f"MatrixEnsemble(K={self.K}, n={self.n})"

    def conjugate_by(self, M, M_inv=None):
        """Return the ensemble ``{M^-1 A_k M}``."""
        if M_inv is None:
            M_inv = inverse(M)
        return MatrixEnsemble(M_inv @ self._matrices @ M)


@dataclass(frozen=True, eq=False)
class TransformedEnsemble:
    """An ensemble seen through a basis ``U``: caches ``D_k = U^-1 A_k U``.

    ``U is None`` encodes the identity; in that case no inverse factors are
    applied anywhere (the multiplicative-update hot path).
    """

    base: MatrixEnsemble
    U: np.ndarray | None = None
    U_inv: np.ndarray | None = field(default=None, repr=False)
    D: np.ndarray = field(default=None, repr=False)

    @classmethod
    def at(cls, base, U=None):
        if not isinstance(base, MatrixEnsemble):
            base = MatrixEnsemble(base)
        if U is None:
            return cls(base, None, None, base.matrices)
        U = np.asarray(U, dtype=complex)
        if U.shape != (base.n, base.n):
            raise DimensionMismatch(f"basis shape {U.shape} does not match n={base.n}")
        U_inv = inverse(U)
        D = U_inv @ base.matrices @ U
        return cls(base, U, U_inv, D)

    @classmethod
    def identity(cls, base):
        return cls.at(base, None)

    @property
    def at_identity(self):
        return self.U is None

    @property
    def n(self):
        return self.base.n

    @property
    def K(self):
        return self.base.K

    def to_local(self, Z):
        """``U^-1 Z`` (or ``Z`` at the identity)."""
        Z = np.asarray(Z)
        if Z.shape != (self.n, self.n):
            raise DimensionMismatch(f"direction shape {Z.shape} does not match n={self.n}")
        return Z if self.U is None else self.U_inv @ Z

    def from_local_adjoint(self, X):
        """``U^-* X`` (or ``X`` at the identity)."""
        return X if self.U is None else self.U_inv.conj().T @ X


def objective_value(E):
    """Half the squared Frobenius norm of the off-diagonal parts of all ``D_k``."""
    # summing only off-diagonal entries avoids cancellation near convergence
    O = offdiag(E.D)
    return 0.5 * float(np.sum(O.real ** 2 + O.imag ** 2))


def f_at(A, U=None):
    """Convenience: ``f_A(U)``, with ``U=None`` meaning the identity."""
    return objective_value(TransformedEnsemble.at(A, U))


def gradient(E):
    r"""Gradient ``sum_k U^-* [D_k^*, J o D_k]``."""
    D = E.D
    G = commutator(np.conj(np.swapaxes(D, 1, 2)), offdiag(D)).sum(axis=0)
    return E.from_local_adjoint(G)


def hessian_bilinear(E, Z, W):
    """Symmetric real bilinear Hessian form ``H(Z, W)``.

    sum_k Re<J o [D_k, X], [D_k, Y]> + Re<J o D_k, [X, Y D_k] + [Y, X D_k]>

    with ``X = U^-1 Z`` and ``Y = U^-1 W``.
    """
    X = E.to_local(Z)
    Y = E.to_local(W)
    D = E.D
    cX = commutator(D, X)
    cY = commutator(D, Y)
    first = real_inner(offdiag(cX), cY)
    second = real_inner(offdiag(D), commutator(X, Y @ D) + commutator(Y, X @ D))
    return first + second


def gauss_newton_form(E, Z):
    """Nonnegative first summand of ``H(Z, Z)``: ``sum_k ||J o [D_k, U^-1 Z]||^2``."""
    X = E.to_local(Z)
    c = offdiag(commutator(E.D, X))
    return float(np.sum(c.real ** 2 + c.imag ** 2))


def hessian_apply(E, Z):
    """Hessian operator, the unique real-linear map with ``Re<H(Z), W> = H(Z, W)``."""
    X = E.to_local(Z)
    D = E.D
    Dh = np.conj(np.swapaxes(D, 1, 2))
    OD = offdiag(D)
    XD = X @ D
    t1 = commutator(Dh, offdiag(commutator(D, X)))
    t2 = commutator(np.broadcast_to(X.conj().T, D.shape), OD) @ Dh
    t3 = commutator(OD, np.conj(np.swapaxes(XD, 1, 2)))
    return E.from_local_adjoint((t1 + t2 + t3).sum(axis=0))


def taylor_model(E, Z, t, grad=None):
    """Second-order model ``f(U) + t Re<grad, Z> + t^2/2 H(Z, Z)`` of ``f(U + tZ)``."""
    if grad is None:
        grad = gradient(E)
    return (
        objective_value(E)
        + t * real_inner(grad, Z)
        + 0.5 * t * t * hessian_bilinear(E, Z, Z)
    )
