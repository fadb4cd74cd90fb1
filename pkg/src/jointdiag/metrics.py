"""Evaluation helpers: eigenvalue error under permutation matching, Monte
Carlo summaries, and conditioning diagnostics of the current basis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .cmat import DimensionMismatch, commutator, inverse, offdiag, spectral_radius
from .objective import TransformedEnsemble

__all__ = [
    "EigenvalueError",
    "match_rows",
    "eigenvalue_error",
    "median_log10_objective",
    "lower_median",
    "basis_diagnostics",
]


@dataclass(frozen=True, eq=False)
class EigenvalueError:
    matched_permutation: np.ndarray
    total_error: float
    per_index_error: np.ndarray

    @property
    def mean_error(self):
        """Total error divided by the number of matched entries."""
        return self.total_error / max(self.per_index_error.size, 1)


def match_rows(estimates, truth):
    """Optimal assignment of estimate rows to truth rows by squared distance.

    ``estimates`` and ``truth`` are ``(n, d)`` arrays. Returns ``(perm, cost)``
    with ``perm[i]`` the truth index matched to estimate ``i`` and ``cost[i]``
    the corresponding squared distance.
    """
    estimates = np.atleast_2d(estimates)
    truth = np.atleast_2d(truth)
    if estimates.shape != truth.shape:
        raise DimensionMismatch(f"shapes {estimates.shape} and {truth.shape} differ")
    diff = estimates[:, None, :] - truth[None, :, :]
    C = np.sum(np.abs(diff) ** 2, axis=-1)
    rows, cols = linear_sum_assignment(C)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    return perm, C[np.arange(len(perm)), perm]


def eigenvalue_error(result, gt):
    """Squared error between estimated and true joint eigenvalues.

    The joint eigenvalue vectors ``(D_1[i,i], ..., D_K[i,i])`` are matched to
    the ground-truth vectors with one permutation shared across all ``k``.

    ``result`` may be a solver result or a bare ``(K, n)`` array of diagonals;
    ``gt`` a :class:`~jointdiag.ensemble_gen.GroundTruth` or a ``(K, n)`` array.
    """
    est = np.asarray(getattr(result, "diagonals", result))
    truth = np.asarray(getattr(gt, "deltas", gt))
    if est.shape != truth.shape:
        raise DimensionMismatch(f"diagonals {est.shape} vs ground truth {truth.shape}")
    perm, cost = match_rows(est.T, truth.T)
    return EigenvalueError(
        matched_permutation=perm,
        total_error=float(cost.sum()),
        per_index_error=cost,
    )


def lower_median(values):
    """Median; for an even count the lower of the two middle elements."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("median of an empty collection")
    return float(v[(v.size - 1) // 2])


def median_log10_objective(results):
    finals = [getattr(r, "final_objective", r) for r in results]
    if not finals:
        raise ValueError("no results given")
    return lower_median(np.log10(finals))


def basis_diagnostics(U, E=None, A=None):
    """Conditioning of a basis and singularity distances of the two gradient directions.

    Returns ``(cond_uu, inv_rho_s1, inv_rho_s2)``: the condition number of
    ``U^-1 U^-*``; ``1 / rho(U^-1 S1)`` for the additive gradient direction
    ``S1 = U^-* S2``; and ``1 / rho(S2)`` for the multiplicative one
    ``S2 = -sum_k [D_k^*, J o D_k]``. Spectral radii are exact (via eig).
    """
    U = np.asarray(U, dtype=complex)
    if E is None:
        E = TransformedEnsemble.at(A, U)
    U_inv = E.U_inv if E.U_inv is not None else inverse(U)
    G = U_inv @ U_inv.conj().T
    sv = np.linalg.svd(G, compute_uv=False)
    cond_uu = float(sv[0] / sv[-1])
    D = E.D
    S2 = -commutator(np.conj(np.swapaxes(D, 1, 2)), offdiag(D)).sum(axis=0)
    S1 = U_inv.conj().T @ S2
    return cond_uu, 1.0 / spectral_radius(U_inv @ S1), 1.0 / spectral_radius(S2)
