"""Hessian-based step size with a singularity guard.

Given a descent direction ``S`` at ``U``, the second-order model of
``lambda -> f(U + lambda S)`` is minimized in closed form. When the curvature
``H(S, S)`` is not positive, the nonnegative Gauss-Newton part of the Hessian
is used instead. Either way the step is capped at
``lambda_max = 1 / (margin * ||U^-1 S||_F)``; since the Frobenius norm bounds
the spectral radius, ``U + lambda S`` stays invertible for every allowed
``lambda`` as long as ``margin > 1``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass


from .cmat import inverse, real_inner, spectral_radius_bound
from .objective import gauss_newton_form, gradient, hessian_bilinear

__all__ = [
    "Branch",
    "StepSizeDecision",
    "NonPositiveCurvature",
    "DegenerateDirection",
    "lambda_hessian",
    "lambda_gauss_newton",
    "lambda_max",
    "choose_step",
    "DEFAULT_MARGIN",
]

DEFAULT_MARGIN = 2.0


class Branch(enum.Enum):
    HESSIAN = "hessian"
    GAUSS_NEWTON = "gauss_newton"


class NonPositiveCurvature(ArithmeticError):
    def __init__(self, denom):
        super().__init__(f"curvature H(S, S) = {denom:.3e} is not positive")
        self.denom = denom


class DegenerateDirection(ArithmeticError):
    pass


@dataclass(frozen=True)
class StepSizeDecision:
    lam: float
    branch: Branch
    clipped: bool
    denom: float
    lam_max: float


def lambda_hessian(E, S, grad=None):
    """Exact minimizer of the quadratic model along ``S``.

    Raises
    ------
    NonPositiveCurvature
        When ``H(S, S) <= 0``; the caller should fall back to
        :func:`lambda_gauss_newton`.
    """
    if grad is None:
        grad = gradient(E)
    denom = hessian_bilinear(E, S, S)
    if not denom > 0:
        raise NonPositiveCurvature(denom)
    return -real_inner(grad, S) / denom


def lambda_gauss_newton(E, S, grad=None):
    if grad is None:
        grad = gradient(E)
    denom = gauss_newton_form(E, S)
    if not denom > 1e-300 * E.n:
        raise DegenerateDirection(
            "direction commutes with every D_k off the diagonal; Gauss-Newton curvature is zero"
        )
    return -real_inner(grad, S) / denom


def lambda_max(U, S, margin=DEFAULT_MARGIN):
    """``1 / (margin * ||U^-1 S||_F)``; pass ``U=None`` for the identity."""
    local = S if U is None else inverse(U) @ S
    return 1.0 / (margin * spectral_radius_bound(local))


def choose_step(E, S, grad=None, margin=DEFAULT_MARGIN):
    """Step-size rule: ``min(lambda_H, lambda_max)`` when the curvature along
    ``S`` is positive, ``min(lambda_GN, lambda_max)`` otherwise."""
    if grad is None:
        grad = gradient(E)
    local = E.to_local(S)
    lam_cap = 1.0 / (margin * spectral_radius_bound(local))
    denom = hessian_bilinear(E, S, S)
    if denom > 0:
        lam = -real_inner(grad, S) / denom
        branch = Branch.HESSIAN
    else:
        lam = lambda_gauss_newton(E, S, grad)
        branch = Branch.GAUSS_NEWTON
    clipped = lam > lam_cap
    return StepSizeDecision(
        lam=float(min(lam, lam_cap)),
        branch=branch,
        clipped=bool(clipped),
        denom=float(denom),
        lam_max=float(lam_cap),
    )
