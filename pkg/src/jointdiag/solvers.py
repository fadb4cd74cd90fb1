"""Descent solvers for joint diagonalization.

Three search-direction rules share one iteration loop:

* gradient descent (``Algorithm.GD``),
* nonlinear conjugate gradient with Daniel's Hessian-based ``beta``
  (``Algorithm.CG``),
* an inexact Newton method whose direction comes from an inner linear
  conjugate-gradient solve of ``H(S) = -grad`` using only Hessian-vector
  products (``Algorithm.QN``).

With the multiplicative update (the default) every iteration works at the
identity on the transformed ensemble ``A_m = U_m^-1 A U_m`` and updates
``U_{m+1} = U_m (I + lambda S)``, ``A_{m+1} = (I + lambda S)^-1 A_m (I + lambda S)``.
The additive update ``U_{m+1} = U_m + lambda S`` is kept for comparison.

Directions are always stored as descent directions ``S``, so every update
has the form ``I + lambda S`` (or ``U + lambda S``).
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .cmat import SingularMatrix, eig, inverse, real_inner
from .objective import (
    MatrixEnsemble,
    TransformedEnsemble,
    gradient,
    hessian_apply,
    objective_value,
)
from .stepsize import DEFAULT_MARGIN, Branch, choose_step

__all__ = [
    "Algorithm",
    "UpdateMode",
    "Init",
    "Termination",
    "SolverConfig",
    "TraceRow",
    "JDState",
    "JDResult",
    "initial_basis",
    "record_trace",
    "solve",
    "solve_gd",
    "solve_cg",
    "solve_qn",
    "newton_direction",
    "StepInfo",
]

LAMBDA_UNDERFLOW = 1e-16


class Algorithm(enum.Enum):
    GD = "gd"
    CG = "cg"
    QN = "qn"


class UpdateMode(enum.Enum):
    MULTIPLICATIVE = "mult"
    ADDITIVE = "add"


class Init(enum.Enum):
    EIG_SUM = "eigsum"
    IDENTITY = "identity"


class Termination(enum.Enum):
    MAX_ITERS = "max_iters"
    REL_TOL = "rel_tol"
    STALLED = "stalled"


@dataclass
class SolverConfig:
    """Solver settings.

    ``init`` is an :class:`Init` member or an explicit ``n x n`` starting
    basis. ``qn_inner_start`` selects the inner CG starting point: ``"zero"``
    (default) starts from the zero matrix, ``"gradient"`` from ``-grad``; the
    latter tends to meet the residual-reduction test after a single inner step
    and then behaves like gradient descent. ``force_zero_beta``
    turns CG into GD (used to check that the two coincide). ``on_step``, if
    given, is called with a :class:`StepInfo` before each update is applied.
    """

    algorithm: Algorithm = Algorithm.GD
    update_mode: UpdateMode = UpdateMode.MULTIPLICATIVE
    max_iters: int = 1000
    rel_tol: float = 1e-12
    qn_inner_max: int = 100
    qn_inner_reduction: float = 0.1
    qn_inner_start: str = "zero"
    init: Init | np.ndarray = Init.EIG_SUM
    seed: int = 0
    lambda_margin: float = DEFAULT_MARGIN
    force_zero_beta: bool = False
    stall_window: int = 10
    on_step: object = None

    def __post_init__(self):
        self.algorithm = Algorithm(self.algorithm)
        self.update_mode = UpdateMode(self.update_mode)
        if not isinstance(self.init, np.ndarray):
            self.init = Init(self.init)
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.rel_tol < 0:
            raise ValueError("rel_tol must be nonnegative")
        if not 0 < self.qn_inner_reduction < 1:
            raise ValueError("qn_inner_reduction must lie in (0, 1)")
        if self.qn_inner_start not in ("gradient", "zero"):
            raise ValueError("qn_inner_start must be 'gradient' or 'zero'")
        if self.lambda_margin <= 1:
            raise ValueError("lambda_margin must exceed 1 to keep steps off singularities")


@dataclass(frozen=True, eq=False)
class StepInfo:
    """What an ``on_step`` observer sees: the iteration number, the transformed
    matrices ``D`` before the step, the direction ``S``, the step decision and
    the matrix about to be factored (``I + lam S`` or ``U + lam S``)."""

    iter: int
    D: np.ndarray
    S: np.ndarray
    step: object
    factored: np.ndarray


@dataclass
class TraceRow:
    iter: int
    objective: float
    lam: float = float("nan")
    branch: Branch | None = None
    beta: float = float("nan")
    inner_iters: int = 0
    fallback: bool = False
    # ||lambda U^-1 S||_F of the step that produced this row; < 1/2 by construction
    step_norm: float = 0.0


@dataclass
class JDState:
    U: np.ndarray
    ensemble: TransformedEnsemble
    iter: int = 0
    trace: list = field(default_factory=list)
    prev_direction: np.ndarray | None = None


@dataclass
class JDResult:
    U: np.ndarray
    diagonals: np.ndarray
    trace: list
    termination: Termination
    wall_time: float
    D: np.ndarray
    config: SolverConfig | None = None

    @property
    def objective_trace(self):
        return np.array([row.objective for row in self.trace])

    @property
    def final_objective(self):
        return self.trace[-1].objective

    @property
    def initial_objective(self):
        return self.trace[0].objective

    @property
    def iterations(self):
        return self.trace[-1].iter

    def iterations_to_reach(self, target):
        """First iteration whose objective is ``<= target``, or ``None``."""
        for row in self.trace:
            if row.objective <= target:
                return row.iter
        return None


def record_trace(state, row):
    state.trace.append(row)
    return state


def initial_basis(A, init):
    """Starting basis: eigenvectors of ``sum_k A_k``, the identity, or a given matrix."""
    n = A.n
    if isinstance(init, np.ndarray):
        U = np.array(init, dtype=complex)
        if U.shape != (n, n):
            raise ValueError(f"initial basis has shape {U.shape}, expected {(n, n)}")
        return U
    if init is Init.IDENTITY:
        return np.eye(n, dtype=complex)
    _, U = eig(A.matrices.sum(axis=0))
    return U


# --- search directions -------------------------------------------------------


def newton_direction(E, grad, max_iter=100, reduction=0.1, start="zero", apply=None):
    """Approximately solve ``H(S) = -grad`` by linear conjugate gradient.

    Stops once ``||H(S) + grad||_F^2`` has dropped below ``reduction`` times its
    initial value, or after ``max_iter`` iterations. Returns ``(S, iters, ok)``;
    ``ok`` is False if non-positive curvature ``Re<p, H(p)> <= 0`` was met, in
    which case ``S`` is the negative gradient.

    ``apply`` replaces ``Z -> hessian_apply(E, Z)`` by another self-adjoint
    operator; this is only used to test the inner solver in isolation.
    """
    if apply is None:
        def apply(Z):
            return hessian_apply(E, Z)
    b = -grad
    if start == "gradient":
        s = b.copy()
        r = b - apply(s)
    else:
        s = np.zeros_like(b)
        r = b.copy()
    rr = real_inner(r, r)
    target = reduction * rr
    p = r.copy()
    iters = 0
    while iters < max_iter and rr > 0:
        Hp = apply(p)
        curv = real_inner(p, Hp)
        if not curv > 0:
            return b, iters, False
        alpha = rr / curv
        s = s + alpha * p
        r = r - alpha * Hp
        iters += 1
        rr_new = real_inner(r, r)
        if rr_new <= target:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    return s, iters, True


def _direction(cfg, E, grad, transported):
    """Return ``(S, beta, inner_iters, fallback)`` for the configured algorithm."""
    if cfg.algorithm is Algorithm.GD:
        return -grad, float("nan"), 0, False

    if cfg.algorithm is Algorithm.CG:
        if transported is None:
            return -grad, 0.0, 0, False
        HS = hessian_apply(E, transported)
        denom = real_inner(transported, HS)
        beta = real_inner(grad, HS) / denom if denom > 0 else 0.0
        if cfg.force_zero_beta or not beta > 0:
            beta = 0.0
        S = -grad + beta * transported
        if beta > 0 and not real_inner(grad, S) < 0:
            return -grad, 0.0, 0, True
        return S, beta, 0, False

    S, iters, ok = newton_direction(
        E,
        grad,
        max_iter=cfg.qn_inner_max,
        reduction=cfg.qn_inner_reduction,
        start=cfg.qn_inner_start,
    )
    if ok and not real_inner(grad, S) < 0:
        return -grad, float("nan"), iters, True
    return S, float("nan"), iters, not ok


# --- main loop ---------------------------------------------------------------


def solve(A, cfg=None, **overrides):
    """Run the solver described by ``cfg`` (keyword overrides allowed)."""
    if cfg is None:
        cfg = SolverConfig(**overrides)
    elif overrides:
        cfg = SolverConfig(**{**cfg.__dict__, **overrides})
    if not isinstance(A, MatrixEnsemble):
        A = MatrixEnsemble(A)
    if cfg.update_mode is UpdateMode.MULTIPLICATIVE:
        return _solve_multiplicative(A, cfg)
    return _solve_additive(A, cfg)


def solve_gd(A, cfg=None, **overrides):
    return solve(A, cfg, **{**overrides, "algorithm": Algorithm.GD})


def solve_cg(A, cfg=None, **overrides):
    return solve(A, cfg, **{**overrides, "algorithm": Algorithm.CG})


def solve_qn(A, cfg=None, **overrides):
    return solve(A, cfg, **{**overrides, "algorithm": Algorithm.QN})


class _Stopper:
    def __init__(self, cfg, f0):
        self.cfg = cfg
        self.tol = cfg.rel_tol * f0
        self.unchanged = 0

    def check(self, f_prev, f_new, lam):
        if lam < LAMBDA_UNDERFLOW:
            return Termination.STALLED
        if f_new == f_prev:
            self.unchanged += 1
            if self.unchanged >= self.cfg.stall_window:
                return Termination.STALLED
        else:
            self.unchanged = 0
        if abs(f_prev - f_new) < self.tol:
            return Termination.REL_TOL
        return None


def _solve_multiplicative(A, cfg):
    t0 = time.perf_counter()
    n = A.n
    eye = np.eye(n, dtype=complex)
    U = initial_basis(A, cfg.init)
    D = A.matrices if cfg.init is Init.IDENTITY else inverse(U) @ A.matrices @ U
    E = TransformedEnsemble.identity(MatrixEnsemble(D))
    f = objective_value(E)
    state = JDState(U=U, ensemble=E)
    record_trace(state, TraceRow(iter=0, objective=f))
    stopper = _Stopper(cfg, f)
    termination = Termination.MAX_ITERS
    transported = None

    for m in range(1, cfg.max_iters + 1):
        grad = gradient(E)
        if f == 0.0 or not np.any(grad):
            termination = Termination.REL_TOL
            break
        S, beta, inner, fallback = _direction(cfg, E, grad, transported)
        step = choose_step(E, S, grad, margin=cfg.lambda_margin)
        lam = step.lam
        M = eye + lam * S
        if cfg.on_step is not None:
            cfg.on_step(StepInfo(m, E.D, S, step, M))
        M_inv = inverse(M)
        D = M_inv @ E.D @ M
        U = U @ M
        E = TransformedEnsemble.identity(MatrixEnsemble(D))
        f_new = objective_value(E)
        if cfg.algorithm is Algorithm.CG:
            # old direction expressed in the new basis
            transported = M_inv @ S
            state.prev_direction = S
        state.U, state.ensemble, state.iter = U, E, m
        record_trace(
            state,
            TraceRow(
                iter=m,
                objective=f_new,
                lam=lam,
                branch=step.branch,
                beta=beta,
                inner_iters=inner,
                fallback=fallback,
                step_norm=lam * np.linalg.norm(S),
            ),
        )
        stop = stopper.check(f, f_new, lam)
        f = f_new
        if stop is not None:
            termination = stop
            break

    return JDResult(
        U=state.U,
        diagonals=np.diagonal(state.ensemble.D, axis1=1, axis2=2).copy(),
        trace=state.trace,
        termination=termination,
        wall_time=time.perf_counter() - t0,
        D=np.array(state.ensemble.D),
        config=cfg,
    )


def _solve_additive(A, cfg):
    t0 = time.perf_counter()
    U = initial_basis(A, cfg.init)
    E = TransformedEnsemble.at(A, U)
    f = objective_value(E)
    state = JDState(U=U, ensemble=E)
    record_trace(state, TraceRow(iter=0, objective=f))
    stopper = _Stopper(cfg, f)
    termination = Termination.MAX_ITERS
    prev = None

    for m in range(1, cfg.max_iters + 1):
        grad = gradient(E)
        if f == 0.0 or not np.any(grad):
            termination = Termination.REL_TOL
            break
        # classical scheme: no transport, Daniel's beta at the current U
        S, beta, inner, fallback = _direction(cfg, E, grad, prev)
        step = choose_step(E, S, grad, margin=cfg.lambda_margin)
        lam = step.lam
        step_norm = lam * np.linalg.norm(E.to_local(S))
        if cfg.on_step is not None:
            cfg.on_step(StepInfo(m, E.D, S, step, U + lam * S))
        U = U + lam * S
        try:
            E = TransformedEnsemble.at(A, U)
        except SingularMatrix:
            termination = Termination.STALLED
            break
        f_new = objective_value(E)
        if cfg.algorithm is Algorithm.CG:
            prev = S
            state.prev_direction = S
        state.U, state.ensemble, state.iter = U, E, m
        record_trace(
            state,
            TraceRow(
                iter=m,
                objective=f_new,
                lam=lam,
                branch=step.branch,
                beta=beta,
                inner_iters=inner,
                fallback=fallback,
                step_norm=step_norm,
            ),
        )
        stop = stopper.check(f, f_new, lam)
        f = f_new
        if stop is not None:
            termination = stop
            break

    return JDResult(
        U=state.U,
        diagonals=np.diagonal(state.ensemble.D, axis1=1, axis2=2).copy(),
        trace=state.trace,
        termination=termination,
        wall_time=time.perf_counter() - t0,
        D=np.array(state.ensemble.D),
        config=cfg,
    )
