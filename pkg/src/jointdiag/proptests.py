"""Independent oracles and a self-check suite.

The oracles here never call the code they check: derivatives are verified by
finite differences of the objective, the objective by an entrywise double
loop, assignment by enumerating permutations, and step sizes by a dense line
search. ``run_suite`` executes every property check and returns a report;
``python -m jointdiag.proptests`` exits nonzero on any failure.

Set ``JD_PROPTEST_TRIALS`` to a float to scale trial counts.
"""
from __future__ import annotations

import itertools
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import objective as obj
from .cmat import inverse, real_inner, spectral_radius
from .ensemble_gen import circular_gaussian, generate
from .harmonic3d import HarmonicModel, esprit_reduce, frequency_error, recover_frequencies, synthesize
from .metrics import eigenvalue_error, match_rows
from .objective import MatrixEnsemble, TransformedEnsemble
from .solvers import Algorithm, Init, solve

__all__ = [
    "Oracle",
    "TOLERANCES",
    "CheckResult",
    "Report",
    "random_basis",
    "random_direction",
    "entrywise_objective",
    "fd_gradient_oracle",
    "fd_hessian_oracle",
    "extended_objective",
    "brute_force_assignment",
    "line_search_minimizer",
    "taylor_remainder_ratio",
    "blowup_profile",
    "run_suite",
]

# one audit point for every tolerance used by the checks
TOLERANCES = {
    "fd_gradient_rel": 1e-6,
    "fd_gradient_h": 1e-6,
    "fd_hessian_rel": 1e-4,
    "fd_hessian_h": 1e-4,
    "duality_abs": 1e-10,
    "symmetry_rel": 1e-12,
    "linearity_rel": 1e-12,
    "taylor_ratio_lo": 6.5,
    "taylor_ratio_hi": 9.5,
    "equivariance_rel": 1e-10,
    "blowup_factor": 1e6,
    "conjugacy_rel": 1e-8,
    "newton_residual_rel": 1e-5,
    "step_norm_slack": 1e-12,
    "noiseless_ratio": 1e-15,
    "noiseless_eig_error": 1e-10,
    "assignment_abs": 1e-12,
    "snr_band": 0.2,
    "esprit_exact": 1e-10,
}


@dataclass(frozen=True)
class Oracle:
    name: str
    tolerance: float
    trials: int
    seed: int


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: worst={self.worst:.3e} tol={self.tolerance:.1e} {self.detail}".rstrip()


@dataclass
class Report:
    seed: int
    results: list

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    def __str__(self):
        return "\n".join(r.line() for r in self.results)


def _trials(base):
    scale = float(os.environ.get("JD_PROPTEST_TRIALS", "1"))
    return max(1, int(round(base * scale)))


# --- random instances --------------------------------------------------------


def random_basis(rng, n, spread=0.5):
    """Well-conditioned random complex basis ``I + spread * G / sqrt(n)``."""
    return np.eye(n) + spread * circular_gaussian(rng, (n, n)) / np.sqrt(n)


def random_direction(rng, n):
    Z = circular_gaussian(rng, (n, n))
    return Z / np.linalg.norm(Z)


def random_instance(rng, n, K, snr_db=30.0):
    """Noisy synthetic ensemble seen through a random basis."""
    gt = generate(n, K, snr_db, int(rng.integers(2**31)))
    return TransformedEnsemble.at(gt.noisy, random_basis(rng, n))


# --- oracles -----------------------------------------------------------------


def entrywise_objective(A, U=None):
    """Objective by explicit double loop over off-diagonal entries."""
    mats = A.matrices if isinstance(A, MatrixEnsemble) else np.asarray(A)
    n = mats.shape[-1]
    if U is None:
        U = np.eye(n)
    U_inv = np.linalg.inv(U)
    total = 0.0
    for Ak in mats:
        D = U_inv @ Ak @ U
        for i in range(n):
            for j in range(n):
                if i != j:
                    total += abs(D[i, j]) ** 2
    return 0.5 * total


def _f(A, U):
    return obj.f_at(A, U)


def _basis(E):
    return np.eye(E.n, dtype=complex) if E.U is None else E.U


def extended_objective(A, U):
    """Objective evaluated in ``numpy.longdouble`` complex arithmetic.

    The inverse starts from the double-precision LU inverse and is polished by
    two Newton-Schulz steps ``X <- X (2I - U X)`` in extended precision. On
    platforms where ``longdouble`` is plain double this reduces to ``f_at``.
    """
    mats = A.matrices if isinstance(A, MatrixEnsemble) else np.asarray(A)
    U = np.asarray(U).astype(np.clongdouble)
    n = U.shape[0]
    eye = np.eye(n, dtype=np.clongdouble)
    X = inverse(U.astype(complex)).astype(np.clongdouble)
    for _ in range(2):
        X = X @ (2 * eye - U @ X)
    D = X @ mats.astype(np.clongdouble) @ U
    off = D * (1 - np.eye(n))
    return 0.5 * np.sum(off.real ** 2 + off.imag ** 2)


def _differences(E, Z, h, precision):
    """``(f(U - hZ), f(U), f(U + hZ), h)`` in the requested precision."""
    if h <= 0:
        raise ValueError("h must be positive")
    if precision == "double":
        U = _basis(E)
        return _f(E.base, U - h * Z), _f(E.base, U), _f(E.base, U + h * Z), h
    if precision != "extended":
        raise ValueError(f"unknown precision {precision!r}")
    U = _basis(E).astype(np.clongdouble)
    Z = np.asarray(Z).astype(np.clongdouble)
    h = np.longdouble(h)
    return (extended_objective(E.base, U - h * Z), extended_objective(E.base, U),
            extended_objective(E.base, U + h * Z), h)


def fd_gradient_oracle(E, Z, h=TOLERANCES["fd_gradient_h"], precision="extended"):
    """Central difference ``(f(U + hZ) - f(U - hZ)) / 2h``.

    In double precision the difference carries a rounding error of about
    ``eps f / h``, which swamps directional derivatives that are small next
    to ``f``; the default evaluates ``f`` and ``U +- hZ`` in extended precision.
    """
    lo, _, hi, h = _differences(E, Z, h, precision)
    return float((hi - lo) / (2 * h))


def fd_hessian_oracle(E, Z, h=TOLERANCES["fd_hessian_h"], precision="extended"):
    """Second central difference ``(f(U+hZ) - 2 f(U) + f(U-hZ)) / h^2``."""
    lo, mid, hi, h = _differences(E, Z, h, precision)
    return float((hi - 2 * mid + lo) / h ** 2)


def brute_force_assignment(C):
    """Minimum-cost permutation by enumeration; returns ``(perm, cost)``."""
    C = np.asarray(C)
    n = C.shape[0]
    best, best_perm = np.inf, None
    for perm in itertools.permutations(range(n)):
        cost = C[np.arange(n), perm].sum()
        if cost < best:
            best, best_perm = cost, perm
    return np.array(best_perm), float(best)


def _phi(D, S, lam):
    M = np.eye(S.shape[0]) + lam * S
    Dn = np.linalg.solve(M, D @ M)
    return 0.5 * float(np.sum(np.abs(Dn) ** 2) - np.sum(np.abs(np.diagonal(Dn, axis1=1, axis2=2)) ** 2))


def line_search_minimizer(D, S, n_evals=1000, n_grid=200):
    """Minimizer of ``lam -> f_D(I + lam S)`` on the singularity-free interval.

    A uniform grid of ``n_grid`` points on ``(0, 0.999 / rho(S)]`` locates the
    best bracket, then golden-section search spends the remaining evaluations.
    When ``S`` is nilpotent the interval is unbounded and ``(0, 10 / ||S||_F]``
    is searched instead.
    """
    D = np.asarray(D)
    rho, fro = spectral_radius(S), np.linalg.norm(S)
    hi = 0.999 / rho if rho > 1e-12 * fro else 10.0 / fro
    grid = np.linspace(0.0, hi, n_grid + 1)[1:]
    vals = [_phi(D, S, x) for x in grid]
    i = int(np.argmin(vals))
    a = grid[i - 1] if i > 0 else 0.0
    b = grid[i + 1] if i + 1 < len(grid) else hi
    g = (np.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = _phi(D, S, c), _phi(D, S, d)
    for _ in range(n_evals - n_grid - 2):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = _phi(D, S, c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = _phi(D, S, d)
    return 0.5 * (a + b)


def taylor_remainder_ratio(E, Z, t):
    """``r(t) / r(t/2)`` for the second-order model remainder; ~8 for cubic decay."""
    U = _basis(E)
    grad = obj.gradient(E)

    def remainder(s):
        return abs(_f(E.base, U + s * Z) - obj.taylor_model(E, Z, s, grad))

    return remainder(t) / remainder(t / 2)


def blowup_profile(A, eps=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)):
    """``f_A(U0 + eps I)`` for the singular ``U0 = diag(0, 1, ..., 1)``."""
    n = A.n
    U0 = np.eye(n, dtype=complex)
    U0[0, 0] = 0.0
    return np.array([_f(A, U0 + e * np.eye(n)) for e in eps])


# --- suite -------------------------------------------------------------------


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def run_suite(seed=0, gradient_fn=None):
    """Run every property check. ``gradient_fn`` replaces the gradient under
    test (a hook for mutation testing)."""
    grad_fn = gradient_fn or obj.gradient
    rng = np.random.default_rng(seed)
    T = TOLERANCES
    out = []

    # derivative checks
    worst_g = worst_h = worst_d = worst_s = 0.0
    for trial in range(_trials(6)):
        n, K = [(3, 1), (3, 5), (10, 1), (10, 5), (20, 1), (20, 5)][trial % 6]
        E = random_instance(rng, n, K)
        G = grad_fn(E)
        for _ in range(3):
            Z = random_direction(rng, n)
            W = random_direction(rng, n)
            worst_g = max(worst_g, _rel(fd_gradient_oracle(E, Z), real_inner(G, Z)))
            worst_h = max(worst_h, _rel(fd_hessian_oracle(E, Z), obj.hessian_bilinear(E, Z, Z)))
            b = obj.hessian_bilinear(E, Z, W)
            worst_d = max(worst_d, abs(real_inner(obj.hessian_apply(E, Z), W) - b) / (1 + abs(b)))
            worst_s = max(worst_s, _rel(obj.hessian_bilinear(E, W, Z), b))
    out.append(CheckResult("gradient vs central differences", worst_g <= T["fd_gradient_rel"], worst_g, T["fd_gradient_rel"]))
    out.append(CheckResult("hessian form vs second differences", worst_h <= T["fd_hessian_rel"], worst_h, T["fd_hessian_rel"]))
    out.append(CheckResult("hessian operator/form duality", worst_d <= T["duality_abs"], worst_d, T["duality_abs"]))
    out.append(CheckResult("hessian form symmetry", worst_s <= T["symmetry_rel"], worst_s, T["symmetry_rel"]))

    worst = _scale_identity_worst(rng)
    out.append(CheckResult("hessian along scale direction", worst <= T["duality_abs"], worst, T["duality_abs"]))

    # Taylor remainder order
    ratios = []
    for _ in range(_trials(5)):
        E = random_instance(rng, 6, 3)
        ratios.append(taylor_remainder_ratio(E, random_direction(rng, 6), 1e-2))
    lo, hi = T["taylor_ratio_lo"], T["taylor_ratio_hi"]
    ok = all(lo <= r <= hi for r in ratios)
    worst = max(abs(r - 8.0) for r in ratios)
    out.append(CheckResult("taylor remainder is cubic", ok, worst, hi - 8.0, f"ratios in [{min(ratios):.2f}, {max(ratios):.2f}]"))

    # equivariance f_A(UV) = f_{U^-1 A U}(V)
    worst = 0.0
    for _ in range(_trials(5)):
        gt = generate(8, 4, 30, int(rng.integers(2**31)))
        U, V = random_basis(rng, 8), random_basis(rng, 8)
        lhs = _f(gt.noisy, U @ V)
        rhs = _f(gt.noisy.conjugate_by(U), V)
        worst = max(worst, _rel(lhs, rhs))
    out.append(CheckResult("equivariance under change of basis", worst <= T["equivariance_rel"], worst, T["equivariance_rel"]))

    # blow-up near a singular basis
    ok, worst = True, np.inf
    for _ in range(_trials(5)):
        gt = generate(6, 3, 30, int(rng.integers(2**31)))
        prof = blowup_profile(gt.noisy)
        ok &= bool(np.all(np.diff(prof) > 0))
        factor = prof[-1] / _f(gt.noisy, None)
        worst = min(worst, factor)
        ok &= factor > T["blowup_factor"]
    out.append(CheckResult("objective blows up near singular basis", ok, worst, T["blowup_factor"], "(worst = smallest factor)"))

    # solver checks on one noisy and one clean problem
    gt = generate(8, 4, 30, int(rng.integers(2**31)))
    violations, worst_step, worst_conj = 0, 0.0, 0.0
    for alg in Algorithm:
        res = solve(gt.noisy, algorithm=alg, max_iters=200)
        for row in res.trace[1:]:
            worst_step = max(worst_step, row.step_norm)
            # a clipped step sits exactly on 1/2, up to rounding
            if row.step_norm > 0.5 * (1 + T["step_norm_slack"]):
                violations += 1
    out.append(CheckResult("steps stay inside singularity-free interval", violations == 0, worst_step, 0.5))

    worst_conj = _conjugacy_worst(gt.noisy)
    out.append(CheckResult("CG directions are H-conjugate", worst_conj <= T["conjugacy_rel"], worst_conj, T["conjugacy_rel"]))

    worst_newton = _newton_residual_worst(rng)
    out.append(CheckResult("QN inner solve reaches Newton system", worst_newton <= T["newton_residual_rel"], worst_newton, T["newton_residual_rel"]))

    gt = generate(8, 4, np.inf, int(rng.integers(2**31)))
    worst_ratio = worst_eig = 0.0
    for alg in Algorithm:
        res = solve(gt.clean, algorithm=alg, init=Init.IDENTITY, rel_tol=0.0)
        worst_ratio = max(worst_ratio, res.final_objective / res.initial_objective)
        worst_eig = max(worst_eig, eigenvalue_error(res, gt).total_error)
    out.append(CheckResult("noiseless recovery (identity init)", worst_ratio <= T["noiseless_ratio"], worst_ratio, T["noiseless_ratio"]))
    out.append(CheckResult("noiseless eigenvalues recovered", worst_eig <= T["noiseless_eig_error"], worst_eig, T["noiseless_eig_error"]))

    worst = 0.0
    for _ in range(_trials(20)):
        n = int(rng.integers(1, 7))
        est, tru = circular_gaussian(rng, (n, 3)), circular_gaussian(rng, (n, 3))
        _, cost = match_rows(est, tru)
        C = np.sum(np.abs(est[:, None] - tru[None]) ** 2, axis=-1)
        worst = max(worst, abs(cost.sum() - brute_force_assignment(C)[1]))
    out.append(CheckResult("assignment equals brute force", worst <= T["assignment_abs"], worst, T["assignment_abs"]))

    snrs = []
    for s in range(_trials(100)):
        gt = generate(6, 3, 30, seed * 100003 + s)
        nA = np.linalg.norm(gt.clean.matrices, axis=(1, 2))
        nE = np.linalg.norm(gt.noise, axis=(1, 2))
        snrs.extend(10 * np.log10(nA / nE))
    dev = abs(np.mean(snrs) - 30.0)
    out.append(CheckResult("SNR calibration", dev <= T["snr_band"], dev, T["snr_band"]))

    m = HarmonicModel.random(4, (8, 8, 8), seed=int(rng.integers(2**31)))
    res = solve(esprit_reduce(synthesize(m), 4), algorithm=Algorithm.CG)
    err, _ = frequency_error(recover_frequencies(res), m.exponents)
    out.append(CheckResult("ESPRIT noiseless exactness", err <= T["esprit_exact"], err, T["esprit_exact"]))

    return Report(seed=seed, results=out)


def _conjugacy_worst(A):
    """Relative residual of ``Re<S_m, H(S~_{m-1})>`` along a CG run."""
    res = solve(A, algorithm=Algorithm.CG, max_iters=0)
    D = res.D
    eye = np.eye(D.shape[-1])
    worst = 0.0
    prev = None
    for _ in range(30):
        E = TransformedEnsemble.identity(MatrixEnsemble(D))
        g = obj.gradient(E)
        if prev is None:
            S = -g
        else:
            HS = obj.hessian_apply(E, prev)
            denom = real_inner(prev, HS)
            beta = real_inner(g, HS) / denom if denom > 0 else 0.0
            S = -g + max(beta, 0.0) * prev
            if beta > 0:
                r = abs(real_inner(S, HS)) / (np.linalg.norm(S) * np.linalg.norm(HS))
                worst = max(worst, r)
        from .stepsize import choose_step

        lam = choose_step(E, S, g).lam
        M = eye + lam * S
        M_inv = inverse(M)
        D = M_inv @ D @ M
        prev = M_inv @ S
    return worst


def _newton_residual_worst(rng):
    """Inner CG run to convergence on a positive-definite operator.

    The JD Hessian itself is indefinite wherever the gradient is nonzero
    (``H(U, U) = 0`` while ``H(U, Y) = -Re<grad, Y>``), so the solver is fed the
    Hessian of a random strictly convex quadratic on the same matrix space.
    """
    from .solvers import newton_direction

    worst = 0.0
    for _ in range(_trials(3)):
        n = int(rng.integers(2, 7))
        m = 2 * n * n
        B = rng.standard_normal((m, m))
        Q = B @ B.T / m + 0.1 * np.eye(m)

        def to_vec(Z):
            return np.concatenate([Z.real.ravel(), Z.imag.ravel()])

        def apply(Z, Q=Q, n=n):
            v = Q @ to_vec(Z)
            return (v[: n * n] + 1j * v[n * n:]).reshape(n, n)

        g = circular_gaussian(rng, (n, n))
        S, _, ok = newton_direction(None, g, max_iter=4 * m, reduction=1e-24, apply=apply)
        if not ok:
            return np.inf
        worst = max(worst, np.linalg.norm(apply(S) + g) / np.linalg.norm(g))
    return worst


def _scale_identity_worst(rng):
    """``f((1+t)U) = f(U)`` forces ``H(U, U) = 0`` and ``H(U, Y) = -Re<grad, Y>``."""
    worst = 0.0
    for _ in range(_trials(5)):
        E = random_instance(rng, 5, 3)
        U, Y = _basis(E), random_direction(rng, 5)
        scale = np.linalg.norm(obj.gradient(E)) * np.linalg.norm(U)
        worst = max(worst, abs(obj.hessian_bilinear(E, U, U)) / scale)
        worst = max(worst, abs(obj.hessian_bilinear(E, U, Y) + real_inner(obj.gradient(E), Y)) / scale)
    return worst


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    seed = int(argv[0]) if argv else 0
    report = run_suite(seed)
    print(report)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
