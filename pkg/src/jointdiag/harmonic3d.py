"""3-D harmonic retrieval through joint diagonalization.

A data cube that is a sum of damped complex exponentials,

    X[a, b, c] = sum_m amp_m exp(f_m1 a + f_m2 b + f_m3 c),

is embedded in a three-level Hankel matrix. Its dominant left singular
subspace is shift-invariant along each axis, which yields one small matrix
per axis (multidimensional ESPRIT). These matrices share eigenvectors, so
their joint diagonalization gives the per-axis exponentials ``exp(f_md)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .ensemble_gen import circular_gaussian, noise_std
from .objective import MatrixEnsemble

__all__ = [
    "HarmonicModel",
    "RankDeficient",
    "ModeDegenerate",
    "synthesize",
    "hankel_windows",
    "esprit_reduce",
    "recover_frequencies",
    "frequency_error",
    "DEFAULT_GRID",
    "DEFAULT_MODES",
]

DEFAULT_GRID = (17, 17, 17)
DEFAULT_MODES = 27


class RankDeficient(np.linalg.LinAlgError):
    pass


class ModeDegenerate(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class HarmonicModel:
    """Exponents (``damping + 1j * angular_frequency``, one row per mode and
    one column per axis), amplitudes, sampling grid and noise settings."""

    exponents: np.ndarray
    amps: np.ndarray
    grid: tuple = DEFAULT_GRID
    snr_db: float = math.inf
    seed: int = 0
    convention: str = "amplitude"

    @property
    def k_modes(self):
        return self.exponents.shape[0]

    @property
    def freqs(self):
        return self.exponents.imag

    @classmethod
    def random(cls, k_modes=DEFAULT_MODES, grid=DEFAULT_GRID, snr_db=math.inf, seed=0,
               max_damping=0.05, convention="amplitude"):
        """Frequencies uniform on ``[0, 2 pi)``, damping uniform on
        ``[-max_damping, 0]``, amplitudes circular Gaussian."""
        rng = np.random.default_rng(seed)
        freqs = rng.uniform(0.0, 2 * np.pi, (k_modes, 3))
        damping = rng.uniform(-max_damping, 0.0, (k_modes, 3))
        amps = circular_gaussian(rng, k_modes)
        return cls(damping + 1j * freqs, amps, tuple(grid), snr_db, seed, convention)


def synthesize(model):
    """Sample the model on its grid and add circular Gaussian noise.

    The noise stream depends only on ``model.seed``, so the same seed gives the
    same clean cube and the same noise pattern at every SNR.
    """
    axes = [np.exp(np.outer(np.arange(N), model.exponents[:, d])) for d, N in enumerate(model.grid)]
    cube = np.einsum("am,bm,cm,m->abc", *axes, model.amps)
    if np.isinf(model.snr_db) and model.snr_db > 0:
        return cube
    rng = np.random.default_rng([model.seed, 1])
    std = noise_std(np.linalg.norm(cube), cube.size, model.snr_db, model.convention)
    return cube + circular_gaussian(rng, cube.shape, std)


def hankel_windows(grid):
    return tuple(math.ceil((N + 1) / 2) for N in grid)


def esprit_reduce(cube, k_modes, windows=None, rank_tol=1e-10):
    """Reduce a 3-D cube to ``k_modes x k_modes`` shift matrices, one per axis.

    Raises
    ------
    RankDeficient
        If the ``k_modes``-th singular value of the Hankel matrix is below
        ``rank_tol`` times the largest.
    """
    cube = np.asarray(cube, dtype=complex)
    if cube.ndim != 3:
        raise ValueError("expected a 3-D data cube")
    if windows is None:
        windows = hankel_windows(cube.shape)
    windows = tuple(windows)
    if any(L < 2 or L > N for L, N in zip(windows, cube.shape)):
        raise ValueError(f"windows {windows} incompatible with grid {cube.shape}")
    # H[(i1,i2,i3), (j1,j2,j3)] = X[i + j]
    sw = np.lib.stride_tricks.sliding_window_view(cube, windows)
    n_cols = int(np.prod(sw.shape[:3]))
    H = sw.reshape(n_cols, -1).T
    if min(H.shape) < k_modes:
        raise RankDeficient(f"Hankel matrix {H.shape} too small for {k_modes} modes")
    Uh, s, _ = np.linalg.svd(H, full_matrices=False)
    if s[k_modes - 1] < rank_tol * s[0]:
        raise RankDeficient(
            f"singular value {k_modes} is {s[k_modes - 1] / s[0]:.2e} of the largest"
        )
    W = Uh[:, :k_modes].reshape(*windows, k_modes)
    shifts = []
    for d in range(3):
        under = np.take(W, range(windows[d] - 1), axis=d).reshape(-1, k_modes)
        over = np.take(W, range(1, windows[d]), axis=d).reshape(-1, k_modes)
        F, *_ = np.linalg.lstsq(under, over, rcond=None)
        shifts.append(F)
    return MatrixEnsemble(np.stack(shifts))


def recover_frequencies(result):
    """Per-mode, per-axis exponents ``log(D_d[i, i])`` (principal branch).

    Accepts a solver result or a ``(3, k_modes)`` array of diagonals and
    returns a ``(k_modes, 3)`` complex array in solver row order.
    """
    diag = np.asarray(getattr(result, "diagonals", result))
    if np.any(diag == 0):
        raise ModeDegenerate("zero diagonal entry has no logarithm")
    return np.log(diag).T


def _wrap(x):
    return np.angle(np.exp(1j * x))


def frequency_error(estimated, true_exponents):
    """Squared l2 error of angular frequencies after optimal mode matching.

    Differences are wrapped to ``(-pi, pi]``. Returns ``(total, perm)``.
    """
    est = np.asarray(estimated).imag
    tru = np.asarray(true_exponents).imag
    diff = _wrap(est[:, None, :] - tru[None, :, :])
    C = np.sum(diff ** 2, axis=-1)
    rows, cols = linear_sum_assignment(C)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    return float(C[rows, cols].sum()), perm
