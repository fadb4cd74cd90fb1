"""Synthetic joint-diagonalization problems.

Each clean matrix is ``A_k = Z diag(delta_k) Z^-1`` with ``Z`` a circular
complex Gaussian matrix normalized to unit-norm columns and ``delta_k``
having real and imaginary parts uniform on ``[-1, 1]``. Circular white
Gaussian noise is added per matrix at a requested SNR.

Two SNR conventions are supported:

``"amplitude"`` (default)
    ``snr_db = 10 log10(||A_k||_F / sqrt(E||E_k||_F^2))``. This is the
    convention under which the reference median objective values are
    reproduced.
``"power"``
    ``snr_db = 10 log10(||A_k||_F^2 / E||E_k||_F^2)``.

Randomness comes from ``numpy.random.Generator`` with the PCG64 bit
generator seeded by the integer ``seed``, so draws are reproducible across
platforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import MatrixEnsemble, f_at

__all__ = [
    "GroundTruth",
    "generate",
    "objective_floor",
    "circular_gaussian",
    "noise_std",
    "SNR_CONVENTIONS",
]

SNR_CONVENTIONS = ("amplitude", "power")


def circular_gaussian(rng, shape, std=1.0):
    """Circular complex Gaussian with ``E|e|^2 = std^2`` and zero pseudo-covariance."""
    scale = np.asarray(std) / np.sqrt(2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def noise_std(signal_fro, n_entries, snr_db, convention="amplitude"):
    """Per-entry noise standard deviation for a signal of Frobenius norm ``signal_fro``."""
    if convention not in SNR_CONVENTIONS:
        raise ValueError(f"unknown SNR convention {convention!r}")
    if np.isinf(snr_db) and snr_db > 0:
        return np.zeros_like(np.asarray(signal_fro, dtype=float))
    rms = np.asarray(signal_fro, dtype=float) / np.sqrt(n_entries)
    if convention == "power":
        return rms * 10.0 ** (-snr_db / 20.0)
    return rms * 10.0 ** (-snr_db / 10.0)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    Z: np.ndarray
    deltas: np.ndarray
    clean: MatrixEnsemble
    noisy: MatrixEnsemble
    snr_db: float
    seed: int
    convention: str = "amplitude"

    @property
    def n(self):
        return self.Z.shape[0]

    @property
    def K(self):
        return self.deltas.shape[0]

    @property
    def noise(self):
        return self.noisy.matrices - self.clean.matrices


def generate(n, K, snr_db, seed, convention="amplitude"):
    """Draw a seeded random ensemble with known joint eigenstructure."""
    if n < 1 or K < 1:
        raise ValueError("need n >= 1 and K >= 1")
    rng = np.random.default_rng(seed)
    Z = circular_gaussian(rng, (n, n))
    Z /= np.linalg.norm(Z, axis=0)
    deltas = rng.uniform(-1, 1, (K, n)) + 1j * rng.uniform(-1, 1, (K, n))
    Z_inv = np.linalg.inv(Z)
    clean = (Z[None] * deltas[:, None, :]) @ Z_inv
    E = circular_gaussian(rng, (K, n, n))
    std = noise_std(np.linalg.norm(clean, axis=(1, 2)), n * n, snr_db, convention)
    noisy = clean + std[:, None, None] * E
    return GroundTruth(
        Z=Z,
        deltas=deltas,
        clean=MatrixEnsemble(clean),
        noisy=MatrixEnsemble(noisy),
        snr_db=float(snr_db),
        seed=int(seed),
        convention=convention,
    )


def objective_floor(gt):
    """Objective of the noisy ensemble at the true eigenvector matrix ``Z``."""
    return f_at(gt.noisy, gt.Z)
