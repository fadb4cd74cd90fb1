import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointdiag.cmat import DimensionMismatch
from jointdiag.ensemble_gen import circular_gaussian, generate
from jointdiag.metrics import (
    basis_diagnostics,
    eigenvalue_error,
    lower_median,
    match_rows,
    median_log10_objective,
)
from jointdiag.proptests import brute_force_assignment


class TestMatching:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_equals_brute_force(self, n, d, seed):
        rng = np.random.default_rng(seed)
        est, tru = circular_gaussian(rng, (n, d)), circular_gaussian(rng, (n, d))
        perm, cost = match_rows(est, tru)
        C = np.sum(np.abs(est[:, None] - tru[None]) ** 2, axis=-1)
        _, best = brute_force_assignment(C)
        assert cost.sum() == pytest.approx(best, abs=1e-12)
        assert sorted(perm) == list(range(n))

    def test_recovers_permutation(self, rng):
        tru = circular_gaussian(rng, (5, 3))
        p = np.array([3, 0, 4, 1, 2])
        perm, cost = match_rows(tru[np.argsort(p)], tru)
        assert np.all(cost == 0)

    def test_eigenvalue_error_permuted_truth(self):
        gt = generate(5, 3, np.inf, 0)
        shuffled = gt.deltas[:, [2, 4, 0, 1, 3]]
        err = eigenvalue_error(shuffled, gt)
        assert err.total_error == 0.0
        np.testing.assert_array_equal(err.matched_permutation, [2, 4, 0, 1, 3])
        assert err.mean_error == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            eigenvalue_error(np.zeros((3, 4)), np.zeros((3, 5)))

    def test_shared_permutation(self):
        # per-k matching would find zero error; the shared permutation cannot
        truth = np.array([[0.0, 1.0], [0.0, 1.0]])
        est = np.array([[0.0, 1.0], [1.0, 0.0]])
        # joint vectors (0,1),(1,0) against (0,0),(1,1): every pairing costs 2
        assert eigenvalue_error(est, truth).total_error == pytest.approx(2.0)


class TestMedians:
    def test_lower_median(self):
        assert lower_median([4, 1, 3, 2]) == 2
        assert lower_median([5, 1, 3]) == 3
        with pytest.raises(ValueError):
            lower_median([])

    def test_median_log10(self):
        assert median_log10_objective([1e-3, 1e-1, 1e-2]) == pytest.approx(-2.0)


class TestDiagnostics:
    def test_identity_basis(self):
        gt = generate(4, 3, 30, 0)
        cond, r1, r2 = basis_diagnostics(np.eye(4), A=gt.noisy)
        assert cond == pytest.approx(1.0)
        assert r1 == pytest.approx(r2)

    def test_ill_conditioned(self):
        gt = generate(4, 3, 30, 0)
        U = np.diag([1.0, 1.0, 1.0, 1e-3])
        cond, _, _ = basis_diagnostics(U, A=gt.noisy)
        assert cond == pytest.approx(1e6, rel=1e-6)
