import numpy as np
import pytest

from jointdiag import objective as obj
from jointdiag.cmat import DimensionMismatch, real_inner
from jointdiag.ensemble_gen import circular_gaussian, generate
from jointdiag.objective import MatrixEnsemble, TransformedEnsemble
from jointdiag.proptests import entrywise_objective, fd_gradient_oracle, fd_hessian_oracle

from conftest import unit


class TestEnsemble:
    def test_read_only(self):
        A = MatrixEnsemble(np.zeros((2, 3, 3)))
        with pytest.raises(ValueError):
            A.matrices[0, 0, 0] = 1

    def test_rejects_bad_shapes(self):
        with pytest.raises(DimensionMismatch):
            MatrixEnsemble(np.zeros((2, 3, 4)))

    def test_conjugate_by(self, rng):
        gt = generate(4, 2, 30, 0)
        U = np.eye(4) + 0.2 * circular_gaussian(rng, (4, 4))
        B = gt.noisy.conjugate_by(U)
        np.testing.assert_allclose(B.matrices, np.linalg.inv(U) @ gt.noisy.matrices @ U, atol=1e-12)


class TestObjective:
    def test_entrywise_oracle(self, rng):
        gt = generate(6, 4, 20, 3)
        U = np.eye(6) + 0.3 * circular_gaussian(rng, (6, 6))
        assert obj.f_at(gt.noisy, U) == pytest.approx(entrywise_objective(gt.noisy, U), rel=1e-12)

    def test_zero_on_diagonal_ensemble(self):
        D = np.array([np.diag([1, 2, 3]), np.diag([4, 5, 6j])])
        assert obj.f_at(MatrixEnsemble(D)) == 0.0

    def test_zero_at_true_basis(self):
        gt = generate(5, 3, np.inf, 1)
        assert obj.f_at(gt.clean, gt.Z) < 1e-26

    def test_equivariance(self, rng):
        gt = generate(5, 3, 30, 2)
        U = np.eye(5) + 0.3 * circular_gaussian(rng, (5, 5))
        V = np.eye(5) + 0.3 * circular_gaussian(rng, (5, 5))
        lhs = obj.f_at(gt.noisy, U @ V)
        rhs = obj.f_at(gt.noisy.conjugate_by(U), V)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_small_residual_is_not_cancelled(self):
        # the diagonal carries O(1) mass, the off-diagonal O(1e-20)
        D = np.diag([1.0, 2.0]).astype(complex)
        D[0, 1] = 1e-10
        assert obj.f_at(MatrixEnsemble(D[None])) == pytest.approx(0.5e-20, rel=1e-12)


class TestDerivatives:
    def test_gradient_fd(self, noisy_point, rng):
        G = obj.gradient(noisy_point)
        for _ in range(20):
            Z = unit(rng, 5)
            assert fd_gradient_oracle(noisy_point, Z) == pytest.approx(real_inner(G, Z), rel=1e-6)

    def test_hessian_fd(self, noisy_point, rng):
        for _ in range(5):
            Z = unit(rng, 5)
            assert fd_hessian_oracle(noisy_point, Z) == pytest.approx(
                obj.hessian_bilinear(noisy_point, Z, Z), rel=1e-4
            )

    def test_operator_form_duality(self, noisy_point, rng):
        for _ in range(10):
            Z, W = unit(rng, 5), unit(rng, 5)
            b = obj.hessian_bilinear(noisy_point, Z, W)
            a = real_inner(obj.hessian_apply(noisy_point, Z), W)
            assert abs(a - b) <= 1e-10 * (1 + abs(b))

    def test_form_symmetric_and_linear(self, noisy_point, rng):
        Z, W, Y = unit(rng, 5), unit(rng, 5), unit(rng, 5)
        h = lambda a, b: obj.hessian_bilinear(noisy_point, a, b)  # noqa: E731
        assert h(Z, W) == pytest.approx(h(W, Z), rel=1e-12)
        assert h(2 * Z + Y, W) == pytest.approx(2 * h(Z, W) + h(Y, W), rel=1e-10)

    def test_gauss_newton_nonnegative(self, noisy_point, rng):
        for _ in range(10):
            assert obj.gauss_newton_form(noisy_point, unit(rng, 5)) >= 0

    def test_gradient_zero_on_diagonal(self):
        D = np.array([np.diag([1, 2, 3.0]), np.diag([1j, 0, -1])])
        E = TransformedEnsemble.identity(MatrixEnsemble(D))
        assert np.all(obj.gradient(E) == 0)

    def test_identity_matches_explicit_identity(self):
        gt = generate(4, 3, 20, 5)
        E0 = TransformedEnsemble.identity(gt.noisy)
        E1 = TransformedEnsemble.at(gt.noisy, np.eye(4))
        np.testing.assert_allclose(obj.gradient(E0), obj.gradient(E1), atol=1e-14)

    def test_taylor_cubic(self, noisy_point, rng):
        from jointdiag.proptests import taylor_remainder_ratio

        r = taylor_remainder_ratio(noisy_point, unit(rng, 5), 1e-2)
        assert 6.5 <= r <= 9.5

    def test_scale_direction(self, noisy_point, rng):
        # f((1 + t) U) = f(U), so the Hessian along U mirrors the gradient
        U, Y = noisy_point.U, unit(rng, 5)
        assert abs(obj.hessian_bilinear(noisy_point, U, U)) < 1e-10
        assert obj.hessian_bilinear(noisy_point, U, Y) == pytest.approx(
            -real_inner(obj.gradient(noisy_point), Y), rel=1e-10
        )


class TestBlowup:
    def test_grows_toward_singular_basis(self):
        from jointdiag.proptests import blowup_profile

        prof = blowup_profile(generate(4, 3, 30, 0).noisy)
        assert np.all(np.diff(prof) > 0)
        assert prof[-1] > 1e6 * prof[0]
