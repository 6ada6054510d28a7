import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_psd, random_rotation
from stein_shrink.errors import DegenerateConfigurationError, DimensionError
from stein_shrink.estimators import EstimatorOutput, ShrinkageRule, haff_estimate, psi_haff
from stein_shrink.linalg import pinv, sym_eig, truncate_to_rank
from stein_shrink.loss import logdet_factorization_check, stein_loss, surrogate_matrix
from stein_shrink.model import Dimensions


def random_instance(p, n, r, rng, alpha=2.0, b=0.8):
    sigma = random_psd(p, r, rng)
    w, V = np.linalg.eigh(sigma)
    B = V[:, -r:] * np.sqrt(np.clip(w[-r:], 0, None))
    X = B @ rng.standard_normal((r, n))
    dims = Dimensions(p, n, r)
    est = haff_estimate(X @ X.T, dims, ShrinkageRule(alpha, b))
    return sigma, est, dims


class TestSteinLoss:
    def test_identity_zero(self):
        dims = Dimensions(4, 6, 4)
        loss = stein_loss(np.eye(4), np.eye(4), dims)
        assert loss.value == pytest.approx(0.0, abs=1e-14)

    def test_hand_computed(self):
        loss = stein_loss(np.diag([2.0, 1.0]), np.eye(2), Dimensions(2, 2, 2))
        assert loss.trace_term == pytest.approx(3.0, rel=1e-15)
        assert loss.logdet_term == pytest.approx(np.log(2.0), rel=1e-15)
        assert loss.value == pytest.approx(1 - np.log(2.0), rel=1e-14)
        assert loss.value == pytest.approx(0.30685281944005469, rel=1e-14)

    def test_scaled_covariance(self, rng):
        # Sigma_hat = c Sigma on the leading q directions: every eigenvalue equals c
        p, r, q, c = 7, 5, 3, 2.0
        U = random_rotation(p, rng)[:, :r]
        s = np.exp(rng.standard_normal(r))
        sigma = (U * s) @ U.T
        est = EstimatorOutput(scale=c, vectors=U[:, :q], values=s[:q])
        loss = stein_loss(est, sigma, Dimensions(p, q, r))
        assert loss.value == pytest.approx(3 * (1 - np.log(2.0)), rel=1e-12)

    def test_accepts_dense_and_factored(self, rng):
        sigma, est, dims = random_instance(6, 4, 5, rng)
        a = stein_loss(est, sigma, dims)
        b = stein_loss(est.sigma_hat, sigma, dims)
        assert a.value == pytest.approx(b.value, rel=1e-9)

    def test_precomputed_pinv(self, rng):
        sigma, est, dims = random_instance(6, 4, 5, rng)
        a = stein_loss(est, sigma, dims)
        b = stein_loss(est, None, dims, sigma_pinv=pinv(sigma))
        assert a == b

    def test_rank_mismatch(self, rng):
        sigma, est, dims = random_instance(6, 4, 5, rng)
        with pytest.raises(DimensionError):
            stein_loss(est, sigma, Dimensions(6, 3, 5))

    def test_degenerate_configuration(self):
        sigma = np.diag([1.0, 0.0])
        est = EstimatorOutput(scale=1.0, vectors=np.array([[0.0], [1.0]]), values=np.array([1.0]))
        with pytest.raises(DegenerateConfigurationError):
            stein_loss(est, sigma, Dimensions(2, 1, 1))

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_invariants(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(2, 10))
        r = int(rng.integers(1, p + 1))
        n = int(rng.integers(1, 12))
        sigma, est, dims = random_instance(p, n, r, rng, alpha=float(rng.uniform(0.2, 5)))
        loss = stein_loss(est, sigma, dims)
        assert loss.value >= -1e-10
        assert loss.value == pytest.approx(loss.trace_term - loss.logdet_term - loss.q, abs=1e-12)
        assert loss.trace_term == pytest.approx(np.trace(pinv(sigma) @ est.sigma_hat), rel=1e-8)

        O = random_rotation(p, rng)
        rotated = EstimatorOutput(est.scale, O @ est.vectors, est.values)
        other = stein_loss(rotated, O @ sigma @ O.T, dims)
        assert other.value == pytest.approx(loss.value, rel=1e-8, abs=1e-8)

    def test_zero_iff_unit_spectrum(self, rng):
        p, r, q = 8, 6, 4
        U = random_rotation(p, rng)[:, :r]
        s = np.exp(rng.standard_normal(r))
        sigma = (U * s) @ U.T
        est = EstimatorOutput(scale=1.0, vectors=U[:, :q], values=s[:q])
        assert stein_loss(est, sigma, Dimensions(p, q, r)).value <= 1e-8

    @pytest.mark.parametrize("p, n, r", [(5, 3, 5), (6, 8, 6), (9, 12, 4), (12, 5, 3), (20, 4, 9), (20, 20, 20)])
    def test_surrogate_matches_direct_spectrum(self, p, n, r, rng):
        sigma, est, dims = random_instance(p, n, r, rng)
        lam = np.linalg.eigvalsh(surrogate_matrix(est, pinv(sigma)))[::-1]
        direct = np.linalg.eigvals(pinv(sigma) @ est.sigma_hat)
        direct = np.sort(direct.real)[::-1][: dims.q]
        np.testing.assert_allclose(lam, direct, rtol=1e-6)


class TestLogdetFactorization:
    def test_haff_pieces(self, rng):
        p, n, r = 6, 4, 3
        sigma = random_psd(p, r, rng)
        w, V = np.linalg.eigh(sigma)
        X = (V[:, -r:] * np.sqrt(w[-r:])) @ rng.standard_normal((r, n))
        dims = Dimensions(p, n, r)
        eig = truncate_to_rank(sym_eig(X @ X.T), dims.q)
        phi = 1 + psi_haff(eig.values, ShrinkageRule(2.0, 1.2))
        assert logdet_factorization_check(1 / dims.m, eig.vectors, eig.values, phi, sigma) <= 1e-8

    def test_no_shrinkage(self, rng):
        sigma = random_psd(5, 4, rng)
        H = random_rotation(5, rng)[:, :3]
        L = np.array([3.0, 2.0, 0.5])
        assert logdet_factorization_check(0.25, H, L, np.ones(3), sigma) <= 1e-8

    def test_orthogonal_full_rank(self, rng):
        H = random_rotation(4, rng)
        L = np.array([4.0, 3.0, 2.0, 1.0])
        phi = np.array([1.1, 1.2, 1.3, 1.4])
        assert logdet_factorization_check(1.0, H, L, phi, np.eye(4)) <= 1e-10
        # both sides equal sum ln(l_i phi_i) here
        est = EstimatorOutput(1.0, H, L * phi)
        loss = stein_loss(est, np.eye(4), Dimensions(4, 4, 4))
        assert loss.logdet_term == pytest.approx(np.sum(np.log(L * phi)), rel=1e-12)

    def test_singular_inner(self):
        H = np.array([[0.0], [1.0]])
        with pytest.raises(DegenerateConfigurationError):
            logdet_factorization_check(1.0, H, np.array([1.0]), np.array([1.0]), np.diag([1.0, 0.0]))
