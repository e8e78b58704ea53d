import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    bkm_quadrature,
    central_difference,
    expm,
    log_mean_quadrature,
    logm,
    random_density,
    random_hermitian,
    random_traceless,
    rel_err,
    tmap_inv_quadrature,
)
from qsaf.hermitian import (
    DomainError,
    as_density,
    as_hermitian,
    as_tangent,
    bkm_metric,
    frobenius_inner,
    log_mean,
    matrix_exp,
    matrix_log,
    project_traceless,
    spectral_decompose,
    tmap,
    tmap_inv,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.sampled_from([2, 3, 4, 6])


class TestFrobeniusInner:
    def test_identity(self):
        assert frobenius_inner(np.eye(2), np.eye(2)) == 2.0

    def test_diagonal(self):
        assert frobenius_inner(np.diag([1.0, 2.0]), np.diag([3.0, 4.0])) == 11.0

    @given(seeds, dims)
    def test_entrywise_sum(self, seed, c):
        rng = np.random.default_rng(seed)
        A, B = random_hermitian(rng, c), random_hermitian(rng, c)
        expected = np.real(np.sum(A * np.conj(B)))
        assert abs(frobenius_inner(A, B) - expected) <= 1e-12 * max(1.0, abs(expected))

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            frobenius_inner(np.eye(2), np.eye(3))

    def test_batched(self):
        A = np.stack([np.eye(2), 2 * np.eye(2)])
        np.testing.assert_allclose(frobenius_inner(A, A), [2.0, 8.0])


class TestSpectral:
    def test_identity(self):
        np.testing.assert_array_equal(spectral_decompose(np.eye(4)).eigenvalues, np.ones(4))

    def test_diagonal_sorted(self):
        w, _ = spectral_decompose(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(w, [1.0, 2.0, 3.0])

    @given(seeds, dims)
    def test_reconstruction_and_unitarity(self, seed, c):
        A = random_hermitian(np.random.default_rng(seed), c, scale=3.0)
        dec = spectral_decompose(A)
        assert np.linalg.norm(dec.reconstruct() - A) <= 1e-10 * np.linalg.norm(A)
        U = dec.eigenvectors
        assert np.max(np.abs(U.conj().T @ U - np.eye(c))) <= 1e-10
        assert np.all(np.diff(dec.eigenvalues) >= 0)

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            spectral_decompose(np.array([[np.nan, 0], [0, 1.0]]))


class TestExpLog:
    def test_exp_zero(self):
        np.testing.assert_array_equal(matrix_exp(np.zeros((3, 3))), np.eye(3))

    @pytest.mark.parametrize("c", [2, 3, 5])
    def test_log_of_barycenter(self, c):
        np.testing.assert_allclose(matrix_log(np.eye(c) / c), -np.log(c) * np.eye(c), atol=1e-15)

    @given(seeds, dims)
    def test_exp_against_pade(self, seed, c):
        A = random_hermitian(np.random.default_rng(seed), c, scale=2.0)
        assert rel_err(matrix_exp(A), expm(A)) <= 1e-8

    @given(seeds, dims, st.floats(0.1, 10.0))
    def test_round_trip(self, seed, c, size):
        A = random_hermitian(np.random.default_rng(seed), c)
        A *= size / np.linalg.norm(A)
        assert np.linalg.norm(matrix_log(matrix_exp(A)) - A) <= 1e-9 * np.linalg.norm(A)

    def test_log_needs_pd(self):
        with pytest.raises(DomainError):
            matrix_log(np.diag([1.0, -1.0]))
        with pytest.raises(DomainError):
            matrix_log(np.diag([1.0, 0.0]))

    @given(seeds, dims)
    def test_log_against_schur(self, seed, c):
        rho = random_density(np.random.default_rng(seed), c)
        assert rel_err(matrix_log(rho), logm(rho)) <= 1e-10


class TestProjection:
    def test_identity_vanishes(self):
        np.testing.assert_allclose(project_traceless(np.eye(4)), 0.0, atol=1e-16)

    @given(seeds, dims)
    def test_idempotent_orthogonal_self_adjoint(self, seed, c):
        rng = np.random.default_rng(seed)
        A, B = random_hermitian(rng, c), random_hermitian(rng, c)
        PA, PB = project_traceless(A), project_traceless(B)
        np.testing.assert_allclose(project_traceless(PA), PA, atol=1e-14)
        assert abs(frobenius_inner(A - PA, PB)) <= 1e-12
        assert abs(frobenius_inner(PA, B) - frobenius_inner(A, PB)) <= 1e-12

    def test_traceless_unchanged(self):
        X = random_traceless(np.random.default_rng(0), 3)
        np.testing.assert_allclose(project_traceless(X), X, atol=1e-15)


class TestLogMean:
    def test_equal_arguments_exact(self):
        for a in (1e-12, 0.3, 1.0, 7.5e5):
            assert log_mean(a, a) == a

    def test_direct_formula(self):
        assert log_mean(1.0, np.e) == pytest.approx(np.e - 1.0, rel=1e-15)

    def test_near_equal_against_quadrature(self):
        x, y = 1.0, 1.0 + 1e-13
        ref = log_mean_quadrature(x, y)
        assert abs(log_mean(x, y) - ref) <= 1e-12 * ref

    @pytest.mark.parametrize("ratio", [1 + 1e-9, 1 + 1e-8, 1 + 2e-8, 1 + 1e-6, 1 + 1e-3])
    def test_continuity_across_switch(self, ratio):
        x, y = 0.37, 0.37 * ratio
        assert log_mean(x, y) == pytest.approx(log_mean_quadrature(x, y), rel=1e-12)

    @given(st.floats(1e-10, 1e6), st.floats(1e-10, 1e6))
    def test_bounds_and_symmetry(self, x, y):
        m = log_mean(x, y)
        assert min(x, y) <= m <= max(x, y)
        assert m == log_mean(y, x)

    @pytest.mark.parametrize("bad", [(0.0, 1.0), (-1.0, 2.0)])
    def test_nonpositive(self, bad):
        with pytest.raises(DomainError):
            log_mean(*bad)

    def test_broadcasts(self):
        out = log_mean(np.array([1.0, 2.0]), 2.0)
        assert out.shape == (2,) and out[1] == 2.0


class TestTmap:
    @pytest.mark.parametrize("c", [2, 3, 5])
    def test_barycenter(self, c):
        X = random_traceless(np.random.default_rng(c), c)
        rho = np.eye(c) / c
        np.testing.assert_allclose(tmap(rho, X), c * X, atol=1e-14)
        np.testing.assert_allclose(tmap_inv(rho, X), X / c, atol=1e-15)

    @given(seeds, dims)
    def test_base_point_identities(self, seed, c):
        rho = random_density(np.random.default_rng(seed), c)
        np.testing.assert_allclose(tmap(rho, rho), np.eye(c), atol=1e-12)
        np.testing.assert_allclose(tmap_inv(rho, np.eye(c)), rho, atol=1e-14)

    @given(seeds, dims)
    def test_derivative_of_log(self, seed, c):
        rng = np.random.default_rng(seed)
        rho, X = random_density(rng, c), random_hermitian(rng, c)
        X /= np.linalg.norm(X)
        fd = central_difference(logm, rho, X, h=1e-5)
        assert rel_err(tmap(rho, X), fd) <= 1e-6

    @given(seeds, dims)
    def test_inverse_pair(self, seed, c):
        rng = np.random.default_rng(seed)
        rho, X = random_density(rng, c), random_hermitian(rng, c)
        n = np.linalg.norm(X)
        assert np.linalg.norm(tmap(rho, tmap_inv(rho, X)) - X) <= 1e-10 * n
        assert np.linalg.norm(tmap_inv(rho, tmap(rho, X)) - X) <= 1e-10 * n

    @settings(max_examples=25)
    @given(seeds, dims)
    def test_inverse_against_quadrature(self, seed, c):
        rng = np.random.default_rng(seed)
        rho, X = random_density(rng, c), random_hermitian(rng, c)
        assert np.linalg.norm(tmap_inv(rho, X) - tmap_inv_quadrature(rho, X)) <= 1e-9 * np.linalg.norm(X)

    @given(seeds, dims)
    def test_trace_identity(self, seed, c):
        rng = np.random.default_rng(seed)
        rho, X = random_density(rng, c), random_hermitian(rng, c)
        assert abs(np.trace(tmap_inv(rho, X)).real - frobenius_inner(rho, X)) <= 1e-12

    def test_requires_pd(self):
        with pytest.raises(DomainError):
            tmap(np.diag([1.0, 0.0]), np.eye(2))

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(1)
        rhos = np.array([random_density(rng, 3) for _ in range(4)])
        Xs = np.array([random_hermitian(rng, 3) for _ in range(4)])
        batched = tmap(rhos, Xs)
        for k in range(4):
            np.testing.assert_allclose(batched[k], tmap(rhos[k], Xs[k]), atol=1e-14)


class TestBKM:
    @pytest.mark.parametrize("c", [2, 4])
    def test_barycenter(self, c):
        rng = np.random.default_rng(c)
        X, Y = random_traceless(rng, c), random_traceless(rng, c)
        assert bkm_metric(np.eye(c) / c, X, Y) == pytest.approx(c * frobenius_inner(X, Y), abs=1e-13)

    @given(seeds, dims)
    def test_symmetric_positive(self, seed, c):
        rng = np.random.default_rng(seed)
        rho, X, Y = random_density(rng, c), random_traceless(rng, c), random_traceless(rng, c)
        assert abs(bkm_metric(rho, X, Y) - bkm_metric(rho, Y, X)) <= 1e-12
        assert bkm_metric(rho, X, X) > 0

    @settings(max_examples=15, deadline=None)
    @given(seeds, st.sampled_from([2, 3, 4]))
    def test_against_resolvent_integral(self, seed, c):
        rng = np.random.default_rng(seed)
        rho, X, Y = random_density(rng, c), random_traceless(rng, c), random_traceless(rng, c)
        ref = bkm_quadrature(rho, X, Y)
        assert abs(bkm_metric(rho, X, Y) - ref) <= 1e-6 * max(1.0, abs(ref))


class TestValidators:
    def test_density_ok_and_readonly(self):
        rho = as_density(np.eye(2) / 2)
        assert not rho.flags.writeable
        assert rho.dtype == complex

    def test_density_trace_scale(self):
        as_density(np.eye(3), trace_scale=3.0)
        with pytest.raises(DomainError):
            as_density(np.eye(3), trace_scale=1.0)

    def test_density_rejects_singular(self):
        with pytest.raises(DomainError):
            as_density(np.diag([1.0, 0.0]))

    def test_density_rejects_below_floor(self):
        with pytest.raises(DomainError):
            as_density(np.diag([1.0 - 1e-16, 1e-16]))

    def test_hermitian_rejects(self):
        with pytest.raises(DomainError):
            as_hermitian(np.array([[0, 1.0], [0, 0]]))
        with pytest.raises(DomainError):
            as_hermitian(np.ones((2, 3)))

    def test_hermitian_symmetrizes_rounding(self):
        A = np.array([[1.0, 1.0 + 1e-14], [1.0, 2.0]])
        H = as_hermitian(A)
        np.testing.assert_array_equal(H, H.conj().T)

    def test_tangent(self):
        as_tangent(np.diag([1.0, -1.0]))
        with pytest.raises(DomainError):
            as_tangent(np.eye(2))
