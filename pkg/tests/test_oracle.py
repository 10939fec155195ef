import math

import numpy as np
import pytest

from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.linalg import aslinearoperator

from dirlap.core import (
    DirectedLaplacian,
    SparseGraph,
    symmetrization,
    validate_laplacian,
)
from dirlap.exceptions import (
    DimensionCapError,
    KernelMismatchError,
    NotPSDSymmetrizationError,
    NotStronglyConnectedError,
)
from dirlap.generators import bidirected_complete, bidirected_path, random_eulerian
from dirlap.oracle import (
    DIMENSION_CAP,
    approx_norm,
    dense,
    dense_pinv,
    exact_stationary,
    generalized_eigs,
    harmonic_symmetrization,
    is_psd,
    lambda_star,
    materialize,
    power_iteration_pagerank,
    pseudoinverse_error,
    psd_leq,
    rayleigh_norm,
    spectral_gap,
    symmetrized,
    u_norm,
)
from dirlap.sparsify import sparsify_eulerian

eulerian_graphs = st.builds(
    lambda n, cycles, seed: random_eulerian(n, cycles, seed, low=0.5, high=4.0),
    st.integers(min_value=3, max_value=10),
    st.integers(min_value=0, max_value=12),
    st.integers(min_value=0, max_value=2**32),
)


class TestDense:
    def test_forms(self, triangle: DirectedLaplacian):
        adjacency = triangle.adjacency.csr.toarray()
        laplacian = dense(triangle)
        np.testing.assert_allclose(
            laplacian, np.diag(adjacency.sum(axis=1)) - adjacency.T
        )
        np.testing.assert_array_equal(dense(triangle.adjacency), adjacency)
        np.testing.assert_array_equal(dense(laplacian.tolist()), laplacian)
        np.testing.assert_allclose(dense(aslinearoperator(laplacian)), laplacian)
        np.testing.assert_allclose(materialize(aslinearoperator(laplacian)), laplacian)

    def test_cap(self):
        with pytest.raises(DimensionCapError) as exc_info:
            dense(SparseGraph.empty(DIMENSION_CAP + 1))
        assert exc_info.value.details == {"n": 601, "cap": 600}

    def test_custom_cap(self, triangle: DirectedLaplacian):
        with pytest.raises(DimensionCapError):
            dense_pinv(triangle, cap=2)


class TestApproximationNorm:
    def test_symmetric_doubling(self):
        laplacian = bidirected_complete(6)
        assert approx_norm(laplacian, 2 * dense(laplacian)) == pytest.approx(1.0)

    def test_kernel_leak(self):
        reference = validate_laplacian(
            SparseGraph.from_edges(3, [(0, 1, 1.0), (1, 0, 1.0)])
        )
        approximation = dense(reference)
        approximation[2, 2] = 1.0
        assert approx_norm(reference, approximation) == math.inf

    def test_not_psd(self):
        with pytest.raises(NotPSDSymmetrizationError):
            approx_norm(np.array([[1.0, -3.0], [-3.0, 1.0]]), np.eye(2))

    def test_rayleigh_form(self, eulerian: DirectedLaplacian):
        perturbed = dense(eulerian)
        perturbed[:2, :2] += 0.1 * dense(bidirected_path(2))
        assert rayleigh_norm(eulerian, perturbed) == pytest.approx(
            approx_norm(eulerian, perturbed, check=False)
        )

    @settings(max_examples=25, deadline=None)
    @given(laplacian=eulerian_graphs)
    def test_identity_has_zero_error(self, laplacian: DirectedLaplacian):
        assert approx_norm(laplacian, laplacian) == 0.0

    @settings(max_examples=25, deadline=None)
    @given(laplacian=eulerian_graphs)
    def test_eulerian_symmetrization_is_psd(self, laplacian: DirectedLaplacian):
        assert is_psd(symmetrization(laplacian))
        assert is_psd(harmonic_symmetrization(laplacian))


class TestGeneralizedEigs:
    @settings(max_examples=25, deadline=None)
    @given(laplacian=eulerian_graphs)
    def test_scaled_copy(self, laplacian: DirectedLaplacian):
        u = dense(symmetrization(laplacian))
        low, high = generalized_eigs(2 * u, u)
        assert low == pytest.approx(2.0)
        assert high == pytest.approx(2.0)
        assert psd_leq(u, u)
        assert psd_leq(u, 2 * u)
        assert not psd_leq(2 * u, u)

    def test_kernel_mismatch(self):
        connected = bidirected_path(3)
        split = validate_laplacian(
            SparseGraph.from_edges(3, [(0, 1, 1.0), (1, 0, 1.0)])
        )
        with pytest.raises(KernelMismatchError):
            generalized_eigs(dense(connected), dense(split))


class TestSpectra:
    def test_lambda_star(self):
        assert lambda_star(bidirected_path(3)) == pytest.approx(1.0)

    def test_spectral_gap(self):
        assert spectral_gap(bidirected_complete(4)) == pytest.approx(4 / 3)

    def test_disconnected_gap(self):
        graph = validate_laplacian(
            SparseGraph.from_edges(
                4, [(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)]
            )
        )
        assert spectral_gap(graph) == pytest.approx(0.0, abs=1e-12)

    def test_pseudoinverse_error(self, eulerian: DirectedLaplacian):
        u = dense(symmetrization(eulerian))
        assert pseudoinverse_error(dense_pinv(eulerian), eulerian, u) < 1e-8
        assert pseudoinverse_error(np.zeros((16, 16)), eulerian, u) > 0.5

    def test_u_norm(self):
        u = dense(bidirected_path(2))
        assert u_norm([1.0, -1.0], u) == pytest.approx(2.0)
        assert u_norm([1.0, 1.0], u) == 0.0


class TestStationaryReferences:
    def test_exact_stationary(self, triangle: DirectedLaplacian):
        np.testing.assert_allclose(
            exact_stationary(triangle), np.array([2.0, 1.0, 2.0]) / 5
        )

    def test_exact_stationary_disconnected(self):
        path = validate_laplacian(
            SparseGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])
        )
        with pytest.raises(NotStronglyConnectedError):
            exact_stationary(path)

    def test_pagerank_full_restart(self, triangle: DirectedLaplacian):
        personalization = np.array([0.6, 0.4, 0.0])
        np.testing.assert_allclose(
            power_iteration_pagerank(triangle, 1.0, personalization), personalization
        )

    def test_pagerank_is_stationary_without_restart(self, triangle):
        ranks = power_iteration_pagerank(triangle, 1e-12, np.full(3, 1 / 3))
        np.testing.assert_allclose(ranks, exact_stationary(triangle), atol=1e-6)


TRIALS = 200


def _contraction(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random square matrix with 2-norm in [1/2, 0.95]."""
    matrix = rng.standard_normal((n, n))
    return matrix * rng.uniform(0.5, 0.95) / np.linalg.norm(matrix, 2)


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(matrix)
    return (vectors * np.sqrt(np.maximum(values, 0.0))) @ vectors.T


class TestLinearAlgebraFacts:
    def test_perturbed_gram_matrix(self):
        rng = np.random.default_rng(0)
        for _ in range(TRIALS):
            n = int(rng.integers(2, 31))
            b = rng.standard_normal((n, n))
            noise = rng.standard_normal((n, n))
            eps = rng.uniform(0.01, 1.0)
            a = b + noise * eps * rng.uniform(0.1, 1.0) / np.linalg.norm(noise, 2)
            c = rng.uniform(0.1, 10.0)
            identity = np.eye(n)
            assert psd_leq((1 - c) * b.T @ b - eps**2 / c * identity, a.T @ a)
            assert psd_leq(a.T @ a, (1 + c) * b.T @ b + (1 + 1 / c) * eps**2 * identity)

    def test_scaled_two_norm_bound(self):
        rng = np.random.default_rng(1)
        for _ in range(TRIALS):
            rows, cols = rng.integers(1, 31, size=2)
            mask = rng.random((rows, cols)) < 0.4
            matrix = rng.uniform(0.0, 3.0, (rows, cols)) * mask
            d1 = rng.uniform(0.1, 5.0, rows)
            d2 = rng.uniform(0.1, 5.0, cols)
            scaled = matrix / np.sqrt(d1)[:, None] / np.sqrt(d2)[None, :]
            bound = max(
                np.linalg.norm(matrix / d1[:, None], np.inf),
                np.linalg.norm(matrix.T / d2[:, None], np.inf),
            )
            assert np.linalg.norm(scaled, 2) <= bound * (1 + 1e-12) + 1e-300

    def test_square_upper_bounds(self):
        rng = np.random.default_rng(2)
        for _ in range(TRIALS):
            n = int(rng.integers(2, 31))
            identity = np.eye(n)
            m = _contraction(rng, n)
            u = symmetrized(m)
            assert is_psd(identity - symmetrized(m @ m))
            assert psd_leq(identity - symmetrized(m @ m), 2 * (identity - u @ u))
            assert psd_leq(2 * (identity - u @ u), 4 * (identity - u))
            assert psd_leq(identity - u @ u, 2 * (identity - u))

    def test_lazy_square_is_comparable(self):
        rng = np.random.default_rng(3)
        alpha = 0.25
        for _ in range(TRIALS):
            n = int(rng.integers(2, 31))
            identity = np.eye(n)
            lazy = alpha * identity + (1 - alpha) * _contraction(rng, n)
            first = identity - symmetrized(lazy)
            second = identity - symmetrized(lazy @ lazy)
            assert psd_leq(2 * alpha * first, second)
            assert psd_leq(second, (4 - 2 * alpha) * first)

    def test_lazy_square_improves_gap(self):
        rng = np.random.default_rng(4)
        alpha = 0.25
        for _ in range(TRIALS):
            n = int(rng.integers(2, 31))
            m = _contraction(rng, n)
            identity = np.eye(n)
            lazy = alpha * identity + (1 - alpha) * m
            before = lambda_star(identity - symmetrized(m))
            after = lambda_star(identity - symmetrized(lazy @ lazy))
            assert after >= min(alpha, (1 + alpha) * before) * (1 - 1e-9)

    @settings(max_examples=TRIALS, deadline=None)
    @given(laplacian=eulerian_graphs)
    def test_harmonic_symmetrization_dominates(self, laplacian: DirectedLaplacian):
        assert psd_leq(symmetrization(laplacian), harmonic_symmetrization(laplacian))

    def test_square_root_monotonicity(self):
        rng = np.random.default_rng(5)
        for _ in range(TRIALS):
            n = int(rng.integers(2, 31))
            factor = rng.standard_normal((n, n))
            extra = rng.standard_normal((n, int(rng.integers(1, n + 1))))
            lower = factor @ factor.T
            upper = lower + extra @ extra.T
            m = rng.standard_normal((n, n))
            low, high = _psd_sqrt(lower), _psd_sqrt(upper)
            scale = 1 + 1e-9
            assert np.linalg.norm(low @ m, 2) <= np.linalg.norm(high @ m, 2) * scale
            assert np.linalg.norm(m @ low, 2) <= np.linalg.norm(m @ high, 2) * scale


class TestHarmonicSymmetrization:
    @settings(max_examples=50, deadline=None)
    @given(laplacian=eulerian_graphs)
    def test_bounds(self, laplacian: DirectedLaplacian):
        low, high = generalized_eigs(
            harmonic_symmetrization(laplacian), symmetrization(laplacian)
        )
        n = laplacian.n
        assert low >= 1 - 1e-9
        assert high <= 2 * (n - 1) ** 2 * (1 + 1e-9)

    @pytest.mark.parametrize("seed", range(5), ids=lambda seed: f"seed {seed}")
    def test_perturbation_sandwich(self, seed: int):
        laplacian = random_eulerian(12, 20, seed=seed, low=1.0, high=3.0)
        noise = random_eulerian(12, 4, seed=seed + 100, low=0.1, high=0.3)
        reference = dense(laplacian)
        raw = approx_norm(reference, reference + dense(noise))
        approximation = reference + 0.3 / raw * dense(noise)
        eps = approx_norm(reference, approximation)
        assert eps == pytest.approx(0.3)
        harmonic = harmonic_symmetrization(reference)
        perturbed = harmonic_symmetrization(approximation)
        assert psd_leq((1 - 2 * eps) ** 2 * harmonic, perturbed)
        assert psd_leq(perturbed, (1 + eps) ** 3 * harmonic)

    def test_sparsifier_sandwich(self):
        laplacian = bidirected_complete(20)
        sparse = sparsify_eulerian(laplacian, 0.01, 0.4, seed=2)
        eps = approx_norm(laplacian, sparse)
        assert eps <= 0.4 + 1e-9
        harmonic = harmonic_symmetrization(laplacian)
        sparsified = harmonic_symmetrization(sparse)
        assert psd_leq((1 - 2 * eps) ** 2 * harmonic, sparsified)
        assert psd_leq(sparsified, (1 + eps) ** 3 * harmonic)


class TestProductGap:
    def test_gap_is_at_least_one(self):
        rng = np.random.default_rng(6)
        for _ in range(TRIALS):
            n = int(rng.integers(2, 31))
            x = rng.uniform(0.0, 2.0, n) * (rng.random(n) < 0.6)
            y = rng.uniform(0.0, 2.0, n) * (rng.random(n) < 0.6)
            x[rng.integers(n)] += 1.0
            y[rng.integers(n)] += 1.0
            y *= x.sum() / y.sum()
            laplacian = np.diag(y) - np.outer(x, y) / x.sum()
            np.testing.assert_allclose(laplacian.sum(axis=0), 0.0, atol=1e-12)
            assert spectral_gap(laplacian) >= 1 - 1e-9


class TestMaximumPrinciple:
    @pytest.mark.parametrize("seed", range(10), ids=lambda seed: f"seed {seed}")
    def test_extremes_on_demand_support(self, seed: int):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 31))
        laplacian = random_eulerian(n, 2 * n, seed=seed, low=0.5, high=4.0)
        support = rng.choice(n, size=int(rng.integers(2, 5)), replace=False)
        b = np.zeros(n)
        b[support] = rng.standard_normal(len(support))
        b[support] -= b[support].mean()
        x = dense_pinv(laplacian) @ b
        np.testing.assert_allclose(dense(laplacian) @ x, b, atol=1e-9)
        tolerance = 1e-9 * np.abs(x).max()
        assert x[support].max() >= x.max() - tolerance
        assert x[support].min() <= x.min() + tolerance


class TestApproximatePseudoinverse:
    @pytest.mark.parametrize("seed", range(5), ids=lambda seed: f"seed {seed}")
    def test_spectral_approximation_transfers(self, seed: int):
        laplacian = random_eulerian(12, 20, seed=seed, low=1.0, high=3.0)
        noise = dense(random_eulerian(12, 5, seed=seed + 50, low=0.5, high=1.0))
        reference = dense(laplacian)
        raw = approx_norm(reference, reference + noise)
        approximation = reference + 0.4 / raw * noise
        error = pseudoinverse_error(
            dense_pinv(approximation), reference, symmetrized(reference)
        )
        assert error <= 2 * 0.4 * (1 + 1e-9)
