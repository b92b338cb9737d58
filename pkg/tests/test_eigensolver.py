import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gribov.eigensolver import (
    SpectrumResult,
    biorthogonal_system,
    compute_spectrum,
    min_pairwise_gap,
    reality_report,
    smallest_eigenvalue_curve,
    sorted_eigenvalues,
)
from gribov.errors import ConvergenceError, DimensionError, ExceptionalPointError, ParameterRegimeError
from gribov.operator_core import (
    BandedComplexMatrix,
    BasisRange,
    OperatorParams,
    build_diagonal_power_matrix,
    build_displaced_oscillator,
    build_gribov_matrix,
)


class TestClosedFormSpectra:
    @pytest.mark.parametrize("dim", [4, 64, 512])
    def test_cubic_power_is_exact(self, dim):
        values = sorted_eigenvalues(build_diagonal_power_matrix("G", BasisRange(dim)))
        n = np.arange(1, dim + 1)
        np.testing.assert_array_equal(values.real, n * (n - 1) * (n - 2))

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.5, 3.0), st.floats(-1.0, 1.0))
    def test_displaced_oscillator(self, omega, coupling):
        # omega A*A + c (A + A*) = omega B*B - c^2/omega with B = A + c/omega
        values = sorted_eigenvalues(build_displaced_oscillator(omega, coupling, BasisRange(120, 0)))
        expected = np.arange(8) * omega - coupling**2 / omega
        np.testing.assert_allclose(values[:8].real, expected, atol=1e-9)

    def test_sorting_is_by_real_then_imaginary(self):
        m = BandedComplexMatrix(BasisRange(3), np.array([1 + 1j, 1 - 1j, 0.5]), np.zeros(2))
        np.testing.assert_array_equal(sorted_eigenvalues(m), [0.5, 1 - 1j, 1 + 1j])


class TestComputeSpectrum:
    def test_drift_certificate(self, mu_lambda_params):
        spec = compute_spectrum(build_gribov_matrix(mu_lambda_params, BasisRange(128)), 3)
        assert spec.converged.all()
        assert spec.dims_used == (128, 256)
        np.testing.assert_allclose(spec.eigenvalues.real, [1.31770755, 3.30958826, 5.7317035], rtol=1e-7)

    def test_too_small_truncation_is_flagged(self):
        spec = compute_spectrum(build_gribov_matrix(OperatorParams(mu=1, lam=3), BasisRange(8)), 3)
        assert not spec.converged.all()

    def test_count_bounds(self, mu_lambda_params):
        with pytest.raises(DimensionError):
            compute_spectrum(build_gribov_matrix(mu_lambda_params, BasisRange(8)), 9)

    def test_round_trip(self, mu_lambda_params):
        spec = compute_spectrum(build_gribov_matrix(mu_lambda_params, BasisRange(32)), 3)
        back = SpectrumResult.from_dict(spec.to_dict())
        np.testing.assert_array_equal(back.eigenvalues, spec.eigenvalues)
        np.testing.assert_array_equal(back.drift, spec.drift)
        assert back.dims_used == spec.dims_used

    def test_lambda_zero_is_number_operator(self):
        spec = compute_spectrum(build_gribov_matrix(OperatorParams(mu=2.5), BasisRange(16)), 5)
        np.testing.assert_allclose(spec.eigenvalues, 2.5 * np.arange(1, 6))


class TestReality:
    def test_delta_nonnegative_gives_real_spectrum(self, lambda_prime_params):
        rep = reality_report(lambda_prime_params, BasisRange(256))
        assert rep.all_real and rep.max_imag < 1e-8
        assert rep.delta == 2.0

    def test_needs_lambda_prime(self):
        with pytest.raises(ParameterRegimeError):
            reality_report(OperatorParams(mu=1, lam=1), BasisRange(16))

    def test_gap(self):
        assert min_pairwise_gap([0, 1, 3]) == 1
        assert min_pairwise_gap([2]) == float("inf")


class TestSmallestEigenvalueCurve:
    def test_increasing_in_mu(self):
        curve = smallest_eigenvalue_curve(OperatorParams(lam=1.0), [1, 2, 4], BasisRange(256), 1e-6)
        assert np.all(curve > 0) and np.all(np.diff(curve) > 0)

    def test_unconverged_raises_with_partial(self):
        with pytest.raises(ConvergenceError) as info:
            smallest_eigenvalue_curve(OperatorParams(lam=1.0), [4, 0.01], BasisRange(64), 1e-6)
        assert len(info.value.partial) == 1


class TestBiorthogonal:
    def test_expansion_reconstructs_vector(self, mu_lambda_params, rng):
        m = build_gribov_matrix(mu_lambda_params, BasisRange(24))
        sys_ = biorthogonal_system(m, 24)
        phi0 = rng.normal(size=24) + 1j * rng.normal(size=24)
        np.testing.assert_allclose(sys_.right_vectors @ sys_.coefficients(phi0), phi0, atol=1e-9)

    def test_bilinear_orthogonality(self, mu_lambda_params):
        sys_ = biorthogonal_system(build_gribov_matrix(mu_lambda_params, BasisRange(20)), 6)
        gram = sys_.right_vectors.T @ sys_.right_vectors
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) < 1e-10

    def test_exceptional_point_detected(self):
        # [[1, i], [i, -1]] is complex symmetric and nilpotent: a 2x2 Jordan block
        m = BandedComplexMatrix(BasisRange(2), np.array([1.0, -1.0]), np.array([1j]))
        with pytest.raises(ExceptionalPointError, match="k=0"):
            biorthogonal_system(m, 2, threshold=1e-6)

    def test_length_mismatch(self, mu_lambda_params):
        sys_ = biorthogonal_system(build_gribov_matrix(mu_lambda_params, BasisRange(8)), 8)
        with pytest.raises(DimensionError):
            sys_.coefficients(np.ones(3))
