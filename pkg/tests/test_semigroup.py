import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gribov.eigensolver import biorthogonal_system
from gribov.errors import DimensionError, InvalidParameterError, ParameterRegimeError, ResolutionError, UnderflowError
from gribov.operator_core import (
    BasisRange,
    OperatorParams,
    build_diagonal_power_matrix,
    build_gribov_matrix,
)
from gribov.semigroup import (
    decay_fit,
    default_t_grid,
    gibbs_sup_law,
    gibbs_trace_norm,
    halving_grid,
    matrix_exponential,
    propagate_cauchy,
    saturating_dim,
    schatten_norm,
    trace_asymptotics,
)


@pytest.fixture
def matrix16():
    return build_gribov_matrix(OperatorParams(mu=1.0, lam=0.5), BasisRange(16))


class TestMatrixExponential:
    def test_identity_at_zero(self, matrix16):
        np.testing.assert_array_equal(matrix_exponential(matrix16, 0.0), np.eye(16))

    def test_diagonal_exact(self):
        g = build_diagonal_power_matrix("G", BasisRange(10))
        n = np.arange(1, 11)
        np.testing.assert_allclose(np.diag(matrix_exponential(g, 0.01)), np.exp(-0.01 * n * (n - 1) * (n - 2)), rtol=1e-15)

    def test_derivative(self, matrix16):
        t, h = 0.3, 1e-6
        fd = (matrix_exponential(matrix16, t + h) - matrix_exponential(matrix16, t)) / h
        exact = -matrix16.to_dense() @ matrix_exponential(matrix16, t)
        assert np.max(np.abs(fd - exact)) < 1e-3 * np.max(np.abs(exact))

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
    def test_semigroup_law(self, s, t):
        m = build_gribov_matrix(OperatorParams(mu=1.0, lam=0.5), BasisRange(32))
        lhs = matrix_exponential(m, s + t)
        rhs = matrix_exponential(m, s) @ matrix_exponential(m, t)
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)

    @pytest.mark.parametrize("t", [-1.0, float("inf"), float("nan")])
    def test_rejects_bad_t(self, matrix16, t):
        with pytest.raises(InvalidParameterError):
            matrix_exponential(matrix16, t)


class TestSchatten:
    def test_identity(self):
        assert schatten_norm(np.eye(5), 1) == pytest.approx(5.0)
        assert schatten_norm(np.eye(5), 2) == pytest.approx(math.sqrt(5))
        assert schatten_norm(np.eye(5), math.inf) == pytest.approx(1.0)

    def test_diagonal_series(self):
        lam = np.arange(1, 30) ** 3.0
        assert schatten_norm(np.diag(np.exp(-0.1 * lam)), 1) == pytest.approx(np.exp(-0.1 * lam).sum(), rel=1e-14)

    def test_quasi_norm_rejected(self):
        with pytest.raises(InvalidParameterError):
            schatten_norm(np.eye(2), 0.5)

    @pytest.mark.parametrize("t", [0.05, 0.5, 2.0])
    def test_norm_ordering(self, matrix16, t):
        prop = matrix_exponential(matrix16, t)
        op, hs, tr = (schatten_norm(prop, p) for p in (math.inf, 2, 1))
        assert op <= hs * (1 + 1e-14) and hs <= tr * (1 + 1e-14)


class TestGibbs:
    def test_trace_norm_matches_series(self):
        n = np.arange(1, 400)
        assert gibbs_trace_norm(0.01) == pytest.approx(np.exp(-0.01 * n * (n - 1) * (n - 2)).sum(), rel=1e-12)

    def test_t_one_third_bounded(self):
        vals = [t ** (1 / 3) * gibbs_trace_norm(t) for t in default_t_grid()]
        # bounded above and below over three decades; the band width is reported in acceptance
        assert max(vals) / min(vals) < 3.0

    def test_sup_law(self):
        assert gibbs_sup_law(1e-4) == pytest.approx(1 / math.e, abs=1e-3)

    def test_saturation_cap(self, monkeypatch):
        monkeypatch.setenv("GRIBOV_MAX_DIM", "8")
        with pytest.raises(ResolutionError):
            gibbs_trace_norm(1e-3)

    def test_saturating_dim(self):
        n = saturating_dim(lambda k: 2.0 ** -k.astype(float), start=1, rel_tol=1e-6)
        assert 19 <= n <= 21


class TestPropagateCauchy:
    @pytest.fixture
    def system(self):
        m = build_gribov_matrix(OperatorParams(mu=1.0, lam=0.5), BasisRange(24))
        return m, biorthogonal_system(m, 24)

    def test_reconstructs_at_zero(self, system, rng):
        _, sys_ = system
        phi0 = rng.normal(size=24) + 0j
        np.testing.assert_allclose(propagate_cauchy(sys_, sys_.eigenvalues, phi0, 0.0), phi0, atol=1e-8)

    @pytest.mark.parametrize("t", [0.1, 1.0])
    def test_agrees_with_exponential(self, system, t):
        m, sys_ = system
        phi0 = np.zeros(24, dtype=complex)
        phi0[0] = 1.0
        a = matrix_exponential(m, t) @ phi0
        b = propagate_cauchy(sys_, sys_.eigenvalues, phi0, t)
        assert np.linalg.norm(a - b) <= 1e-8 * np.linalg.norm(a)

    def test_eigenvector_evolves_by_phase(self, system):
        _, sys_ = system
        v = sys_.right_vectors[:, 0]
        u = propagate_cauchy(sys_, sys_.eigenvalues, v, 0.7)
        np.testing.assert_allclose(u, np.exp(-sys_.eigenvalues[0] * 0.7) * v, atol=1e-12)

    def test_sigma_length(self, system):
        _, sys_ = system
        with pytest.raises(DimensionError):
            propagate_cauchy(sys_, sys_.eigenvalues[:3], np.ones(24), 0.1)


class TestDecayFit:
    def test_number_operator(self):
        rep = decay_fit(OperatorParams(mu=1.7), BasisRange(16))
        assert rep.decay_fit["sigma0_estimate"] == pytest.approx(1.7, rel=1e-12)

    def test_matches_eigensolver(self):
        rep = decay_fit(OperatorParams(mu=1.0, lam=0.5), BasisRange(128))
        assert rep.decay_fit["sigma0_estimate"] == pytest.approx(1.31770755033, rel=1e-4)
        assert rep.operator_norm <= rep.schatten1

    def test_residual_decay_rate(self):
        m = build_gribov_matrix(OperatorParams(mu=1.0, lam=0.5), BasisRange(128))
        sys_ = biorthogonal_system(m, 2)
        s0, s1 = sys_.eigenvalues.real
        v = sys_.right_vectors[:, 0]
        proj_norm = np.linalg.norm(v) ** 2 / abs(v @ v)
        ts = np.linspace(1.0, 8.0, 15)
        resid = [abs(schatten_norm(matrix_exponential(m, t), math.inf) * math.exp(s0 * t) - proj_norm) for t in ts]
        slope = np.polyfit(ts, np.log(resid), 1)[0]
        assert slope <= -(s1 - s0 - 0.1 * (s1 - s0))

    def test_identity_at_t_zero(self):
        rep = decay_fit(OperatorParams(mu=1.0, lam=0.5), BasisRange(32), [0.0, 1.0, 2.0])
        assert rep.norms[0] == pytest.approx(1.0)

    def test_underflow(self):
        with pytest.raises(UnderflowError):
            decay_fit(OperatorParams(mu=1.0), BasisRange(8), [0.0, 500.0, 1000.0])

    def test_needs_positive_mu(self):
        with pytest.raises(InvalidParameterError):
            decay_fit(OperatorParams(mu=0.0, lam=1.0), BasisRange(8))


class TestTraceAsymptotics:
    def test_free_case_vanishes(self):
        rows = trace_asymptotics(OperatorParams(lambda_pp=1.0), 0.5, [0.1, 0.05])
        assert all(r.lhs < 1e-14 and r.first_order == 0 for r in rows)

    def test_diagonal_series_oracle(self):
        n = np.arange(1, 200)
        oracle = 0.1 * np.sum(n * np.exp(-0.1 * n * (n - 1) * (n - 2)))
        (row,) = trace_asymptotics(OperatorParams(lambda_pp=1.0, mu=1.0), 0.5, [0.1])
        assert row.first_order == pytest.approx(oracle, rel=1e-12)
        assert row.first_order_series == pytest.approx(oracle, rel=1e-12)
        assert row.cross_check < 1e-10

    def test_ratio_bounded(self):
        rows = trace_asymptotics(OperatorParams(lambda_pp=1.0, mu=1.0, lam=0.5), 0.5, halving_grid(0.2, 0.0125))
        ratios = np.array([r.ratio for r in rows])
        assert len(rows) == 5
        assert np.max(np.abs(ratios)) / np.min(np.abs(ratios)) < 10
        assert all(r.lhs >= 0 and r.first_order >= 0 and r.bound_scale > 0 for r in rows)

    def test_svd_and_trace_differ_for_off_diagonal_coupling(self):
        (row,) = trace_asymptotics(OperatorParams(lambda_pp=1.0, mu=1.0, lam=0.5), 0.5, [0.2])
        assert row.first_order > row.first_order_series

    def test_preconditions(self):
        with pytest.raises(ParameterRegimeError):
            trace_asymptotics(OperatorParams(lambda_pp=1.0, mu=1.0), 0.4, [0.1])
        with pytest.raises(InvalidParameterError):
            trace_asymptotics(OperatorParams(mu=1.0), 0.5, [0.1])


def test_halving_grid():
    np.testing.assert_allclose(halving_grid(0.2, 0.0125), [0.2, 0.1, 0.05, 0.025, 0.0125])
