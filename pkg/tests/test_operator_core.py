import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gribov.errors import (
    DimensionError,
    InvalidParameterError,
    InvalidRangeError,
    ParameterRegimeError,
)
from gribov.operator_core import (
    BasisRange,
    OperatorParams,
    apply,
    build_diagonal_power_matrix,
    build_displaced_oscillator,
    build_gribov_matrix,
    falling_factorial,
)

couplings = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def dense_reference(params, degrees):
    """Entry-by-entry construction from the ladder-operator action on z^n/sqrt(n!)."""
    dim = len(degrees)
    out = np.zeros((dim, dim), dtype=complex)
    for i, n in enumerate(degrees):
        out[i, i] = (
            params.lambda_pp * n * (n - 1) * (n - 2) + params.lambda_p * n * (n - 1) + params.mu * n
        )
        if i + 1 < dim:
            # <e_{n+1}| A* A* A |e_n> = n sqrt(n+1)
            out[i + 1, i] = out[i, i + 1] = 1j * params.lam * n * math.sqrt(n + 1)
    return out


class TestOperatorParams:
    def test_derived_quantities(self):
        p = OperatorParams(lambda_p=1.0, mu=2.0, lam=1.0)
        assert p.rho == 2.0
        assert p.rho_p == 1.0
        assert p.delta == 2.0

    def test_undefined_ratios(self):
        with pytest.raises(ParameterRegimeError):
            OperatorParams(mu=1.0).rho
        with pytest.raises(ParameterRegimeError):
            OperatorParams(mu=1.0, lam=1.0).delta

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidParameterError):
            OperatorParams(mu=float("nan"))

    @given(couplings, couplings, couplings, couplings)
    def test_dict_round_trip(self, a, b, c, d):
        p = OperatorParams(a, b, c, d)
        assert OperatorParams.from_dict(p.to_dict()) == p
        assert "lambda" in p.to_dict()


class TestBasisRange:
    def test_degrees(self):
        assert list(BasisRange(4).degrees) == [1, 2, 3, 4]
        assert list(BasisRange(3, start=0).degrees) == [0, 1, 2]

    @pytest.mark.parametrize("dim,start", [(1, 1), (0, 1), (4, 2), (2.5, 1)])
    def test_invalid(self, dim, start):
        with pytest.raises(InvalidRangeError):
            BasisRange(dim, start)


def test_falling_factorial_exact():
    n = np.array([0, 1, 2, 3, 10, 2000])
    assert list(falling_factorial(n, 3)) == [0, 0, 0, 6, 720, 2000 * 1999 * 1998]


class TestGribovMatrix:
    @settings(max_examples=40, deadline=None)
    @given(couplings, couplings, couplings, couplings, st.integers(2, 40), st.sampled_from([0, 1]))
    def test_matches_reference_and_is_complex_symmetric(self, lpp, lp, mu, lam, dim, start):
        params = OperatorParams(lpp, lp, mu, lam)
        rng = BasisRange(dim, start)
        dense = build_gribov_matrix(params, rng).to_dense()
        np.testing.assert_allclose(dense, dense_reference(params, rng.degrees), rtol=1e-14, atol=1e-12)
        np.testing.assert_array_equal(dense, dense.T)

    def test_non_hermitian_when_lambda_nonzero(self):
        dense = build_gribov_matrix(OperatorParams(mu=1, lam=0.5), BasisRange(6)).to_dense()
        assert not np.allclose(dense, dense.conj().T)

    def test_column_major_layout(self):
        m = build_gribov_matrix(OperatorParams(mu=1, lam=0.5), BasisRange(5))
        f = m.to_dense("F")
        flat = f.ravel(order="K")
        assert f.flags.f_contiguous
        assert flat[1 + 0 * 5] == m.sub[0]
        assert flat[0 + 1 * 5] == m.sup[0]

    def test_arrays_are_read_only(self):
        m = build_gribov_matrix(OperatorParams(mu=1), BasisRange(4))
        with pytest.raises(ValueError):
            m.diag[0] = 3.0

    def test_resized_rebuilds_same_operator(self):
        params = OperatorParams(lambda_pp=0.3, mu=1, lam=0.5)
        small = build_gribov_matrix(params, BasisRange(8))
        big = small.resized(16)
        np.testing.assert_array_equal(big.to_dense()[:8, :8], small.to_dense())

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 30), st.integers(0, 2**31 - 1))
    def test_apply_matches_dense(self, dim, seed):
        r = np.random.default_rng(seed)
        m = build_gribov_matrix(OperatorParams(0.1, 0.2, 1.0, 0.7), BasisRange(dim))
        x = r.normal(size=dim) + 1j * r.normal(size=dim)
        np.testing.assert_allclose(apply(m, x), m.to_dense() @ x, rtol=1e-13, atol=1e-12)

    def test_apply_length_mismatch(self):
        m = build_gribov_matrix(OperatorParams(mu=1), BasisRange(4))
        with pytest.raises(DimensionError):
            apply(m, np.ones(5))


class TestOtherBuilders:
    @pytest.mark.parametrize("kind,order", [("N", 1), ("S", 2), ("G", 3)])
    def test_diagonal_powers(self, kind, order):
        m = build_diagonal_power_matrix(kind, BasisRange(6))
        assert np.all(m.sup == 0)
        np.testing.assert_array_equal(m.diag.real, falling_factorial(np.arange(1, 7), order))

    def test_bad_kind(self):
        with pytest.raises(InvalidParameterError):
            build_diagonal_power_matrix("X", BasisRange(4))

    def test_oscillator_entries(self):
        m = build_displaced_oscillator(2.0, 0.5, BasisRange(4, start=0))
        np.testing.assert_allclose(m.diag.real, [0, 2, 4, 6])
        np.testing.assert_allclose(m.sup.real, 0.5 * np.sqrt([1, 2, 3]))
        with pytest.raises(InvalidParameterError):
            build_displaced_oscillator(0.0, 1.0, BasisRange(4))
