"""Semigroups e^{-tH} of the truncated operators.

Propagators come from Pade scaling-and-squaring (``scipy.linalg.expm``),
which stays reliable for the strongly non-normal matrices at large lambda.
The biorthogonal eigen-expansion in :func:`propagate_cauchy` is an
independent second path used to cross-validate it.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .eigensolver import BiorthogonalSystem
from .errors import (
    DimensionError,
    InvalidParameterError,
    ParameterRegimeError,
    ResolutionError,
    UnderflowError,
)
from .operator_core import (
    BandedComplexMatrix,
    BasisRange,
    OperatorParams,
    build_gribov_matrix,
    falling_factorial,
)

__all__ = [
    "PropagatorReport",
    "TraceAsymptoticsRow",
    "matrix_exponential",
    "schatten_norm",
    "propagate_cauchy",
    "decay_fit",
    "trace_asymptotics",
    "gibbs_trace_norm",
    "gibbs_sup_law",
    "saturating_dim",
    "max_dim",
    "default_t_grid",
    "halving_grid",
]

SERIES_TAIL_TOL = 1e-12
DEFAULT_MAX_DIM = 2048
MIN_TRACE_DIM = 64


def max_dim() -> int:
    """Truncation cap from GRIBOV_MAX_DIM (default 2048)."""
    raw = os.environ.get("GRIBOV_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_DIM
    try:
        value = int(raw)
    except ValueError as exc:
        raise InvalidParameterError(f"GRIBOV_MAX_DIM must be an integer, got {raw!r}") from exc
    if value < 2:
        raise InvalidParameterError(f"GRIBOV_MAX_DIM must be >= 2, got {value}")
    return value


def default_t_grid(t_min: float = 1e-3, t_max: float = 1.0, num: int = 13) -> np.ndarray:
    return np.logspace(math.log10(t_min), math.log10(t_max), num)


def halving_grid(t_start: float, t_stop: float) -> np.ndarray:
    """t_start, t_start/2, ... down to t_stop (inclusive up to rounding)."""
    if not (t_start > 0 and t_stop > 0 and t_stop <= t_start):
        raise InvalidParameterError("halving grid needs 0 < t_stop <= t_start")
    n = int(round(math.log2(t_start / t_stop)))
    return t_start * 0.5 ** np.arange(n + 1)


@dataclass(frozen=True)
class PropagatorReport:
    t: float
    operator_norm: float
    schatten1: float
    decay_fit: dict
    times: tuple = field(default=(), repr=False)
    norms: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TraceAsymptoticsRow:
    t: float
    lhs: float
    first_order: float
    remainder: float
    bound_scale: float
    first_order_series: float
    dim: int

    @property
    def ratio(self) -> float:
        return self.remainder / self.bound_scale

    @property
    def cross_check(self) -> float:
        """|SVD trace norm - diagonal trace series| for the first-order term."""
        return abs(self.first_order - self.first_order_series)

    CSV_COLUMNS = ("t", "lhs", "first_order", "remainder", "bound_scale")

    def csv_row(self) -> tuple:
        return (self.t, self.lhs, self.first_order, self.remainder, self.bound_scale)


def _check_t(t: float) -> float:
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise InvalidParameterError(f"t must be finite and >= 0, got {t}")
    return t


def matrix_exponential(matrix: BandedComplexMatrix, t: float) -> np.ndarray:
    """Dense e^{-t M}."""
    t = _check_t(t)
    if t == 0.0:
        return np.eye(matrix.dim, dtype=np.complex128)
    return scipy.linalg.expm(-t * matrix.to_dense())


def schatten_norm(matrix, p: float = 1.0) -> float:
    """(sum s_n**p)**(1/p); ``p=inf`` gives the operator norm."""
    if not p >= 1:
        raise InvalidParameterError(f"Schatten index p must be >= 1, got {p}")
    s = scipy.linalg.svdvals(np.asarray(matrix))
    if math.isinf(p):
        return float(s.max(initial=0.0))
    if p == 1:
        return float(s.sum())
    return float(np.sum(s**p) ** (1.0 / p))


def propagate_cauchy(system: BiorthogonalSystem, sigma, phi0, t: float) -> np.ndarray:
    """u(t) = sum_k c_k e^{-sigma_k t} phi_k with bilinear-pairing coefficients."""
    t = _check_t(t)
    sigma = np.asarray(sigma, dtype=np.complex128)
    if sigma.shape != system.eigenvalues.shape:
        raise DimensionError("sigma must have one entry per eigenvector")
    coeffs = system.coefficients(phi0)
    return system.right_vectors @ (coeffs * np.exp(-sigma * t))


def decay_fit(params: OperatorParams, range: BasisRange, t_grid=None) -> PropagatorReport:
    """Fit log||e^{-tH}|| = -sigma0 t + b on the last third of ``t_grid``."""
    if not params.mu > 0:
        raise InvalidParameterError(f"decay fit requires mu > 0, got {params.mu}")
    t_grid = np.linspace(0.0, 20.0, 41) if t_grid is None else np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 3 or np.any(np.diff(t_grid) <= 0):
        raise InvalidParameterError("t_grid must be strictly increasing with at least 3 points")
    matrix = build_gribov_matrix(params, range)
    norms = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        norms[i] = schatten_norm(matrix_exponential(matrix, t), math.inf)
    if not np.all(np.isfinite(norms)) or np.any(norms <= 0):
        raise UnderflowError(
            f"propagator norm underflowed or overflowed by t={t_grid[-1]:.6g}", partial=norms
        )
    tail = slice(len(t_grid) - max(2, len(t_grid) // 3), None)
    x, logs = t_grid[tail], np.log(norms[tail])
    slope, intercept = np.polyfit(x, logs, 1)
    resid = logs - (slope * x + intercept)
    last = matrix_exponential(matrix, t_grid[-1])
    return PropagatorReport(
        t=float(t_grid[-1]),
        operator_norm=float(norms[-1]),
        schatten1=schatten_norm(last, 1),
        decay_fit={
            "sigma0_estimate": float(-slope),
            "fit_residual": float(np.sqrt(np.mean(resid**2))),
        },
        times=tuple(float(t) for t in t_grid),
        norms=tuple(float(v) for v in norms),
    )


def saturating_dim(terms_fn, start: int = 1, rel_tol: float = SERIES_TAIL_TOL, cap: int | None = None) -> int:
    """Smallest N with tail sum_{n >= start+N} terms(n) below rel_tol of the retained sum.

    ``terms_fn`` maps an integer array of degrees to nonnegative terms that
    eventually decrease.  Raises :class:`ResolutionError` past the cap.
    """
    cap = max_dim() if cap is None else cap
    n = np.arange(start, start + 4 * cap + 1)
    terms = np.asarray(terms_fn(n), dtype=float)
    total = np.cumsum(terms)
    tail = total[-1] - total
    ok = np.flatnonzero(tail <= rel_tol * np.maximum(total, np.finfo(float).tiny))
    if ok.size == 0 or ok[0] + 1 > cap:
        need = "more than " + str(4 * cap) if ok.size == 0 else str(ok[0] + 1)
        raise ResolutionError(
            f"series needs {need} terms to saturate; cap is {cap} (set GRIBOV_MAX_DIM)"
        )
    return int(max(ok[0] + 1, 2))


def _power_eigs(start: int, dim: int, order: int = 3) -> np.ndarray:
    return falling_factorial(np.arange(start, start + dim), order).astype(float)


def gibbs_trace_norm(t: float, start: int = 1) -> float:
    """||e^{-tG}||_1 with the truncation saturated."""
    t = _check_t(t)
    if t == 0:
        raise InvalidParameterError("e^{-tG} is not trace class at t = 0")
    dim = saturating_dim(lambda n: np.exp(-t * falling_factorial(n, 3)), start)
    prop = np.diag(np.exp(-t * _power_eigs(start, dim)))
    return schatten_norm(prop, 1)


def gibbs_sup_law(t: float, start: int = 1) -> float:
    """t ||G e^{-tG}||_op with the truncation saturated."""
    t = _check_t(t)
    if t == 0:
        raise InvalidParameterError("t must be positive")
    dim = saturating_dim(lambda n: (falling_factorial(n, 3) * np.exp(-t * falling_factorial(n, 3))), start)
    lam = _power_eigs(start, dim)
    return t * schatten_norm(np.diag(lam * np.exp(-t * lam)), math.inf)


def trace_asymptotics(params: OperatorParams, delta: float, t_grid, start: int = 1) -> list[TraceAsymptoticsRow]:
    """Short-time expansion of ||e^{-tH} - e^{-t lambda'' G}||_1.

    ``first_order`` is the SVD trace norm of t e^{-t lambda'' G} P with
    P = H - lambda'' G; ``first_order_series`` is t Tr(e^{-t lambda'' G} P),
    the closed diagonal series.  The two agree only when P is diagonal
    (lambda = 0); the row keeps both so the discrepancy stays visible.
    """
    if not params.lambda_pp > 0:
        raise InvalidParameterError(f"trace asymptotics require lambda'' > 0, got {params.lambda_pp}")
    if not delta >= 0.5:
        raise ParameterRegimeError(f"delta must be >= 1/2 (subordination threshold), got {delta}")
    lpp = params.lambda_pp
    pert = params.replace(lambda_pp=0.0)
    rows = []
    for t in np.asarray(t_grid, dtype=float):
        t = _check_t(t)
        if t == 0:
            rows.append(TraceAsymptoticsRow(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0))
            continue

        def diag_terms(n, t=t):
            lam_n = lpp * falling_factorial(n, 3)
            p_nn = np.abs(pert.lambda_p * falling_factorial(n, 2) + pert.mu * n)
            return (1.0 + p_nn + lam_n**delta) * np.exp(-t * lam_n / 3.0)

        dim = max(saturating_dim(diag_terms, start), MIN_TRACE_DIM)
        if dim > max_dim():
            raise ResolutionError(f"t={t:.6g} needs dim {dim} above the cap {max_dim()}")
        rng = BasisRange(dim, start)
        lam_n = lpp * _power_eigs(start, dim)
        free = np.exp(-t * lam_n)
        full = matrix_exponential(build_gribov_matrix(params, rng), t)
        p_mat = build_gribov_matrix(pert, rng).to_dense()
        lhs = schatten_norm(full - np.diag(free), 1)
        first = t * schatten_norm(free[:, None] * p_mat, 1)
        series = t * float(np.sum(free * np.diag(p_mat).real))
        with np.errstate(divide="ignore"):
            powered = np.where(lam_n > 0, lam_n ** delta, 0.0)  # 0**delta = 0
        bound = t * t * float(np.sum(powered * np.exp(-t * lam_n / 3.0)))
        rows.append(TraceAsymptoticsRow(t, lhs, first, lhs - first, bound, series, dim))
    return rows
