"""Regularized trace of H = lambda'' G + H_{mu,lambda} with four resolvent corrections.

With R0(sigma) = (lambda'' G - sigma)^{-1} diagonal and T = H_{mu,lambda} R0
tridiagonal, the m-th partial sum is

    sum_{n <= m} (sigma_n - lambda'' lambda_n)
        + sum_{k=1}^{4} (1 / 2 pi i) oint_{|sigma| = r_m} (-1)^{k-1}/k Tr T^k dsigma,

where r_m sits in the gap (lambda'' lambda_m, lambda'' lambda_{m+1}) and
lambda_n = n(n-1)(n-2).  Traces of T^k come from banded products; contour
integrals use the trapezoidal rule on the circle, refined by node doubling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .eigensolver import compute_spectrum
from .errors import (
    DimensionError,
    GapError,
    InvalidParameterError,
    NearPoleError,
    PairingError,
    ParameterRegimeError,
    QuadratureError,
)
from .io import csv_text
from .operator_core import BasisRange, OperatorParams, build_gribov_matrix, falling_factorial

__all__ = [
    "ContourSpec",
    "TraceRow",
    "TraceReport",
    "gribov_eigenvalue",
    "contour_radii",
    "correction_trace",
    "correction_traces_banded",
    "contour_correction",
    "regularized_partial_sums",
]

ContourKind = Literal["midpoint_gap", "alpha_interpolated"]

DEFAULT_NODES = 256
MAX_NODES = 1 << 16
QUAD_TOL = 1e-10
POLE_TOL = 1e-12
DEFAULT_ALPHA = 0.15
N_CORRECTIONS = 4


def gribov_eigenvalue(n) -> np.ndarray:
    """lambda_n = n(n-1)(n-2), the spectrum of G = A*^3 A^3."""
    return falling_factorial(np.asarray(n), 3).astype(float)


@dataclass(frozen=True)
class ContourSpec:
    m: int
    radius: float
    nodes: int = DEFAULT_NODES
    kind: str = "midpoint_gap"
    alpha: float | None = None
    lambda_pp: float = 1.0

    def __post_init__(self):
        if self.nodes < 64 or self.nodes % 2:
            raise InvalidParameterError(f"nodes must be even and >= 64, got {self.nodes}")
        lo = self.lambda_pp * gribov_eigenvalue(self.m)
        hi = self.lambda_pp * gribov_eigenvalue(self.m + 1)
        if not lo < self.radius < hi:
            raise GapError(f"radius {self.radius:.6g} not inside the gap ({lo:.6g}, {hi:.6g})")


def contour_radii(
    m: int,
    lambda_pp: float,
    kind: ContourKind = "midpoint_gap",
    alpha: float = DEFAULT_ALPHA,
    nodes: int = DEFAULT_NODES,
) -> ContourSpec:
    m = int(m)
    if m < 3:
        raise GapError(f"m must be >= 3 for a nondegenerate gap of G, got {m}")
    if not lambda_pp > 0:
        raise InvalidParameterError(f"lambda'' must be positive, got {lambda_pp}")
    lo, hi = gribov_eigenvalue(m), gribov_eigenvalue(m + 1)
    if kind == "midpoint_gap":
        radius = 0.5 * (lo + hi)
        alpha_used = None
    elif kind == "alpha_interpolated":
        if not 0.0 <= alpha < 1.0 / 6.0:
            raise InvalidParameterError(f"alpha must lie in [0, 1/6), got {alpha}")
        beta = 0.5 - alpha
        radius = (0.5 * (lo**beta + hi**beta)) ** (1.0 / beta)
        alpha_used = float(alpha)
    else:
        raise InvalidParameterError(f"unknown contour kind {kind!r}")
    return ContourSpec(m, lambda_pp * radius, nodes, kind, alpha_used, lambda_pp)


# --------------------------------------------------------------------------
# traces of (H_{mu,lambda} R0)^k


def _check_params(params: OperatorParams) -> None:
    if params.lambda_p != 0.0:
        raise ParameterRegimeError("the regularized trace is only available for lambda' = 0")
    if not params.lambda_pp > 0:
        raise InvalidParameterError(f"lambda'' must be positive, got {params.lambda_pp}")


def _resolvent(params: OperatorParams, sigma: np.ndarray, degrees: np.ndarray) -> np.ndarray:
    denom = params.lambda_pp * gribov_eigenvalue(degrees)[None, :] - sigma[:, None]
    closest = np.min(np.abs(denom))
    if closest < POLE_TOL:
        raise NearPoleError(f"sigma within {closest:.2e} of a pole of the free resolvent")
    return 1.0 / denom


def _shift(a: np.ndarray, k: int) -> np.ndarray:
    """out[..., i] = a[..., i + k], zero outside the range."""
    if k == 0:
        return a
    out = np.zeros_like(a)
    if k > 0:
        out[..., :-k] = a[..., k:]
    else:
        out[..., -k:] = a[..., :k]
    return out


def _band_product(a: dict, b: dict) -> dict:
    """Product of band matrices stored as {offset: diagonal}, diag_o[i] = M[i, i+o]."""
    out: dict = {}
    for oa, da in a.items():
        for ob, db in b.items():
            term = da * _shift(db, oa)
            out[oa + ob] = out[oa + ob] + term if oa + ob in out else term
    return out


def correction_traces_banded(
    params: OperatorParams, sigma, dim: int, start: int = 1, k_max: int = N_CORRECTIONS
) -> np.ndarray:
    """Tr (H_{mu,lambda} R0)^k for k = 1..k_max; shape (len(sigma), k_max)."""
    _check_params(params)
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.complex128))
    degrees = BasisRange(dim, start).degrees
    res = _resolvent(params, sigma, degrees)
    hml = build_gribov_matrix(params.replace(lambda_pp=0.0), BasisRange(dim, start))
    sup = np.concatenate([hml.sup, [0.0]])  # H[i, i+1], padded
    sub = np.concatenate([[0.0], hml.sup])  # H[i, i-1], padded
    # T = H R0 scales column j by R0_j
    t_mat = {
        0: hml.diag[None, :] * res,
        1: sup[None, :] * _shift(res, 1),
        -1: sub[None, :] * _shift(res, -1),
    }
    out = np.empty((len(sigma), k_max), dtype=np.complex128)
    power = t_mat
    for k in range(k_max):
        if k:
            power = _band_product(power, t_mat)
        out[:, k] = power[0].sum(axis=-1)
    return out


def correction_trace(
    params: OperatorParams, sigma: complex, k: int, dim: int, start: int = 1, method: str = "auto"
) -> complex:
    """Tr (H_{mu,lambda} R0(sigma))^k.

    For k = 1 only the diagonal mu*n survives, so the closed form
    sum mu n / (lambda'' lambda_n - sigma) is the primary path.
    """
    if not 1 <= k <= N_CORRECTIONS:
        raise InvalidParameterError(f"k must be in 1..{N_CORRECTIONS}, got {k}")
    _check_params(params)
    if k == 1 and method in ("auto", "closed"):
        degrees = BasisRange(dim, start).degrees
        res = _resolvent(params, np.array([complex(sigma)]), degrees)[0]
        return complex(np.sum(params.mu * degrees * res))
    return complex(correction_traces_banded(params, [sigma], dim, start, k)[0, k - 1])


def _trapezoid(params, radius, nodes, dim, start) -> np.ndarray:
    """All four weighted corrections at one node count; shape (4,)."""
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    sigma = radius * np.exp(1j * theta)
    traces = correction_traces_banded(params, sigma, dim, start)
    degrees = BasisRange(dim, start).degrees
    traces[:, 0] = (params.mu * degrees[None, :] * _resolvent(params, sigma, degrees)).sum(axis=1)
    k = np.arange(1, N_CORRECTIONS + 1)
    weights = (-1.0) ** (k - 1) / k
    # (1/2 pi i) oint f dsigma with dsigma = i sigma dtheta
    return weights * np.mean(traces * sigma[:, None], axis=0)


@dataclass(frozen=True)
class _Contour:
    values: np.ndarray
    nodes: int
    change: float


def _contour_all(params, spec: ContourSpec, dim: int, start: int, tol: float) -> _Contour:
    if dim < 4 * spec.m:
        raise DimensionError(f"dim must be >= 4 m = {4 * spec.m}, got {dim}")
    nodes = spec.nodes
    prev = _trapezoid(params, spec.radius, nodes, dim, start)
    while True:
        nxt = _trapezoid(params, spec.radius, 2 * nodes, dim, start)
        change = np.abs(nxt - prev)
        if np.all(change <= tol * np.maximum(1.0, np.abs(nxt))):
            return _Contour(nxt, 2 * nodes, float(change.max()))
        nodes *= 2
        if 2 * nodes > MAX_NODES:
            raise QuadratureError(
                f"contour integral not resolved with {nodes} nodes (change {change.max():.2e})",
                partial=nxt,
            )
        prev = nxt


def contour_correction(
    params: OperatorParams, spec: ContourSpec, k: int, dim: int, start: int = 1, tol: float = QUAD_TOL
) -> complex:
    """(1/2 pi i) oint (-1)^{k-1}/k Tr (H_{mu,lambda} R0)^k dsigma over |sigma| = radius."""
    if not 1 <= k <= N_CORRECTIONS:
        raise InvalidParameterError(f"k must be in 1..{N_CORRECTIONS}, got {k}")
    _check_params(params)
    return complex(_contour_all(params, spec, dim, start, tol).values[k - 1])


# --------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class TraceRow:
    m: int
    radius: float
    raw_sum: float
    corrections: tuple
    regularized: complex
    dim: int = field(default=0, compare=False)
    nodes: int = field(default=0, compare=False)
    max_drift: float = field(default=float("nan"), compare=False)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "radius": self.radius,
            "raw_sum": self.raw_sum,
            "corrections": [[c.real, c.imag] for c in self.corrections],
            "regularized_re": self.regularized.real,
            "regularized_im": self.regularized.imag,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TraceRow":
        return cls(
            m=int(data["m"]),
            radius=float(data["radius"]),
            raw_sum=float(data["raw_sum"]),
            corrections=tuple(complex(re, im) for re, im in data["corrections"]),
            regularized=complex(data["regularized_re"], data["regularized_im"]),
        )


@dataclass(frozen=True)
class TraceReport:
    rows: tuple

    def to_json(self) -> list:
        return [r.to_dict() for r in self.rows]

    @classmethod
    def from_json(cls, data: list) -> "TraceReport":
        return cls(tuple(TraceRow.from_dict(d) for d in data))

    CSV_COLUMNS = (
        ["m", "radius", "raw_sum"]
        + [f"correction{k}_{part}" for k in range(1, 5) for part in ("re", "im")]
        + ["regularized_re", "regularized_im"]
    )

    def csv_rows(self) -> list:
        out = []
        for r in self.rows:
            corr = [x for c in r.corrections for x in (c.real, c.imag)]
            out.append([r.m, r.radius, r.raw_sum, *corr, r.regularized.real, r.regularized.imag])
        return out

    def to_csv(self) -> str:
        return csv_text(self.CSV_COLUMNS, self.csv_rows())

    @property
    def magnitudes(self) -> np.ndarray:
        return np.array([abs(r.regularized.real) for r in self.rows])


def _pair(values: np.ndarray, params: OperatorParams, degrees: np.ndarray, radius: float, m: int):
    """sigma_n for degrees <= m by sorted real part, with ambiguity checks."""
    values = values[np.argsort(values.real, kind="stable")]
    count = int(np.sum(degrees <= m))
    free = params.lambda_pp * gribov_eigenvalue(degrees)
    for i, n in enumerate(degrees[: count + 1]):
        if n < 3:
            continue  # lambda_0 = lambda_1 = lambda_2 = 0: no gap to test against
        lo = free[i] - 0.5 * (free[i] - free[i - 1])
        hi = free[i] + 0.5 * (free[i + 1] - free[i]) if i + 1 < len(free) else math.inf
        near = values[(values.real > lo) & (values.real < hi)]
        if len(near) != 1:
            raise PairingError(
                f"{len(near)} eigenvalues within half the local gap of lambda''*lambda_{n}={free[i]:.6g}",
                partial=near,
            )
    chosen = values[:count]
    if np.any(np.abs(chosen) >= radius) or (len(values) > count and abs(values[count]) <= radius):
        raise PairingError(
            f"eigenvalues 0..{m} are not exactly the ones enclosed by |sigma| = {radius:.6g}",
            partial=values[: count + 1],
        )
    return chosen, free[:count]


def regularized_partial_sums(
    params: OperatorParams,
    m_values,
    dim: int | None = None,
    spec_kind: ContourKind = "alpha_interpolated",
    alpha: float = DEFAULT_ALPHA,
    start: int = 1,
    nodes: int = DEFAULT_NODES,
    tol: float = QUAD_TOL,
) -> TraceReport:
    """One row per m; ``dim=None`` uses 4 m for each row."""
    _check_params(params)
    rows = []
    for m in m_values:
        m = int(m)
        spec = contour_radii(m, params.lambda_pp, spec_kind, alpha, nodes)
        size = 4 * m if dim is None else int(dim)
        if size < 4 * m:
            raise DimensionError(f"dim must be >= 4 m = {4 * m}, got {size}")
        rng = BasisRange(size, start)
        count = min(size, m - start + 2)
        spectrum = compute_spectrum(build_gribov_matrix(params, rng), count)
        chosen, free = _pair(spectrum.eigenvalues, params, rng.degrees, spec.radius, m)
        raw = complex(np.sum(chosen - free))
        contour = _contour_all(params, spec, size, start, tol)
        corrections = tuple(complex(c) for c in contour.values)
        rows.append(
            TraceRow(
                m=m,
                radius=spec.radius,
                raw_sum=raw.real,
                corrections=corrections,
                regularized=raw + sum(corrections),
                dim=size,
                nodes=contour.nodes,
                max_drift=float(np.max(spectrum.drift[: len(chosen)])),
            )
        )
    return TraceReport(tuple(rows))
