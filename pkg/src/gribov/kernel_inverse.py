"""Explicit inverse kernels on the negative imaginary axis and their discretization.

Both kernels share the structure

    N(y, s) = Phi(min(y, s)) * exp(g(s) - g(min(y, s))) / (lam * s),
    Phi(y)  = int_0^y exp(g(y) - g(u)) h(u) du,

with

    mu_lambda:     g(y) = -y**2/2 - rho*y,                   h = 1,              y in (0, inf)
    lambda_prime:  g(y) = rho'*y + delta*log(1 - y/rho'),    h = 1/(1 - y/rho'), y in (0, rho')

Writing the kernel through Phi (instead of the raw inner integral
Theta = exp(-g) Phi) keeps every factor O(1): Theta itself blows up like
(rho' - y)**(-delta) at the right end.  The weight r(y) = exp(g(y)) / y makes
r(y) N(y, s) symmetric, so the operator is self-adjoint on L2(r dy).

Discretization uses composite Gauss-Legendre panels.  The operator applied in
:func:`inverse_apply` and :func:`spectral_radius` splits each row integral at
the diagonal (product integration), which keeps spectral accuracy despite the
kink of N along y = s.  The raw Nystrom kernel matrix K[i, j] = N(y_i, y_j)
is kept alongside for the symmetry and sign checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from scipy import integrate, optimize

from .errors import (
    ConvergenceError,
    DimensionError,
    DomainError,
    InvalidParameterError,
    ParameterRegimeError,
    ResolutionError,
)
from .io import write_csv
from .operator_core import OperatorParams
from .quadrature import cumulative_matrix, gauss_legendre, panel_grid

__all__ = [
    "GridSpec",
    "WeightedGrid",
    "KernelOperator",
    "theta_integral",
    "kernel_mu_lambda",
    "kernel_lambda_prime",
    "weight_mu_lambda",
    "weight_lambda_prime",
    "discretize",
    "hs_norm",
    "spectral_radius",
    "perron_pair",
    "inverse_apply",
    "symmetry_defect",
    "with_kernel",
    "certified_values",
]

KernelKind = Literal["mu_lambda", "lambda_prime"]

POWER_TOL = 1e-10
POWER_MAX_ITER = 100_000
PHI_CHECK_TOL = 1e-9
# largest variation of g across one panel; beyond it the right-hand integrals
# lose accuracy like exp(span) * eps
MAX_PANEL_SPAN = 24.0
_SEGMENT_ORDER = 24


@dataclass(frozen=True)
class GridSpec:
    """Panel layout.

    ``n_nodes`` must be a multiple of ``order``.  ``grading`` is the ratio of
    successive panel widths in the geometric refinement toward rho'.
    ``y_max`` overrides the default cut-off rho + 10 of the mu,lambda kernel.
    ``tail_log`` sets where the lambda' interval is cut when the weight has
    become negligible: r < exp(-tail_log) * max r.
    """

    n_nodes: int = 256
    grading: float = 0.5
    order: int = 16
    y_max: float | None = None
    tail_log: float = 75.0

    def __post_init__(self):
        if self.order < 2:
            raise InvalidParameterError(f"order must be >= 2, got {self.order}")
        if self.n_nodes < 2 * self.order or self.n_nodes % self.order:
            raise InvalidParameterError(
                f"n_nodes must be a multiple of order={self.order} with at least two panels, "
                f"got {self.n_nodes}"
            )
        if not 0.0 < self.grading < 1.0:
            raise InvalidParameterError(f"grading must lie in (0, 1), got {self.grading}")
        if self.y_max is not None and not self.y_max > 0:
            raise InvalidParameterError(f"y_max must be positive, got {self.y_max}")
        if not self.tail_log > 0:
            raise InvalidParameterError("tail_log must be positive")

    def doubled(self) -> "GridSpec":
        return replace(self, n_nodes=2 * self.n_nodes)


# --------------------------------------------------------------------------
# kernel profiles


@dataclass(frozen=True)
class _Profile:
    kind: str
    lam: float
    rho: float
    rho_p: float = math.inf
    delta: float = 0.0

    def g(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "mu_lambda":
            return -0.5 * y * y - self.rho * y
        return self.rho_p * y + self.delta * np.log1p(-y / self.rho_p)

    def h(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "mu_lambda":
            return np.ones_like(y)
        return 1.0 / (1.0 - y / self.rho_p)

    @property
    def upper(self) -> float:
        return math.inf if self.kind == "mu_lambda" else self.rho_p

    def phi(self, y: float) -> float:
        """Phi(y) by adaptive quadrature; the integrand is bounded by h(y)."""
        if y == 0.0:
            return 0.0
        gy = float(self.g(y))
        # the integrand can peak sharply at u = y; split geometrically toward it
        points = y * (1.0 - np.geomspace(1e-8, 0.5, 20))
        val, _ = integrate.quad(
            lambda u: math.exp(gy - float(self.g(u))) * float(self.h(u)),
            0.0,
            y,
            points=points,
            epsabs=0.0,
            epsrel=1e-13,
            limit=1000,
        )
        return val

    def kernel(self, y: float, s: float) -> float:
        m = min(y, s)
        return math.exp(float(self.g(s) - self.g(m))) * self.phi(m) / (self.lam * s)


def _profile(kind: str, params: OperatorParams) -> _Profile:
    if kind not in ("mu_lambda", "lambda_prime"):
        raise InvalidParameterError(f"kind must be 'mu_lambda' or 'lambda_prime', got {kind!r}")
    if not params.lam > 0:
        raise InvalidParameterError(f"kernel representation requires lambda > 0, got {params.lam}")
    if kind == "mu_lambda":
        return _Profile(kind, params.lam, params.mu / params.lam)
    if not params.lambda_p > 0:
        raise InvalidParameterError(f"lambda' kernel requires lambda' > 0, got {params.lambda_p}")
    delta = params.delta
    if delta < 0:
        raise ParameterRegimeError(f"delta = {delta:.6g} < 0 is outside the supported regime")
    return _Profile(kind, params.lam, params.rho, params.rho_p, delta)


def theta_integral(upper: float, params: OperatorParams) -> float:
    """Theta(Y) = int_0^Y exp(-rho' s) (1 - s/rho')**(-(delta+1)) ds for 0 <= Y < rho'."""
    prof = _profile("lambda_prime", params)
    upper = float(upper)
    if not 0.0 <= upper < prof.rho_p:
        raise DomainError(f"upper limit must lie in [0, rho'={prof.rho_p:.6g}), got {upper}")
    if upper == 0.0:
        return 0.0
    return math.exp(-float(prof.g(upper))) * prof.phi(upper)


def kernel_mu_lambda(y: float, s: float, params: OperatorParams) -> float:
    prof = _profile("mu_lambda", params)
    if not (y > 0 and s > 0):
        raise DomainError(f"kernel arguments must be positive, got ({y}, {s})")
    return prof.kernel(float(y), float(s))


def kernel_lambda_prime(y: float, y1: float, params: OperatorParams) -> float:
    prof = _profile("lambda_prime", params)
    if not (0 < y < prof.rho_p and 0 < y1 < prof.rho_p):
        raise DomainError(f"kernel arguments must lie in (0, rho'={prof.rho_p:.6g}), got ({y}, {y1})")
    return prof.kernel(float(y), float(y1))


def weight_mu_lambda(y, params: OperatorParams):
    """w(y) = exp(-y**2/2 - rho*y) / y."""
    prof = _profile("mu_lambda", params)
    y = np.asarray(y, dtype=float)
    return np.exp(prof.g(y)) / y


def weight_lambda_prime(y, params: OperatorParams):
    """r(y) = exp(rho' y) (1 - y/rho')**delta / y, i.e. normalized by rho'**(-delta)."""
    prof = _profile("lambda_prime", params)
    y = np.asarray(y, dtype=float)
    return np.exp(prof.g(y)) / y


# --------------------------------------------------------------------------
# discretization


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WeightedGrid:
    nodes: np.ndarray
    quad_weights: np.ndarray
    weight_values: np.ndarray
    interval: tuple[float, float]
    breakpoints: np.ndarray = field(repr=False)
    order: int = 16

    def __post_init__(self):
        for name in ("nodes", "quad_weights", "weight_values", "breakpoints"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=float)))
        lo, hi = self.interval
        if not (np.all(self.nodes > lo) and np.all(self.nodes < hi)):
            raise ResolutionError("quadrature nodes must be strictly interior to the interval")
        if not (np.all(self.quad_weights > 0) and np.all(self.weight_values > 0)):
            raise ResolutionError("quadrature weights and weight values must be positive")

    @property
    def size(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Discretized inverse kernel.

    ``kernel_matrix`` holds N(y_i, y_j); ``apply_matrix`` is the matrix that
    maps samples f(y_j) to int N(y_i, s) f(s) ds.  ``log_envelope`` stores
    g(y_i) and ``phi`` stores Phi(y_i) (``None`` for a user-supplied kernel).
    """

    grid: WeightedGrid
    kernel_matrix: np.ndarray
    params: OperatorParams
    kind: str
    apply_matrix: np.ndarray = field(repr=False)
    log_envelope: np.ndarray = field(repr=False)
    phi: np.ndarray | None = field(default=None, repr=False)
    hs_squared: float | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("kernel_matrix", "apply_matrix", "log_envelope"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.phi is not None:
            object.__setattr__(self, "phi", _frozen(self.phi))

    @property
    def size(self) -> int:
        return self.grid.size

    def scaled(self, c: float) -> "KernelOperator":
        return replace(
            self,
            kernel_matrix=c * self.kernel_matrix,
            apply_matrix=c * self.apply_matrix,
            phi=None if self.phi is None else c * self.phi,
            hs_squared=None if self.hs_squared is None else c * c * self.hs_squared,
        )

    def nystrom_matrix(self) -> np.ndarray:
        """Plain Nystrom matrix K[i, j] w_j."""
        return self.kernel_matrix * self.grid.quad_weights[None, :]

    def symmetrized(self) -> np.ndarray:
        """sqrt(r_i w_i) K[i, j] sqrt(w_j / r_j), real symmetric when r K is."""
        g = self.log_envelope
        y = self.grid.nodes
        w = self.grid.quad_weights
        # sqrt(r_i / r_j) with r = exp(g) / y, formed in log space
        ratio = np.exp(0.5 * (g[:, None] - g[None, :])) * np.sqrt(y[None, :] / y[:, None])
        return np.sqrt(w)[:, None] * ratio * self.kernel_matrix * np.sqrt(w)[None, :]

    def csv_rows(self):
        yield list(self.grid.nodes)
        for row in self.kernel_matrix:
            yield list(row)

    def to_csv(self, path):
        rows = self.csv_rows()
        header = next(rows)
        return write_csv(path, header, rows)


def _breakpoints(prof: _Profile, spec: GridSpec) -> np.ndarray:
    n_panels = spec.n_nodes // spec.order
    if prof.kind == "mu_lambda":
        upper = spec.y_max if spec.y_max is not None else max(prof.rho, 0.0) + 10.0
        return np.linspace(0.0, upper, n_panels + 1)

    rp, delta = prof.rho_p, prof.delta
    upper = rp
    if delta > 0:
        # cut the interval where exp(g) has fallen tail_log below its maximum
        y_peak = max(rp - delta / rp, 0.0)
        target = float(prof.g(y_peak)) - spec.tail_log
        hi = rp * (1.0 - 1e-15)
        if float(prof.g(hi)) < target:
            upper = optimize.brentq(lambda y: float(prof.g(y)) - target, y_peak, hi, xtol=1e-14 * rp)
    if upper <= 0.5 * rp:
        return np.linspace(0.0, upper, n_panels + 1)

    # geometric grading of the distance to rho' down to the right end
    n_graded = max(1, n_panels // 2)
    uniform = np.linspace(0.0, 0.5 * rp, n_panels - n_graded + 1)
    if upper < rp:
        dist = 0.5 * rp * ((rp - upper) / (0.5 * rp)) ** (np.arange(1, n_graded + 1) / n_graded)
        return np.concatenate([uniform, rp - dist[:-1], [upper]])
    graded = rp - 0.5 * rp * spec.grading ** np.arange(1, n_graded)
    return np.concatenate([uniform, graded, [rp]])


def _phi_at_nodes(prof: _Profile, nodes: np.ndarray, g_nodes: np.ndarray) -> np.ndarray:
    """Phi(y_i) by the exact recurrence Phi_i = exp(g_i - g_{i-1}) Phi_{i-1} + J_i."""
    x, w = gauss_legendre(_SEGMENT_ORDER)
    left = np.concatenate([[0.0], nodes[:-1]])
    g_left = np.concatenate([[0.0], g_nodes[:-1]])
    width = nodes - left
    u = left[:, None] + 0.5 * width[:, None] * (x[None, :] + 1.0)
    seg = 0.5 * width * np.sum(w * np.exp(g_nodes[:, None] - prof.g(u)) * prof.h(u), axis=1)
    carry = np.exp(g_nodes - g_left)
    phi = np.empty_like(nodes)
    acc = 0.0
    for i in range(len(nodes)):
        acc = carry[i] * acc + seg[i]
        phi[i] = acc
    return phi


def _verify_phi(prof: _Profile, nodes, phi, n_check: int) -> None:
    rng = np.random.default_rng(0)
    idx = rng.choice(len(nodes), size=min(n_check, len(nodes)), replace=False)
    for i in idx:
        ref = prof.phi(float(nodes[i]))
        err = abs(phi[i] - ref) / abs(ref)
        if not err <= PHI_CHECK_TOL:
            raise ResolutionError(
                f"inner integral at y={nodes[i]:.6g} off by {err:.2e} relative; "
                "increase n_nodes or reduce grading"
            )


def discretize(
    kind: KernelKind,
    params: OperatorParams,
    grid_spec: GridSpec | None = None,
    *,
    n_check: int = 32,
) -> KernelOperator:
    spec = grid_spec if grid_spec is not None else GridSpec()
    prof = _profile(kind, params)
    pg = panel_grid(_breakpoints(prof, spec), spec.order)
    y, w = pg.nodes, pg.weights
    g = prof.g(y)
    span = float(np.max(np.ptp(g.reshape(-1, spec.order), axis=1)))
    if span > MAX_PANEL_SPAN:
        raise ResolutionError(
            f"log-weight varies by {span:.1f} across one panel (limit {MAX_PANEL_SPAN:g}); "
            f"n_nodes={spec.n_nodes} is too small"
        )
    r = np.exp(g) / y
    if not np.all(r > 0):
        raise ResolutionError("weight underflows at some nodes; lower tail_log")
    grid = WeightedGrid(y, w, r, (0.0, float(pg.breakpoints[-1])), pg.breakpoints, spec.order)

    phi = _phi_at_nodes(prof, y, g)
    _verify_phi(prof, y, phi, n_check)

    n = len(y)
    lam = prof.lam
    lo = np.minimum.outer(np.arange(n), np.arange(n))
    kernel = phi[lo] * np.exp(g[None, :] - g[lo]) / (lam * y[None, :])
    if np.any(kernel < 0) or not np.all(np.isfinite(kernel)):
        raise ResolutionError("kernel matrix has negative or non-finite entries")

    cum = cumulative_matrix(pg)
    tail = w[None, :] - cum
    # integral over s > y_i: Phi(y_i) exp(g(s) - g(y_i)) f(s) / (lam s)
    with np.errstate(over="ignore"):
        right = np.where(tail != 0.0, tail * np.exp(g[None, :] - g[:, None]), 0.0)
    apply_matrix = cum * (phi / (lam * y))[None, :] + phi[:, None] * right / (lam * y)[None, :]

    # ||K||_HS^2 = 2 int_0^L Phi(m)^2 / (lam^2 m) int_m^L exp(g(M) - g(m)) / M dM dm
    inner = right @ (1.0 / y)
    hs2 = 2.0 * float(np.sum(w * phi**2 / (lam**2 * y) * inner))
    if not hs2 > 0:
        raise ResolutionError(f"HS norm quadrature returned {hs2:.3e}; refine the grid")

    return KernelOperator(grid, kernel, params, kind, apply_matrix, g, phi, hs2)


def with_kernel(op: KernelOperator, kernel_matrix) -> KernelOperator:
    """Same grid, user-supplied kernel values, plain Nystrom application."""
    kernel_matrix = np.asarray(kernel_matrix, dtype=float)
    if kernel_matrix.shape != (op.size, op.size):
        raise DimensionError(f"kernel matrix must be {op.size}x{op.size}, got {kernel_matrix.shape}")
    return replace(
        op,
        kernel_matrix=kernel_matrix,
        apply_matrix=kernel_matrix * op.grid.quad_weights[None, :],
        phi=None,
        hs_squared=None,
    )


def symmetry_defect(op: KernelOperator) -> float:
    """max |r_i K_ij - r_j K_ji| / max |r K|."""
    rk = op.grid.weight_values[:, None] * op.kernel_matrix
    return float(np.max(np.abs(rk - rk.T)) / np.max(np.abs(rk)))


def hs_norm(op: KernelOperator) -> float:
    """Hilbert-Schmidt norm on L2(r dy): sqrt of the double integral of N(y,s)^2 r(y)/r(s)."""
    if op.hs_squared is not None:
        return math.sqrt(op.hs_squared)
    w = op.grid.quad_weights
    g = op.log_envelope
    y = op.grid.nodes
    log_ratio = (g[:, None] - np.log(y)[:, None]) - (g[None, :] - np.log(y)[None, :])
    total = np.sum(w[:, None] * w[None, :] * op.kernel_matrix**2 * np.exp(log_ratio))
    return math.sqrt(float(total))


def perron_pair(
    op: KernelOperator, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER
) -> tuple[float, np.ndarray]:
    """Power iteration from the all-ones vector; returns (Omega, unit Perron vector)."""
    a = op.apply_matrix
    v = np.ones(op.size) / math.sqrt(op.size)
    omega = 0.0
    for _ in range(max_iter):
        u = a @ v
        omega = float(np.linalg.norm(u))
        if omega == 0.0:
            return 0.0, v
        u /= omega
        if np.linalg.norm(u - v) < tol:
            return omega, u
        v = u
    raise ConvergenceError(
        f"power iteration hit the cap of {max_iter} iterations; last estimate {omega:.12g}",
        partial=omega,
    )


def spectral_radius(op: KernelOperator, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    return perron_pair(op, tol, max_iter)[0]


def inverse_apply(op: KernelOperator, samples) -> np.ndarray:
    """Image of the samples f(y_j) under the discretized inverse."""
    f = np.asarray(samples, dtype=np.complex128)
    if f.shape != (op.size,):
        raise DimensionError(f"expected {op.size} samples, got shape {f.shape}")
    return op.apply_matrix @ f


def certified_values(
    kind: KernelKind,
    params: OperatorParams,
    grid_spec: GridSpec | None = None,
    tol: float = 1e-6,
) -> dict:
    """HS norm and spectral radius, each certified by a node-doubling comparison."""
    spec = grid_spec if grid_spec is not None else GridSpec()
    coarse = discretize(kind, params, spec)
    fine = discretize(kind, params, spec.doubled())
    hs_c, hs_f = hs_norm(coarse), hs_norm(fine)
    om_c, om_f = spectral_radius(coarse), spectral_radius(fine)
    out = {
        "hs_norm": hs_f,
        "spectral_radius": om_f,
        "hs_change": abs(hs_f - hs_c),
        "radius_change": abs(om_f - om_c),
        "n_nodes": fine.size,
        "interval": list(fine.grid.interval),
    }
    if out["hs_change"] >= tol or out["radius_change"] >= tol:
        raise ResolutionError(
            f"node doubling changed HS norm by {out['hs_change']:.2e} and radius by "
            f"{out['radius_change']:.2e} (tolerance {tol:.1e})",
            partial=out,
        )
    return out
