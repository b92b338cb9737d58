"""Composite Gauss-Legendre panels with cumulative (indefinite) integration.

The inverse kernels have the form k(y, s) = a(s) b(min(y, s)): smooth on each
side of the diagonal with a derivative jump across it.  Plain Nystrom
quadrature then converges only like h**2.  Splitting every row integral at
y_i and integrating the panel interpolant exactly from 0 to y_i restores
spectral accuracy; :func:`cumulative_matrix` supplies that operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

__all__ = ["PanelGrid", "panel_grid", "cumulative_matrix", "gauss_legendre"]


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def _reference_cumulative(order: int) -> np.ndarray:
    """S[k, j] = int_{-1}^{x_k} l_j(x) dx for the Lagrange basis l_j on GL nodes."""
    x, _ = gauss_legendre(order)
    vander = legendre.legvander(x, order - 1)
    coeff_of_basis = np.linalg.inv(vander)  # column j: Legendre coefficients of l_j
    antideriv = legendre.legint(coeff_of_basis, lbnd=-1.0, axis=0)
    out = legendre.legvander(x, order) @ antideriv
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PanelGrid:
    nodes: np.ndarray
    weights: np.ndarray
    breakpoints: np.ndarray
    order: int

    @property
    def n_panels(self) -> int:
        return len(self.breakpoints) - 1


def panel_grid(breakpoints, order: int) -> PanelGrid:
    breakpoints = np.asarray(breakpoints, dtype=float)
    if np.any(np.diff(breakpoints) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    x, w = gauss_legendre(order)
    a = breakpoints[:-1, None]
    h = np.diff(breakpoints)[:, None]
    nodes = (a + 0.5 * h * (x + 1.0)).ravel()
    weights = (0.5 * h * w).ravel()
    return PanelGrid(nodes, weights, breakpoints, order)


def cumulative_matrix(grid: PanelGrid) -> np.ndarray:
    """C[i, j]: weight of f(y_j) in the integral of f from the left end to y_i."""
    p = grid.order
    n = len(grid.nodes)
    ref = _reference_cumulative(p)
    h = np.diff(grid.breakpoints)
    out = np.zeros((n, n))
    for k in range(grid.n_panels):
        rows = slice(k * p, (k + 1) * p)
        out[rows, : k * p] = grid.weights[: k * p]
        out[rows, rows] = 0.5 * h[k] * ref
    return out
