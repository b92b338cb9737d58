"""Finite truncations of the Bargmann-space operators.

In the orthonormal basis e_n(z) = z**n / sqrt(n!) the annihilation operator
A = d/dz and the creation operator A* = z act as ladder operators, so every
operator built here is tridiagonal:

    H = lambda_pp * A*^3 A^3 + lambda_p * A*^2 A^2 + mu * A* A
        + i * lambda * A* (A + A*) A

has diagonal ``lambda_pp n(n-1)(n-2) + lambda_p n(n-1) + mu n`` and equal
off-diagonals ``i lambda n sqrt(n+1)`` coupling degrees n and n+1.  The
matrices are complex symmetric (M == M.T) but not Hermitian once lambda != 0.

Basis label n is always the monomial degree.  A truncation keeps degrees
``start .. start + dim - 1``; ``start=1`` drops the vacuum and is the
default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import (
    DimensionError,
    InvalidParameterError,
    InvalidRangeError,
    ParameterRegimeError,
)

__all__ = [
    "OperatorParams",
    "BasisRange",
    "BandedComplexMatrix",
    "build_gribov_matrix",
    "build_diagonal_power_matrix",
    "build_displaced_oscillator",
    "apply",
    "falling_factorial",
]


@dataclass(frozen=True)
class OperatorParams:
    """The four real couplings.

    ``lam`` is the triple coupling (``lambda`` is a Python keyword); the
    serialized form uses the key ``"lambda"``.
    """

    lambda_pp: float = 0.0
    lambda_p: float = 0.0
    mu: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        for name in ("lambda_pp", "lambda_p", "mu", "lam"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def rho(self) -> float:
        """mu / lambda."""
        if self.lam == 0.0:
            raise ParameterRegimeError("rho = mu/lambda is undefined for lambda = 0")
        return self.mu / self.lam

    @property
    def rho_p(self) -> float:
        """lambda / lambda'."""
        if self.lambda_p == 0.0:
            raise ParameterRegimeError("rho' = lambda/lambda' is undefined for lambda' = 0")
        return self.lam / self.lambda_p

    @property
    def delta(self) -> float:
        """rho' (rho + rho') - 1; governs the weighted symmetrization."""
        rho_p = self.rho_p
        return rho_p * (self.rho + rho_p) - 1.0

    def replace(self, **changes) -> "OperatorParams":
        values = dict(lambda_pp=self.lambda_pp, lambda_p=self.lambda_p, mu=self.mu, lam=self.lam)
        values.update(changes)
        return OperatorParams(**values)

    def to_dict(self) -> dict:
        return {
            "lambda_pp": self.lambda_pp,
            "lambda_p": self.lambda_p,
            "mu": self.mu,
            "lambda": self.lam,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OperatorParams":
        return cls(
            lambda_pp=data.get("lambda_pp", 0.0),
            lambda_p=data.get("lambda_p", 0.0),
            mu=data.get("mu", 0.0),
            lam=data.get("lambda", data.get("lam", 0.0)),
        )


@dataclass(frozen=True)
class BasisRange:
    dim: int
    start: int = 1

    def __post_init__(self):
        if self.start not in (0, 1):
            raise InvalidRangeError(f"start must be 0 or 1, got {self.start}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidRangeError(f"dim must be an integer >= 2, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.dim, dtype=np.int64)

    def resized(self, dim: int) -> "BasisRange":
        return BasisRange(dim=dim, start=self.start)


def falling_factorial(n: np.ndarray, k: int) -> np.ndarray:
    """n (n-1) ... (n-k+1) evaluated in exact integer arithmetic."""
    n = np.asarray(n, dtype=np.int64)
    out = np.ones_like(n)
    for j in range(k):
        out = out * (n - j)
    return out


@dataclass(frozen=True, eq=False)
class BandedComplexMatrix:
    """Symmetric tridiagonal matrix stored as (diag, super).

    The sub-diagonal equals ``sup`` by construction.  ``source`` records how
    the matrix was built so :meth:`resized` can rebuild it at another
    truncation size (used by the N vs 2N convergence certificate).
    """

    range: BasisRange
    diag: np.ndarray
    sup: np.ndarray
    bandwidth: int = 1
    source: tuple = field(default=(), repr=False)

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=np.complex128)
        sup = np.asarray(self.sup, dtype=np.complex128)
        if diag.shape != (self.range.dim,) or sup.shape != (self.range.dim - 1,):
            raise DimensionError(
                f"diag/super lengths {diag.shape}/{sup.shape} do not match dim {self.range.dim}"
            )
        diag.setflags(write=False)
        sup.setflags(write=False)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "sup", sup)

    @property
    def dim(self) -> int:
        return self.range.dim

    @property
    def sub(self) -> np.ndarray:
        return self.sup

    @property
    def degrees(self) -> np.ndarray:
        return self.range.degrees

    def to_dense(self, order: Literal["C", "F"] = "C") -> np.ndarray:
        """Materialize the full matrix.

        ``order="F"`` gives the column-major layout: element (i, j) sits at
        flat offset ``i + j * dim``.
        """
        dense = np.zeros((self.dim, self.dim), dtype=np.complex128, order=order)
        idx = np.arange(self.dim)
        dense[idx, idx] = self.diag
        dense[idx[:-1], idx[1:]] = self.sup
        dense[idx[1:], idx[:-1]] = self.sup
        return dense

    def resized(self, dim: int) -> "BandedComplexMatrix":
        if not self.source:
            raise InvalidRangeError("matrix has no recorded source; cannot rebuild at another size")
        kind, *args = self.source
        rng = self.range.resized(dim)
        if kind == "gribov":
            return build_gribov_matrix(args[0], rng)
        if kind == "power":
            return build_diagonal_power_matrix(args[0], rng)
        if kind == "oscillator":
            return build_displaced_oscillator(args[0], args[1], rng)
        raise InvalidRangeError(f"unknown matrix source {kind!r}")


def build_gribov_matrix(params: OperatorParams, range: BasisRange) -> BandedComplexMatrix:
    n = range.degrees
    diag = (
        params.lambda_pp * falling_factorial(n, 3).astype(float)
        + params.lambda_p * falling_factorial(n, 2).astype(float)
        + params.mu * n.astype(float)
    )
    # n sqrt(n+1) = sqrt(n^2 (n+1)) with the radicand formed exactly
    m = n[:-1]
    off = 1j * params.lam * np.sqrt((m * m * (m + 1)).astype(float))
    return BandedComplexMatrix(range, diag.astype(complex), off, source=("gribov", params))


def build_diagonal_power_matrix(kind: Literal["N", "S", "G"], range: BasisRange) -> BandedComplexMatrix:
    """Diagonal truncation of A*A ("N"), A*^2A^2 ("S") or A*^3A^3 ("G")."""
    order = {"N": 1, "S": 2, "G": 3}.get(kind)
    if order is None:
        raise InvalidParameterError(f"kind must be one of N, S, G; got {kind!r}")
    diag = falling_factorial(range.degrees, order).astype(float)
    return BandedComplexMatrix(
        range, diag.astype(complex), np.zeros(range.dim - 1, dtype=complex), source=("power", kind)
    )


def build_displaced_oscillator(omega: float, coupling: float, range: BasisRange) -> BandedComplexMatrix:
    """omega A*A + coupling (A + A*); exact spectrum n omega - coupling**2 / omega."""
    if not omega > 0:
        raise InvalidParameterError(f"omega must be positive, got {omega}")
    n = range.degrees
    diag = omega * n.astype(float)
    off = coupling * np.sqrt((n[:-1] + 1).astype(float))
    return BandedComplexMatrix(
        range, diag.astype(complex), off.astype(complex), source=("oscillator", omega, coupling)
    )


def apply(matrix: BandedComplexMatrix, vector) -> np.ndarray:
    """Tridiagonal matrix-vector product in O(dim)."""
    x = np.asarray(vector, dtype=np.complex128)
    if x.shape != (matrix.dim,):
        raise DimensionError(f"vector length {x.shape} does not match dim {matrix.dim}")
    y = matrix.diag * x
    y[:-1] += matrix.sup * x[1:]
    y[1:] += matrix.sup * x[:-1]
    return y
