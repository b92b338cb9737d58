"""Converged spectra of the truncated (non-Hermitian) operators.

Every reported eigenvalue carries a Galerkin certificate: the same operator
is rebuilt at twice the truncation size and each eigenvalue is matched to its
nearest neighbour in the larger spectrum.  The distance is the *drift*; an
eigenvalue counts as converged when its drift is below the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DimensionError, ExceptionalPointError, SolverError
from .operator_core import BandedComplexMatrix, BasisRange, OperatorParams, build_gribov_matrix

__all__ = [
    "SpectrumResult",
    "BiorthogonalSystem",
    "RealityReport",
    "sorted_eigenvalues",
    "compute_spectrum",
    "reality_report",
    "smallest_eigenvalue_curve",
    "biorthogonal_system",
    "min_pairwise_gap",
]

DRIFT_TOL = 1e-8
RESIDUAL_TOL = 1e-10
REALITY_TOL = 1e-8
EXCEPTIONAL_POINT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    dims_used: tuple[int, int]
    drift: np.ndarray
    tolerance: float

    @property
    def converged(self) -> np.ndarray:
        return self.drift < self.tolerance

    @property
    def max_imag(self) -> float:
        conv = self.converged
        if not conv.any():
            return float("nan")
        return float(np.max(np.abs(self.eigenvalues[conv].imag)))

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "dims_used": list(self.dims_used),
            "drift": [float(d) for d in self.drift],
            "tolerance": self.tolerance,
            "max_imag": self.max_imag,
            "converged": [bool(c) for c in self.converged],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpectrumResult":
        return cls(
            eigenvalues=np.array([complex(re, im) for re, im in data["eigenvalues"]]),
            dims_used=tuple(data["dims_used"]),
            drift=np.asarray(data["drift"], dtype=float),
            tolerance=float(data["tolerance"]),
        )


@dataclass(frozen=True, eq=False)
class BiorthogonalSystem:
    """Right eigenvectors (columns, unit Euclidean norm) and their bilinear norms.

    For a complex symmetric matrix the left eigenvector of sigma_k is the
    plain transpose of phi_k, so the pairing used for expansions is the
    unconjugated sum ``sum_n phi_n psi_n``.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    bilinear_norms: np.ndarray

    def coefficients(self, phi0) -> np.ndarray:
        """Expansion coefficients <phi0, phi_k*> / <phi_k, phi_k*>."""
        phi0 = np.asarray(phi0, dtype=np.complex128)
        if phi0.shape != (self.right_vectors.shape[0],):
            raise DimensionError("initial vector length does not match the eigenvector length")
        return (self.right_vectors.T @ phi0) / self.bilinear_norms


@dataclass(frozen=True)
class RealityReport:
    all_real: bool
    max_imag: float
    delta: float
    n_converged: int


def _order(values: np.ndarray) -> np.ndarray:
    # by Re, then Im; lexsort is stable
    return np.lexsort((values.imag, values.real))


def sorted_eigenvalues(matrix: BandedComplexMatrix) -> np.ndarray:
    try:
        values = scipy.linalg.eigvals(matrix.to_dense(), check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"QR iteration failed at dim={matrix.dim}: {exc}") from exc
    return values[_order(values)]


def _nearest_drift(small: np.ndarray, large: np.ndarray) -> np.ndarray:
    return np.min(np.abs(small[:, None] - large[None, :]), axis=1)


def compute_spectrum(
    matrix: BandedComplexMatrix, count: int, tolerance: float = DRIFT_TOL
) -> SpectrumResult:
    """Lowest-``count`` eigenvalues with N vs 2N drift certificates."""
    if not 1 <= count <= matrix.dim:
        raise DimensionError(f"count must lie in [1, {matrix.dim}], got {count}")
    values = sorted_eigenvalues(matrix)[:count]
    try:
        doubled = sorted_eigenvalues(matrix.resized(2 * matrix.dim))
    except SolverError as exc:
        exc.partial = values
        raise
    drift = _nearest_drift(values, doubled)
    return SpectrumResult(values, (matrix.dim, 2 * matrix.dim), drift, tolerance)


def min_pairwise_gap(values) -> float:
    values = np.asarray(values, dtype=np.complex128)
    if len(values) < 2:
        return float("inf")
    diff = np.abs(values[:, None] - values[None, :])
    diff[np.diag_indices_from(diff)] = np.inf
    return float(diff.min())


def reality_report(
    params: OperatorParams,
    range: BasisRange,
    tolerance: float = REALITY_TOL,
    count: int = 10,
    drift_tolerance: float = DRIFT_TOL,
) -> RealityReport:
    """Check that the converged low spectrum is real, alongside delta.

    Reality is only proven for delta >= 0; for delta < 0 the report is
    informational.
    """
    delta = params.delta  # raises when lambda or lambda' vanishes
    spec = compute_spectrum(build_gribov_matrix(params, range), count, drift_tolerance)
    conv = spec.converged
    if not conv.any():
        raise ConvergenceError(
            f"no eigenvalue converged (min drift {spec.drift.min():.3e})", partial=spec
        )
    max_imag = spec.max_imag
    return RealityReport(bool(max_imag < tolerance), max_imag, delta, int(conv.sum()))


def smallest_eigenvalue_curve(
    template: OperatorParams,
    mu_values,
    range: BasisRange,
    tolerance: float = DRIFT_TOL,
) -> np.ndarray:
    """sigma_0(mu): the converged eigenvalue of minimal real part for each mu."""
    out = []
    for mu in np.asarray(mu_values, dtype=float):
        spec = compute_spectrum(build_gribov_matrix(template.replace(mu=mu), range), 1, tolerance)
        if not spec.converged[0]:
            raise ConvergenceError(
                f"sigma_0 at mu={mu} not converged: drift {spec.drift[0]:.3e} >= {tolerance:.1e}",
                partial=np.array(out),
            )
        out.append(spec.eigenvalues[0].real)
    return np.array(out)


def biorthogonal_system(
    matrix: BandedComplexMatrix, count: int, threshold: float = EXCEPTIONAL_POINT_TOL
) -> BiorthogonalSystem:
    if not 1 <= count <= matrix.dim:
        raise DimensionError(f"count must lie in [1, {matrix.dim}], got {count}")
    try:
        values, vectors = scipy.linalg.eig(matrix.to_dense(), check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"QR iteration failed at dim={matrix.dim}: {exc}") from exc
    idx = _order(values)[:count]
    values = values[idx]
    vectors = vectors[:, idx]
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    norms = np.sum(vectors * vectors, axis=0)
    bad = np.flatnonzero(np.abs(norms) < threshold)
    if bad.size:
        k = int(bad[0])
        raise ExceptionalPointError(
            f"bilinear norm of eigenvector k={k} (sigma={values[k]:.6g}) is {abs(norms[k]):.2e}; "
            "Jordan block proximity",
            partial=values,
        )
    return BiorthogonalSystem(values, vectors, norms)
