"""Figures for CLI reports, rendered off-screen with the Agg backend."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = [
    "save_figure",
    "plot_spectrum",
    "plot_kernel",
    "plot_radius_limit",
    "plot_trace_asymptotics",
    "plot_trace_report",
    "plot_decay",
    "plot_evolution",
]

_STYLE = {"linewidth": 1.2, "markersize": 4}


def _figure(ncols: int = 1, size=(5.0, 3.6)):
    fig = Figure(figsize=(size[0] * ncols, size[1]), dpi=120)
    FigureCanvasAgg(fig)
    axes = fig.subplots(1, ncols, squeeze=False)[0]
    return fig, axes


def save_figure(fig: Figure, path) -> Path:
    """Atomic PNG write with metadata pinned so output is reproducible."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".png", dir=path.parent or Path("."))
    os.close(fd)
    try:
        fig.tight_layout()
        fig.savefig(tmp, format="png", metadata={"Software": None})
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def plot_spectrum(eigenvalues, drift, path, title: str = "") -> Path:
    eigenvalues = np.asarray(eigenvalues)
    fig, (ax, ax2) = _figure(2)
    ax.plot(eigenvalues.real, eigenvalues.imag, "o", **_STYLE)
    ax.set_xlabel(r"Re $\sigma$")
    ax.set_ylabel(r"Im $\sigma$")
    ax.set_title(title or "eigenvalues")
    ax2.semilogy(np.arange(len(drift)), np.maximum(drift, 1e-300), "s-", **_STYLE)
    ax2.set_xlabel("index")
    ax2.set_ylabel("N vs 2N drift")
    return save_figure(fig, path)


def plot_kernel(nodes, matrix, weight_values, path) -> Path:
    fig, (ax, ax2) = _figure(2)
    extent = (nodes[0], nodes[-1], nodes[-1], nodes[0])
    im = ax.imshow(matrix, extent=extent, aspect="auto", cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("s")
    ax.set_ylabel("y")
    ax.set_title("N(y, s)")
    ax2.semilogy(nodes, weight_values, "-", **_STYLE)
    ax2.set_xlabel("y")
    ax2.set_ylabel("r(y)")
    return save_figure(fig, path)


def plot_radius_limit(lambda_p_values, radii, limit, path) -> Path:
    fig, (ax,) = _figure()
    resid = np.abs(np.asarray(radii) - limit)
    ax.loglog(lambda_p_values, resid, "o-", **_STYLE)
    ax.set_xlabel(r"$\lambda'$")
    ax.set_ylabel(r"$|\Omega(\lambda') - \Omega(0)|$")
    return save_figure(fig, path)


def plot_trace_asymptotics(rows, path) -> Path:
    t = np.array([r.t for r in rows])
    fig, (ax, ax2) = _figure(2)
    ax.loglog(t, [r.lhs for r in rows], "o-", label="lhs", **_STYLE)
    ax.loglog(t, [r.first_order for r in rows], "s--", label="first order", **_STYLE)
    ax.loglog(t, [abs(r.remainder) for r in rows], "^:", label="|remainder|", **_STYLE)
    ax.set_xlabel("t")
    ax.legend(frameon=False)
    ax2.semilogx(t, [r.remainder / r.bound_scale for r in rows], "o-", **_STYLE)
    ax2.set_xlabel("t")
    ax2.set_ylabel("remainder / bound scale")
    return save_figure(fig, path)


def plot_trace_report(report, path) -> Path:
    m = np.array([r.m for r in report.rows])
    fig, (ax,) = _figure()
    ax.semilogy(m, [abs(r.raw_sum) for r in report.rows], "s--", label="|raw sum|", **_STYLE)
    ax.semilogy(m, [max(abs(r.regularized.real), 1e-300) for r in report.rows], "o-",
                label="|regularized|", **_STYLE)
    ax.set_xlabel("m")
    ax.legend(frameon=False)
    return save_figure(fig, path)


def plot_decay(times, norms, sigma0, path) -> Path:
    times = np.asarray(times)
    fig, (ax,) = _figure()
    ax.semilogy(times, norms, "o", label=r"$\|e^{-tH}\|$", **_STYLE)
    ref = np.asarray(norms)[-1] * np.exp(-sigma0 * (times - times[-1]))
    ax.semilogy(times, ref, "-", label=rf"$e^{{-\sigma_0 t}}$, $\sigma_0$={sigma0:.6g}", **_STYLE)
    ax.set_xlabel("t")
    ax.legend(frameon=False)
    return save_figure(fig, path)


def plot_evolution(times, expm_norms, cauchy_norms, path) -> Path:
    fig, (ax,) = _figure()
    ax.semilogy(times, expm_norms, "o-", label="Pade propagator", **_STYLE)
    ax.semilogy(times, cauchy_norms, "x--", label="eigen-expansion", **_STYLE)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\|u(t)\|$")
    ax.legend(frameon=False)
    return save_figure(fig, path)
