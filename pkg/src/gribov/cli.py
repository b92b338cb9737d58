"""Batch command-line front end.

Exit codes: 0 success, 1 usage error, 2 numerical certificate failure,
3 I/O error.  Every run writes its payload atomically, a ``.meta.json``
sidecar with run metadata, optionally a gnuplot data file and a PNG figure,
and prints a one-line summary to stdout.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import eigensolver as es
from . import kernel_inverse as ki
from . import semigroup as sg
from . import trace_formula as tf
from .errors import GribovError, NumericalError
from .io import atomic_write_text, csv_text, jsonable, write_gnuplot, write_json, write_sidecar
from .operator_core import BasisRange, OperatorParams, build_gribov_matrix

__all__ = ["RunConfig", "build_parser", "parse_config", "run", "main", "parse_t_grid"]

COMMANDS = ("spectrum", "reality", "kernel", "radius", "evolve", "semigroup-trace", "reg-trace", "decay")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class UsageError(GribovError, ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: OperatorParams
    knobs: dict = field(default_factory=dict)
    format: str = "json"
    path: str | None = None
    gnuplot: str | None = None
    figure: str | None = None
    argv: tuple = ()

    @property
    def output_path(self) -> Path:
        return Path(self.path) if self.path else Path(f"{self.command}.{self.format}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_t_grid(text: str) -> np.ndarray:
    """Comma list, ``a:b:halving``, ``a:b:N`` (linear) or ``a:b:logN``."""
    text = text.strip()
    if ":" not in text:
        try:
            values = np.array([float(v) for v in text.split(",") if v.strip()])
        except ValueError as exc:
            raise UsageError(f"bad t list {text!r}") from exc
        if values.size == 0:
            raise UsageError("empty t list")
        return values
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"t range must be start:stop:rule, got {text!r}")
    try:
        a, b = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise UsageError(f"bad t range {text!r}") from exc
    rule = parts[2]
    if rule == "halving":
        return sg.halving_grid(a, b)
    try:
        if rule.startswith("log"):
            n = int(rule[3:])
            if a <= 0 or b <= 0:
                raise UsageError("log-spaced t needs positive endpoints")
            return np.logspace(math.log10(a), math.log10(b), n)
        return np.linspace(a, b, int(rule))
    except ValueError as exc:
        raise UsageError(f"bad t rule {rule!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("couplings")
    g.add_argument("--mu", type=float, default=0.0, help="coefficient of A*A (default 0)")
    g.add_argument("--lambda", dest="lam", type=float, default=0.0,
                   help="triple coupling of iA*(A+A*)A (default 0)")
    g.add_argument("--lambda-p", type=float, default=0.0, help="coefficient of A*^2A^2 (default 0)")
    g.add_argument("--lambda-pp", type=float, default=0.0, help="coefficient of A*^3A^3 (default 0)")
    o = common.add_argument_group("output")
    o.add_argument("--format", choices=("json", "csv"), default="json", help="payload format (default json)")
    o.add_argument("-o", "--output", default=None, help="payload path (default <command>.<format>)")
    o.add_argument("--gnuplot", default=None, metavar="PATH", help="also write a gnuplot data file")
    o.add_argument("--figure", default=None, metavar="PATH", help="also render a PNG figure")

    parser = _Parser(prog="gribov", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text)

    p = add("spectrum", "lowest eigenvalues with N vs 2N drift certificates")
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--start", type=int, choices=(0, 1), default=1)
    p.add_argument("--tol", type=float, default=es.DRIFT_TOL)

    p = add("reality", "maximal imaginary part of the converged low spectrum")
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--start", type=int, choices=(0, 1), default=1)
    p.add_argument("--tol", type=float, default=es.REALITY_TOL)

    for name, text in (("kernel", "discretized inverse kernel matrix"),
                       ("radius", "certified HS norm and spectral radius of the inverse")):
        p = add(name, text)
        p.add_argument("--kind", choices=("mu_lambda", "lambda_prime"), default="mu_lambda")
        p.add_argument("--n-nodes", type=int, default=256)
        p.add_argument("--grading", type=float, default=0.5)
        p.add_argument("--y-max", type=float, default=None)
        if name == "radius":
            p.add_argument("--tol", type=float, default=1e-6)

    p = add("evolve", "propagate e_start by Pade exponential and by eigen-expansion")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--start", type=int, choices=(0, 1), default=1)
    p.add_argument("--t", default="0,0.1,1", help="times: list, a:b:halving, a:b:N or a:b:logN")

    p = add("semigroup-trace", "short-time trace-norm asymptotics of e^{-tH}")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--t", default="0.2:0.0125:halving")
    p.add_argument("--start", type=int, choices=(0, 1), default=1)

    p = add("reg-trace", "regularized trace partial sums")
    p.add_argument("--m", type=_int_list, default=[5, 10, 15, 20])
    p.add_argument("--alpha", type=float, default=tf.DEFAULT_ALPHA)
    p.add_argument("--contour", choices=("alpha_interpolated", "midpoint_gap"), default="alpha_interpolated")
    p.add_argument("--dim", type=int, default=None, help="truncation size (default 4 m per row)")
    p.add_argument("--nodes", type=int, default=tf.DEFAULT_NODES)
    p.add_argument("--start", type=int, choices=(0, 1), default=1)

    p = add("decay", "fit the long-time decay rate of ||e^{-tH}||")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--start", type=int, choices=(0, 1), default=1)
    p.add_argument("--t", default="0:20:41")
    return parser


def parse_config(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    ns = vars(args).copy()
    params = OperatorParams(
        lambda_pp=ns.pop("lambda_pp"), lambda_p=ns.pop("lambda_p"), mu=ns.pop("mu"), lam=ns.pop("lam")
    )
    return RunConfig(
        command=ns.pop("command"),
        params=params,
        format=ns.pop("format"),
        path=ns.pop("output"),
        gnuplot=ns.pop("gnuplot"),
        figure=ns.pop("figure"),
        knobs=ns,
        argv=tuple(argv),
    )


def _check_dim(dim) -> None:
    if dim is not None and dim > sg.max_dim():
        raise UsageError(f"--dim {dim} exceeds GRIBOV_MAX_DIM={sg.max_dim()}")


# --------------------------------------------------------------------------
# each command returns a _Result bundle


@dataclass
class _Result:
    json: object
    header: list
    rows: list
    summary: str
    gnuplot_comments: tuple = ()
    figure: object = None


def _cmd_spectrum(cfg: RunConfig) -> _Result:
    k = cfg.knobs
    _check_dim(k["dim"])
    matrix = build_gribov_matrix(cfg.params, BasisRange(k["dim"], k["start"]))
    spec = es.compute_spectrum(matrix, k["count"], k["tol"])
    if not spec.converged.any():
        raise es.ConvergenceError(
            f"no eigenvalue converged between N={k['dim']} and 2N (min drift {spec.drift.min():.3e})",
            partial=spec,
        )
    rows = [[i, z.real, z.imag, d, int(c)]
            for i, (z, d, c) in enumerate(zip(spec.eigenvalues, spec.drift, spec.converged))]
    from . import plotting

    return _Result(
        spec.to_dict(), ["index", "re", "im", "drift", "converged"], rows,
        f"spectrum: {int(spec.converged.sum())}/{spec.count} converged, sigma0={spec.eigenvalues[0].real:.12g}, "
        f"max drift {spec.drift.max():.2e}, max |Im| {spec.max_imag:.2e}",
        ("index  Re(sigma_n)  Im(sigma_n)  |sigma_n(N) - sigma_n(2N)|  converged",),
        lambda p: plotting.plot_spectrum(spec.eigenvalues, spec.drift, p),
    )


def _cmd_reality(cfg: RunConfig) -> _Result:
    k = cfg.knobs
    _check_dim(k["dim"])
    rep = es.reality_report(cfg.params, BasisRange(k["dim"], k["start"]), k["tol"], k["count"])
    payload = {"all_real": rep.all_real, "max_imag": rep.max_imag, "delta": rep.delta,
               "n_converged": rep.n_converged}
    return _Result(
        payload, list(payload), [list(payload.values())],
        f"reality: all_real={rep.all_real}, max |Im|={rep.max_imag:.2e}, delta={rep.delta:.6g}",
        ("all_real  max|Im sigma|  delta  n_converged",),
    )


def _grid_spec(k) -> ki.GridSpec:
    return ki.GridSpec(n_nodes=k["n_nodes"], grading=k["grading"], y_max=k["y_max"])


def _cmd_kernel(cfg: RunConfig) -> _Result:
    k = cfg.knobs
    op = ki.discretize(k["kind"], cfg.params, _grid_spec(k))
    rows = list(op.csv_rows())
    payload = {
        "kind": op.kind,
        "params": cfg.params.to_dict(),
        "nodes": op.grid.nodes,
        "quad_weights": op.grid.quad_weights,
        "weight_values": op.grid.weight_values,
        "interval": list(op.grid.interval),
        "kernel_matrix": op.kernel_matrix,
        "hs_norm": ki.hs_norm(op),
        "symmetry_defect": ki.symmetry_defect(op),
    }
    from . import plotting

    return _Result(
        payload, rows[0], rows[1:],
        f"kernel: {op.kind} on {op.size} nodes over (0, {op.grid.interval[1]:.6g}), "
        f"HS norm {payload['hs_norm']:.12g}, symmetry defect {payload['symmetry_defect']:.2e}",
        ("y  r(y)  N(y, y)",),
        lambda p: plotting.plot_kernel(op.grid.nodes, op.kernel_matrix, op.grid.weight_values, p),
    )


def _kernel_gnuplot_rows(payload):
    k = np.asarray(payload["kernel_matrix"])
    return [[y, r, k[i, i]] for i, (y, r) in enumerate(zip(payload["nodes"], payload["weight_values"]))]


def _cmd_radius(cfg: RunConfig) -> _Result:
    k = cfg.knobs
    vals = ki.certified_values(k["kind"], cfg.params, _grid_spec(k), k["tol"])
    payload = {"kind": k["kind"], "params": cfg.params.to_dict(), **vals}
    header = ["hs_norm", "spectral_radius", "hs_change", "radius_change", "n_nodes"]
    return _Result(
        payload, header, [[vals[h] for h in header]],
        f"radius: Omega={vals['spectral_radius']:.12g}, HS norm={vals['hs_norm']:.12g} "
        f"(doubling changes {vals['radius_change']:.1e}, {vals['hs_change']:.1e})",
        ("Omega  ||N||_HS  doubling change in each",),
    )


def _cmd_evolve(cfg: RunConfig) -> _Result:
    k = cfg.knobs
    _check_dim(k["dim"])
    times = parse_t_grid(k["t"])
    matrix = build_gribov_matrix(cfg.params, BasisRange(k["dim"], k["start"]))
    system = es.biorthogonal_system(matrix, k["dim"])
    phi0 = np.zeros(k["dim"], dtype=complex)
    phi0[0] = 1.0
    rows = []
    for t in times:
        a = sg.matrix_exponential(matrix, t) @ phi0
        b = sg.propagate_cauchy(system, system.eigenvalues, phi0, t)
        rows.append([float(t), float(np.linalg.norm(a)), float(np.linalg.norm(b)),
                     float(np.linalg.norm(a - b) / np.linalg.norm(a))])
    header = ["t", "norm_expm", "norm_cauchy", "relative_difference"]
    payload = {"params": cfg.params.to_dict(), "dim": k["dim"], "start": k["start"],
               "rows": [dict(zip(header, r)) for r in rows]}
    from . import plotting

    return _Result(
        payload, header, rows,
        f"evolve: {len(rows)} times, max relative difference {max(r[3] for r in rows):.2e}",
        ("t  ||e^{-tH} phi0||  ||sum c_k e^{-sigma_k t} phi_k||  relative difference",),
        lambda p: plotting.plot_evolution([r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows], p),
    )


def _cmd_semigroup_trace(cfg: RunConfig) -> _Result:
    k = cfg.knobs
    rows = sg.trace_asymptotics(cfg.params, k["delta"], parse_t_grid(k["t"]), k["start"])
    header = list(sg.TraceAsymptoticsRow.CSV_COLUMNS)
    payload = [dict(zip(header, r.csv_row())) for r in rows]
    ratios = [r.ratio for r in rows if r.bound_scale > 0]
    from . import plotting

    return _Result(
        payload, header, [list(r.csv_row()) for r in rows],
        f"semigroup-trace: {len(rows)} rows, remainder/bound_scale in "
        f"[{min(ratios):.4g}, {max(ratios):.4g}]",
        ("t  ||e^{-tH} - e^{-t l'' G}||_1  t||e^{-t l'' G} H_{mu,lambda}||_1  difference  "
         "t^2||(l'' G)^delta e^{-(t/3) l'' G}||_1",),
        lambda p: plotting.plot_trace_asymptotics(rows, p),
    )


def _cmd_reg_trace(cfg: RunConfig) -> _Result:
    k = cfg.knobs
    _check_dim(k["dim"])
    if max(k["m"]) * 4 > sg.max_dim():
        raise UsageError(f"4 m exceeds GRIBOV_MAX_DIM={sg.max_dim()}")
    report = tf.regularized_partial_sums(
        cfg.params, k["m"], k["dim"], k["contour"], k["alpha"], k["start"], k["nodes"]
    )
    last = report.rows[-1]
    from . import plotting

    return _Result(
        report.to_json(), list(tf.TraceReport.CSV_COLUMNS), report.csv_rows(),
        f"reg-trace: m={[r.m for r in report.rows]}, |regularized| at m={last.m}: "
        f"{abs(last.regularized.real):.3e} (raw sum {last.raw_sum:.6g})",
        ("m  radius  raw sum  corrections k=1..4 (re im)  regularized (re im)",),
        lambda p: plotting.plot_trace_report(report, p),
    )


def _cmd_decay(cfg: RunConfig) -> _Result:
    k = cfg.knobs
    _check_dim(k["dim"])
    rep = sg.decay_fit(cfg.params, BasisRange(k["dim"], k["start"]), parse_t_grid(k["t"]))
    payload = rep.to_dict()
    sigma0 = rep.decay_fit["sigma0_estimate"]
    from . import plotting

    return _Result(
        payload, ["t", "operator_norm"], [list(r) for r in zip(rep.times, rep.norms)],
        f"decay: sigma0 estimate {sigma0:.12g}, fit residual {rep.decay_fit['fit_residual']:.2e}",
        ("t  ||e^{-tH}||_op",),
        lambda p: plotting.plot_decay(rep.times, rep.norms, sigma0, p),
    )


_DISPATCH = {
    "spectrum": _cmd_spectrum,
    "reality": _cmd_reality,
    "kernel": _cmd_kernel,
    "radius": _cmd_radius,
    "evolve": _cmd_evolve,
    "semigroup-trace": _cmd_semigroup_trace,
    "reg-trace": _cmd_reg_trace,
    "decay": _cmd_decay,
}


def _write(cfg: RunConfig, result: _Result) -> Path:
    path = cfg.output_path
    if cfg.format == "json":
        write_json(path, result.json)
    else:
        atomic_write_text(path, csv_text(result.header, result.rows))
    write_sidecar(path, {
        "command": cfg.command,
        "argv": list(cfg.argv),
        "params": cfg.params.to_dict(),
        "knobs": jsonable(cfg.knobs),
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    })
    if cfg.gnuplot:
        rows = _kernel_gnuplot_rows(result.json) if cfg.command == "kernel" else result.rows
        write_gnuplot(cfg.gnuplot, result.header if cfg.command != "kernel" else ["y", "r", "N_yy"],
                      rows, result.gnuplot_comments)
    if cfg.figure:
        if result.figure is None:
            raise UsageError(f"no figure is defined for {cfg.command}")
        result.figure(cfg.figure)
    return path


def run(config: RunConfig) -> int:
    try:
        if config.command not in _DISPATCH:
            raise UsageError(f"unknown command {config.command!r}")
        result = _DISPATCH[config.command](config)
        path = _write(config, result)
    except NumericalError as exc:
        print(f"gribov {config.command}: certificate '{exc.certificate}' failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"gribov {config.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (GribovError, ValueError) as exc:
        print(f"gribov {config.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{result.summary} -> {path}")
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (GribovError, ValueError) as exc:
        print(f"gribov: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
