import numpy as np
import pytest

from gribov import plotting
from gribov.operator_core import OperatorParams
from gribov.semigroup import trace_asymptotics
from gribov.trace_formula import regularized_partial_sums

PNG = b"\x89PNG"


def _check(path):
    assert path.read_bytes().startswith(PNG)
    assert [p.name for p in path.parent.iterdir()] == [path.name]


def test_spectrum(tmp_path):
    _check(plotting.plot_spectrum([1 + 0j, 2 + 0.1j], [1e-12, 0.0], tmp_path / "s.png"))


def test_kernel(tmp_path):
    y = np.linspace(0.1, 1, 5)
    _check(plotting.plot_kernel(y, np.outer(y, y), np.exp(-y), tmp_path / "k.png"))


def test_radius_limit(tmp_path):
    _check(plotting.plot_radius_limit([0.1, 0.05], [1.1, 1.05], 1.0, tmp_path / "r.png"))


def test_trace_asymptotics(tmp_path):
    rows = trace_asymptotics(OperatorParams(lambda_pp=1.0, mu=1.0, lam=0.5), 0.5, [0.2, 0.1])
    _check(plotting.plot_trace_asymptotics(rows, tmp_path / "a.png"))


def test_trace_report(tmp_path):
    rep = regularized_partial_sums(OperatorParams(lambda_pp=1.0, mu=1.0, lam=0.5), [3, 4])
    _check(plotting.plot_trace_report(rep, tmp_path / "t.png"))


def test_decay_and_evolution(tmp_path):
    t = np.linspace(0, 2, 5)
    _check(plotting.plot_decay(t, np.exp(-t), 1.0, tmp_path / "d.png"))
    (tmp_path / "d.png").unlink()
    _check(plotting.plot_evolution(t, np.exp(-t), np.exp(-t), tmp_path / "e.png"))


def test_deterministic_bytes(tmp_path):
    a = plotting.plot_decay([0, 1, 2], [1, 0.5, 0.25], 0.69, tmp_path / "a.png").read_bytes()
    b = plotting.plot_decay([0, 1, 2], [1, 0.5, 0.25], 0.69, tmp_path / "a.png").read_bytes()
    assert a == b


def test_unwritable(tmp_path):
    with pytest.raises(OSError):
        plotting.plot_decay([0, 1, 2], [1, 0.5, 0.25], 0.69, tmp_path / "missing" / "a.png")
