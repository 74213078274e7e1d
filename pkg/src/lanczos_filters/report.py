"""
Delimited output and figures for the experiment harness.

CSV files start with a ``# generated ...`` comment line unless
``reproducible`` is set, in which case reruns are byte-identical. Floats
are written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .solvers import IterateRecord
from .tridiag import ShiftIncrements

__all__ = [
    "write_csv",
    "write_json",
    "iterate_rows",
    "omega_rows",
    "filter_rows",
    "recurrence_rows",
    "plot_solutions",
    "plot_error_curves",
    "plot_coefficients",
    "plot_filters",
]

STYLE = {
    "figure.figsize": (7.0, 4.5),
    "axes.grid": True,
    "grid.linestyle": "--",
    "grid.linewidth": 0.5,
    "lines.linewidth": 1.6,
    "font.size": 10,
    "savefig.dpi": 120,
}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows, *, reproducible: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if not reproducible:
            fh.write(f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


ITERATE_HEADER = ["method", "m", "c", "nat_res_norm", "ne_res_norm", "err_norm"]
OMEGA_HEADER = ["method", "m", "c", "i", "omega"]
FILTER_HEADER = ["problem", "m", "c", "i", "gamma", "defined_flag"]
RECURRENCE_HEADER = ["l", "theta", "phi", "g", "h", "log_abs_theta", "log_abs_phi", "log_abs_g", "log_abs_h"]


def iterate_rows(records: list[IterateRecord], method: str):
    for r in records:
        yield [method, r.m, r.c, r.nat_res_norm, r.ne_res_norm, r.err_norm]


def omega_rows(records: list[IterateRecord], method: str):
    for r in records:
        for i, w in enumerate(r.omega, start=1):
            yield [method, r.m, r.c, i, w]


def filter_rows(problem: str, m: int, c: float, gamma, defined):
    for i, (gm, ok) in enumerate(zip(gamma, defined), start=1):
        yield [problem, m, c, i, gm if ok else None, bool(ok)]


def recurrence_rows(inc: ShiftIncrements):
    """One row per index l = 0..m+1; entries outside a sequence's range are blank."""
    m = len(inc.theta) - 1

    def pick(seq, l):
        if l >= len(seq) or np.isnan(seq.values[l]):
            return None, None
        return seq.values[l], seq.log_abs[l]

    for l in range(m + 2):
        th, lth = pick(inc.theta, l)
        ph, lph = pick(inc.phi, l)
        g, lg = pick(inc.g, l)
        h, lh = pick(inc.h, l)
        yield [l, th, ph, g, h, lth, lph, lg, lh]


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    FigureCanvasAgg(fig)
    fig.savefig(path, metadata={"Software": None})
    return path


def plot_solutions(path, grid, x_true, solutions: dict, title: str = "") -> Path:
    with mpl.rc_context(STYLE):
        fig = Figure(layout="constrained")
        ax = fig.add_subplot()
        if x_true is not None:
            ax.plot(grid, x_true, "k-", label="true solution", linewidth=2.2)
        for label, x in solutions.items():
            ax.plot(grid, x, "--", label=label)
        ax.set_xlabel("t")
        ax.set_ylabel("x(t)")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_error_curves(path, curves: dict, m_discr: int | None = None, ylabel="error norm", title="") -> Path:
    """``curves`` maps a label to ``(m_values, values)``; log-scaled y axis."""
    with mpl.rc_context(STYLE):
        fig = Figure(layout="constrained")
        ax = fig.add_subplot()
        for label, (ms, vals) in curves.items():
            ax.semilogy(ms, vals, "o-", markersize=3, label=label)
        if m_discr is not None:
            ax.axvline(m_discr, color="gray", linestyle=":", label=f"m_discr = {m_discr}")
        ax.set_xlabel("iteration m")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_coefficients(path, coeffs: dict, title: str = "") -> Path:
    """Absolute Lanczos-basis coefficients against their index."""
    with mpl.rc_context(STYLE):
        fig = Figure(layout="constrained")
        ax = fig.add_subplot()
        for label, w in coeffs.items():
            w = np.abs(np.asarray(w, dtype=float))
            idx = np.arange(1, w.size + 1)
            keep = w > 0
            ax.semilogy(idx[keep], w[keep], "o-", markersize=3, label=label)
        ax.set_xlabel("index i")
        ax.set_ylabel("|omega_i|")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_filters(path, filters: dict, title: str = "", log: bool = True) -> Path:
    """``filters`` maps a label to a gamma sequence (NaN marks undefined entries)."""
    with mpl.rc_context(STYLE):
        fig = Figure(layout="constrained")
        ax = fig.add_subplot()
        for label, gamma in filters.items():
            gamma = np.asarray(gamma, dtype=float)
            idx = np.arange(1, gamma.size + 1)
            keep = np.isfinite(gamma) & ((gamma > 0) if log else True)
            draw = ax.semilogy if log else ax.plot
            draw(idx[keep], gamma[keep], "o-", markersize=3, label=label)
        ax.set_xlabel("index i")
        ax.set_ylabel("gamma_i")
        ax.set_title(title)
        ax.legend(fontsize=8)
        return _save(fig, path)
