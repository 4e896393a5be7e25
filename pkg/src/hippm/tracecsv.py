"""CSV serialization of solver traces.

The first line is a ``#`` comment carrying ``key=value`` run metadata,
the second the fixed header :data:`COLUMNS`. Numbers use scientific
notation with 17 significant digits; quantities that do not apply to a
row are written as empty fields.
"""

import csv
import io
import math
from pathlib import Path

import numpy as np

__all__ = ["COLUMNS", "TraceTable", "inclusion_rows", "alm_rows", "write_trace", "read_trace"]

COLUMNS = ["k", "c_k", "eps_k", "residual", "envelope", "dist_to_star",
           "feas_max", "obj_gap", "inner_iters", "criterion_ok"]


def _num(x):
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x, ".16e")


class TraceTable:
    """Column arrays of a trace file plus its metadata dict.

    Empty fields load as NaN.
    """

    def __init__(self, meta, columns):
        self.meta = dict(meta)
        self.columns = columns

    def __getitem__(self, name):
        return self.columns[name]

    def __len__(self):
        return len(self.columns["k"])


def _row(k, c, eps, residual, envelope, dist, feas, obj, inner, ok):
    return [str(int(k)), _num(c), _num(eps), _num(residual), _num(envelope), _num(dist),
            _num(feas), _num(obj), "" if inner is None else str(int(inner)),
            "" if ok is None else str(int(bool(ok)))]


def inclusion_rows(trace, envelope=None):
    """Rows for an :class:`~hippm.solver.IterateTrace`.

    ``envelope`` is an array over all rows (NaN where not applicable).
    """
    K = len(trace)
    env = np.full(K, np.nan) if envelope is None else envelope
    for k in range(K):
        yield _row(k, trace.c[k], trace.tol[k], trace.residual[k], env[k],
                   trace.dist_to_star[k], None, None, trace.inner_iterations[k],
                   trace.criterion_ok[k])


def alm_rows(trace):
    """Rows for an :class:`~hippm.alm.ALMTrace`.

    Row ``k`` reports ``||y^k - y*||`` as ``dist_to_star`` and the
    feasibility and objective gap of the ergodic point ``x~^{k+1}``;
    ``criterion_ok`` states whether the certified inner gap met
    ``eps_k^2 / (2 c_k)``.
    """
    ystar = trace.prog.y_star
    for k in range(len(trace)):
        dist = np.linalg.norm(trace.y[k] - ystar) if ystar is not None else None
        target = trace.eps[k] ** 2 / (2.0 * trace.c[k])
        yield _row(k, trace.c[k], trace.eps[k], None, None, dist, trace.feas_max[k],
                   trace.obj_gap[k], trace.inner_iterations[k], trace.gap_cert[k] <= target)


def write_trace(path, meta, rows):
    """Write metadata, header and rows; returns the text written."""
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    w.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_trace(path):
    """Load a trace file written by :func:`write_trace`."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        for tok in lines[0][1:].split():
            key, _, val = tok.partition("=")
            meta[key] = val
        lines = lines[1:]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != COLUMNS:
        raise ValueError(f"unexpected header {header!r}")
    cols = {c: [] for c in COLUMNS}
    for row in reader:
        if len(row) != len(COLUMNS):
            raise ValueError(f"row has {len(row)} fields, expected {len(COLUMNS)}")
        for c, v in zip(COLUMNS, row):
            cols[c].append(float(v) if v != "" else np.nan)
    arrays = {c: np.array(v, dtype=float) for c, v in cols.items()}
    arrays["k"] = arrays["k"].astype(int)
    return TraceTable(meta, arrays)
