"""JSON and CSV encodings shared by the modules and the command line.

Every decoder raises :class:`InputError` with a dotted path naming the
offending field, e.g. ``pair.A.entries``.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .errors import BlaxError, InputError
from .report import Report
from .statespace import OutputPair, StageColligation
from .tvsystem import SystemSpec

__all__ = [
    "encode_cmatrix",
    "decode_cmatrix",
    "encode_pair",
    "decode_pair",
    "encode_stage",
    "decode_stage",
    "encode_inner_family",
    "decode_system",
    "encode_report",
    "kernel_grid_csv",
    "signal_trace_csv",
    "read_input_csv",
    "load_json",
    "dumps",
]

REPORT_SCHEMA = 1


def _real(x, field):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InputError(f"{field}: expected a number, got {type(x).__name__}")
    if not math.isfinite(x):
        raise InputError(f"{field}: value is not finite")
    return float(x)


def _int(x, field, minimum=0):
    if isinstance(x, bool) or not isinstance(x, int):
        raise InputError(f"{field}: expected an integer, got {x!r}")
    if x < minimum:
        raise InputError(f"{field}: must be >= {minimum}, got {x}")
    return x


def _get(obj, key, field):
    if not isinstance(obj, dict):
        raise InputError(f"{field}: expected an object")
    if key not in obj:
        raise InputError(f"{field}.{key}: missing")
    return obj[key]


def _scalar_pair(z):
    z = complex(z)
    return [z.real, z.imag]


def encode_cmatrix(M) -> dict:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    r, c = M.shape
    return {"rows": r, "cols": c, "entries": [_scalar_pair(x) for x in M.reshape(-1)]}


def decode_cmatrix(obj, field="matrix") -> np.ndarray:
    rows = _int(_get(obj, "rows", field), f"{field}.rows")
    cols = _int(_get(obj, "cols", field), f"{field}.cols")
    entries = _get(obj, "entries", field)
    if not isinstance(entries, list):
        raise InputError(f"{field}.entries: expected a list")
    if len(entries) != rows * cols:
        raise InputError(f"{field}.entries: expected {rows * cols} entries (rows*cols), got {len(entries)}")
    vals = []
    for i, e in enumerate(entries):
        if not isinstance(e, list) or len(e) != 2:
            raise InputError(f"{field}.entries[{i}]: expected [re, im]")
        vals.append(complex(_real(e[0], f"{field}.entries[{i}][0]"), _real(e[1], f"{field}.entries[{i}][1]")))
    return np.array(vals, dtype=complex).reshape(rows, cols)


def encode_pair(pair: OutputPair) -> dict:
    return {"n": pair.n, "A": encode_cmatrix(pair.A), "C": encode_cmatrix(pair.C)}


def decode_pair(obj, field="pair") -> OutputPair:
    n = _int(_get(obj, "n", field), f"{field}.n", minimum=1)
    A = decode_cmatrix(_get(obj, "A", field), f"{field}.A")
    C = decode_cmatrix(_get(obj, "C", field), f"{field}.C")
    try:
        return OutputPair(A, C, n)
    except (BlaxError, ValueError) as exc:
        raise InputError(f"{field}: {exc}") from None


def encode_stage(stage: StageColligation) -> dict:
    return {"k": stage.k, "B": encode_cmatrix(stage.B), "D": encode_cmatrix(stage.D)}


def decode_stage(obj, field="stage") -> StageColligation:
    k = _int(_get(obj, "k", field), f"{field}.k")
    B = decode_cmatrix(_get(obj, "B", field), f"{field}.B")
    D = decode_cmatrix(_get(obj, "D", field), f"{field}.D")
    try:
        return StageColligation(k, B, D)
    except (BlaxError, ValueError) as exc:
        raise InputError(f"{field}: {exc}") from None


def encode_inner_family(pair, stages, thetas) -> dict:
    return {
        "pair": encode_pair(pair),
        "stages": [encode_stage(s) for s in stages],
        "theta_taylor": [[encode_cmatrix(c) for c in t.coeffs] for t in thetas],
    }


def decode_system(obj, field="spec"):
    """Pair and stage list from an inner-family style object (``theta_taylor`` is ignored)."""
    pair = decode_pair(_get(obj, "pair", field), f"{field}.pair")
    raw = _get(obj, "stages", field)
    if not isinstance(raw, list) or not raw:
        raise InputError(f"{field}.stages: expected a non-empty list")
    stages = [decode_stage(s, f"{field}.stages[{i}]") for i, s in enumerate(raw)]
    try:
        return SystemSpec(pair, tuple(stages))
    except (BlaxError, ValueError) as exc:
        raise InputError(f"{field}.stages: {exc}") from None


def encode_report(report: Report, extra=None) -> dict:
    checks = sorted((c.as_dict() for c in report.checks), key=lambda c: c["name"])
    out = {"schema": REPORT_SCHEMA, "pass": all(c["pass"] for c in checks), "checks": checks}
    if extra:
        out.update(extra)
    return out


def _clean(x):
    """Make values JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (np.complexfloating, complex)):
        return _scalar_pair(x)
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def load_json(path, field):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{field}: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{field}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def kernel_grid_csv(grid) -> str:
    """Columns re z, im z, re zeta, im zeta, then the p^2 entries (re, im) row-major."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    p = grid.values.shape[1]
    header = ["re_z", "im_z", "re_zeta", "im_zeta"]
    for a in range(p):
        for b in range(p):
            header += [f"re_{a}{b}", f"im_{a}{b}"]
    w.writerow(header)
    for (z, zeta), v in zip(grid.points, grid.values):
        row = [repr(z.real), repr(z.imag), repr(zeta.real), repr(zeta.imag)]
        for x in v.reshape(-1):
            row += [repr(float(x.real)), repr(float(x.imag))]
        w.writerow(row)
    return buf.getvalue()


def signal_trace_csv(trace) -> str:
    """One row per time index: j, input entries, state entries, output entries (re, im each)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    m = len(trace.inputs[0]) if trace.inputs else 0
    d, p = len(trace.states[0]), len(trace.outputs[0])
    header = ["j"]
    for tag, size in (("u", m), ("x", d), ("y", p)):
        for i in range(size):
            header += [f"re_{tag}{i}", f"im_{tag}{i}"]
    w.writerow(header)
    for j in range(trace.T + 1):
        row = [str(j)]
        for vec in (trace.inputs[j], trace.states[j], trace.outputs[j]):
            for x in np.asarray(vec).reshape(-1):
                row += [repr(float(x.real)), repr(float(x.imag))]
        w.writerow(row)
    return buf.getvalue()


def read_input_csv(path, field="input"):
    """Rows ``j, re u_0, im u_0, re u_1, im u_1, ...``; a non-numeric first row is a header."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"{field}: cannot read {path}: {exc.strerror}") from None
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    out = {}
    for line, r in enumerate(rows, start=1):
        where = f"{field}[row {line}]"
        try:
            vals = [float(c) for c in r]
        except ValueError:
            raise InputError(f"{where}: non-numeric entry") from None
        if vals[0] != int(vals[0]) or vals[0] < 0:
            raise InputError(f"{where}.j: time index must be a nonnegative integer")
        if (len(vals) - 1) % 2:
            raise InputError(f"{where}: entries must come in (re, im) pairs")
        j = int(vals[0])
        if j in out:
            raise InputError(f"{where}.j: duplicate time index {j}")
        out[j] = np.array(vals[1::2]) + 1j * np.array(vals[2::2])
    if not out:
        raise InputError(f"{field}: no rows")
    T = max(out)
    missing = [j for j in range(T + 1) if j not in out]
    if missing:
        raise InputError(f"{field}: missing time index {missing[0]}")
    return [out[j] for j in range(T + 1)]
