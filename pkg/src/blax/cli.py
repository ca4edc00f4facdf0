"""Command-line front end.

Exit status: 0 when every requested check passes, 1 on a verification
failure, 2 on malformed or unusable input.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io as bio
from .bergman import KERNEL_KINDS, default_grid, default_grid_points, kernel_eval
from .beurlinglax import (
    approach1_build,
    approach2_predicate,
    approach4_build,
    blaschke_taylor,
    build_inner_family,
    verify_inner_family,
)
from .errors import (
    BlaxError,
    ConsistencyError,
    ConvergenceError,
    CounterexampleError,
    InputError,
)
from .onezero import OneZeroSpec, oracle_all, oracle_pair, oracle_vs_pipeline
from .report import Report
from .serieskernels import SeriesSpec, r_eval, verify_series_identities
from .statespace import gramians
from .taylor import TaylorTable
from .tvsystem import simulate
from .verify import verify_all

__all__ = ["main", "build_parser"]

# Failures of a computation on valid input; everything else is an input problem.
VERIFICATION_ERRORS = (ConsistencyError, CounterexampleError, ConvergenceError)


def _complex(text, field):
    parts = text.split(",")
    if len(parts) not in (1, 2):
        raise InputError(f"{field}: expected 're,im', got {text!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise InputError(f"{field}: expected 're,im', got {text!r}") from None
    return complex(vals[0], vals[1] if len(vals) == 2 else 0.0)


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _check_sizes(args):
    if args.N <= args.K + 16:
        raise InputError(f"N: truncation must exceed K + 16 = {args.K + 16}, got {args.N}")
    if args.tol is not None and not args.tol > 0:
        raise InputError(f"tol: tolerance must be positive, got {args.tol}")


def _tol(args, default):
    return default if args.tol is None else args.tol


def _load_pair(path):
    return bio.decode_pair(bio.load_json(path, "pair"), "pair")


def _cmd_series(args):
    points = [_complex(z, "z") for z in args.z] or default_grid_points()
    rep = verify_series_identities(args.n, args.k, args.N, points, tol=_tol(args, 1e-10))
    values = []
    for z in args.z:
        zz = _complex(z, "z")
        values.append({"z": zz, "value": r_eval(SeriesSpec(args.n, args.k), zz)})
    out = bio.encode_report(rep, {"command": "series", "n": args.n, "k": args.k, "values": values})
    return out, rep


def _cmd_gramian(args):
    pair = _load_pair(args.pair)
    g = gramians(pair, k_max=args.K + 1)
    out = {
        "n": pair.n,
        "plain": [bio.encode_cmatrix(g.G(m)) for m in range(pair.n + 1)],
        "shifted": {str(k): bio.encode_cmatrix(g.GG(k)) for k in sorted(g.shifted)},
    }
    if args.kernel:
        kg = kernel_eval(args.kernel, pair, g, default_grid(), H=g.G(pair.n), k=args.shift)
        if args.kernel_csv:
            _emit(bio.kernel_grid_csv(kg), args.kernel_csv)
        out["kernel_hermitian_defect"] = kg.hermitian_defect()
    return out, None


def _load_theta(path):
    raw = bio.load_json(path, "theta")
    if isinstance(raw, dict):
        field = "theta.theta_taylor"
        raw = raw.get("theta_taylor")
    else:
        field = "theta"
    if not isinstance(raw, list) or not raw:
        raise InputError(f"{field}: expected a non-empty list of coefficient matrices")
    coeffs = [bio.decode_cmatrix(c, f"{field}[{j}]") for j, c in enumerate(raw)]
    if any(c.shape != coeffs[0].shape for c in coeffs):
        raise InputError(f"{field}: coefficient matrices must share one shape")
    return TaylorTable(np.array(coeffs))


def _approach2(args, tol):
    """Contractive-multiplier test of a supplied Theta, or of b_alpha for a scalar one-zero pair."""
    alpha = _complex(args.alpha, "alpha") if args.alpha else None
    if args.theta:
        theta = _load_theta(args.theta)
        n = args.n
        if args.pair:
            n = _load_pair(args.pair).n
    else:
        if not args.pair:
            raise InputError("theta: approach 2 needs --theta or a scalar --pair")
        pair = _load_pair(args.pair)
        if pair.d != 1 or pair.p != 1 or abs(pair.C[0, 0]) == 0:
            raise InputError("theta: approach 2 derives Theta only for scalar one-zero pairs; pass --theta")
        alpha = complex(pair.A[0, 0]).conjugate()
        n = pair.n
        theta = blaschke_taylor(alpha, args.N)
    rep = approach2_predicate(theta, n, N=min(theta.N, args.N), alpha=alpha, tol=tol)
    out = {"n": n, "theta_taylor": [bio.encode_cmatrix(c) for c in theta.coeffs]}
    return bio.encode_report(rep, {"multiplier": out}), rep


def _cmd_blrep(args):
    tol = _tol(args, 1e-8)
    if args.approach == 2:
        return _approach2(args, tol)
    if not args.pair:
        raise InputError(f"pair: approach {args.approach} needs --pair")
    pair = _load_pair(args.pair)
    grid = default_grid()
    if args.approach == 3:
        return _inner_family(pair, args, tol)
    grams = gramians(pair, k_max=max(args.K + 1, 1))
    if args.approach == 1:
        fam = approach1_build(pair, grid, N=args.N, grams=grams, tol=tol)
        out = {"n": pair.n, "entries": [[bio.encode_cmatrix(c) for c in t.coeffs] for t in fam.entries]}
        return bio.encode_report(fam.report, {"multiplier": out}), fam.report
    res = approach4_build(pair, grid, N=args.N, grams=grams, tol=tol)
    out = {"stage": bio.encode_stage(res.stage), "theta_taylor": [bio.encode_cmatrix(c) for c in res.theta.coeffs]}
    return bio.encode_report(res.report, {"representer": out}), res.report


def _inner_family(pair, args, tol):
    fam = build_inner_family(pair, args.K, N=args.N)
    rep = verify_inner_family(fam, default_grid(), N=args.N, tol=tol)
    out = bio.encode_inner_family(pair, fam.stages, fam.thetas)
    out["report"] = bio.encode_report(rep)
    return out, rep


def _cmd_inner_family(args):
    return _inner_family(_load_pair(args.pair), args, _tol(args, 1e-8))


def _cmd_simulate(args):
    raw = bio.load_json(args.spec, "spec")
    spec = bio.decode_system(raw, "spec")
    inputs = bio.read_input_csv(args.input, "input")
    if args.T > spec.K:
        raise InputError(f"T: {args.T} exceeds the last stage K = {spec.K}")
    if len(inputs) < args.T + 1:
        raise InputError(f"input: needs rows for j = 0..{args.T}, found {len(inputs)}")
    if "x0" in raw:
        x0 = bio.decode_cmatrix(raw["x0"], "spec.x0").reshape(-1)
        if x0.shape[0] != spec.pair.d:
            raise InputError(f"spec.x0: expected {spec.pair.d} entries, got {x0.shape[0]}")
    else:
        x0 = [0.0] * spec.pair.d
    for j in range(args.T + 1):
        if inputs[j].shape[0] != spec.stages[j].u:
            raise InputError(f"input[row j={j}]: expected {spec.stages[j].u} entries, got {inputs[j].shape[0]}")
    trace = simulate(spec, x0, inputs, args.T)
    return bio.signal_trace_csv(trace), None


def _cmd_oracle(args):
    spec = OneZeroSpec(_complex(args.alpha, "alpha"), args.n)
    rep = oracle_vs_pipeline(spec, K=args.K, N=args.N, tol=_tol(args, 1e-10))
    record = oracle_all(spec, K=args.K)
    record["pair"] = bio.encode_pair(oracle_pair(spec))
    record["grid"] = [[complex(z), complex(w)] for z, w in default_grid()]
    return bio.encode_report(rep, {"oracle": record}), rep


def _cmd_verify_all(args):
    seed = args.seed
    env = os.environ.get("BLAX_SEED")
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise InputError(f"BLAX_SEED: expected an integer, got {env!r}") from None
    rep = verify_all(seed)
    return bio.encode_report(rep, {"seed": seed, "checklist": rep.data["checklist"]}), rep


COMMANDS = {
    "series": _cmd_series,
    "gramian": _cmd_gramian,
    "blrep": _cmd_blrep,
    "inner-family": _cmd_inner_family,
    "simulate": _cmd_simulate,
    "oracle": _cmd_oracle,
    "verify-all": _cmd_verify_all,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-N", type=int, default=256, help="Taylor truncation (default 256)")
    common.add_argument("-K", type=int, default=8, help="last stage index (default 8)")
    common.add_argument("--tol", type=float, default=None, help="override the check tolerance")
    common.add_argument("-o", "--output", default=None, help="write to a file instead of stdout")

    parser = argparse.ArgumentParser(prog="blax", description="Weighted Bergman shift-invariant subspace toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("series", parents=[common], help="series identities and R_{n,k} values")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int, default=10, help="largest shift index")
    p.add_argument("--z", action="append", default=[], help="evaluation point re,im (repeatable)")
    p.set_defaults(N=40)

    p = sub.add_parser("gramian", parents=[common], help="plain and shifted gramians of a pair")
    p.add_argument("--pair", required=True)
    p.add_argument("--kernel", choices=KERNEL_KINDS, default=None, help="also evaluate a kernel on the default grid")
    p.add_argument("--shift", type=int, default=1, help="shift index for shifted kernels")
    p.add_argument("--kernel-csv", default=None, help="write the kernel grid as CSV")

    p = sub.add_parser("blrep", parents=[common], help="Beurling-Lax representation")
    p.add_argument("--approach", type=int, choices=(1, 2, 3, 4), required=True)
    p.add_argument("--pair", default=None)
    p.add_argument("--theta", default=None, help="approach 2: Taylor coefficients to test (JSON)")
    p.add_argument("--alpha", default=None, help="approach 2: also compare the range with {f : f(alpha) = 0}")
    p.add_argument("--n", type=int, default=2, help="approach 2 with --theta only: weight index")

    p = sub.add_parser("inner-family", parents=[common], help="inner family with verification report")
    p.add_argument("--pair", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run the time-varying system")
    p.add_argument("--spec", required=True, help="inner-family JSON (optional x0 field)")
    p.add_argument("--input", required=True, help="input CSV: j, re u0, im u0, ...")
    p.add_argument("-T", type=int, default=30)

    p = sub.add_parser("oracle", parents=[common], help="one-zero closed forms against the pipeline")
    p.add_argument("--alpha", required=True, help="re,im")
    p.add_argument("--n", type=int, default=2)

    p = sub.add_parser("verify-all", parents=[common], help="full invariant suite")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        _check_sizes(args)
        out, rep = COMMANDS[args.command](args)
    except VERIFICATION_ERRORS as exc:
        print(f"blax: verification failed: {exc}", file=sys.stderr)
        return 1
    except (BlaxError, ValueError) as exc:
        print(f"blax: {exc}", file=sys.stderr)
        return 2
    try:
        _emit(out if isinstance(out, str) else bio.dumps(out), args.output)
    except BrokenPipeError:
        # Reader went away (e.g. piped into head); silence the flush at exit.
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    if isinstance(rep, Report) and not rep.passed:
        for c in rep.failures:
            print(f"blax: check {c.name} failed: residual {c.residual:.3e} > {c.tolerance:.1e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
