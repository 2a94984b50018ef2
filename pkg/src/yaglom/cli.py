"""Command-line interface: ``yaglom {solve,compare,bounds,simulate,moments}``.

Exit status is 0 on success, 2 for invalid input (bad flags, unreadable or
invalid model, unsupported regime) and 3 for numerical failures. Errors are
reported as one line on stderr: ``yaglom: error: <Kind>: <message>``.

Set ``YAGLOM_NUM_THREADS`` to cap the BLAS thread pool.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import numkernel as nk
from .baselines import (
    SimulationConfig,
    interpolation_baseline,
    simulate_returned_process,
    total_variation,
)
from .dense import ContourConfig, solve_dense
from .errors import ConfigurationError, NumericalError, ValidationError, YaglomError
from .genfun import LinearFractional, choose_radius
from .lowrank import (
    DEFAULT_TAU,
    decay_bound_taylor,
    decay_bound_zolotarev,
    solve_lowrank,
)
from .modelio import is_bivariate, load_model
from .multitype import solve_dense_2d, solve_krylov_2d, solve_lowrank_2d
from .oracles import linfrac_qsd, moments_from_coefficients, moments_from_recurrence

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
FMT = "%.17g"
THREADS_ENV = "YAGLOM_NUM_THREADS"


def _fmt(x) -> str:
    return FMT % x


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(cell if isinstance(cell, str) else _fmt(cell) for cell in row)
                 for row in rows)
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _sidecar_path(out):
    return Path(out).with_suffix(".json")


def _write_sidecar(out, meta):
    text = json.dumps(meta, indent=2, sort_keys=True, default=_json_default)
    if out is None:
        sys.stderr.write(text + "\n")
    else:
        _sidecar_path(out).write_text(text + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _require_univariate(model, command):
    if is_bivariate(model):
        raise ConfigurationError(f"'{command}' supports one-type models only")


def _solve_1d(model, n, r, method, tau, max_rank=None):
    cfg = ContourConfig(n, r)
    if method == "dense":
        return solve_dense(model, cfg)
    return solve_lowrank(model, cfg, tau, max_rank)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_solve(args) -> int:
    model = load_model(args.model, args.renormalize)
    start = time.perf_counter()
    if is_bivariate(model):
        radii = tuple(args.radii) if args.radii else None
        if args.method == "dense":
            res = solve_dense_2d(model, args.n, radii)
        elif args.method == "krylov":
            res = solve_krylov_2d(model, args.n, radii)
        else:
            res = solve_lowrank_2d(model, args.n, args.tau, radii, args.max_rank)
        elapsed = time.perf_counter() - start
        h, k = np.nonzero(np.abs(res.g) > 1e-300)
        rows = [(str(a), str(b), res.g[a, b]) for a, b in zip(h, k)]
        _write_csv(args.out, ["h", "k", "g_hk"], rows)
    else:
        if args.method == "krylov":
            raise ConfigurationError("method 'krylov' supports two-type models only")
        res = _solve_1d(model, args.n, args.r, args.method, args.tau, args.max_rank)
        elapsed = time.perf_counter() - start
        rows = [(str(j), res.g[j]) for j in range(1, res.g.size)]
        _write_csv(args.out, ["j", "g_j"], rows)
    meta = res.metadata()
    meta["wall_time_ms"] = round(elapsed * 1e3, 3)
    _write_sidecar(args.out, meta)
    return EXIT_OK


def _oracle(model, size):
    if isinstance(model, LinearFractional) and 0 < model.p < model.p0:
        return linfrac_qsd(model.p0, model.p, np.arange(size))
    return None


def cmd_compare(args) -> int:
    model = load_model(args.model, args.renormalize)
    _require_univariate(model, "compare")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = set(methods) - {"dense", "lowrank", "returnmap", "interp"}
    if unknown or not methods:
        raise ConfigurationError(f"unknown methods: {', '.join(sorted(unknown)) or '(none)'}")
    jmax = args.jmax
    columns = {}
    for method in methods:
        if method in ("dense", "lowrank"):
            g = _solve_1d(model, args.n, None, method, args.tau).g
        elif method == "interp":
            g = interpolation_baseline(model, args.K, args.degree).g
        else:
            cfg = SimulationConfig(generations=args.generations, seed=args.seed)
            g = simulate_returned_process(model, cfg).as_coefficients()
        col = np.zeros(jmax + 1)
        upto = min(g.size, jmax + 1)
        col[:upto] = g[:upto]
        columns[method] = col
    oracle = _oracle(model, jmax + 1) if args.oracle == "auto" else None
    header = ["j"] + methods
    if oracle is not None:
        header += ["oracle"] + [f"relerr_{m}" for m in methods]
    rows = []
    for j in range(1, jmax + 1):
        row = [str(j)] + [columns[m][j] for m in methods]
        if oracle is not None:
            row += [oracle[j]] + [abs((oracle[j] - columns[m][j]) / oracle[j]) for m in methods]
        rows.append(row)
    _write_csv(args.out, header, rows)
    return EXIT_OK


def cmd_bounds(args) -> int:
    model = load_model(args.model, args.renormalize)
    _require_univariate(model, "bounds")
    n = args.n
    if n > nk.SVD_MAX_DIM:
        raise ConfigurationError(f"bounds needs n <= {nk.SVD_MAX_DIM} for the dense SVD")
    r = args.r if args.r is not None else choose_radius(model)
    x = r * np.exp(2j * np.pi * np.arange(n) / n)
    y = np.asarray(model(x), dtype=complex)
    sigma = nk.singular_values(1.0 / (x[None, :] - y[:, None]))
    kmax = min(args.kmax, n - 1)
    rows = []
    for k in range(kmax + 1):
        rows.append([str(k), sigma[k], sigma[k] / sigma[0],
                     decay_bound_taylor(model, r, n, k), decay_bound_zolotarev(model, r, k)])
    _write_csv(args.out, ["k", "sigma_k", "sigma_k_rel", "bound_taylor", "bound_zolotarev"], rows)
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = load_model(args.model, args.renormalize)
    _require_univariate(model, "simulate")
    cfg = SimulationConfig(generations=args.generations, initial_state=args.initial_state,
                           seed=args.seed, max_state_tracked=args.width)
    start = time.perf_counter()
    emp = simulate_returned_process(model, cfg)
    elapsed = time.perf_counter() - start
    probs = emp.probabilities()
    last = int(np.nonzero(emp.counts)[0][-1]) + 1 if emp.counts.any() else 0
    rows = [(str(j), int(emp.counts[j - 1]), probs[j - 1]) for j in range(1, last + 1)]
    _write_csv(args.out, ["j", "count", "g_j"], [(a, str(b), c) for a, b, c in rows])
    meta = {"generations": cfg.generations, "seed": cfg.seed, "total": emp.total,
            "overflow": emp.overflow, "wall_time_ms": round(elapsed * 1e3, 3)}
    oracle = _oracle(model, cfg.max_state_tracked + 1)
    if oracle is not None:
        meta["tv_distance"] = total_variation(emp, oracle)
    _write_sidecar(args.out, meta)
    return EXIT_OK


def cmd_moments(args) -> int:
    model = load_model(args.model, args.renormalize)
    _require_univariate(model, "moments")
    res = _solve_1d(model, args.n, None, args.method, args.tau)
    coef = moments_from_coefficients(res, args.H)
    rec = moments_from_recurrence(model, coef[1], args.H)
    rows = []
    for h in range(1, args.H + 1):
        a, b = coef[h], rec[h]
        rows.append([str(h), a, b, abs(a - b) / abs(b) if b else abs(a - b)])
    _write_csv(args.out, ["h", "from_coefficients", "from_recurrence", "rel_diff"], rows)
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser and entry point
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="yaglom", description=(
        "Quasi-stationary (Yaglom) distributions of subcritical Galton-Watson processes."))
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("model", help="model JSON file or builtin:<name>")
        p.add_argument("--renormalize", action="store_true",
                       help="rescale polynomial coefficients to sum to one")
        p.add_argument("--out", default=None, help="output CSV path (default: stdout)")

    p = sub.add_parser("solve", help="compute the quasi-stationary coefficients")
    common(p)
    p.add_argument("--n", type=_positive_int, required=True, help="nodes per dimension (power of two)")
    p.add_argument("--r", type=float, default=None, help="contour radius (one-type models)")
    p.add_argument("--radii", type=float, nargs=2, metavar=("R1", "R2"), default=None,
                   help="torus radii (two-type models)")
    p.add_argument("--method", choices=["dense", "lowrank", "krylov"], default="dense",
                   help="krylov: matrix-free Arnoldi, two-type models only")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="ACA stopping threshold")
    p.add_argument("--max-rank", type=_positive_int, default=None, help="cap on the ACA rank")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="tabulate several methods against the closed form")
    common(p)
    p.add_argument("--n", type=_positive_int, default=512, help="nodes for the contour solvers")
    p.add_argument("--methods", default="dense,lowrank,returnmap,interp",
                   help="comma-separated subset of dense,lowrank,returnmap,interp")
    p.add_argument("--oracle", choices=["auto", "none"], default="auto",
                   help="auto: add closed-form columns when the model has one")
    p.add_argument("--jmax", type=_positive_int, default=40, help="rows j = 1..jmax")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="ACA stopping threshold")
    p.add_argument("--generations", type=_positive_int, default=1_000_000,
                   help="simulated generations")
    p.add_argument("--seed", type=int, default=1, help="simulation seed")
    p.add_argument("--K", type=_positive_int, default=200, help="extinction-sequence length")
    p.add_argument("--degree", type=_positive_int, default=12, help="interpolation degree")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bounds", help="singular values of the Cauchy factor and their bounds")
    common(p)
    p.add_argument("--n", type=_positive_int, default=1000, help="matrix size (at most 2000)")
    p.add_argument("--kmax", type=_positive_int, default=60, help="rows k = 0..kmax-1")
    p.add_argument("--r", type=float, default=None, help="contour radius")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="returned-process simulation")
    common(p)
    p.add_argument("--generations", type=_positive_int, default=1_000_000,
                   help="simulated generations")
    p.add_argument("--seed", type=int, default=1, help="simulation seed")
    p.add_argument("--initial-state", type=_positive_int, default=1, help="population at time 0")
    p.add_argument("--width", type=_positive_int, default=1024, help="tracked states")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("moments", help="factorial moments: coefficient sums vs recurrence")
    common(p)
    p.add_argument("--n", type=_positive_int, default=2048)
    p.add_argument("--H", type=_positive_int, default=5, help="highest moment order")
    p.add_argument("--method", choices=["dense", "lowrank"], default="dense")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="ACA stopping threshold")
    p.set_defaults(func=cmd_moments)
    return parser


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return contextlib.nullcontext()
    try:
        count = int(value)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {value!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, count))


def _fail(kind, message, code):
    sys.stderr.write(f"yaglom: error: {kind}: {' '.join(str(message).split())}\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        with _thread_limit(), warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except ValidationError as exc:
        return _fail(type(exc).__name__, exc, EXIT_VALIDATION)
    except NumericalError as exc:
        return _fail(type(exc).__name__, exc, EXIT_NUMERICAL)
    except YaglomError as exc:
        return _fail(type(exc).__name__, exc, EXIT_NUMERICAL)
    except (OSError, MemoryError) as exc:
        return _fail(type(exc).__name__, exc, EXIT_NUMERICAL)


if __name__ == "__main__":
    sys.exit(main())
