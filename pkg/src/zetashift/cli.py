"""Command-line experiment runner.

Every subcommand writes one CSV data file and one JSON manifest naming it.
Exit codes: 0 on success, 2 on invalid arguments, 3 on numerical instability.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import moments as mom
from .arithmetic import cached_sieve, prime_cos_sum
from .rmt import (NumericalInstabilityError, confluent_ratio, mc_shifted_rmt_moment,
                  regime_prediction)
from .zeta import ShiftConfig, ZetaEvalOptions, hardy_z, zeta_half_line

__all__ = ["RunManifest", "emit_csv", "format_value", "build_parser", "run", "main"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INSTABILITY = 3

_SNAKE = re.compile(r"^[a-z][a-z0-9_]*$")
# commands whose output depends on --seed; the others record seed = null
_SEEDED = {"measure", "layer-cake", "check-prop-main", "rmt-mc", "rmt-conjecture"}


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: int | None
    artifact_version: str = __version__
    wall_time_seconds: float = 0.0
    output_files: list = field(default_factory=list)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def format_value(v) -> str:
    """Reals with 17 significant digits (round-trips a double exactly)."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def emit_csv(rows, schema, path) -> Path:
    """Write ``rows`` (mappings or sequences) under the column order of ``schema``."""
    schema = list(schema)
    bad = [c for c in schema if not _SNAKE.match(c)]
    if bad:
        raise ValueError(f"column names must be lowercase snake_case: {bad}")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(schema)
        for row in rows:
            vals = [row[c] for c in schema] if isinstance(row, dict) else list(row)
            if len(vals) != len(schema):
                raise ValueError("row length does not match schema")
            w.writerow([format_value(v) for v in vals])
    return path


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text: str) -> list:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_like(text: str) -> int:
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from exc
    if v != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(v)


def _config(args) -> ShiftConfig:
    exps = args.exponents if args.exponents is not None else [1.0] * len(args.shifts)
    return ShiftConfig(exps, args.shifts)


def _add_config(p, default_shifts="0"):
    p.add_argument("--shifts", type=_floats, default=_floats(default_shifts))
    p.add_argument("--exponents", type=_floats, default=None,
                   help="k_i per shift (default all 1)")


# ---------------------------------------------------------------------------
# subcommands; each returns (schema, rows)


def cmd_primes(args):
    table = cached_sieve(max(args.limit, 2))
    p = table.primes_upto(args.limit)
    return ["index", "prime"], [(i + 1, int(v)) for i, v in enumerate(p)]


def cmd_zeta(args):
    if args.t is not None:
        t = np.asarray(args.t)
    else:
        t = np.linspace(args.t_start, args.t_stop, args.num)
    opts = ZetaEvalOptions(method=args.method, rs_correction_terms=args.rs_terms)
    z = np.atleast_1d(zeta_half_line(t, opts))
    hz = np.where(np.abs(t) >= 10, hardy_z(np.maximum(np.abs(t), 10), args.rs_terms), np.nan)
    return (["t", "re", "im", "abs", "hardy_z"],
            [(float(a), b.real, b.imag, abs(b), float(c)) for a, b, c in zip(t, z, hz)])


def cmd_moment(args):
    cfg = _config(args)
    if args.dyadic:
        r = mom.moment_dyadic(args.T, cfg, args.step, threads=args.threads)
    else:
        r = mom.shifted_moment(args.T, cfg, args.step, threads=args.threads)
    ratio = r.value / (args.T * math.log(args.T))
    return (["t_start", "t_end", "value", "quadrature_error_estimate", "grid_step", "value_over_t_log_t"],
            [(r.a, r.b, r.value, r.quadrature_error_estimate, r.grid_step, ratio)])


def _v_grid(args):
    if args.v_grid is not None:
        return np.asarray(args.v_grid)
    return np.linspace(args.v_min, args.v_max, args.v_num)


def cmd_measure(args):
    cfg = _config(args)
    V = _v_grid(args)
    meas = mom.measure_level_set(args.T, V, cfg, args.points, args.seed, threads=args.threads)
    rows = []
    for v, m in meas:
        if v >= 3:
            params = mom.BoundParameters.from_config(args.T, v, cfg)
            b, w = mom.theorem_bound(params), params.W
        else:
            b, w = float("nan"), mom.variance_scale_w(args.T, cfg)
        rows.append((v, m, b, w))
    return ["v", "measure", "theorem_bound", "w"], rows


def cmd_layer_cake(args):
    cfg = _config(args)
    lhs, rhs = mom.layer_cake_check(args.T, cfg, args.points, args.v_step, args.seed,
                                    (args.v_min, args.v_max), threads=args.threads)
    return ["lhs", "rhs", "relative_difference"], [(lhs, rhs, rhs / lhs - 1)]


def cmd_check_prop_main(args):
    lam = mom.lambda0() if args.lam is None else args.lam
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    t = np.sort(rng.uniform(args.t_min, args.t_max, args.count))
    table = cached_sieve(max(int(args.t_max ** max(args.x_powers)) + 1, 2))
    rows = []
    for power in args.x_powers:
        x = np.floor(t ** power)
        lhs, rhs, slack = mom.prop_main_check(t, x, lam, table)
        rows.extend(zip(t, x, [lam] * t.size, [power] * t.size, lhs, rhs, slack))
    return ["t", "x", "lam", "x_power", "lhs", "rhs", "slack_required"], rows


def cmd_check_uppco(args):
    a_grid = np.geomspace(args.a_min, args.a_max, args.num)
    table = cached_sieve(int(max(args.z)))
    rows = []
    for z in args.z:
        for a in a_grid:
            s, main = prime_cos_sum(float(a), z, table)
            rows.append((float(a), z, s, main, s - main))
    return ["a", "z", "prime_sum", "main_term", "difference"], rows


def cmd_mean_square(args):
    cfg = _config(args)
    numeric, diagonal, leading = mom.a_mean_square(args.T, args.x, cfg, args.step)
    return (["numeric", "diagonal", "leading", "numeric_over_diagonal"],
            [(numeric, diagonal, leading, numeric / diagonal)])


def cmd_smoothed_l(args):
    cfg = _config(args)
    t = np.asarray(args.t)
    vals = np.atleast_1d(mom.smoothed_l_value(t, cfg, args.X, args.n_max))
    rows = []
    for ti, v in zip(t, vals):
        oracle = 1.0 + 0j
        for k, a in zip(cfg.exponents, cfg.shifts):
            oracle *= zeta_half_line(ti + a) ** k
        rows.append((float(ti), v.real, v.imag, oracle.real, oracle.imag, abs(v - oracle)))
    return ["t", "re", "im", "oracle_re", "oracle_im", "abs_error"], rows


def cmd_s1(args):
    cfg = _config(args)
    v = mom.s1_kernel_integral(args.T, cfg, args.x, args.X, args.n_max)
    return ["t", "x", "s1"], [(args.T, args.x if args.x is not None else math.isqrt(int(args.T)), v)]


def cmd_rmt_mc(args):
    exps = args.k if len(args.k) == len(args.angles) else args.k * len(args.angles)
    est = mc_shifted_rmt_moment(args.N, exps, args.angles, args.samples, args.seed,
                                args.chunk, args.variance_reduction, args.threads)
    return (["n", "mean", "standard_error", "n_samples"],
            [(args.N, est.mean, est.standard_error, est.n_samples)])


def cmd_rmt_conjecture(args):
    rows = []
    for alpha in args.alphas:
        regime, pred = regime_prediction(args.k, alpha, args.N)
        mean = se = float("nan")
        if args.samples:
            est = mc_shifted_rmt_moment(args.N, [args.k, args.k], [0.0, alpha], args.samples,
                                        args.seed, args.chunk, "palm", args.threads)
            mean, se = est.mean, est.standard_error
        rows.append((alpha, alpha * args.N, regime, pred, mean, se))
    return ["alpha", "alpha_n", "regime", "prediction", "mc_mean", "mc_standard_error"], rows


def cmd_confluent(args):
    if args.nodes:
        nodes = []
        for item in args.nodes.split(","):
            v, _, m = item.partition(":")
            nodes.append((float(v), int(m or 1)))
    else:
        nodes = [(0.0, args.k), (args.c / (2 * math.pi), args.k)]
    value = confluent_ratio(nodes)
    label = ";".join(f"{v!r}:{m}" for v, m in nodes)
    return ["nodes", "value"], [(label, value)]


def cmd_regime(args):
    regime, value = regime_prediction(args.k, args.alpha, args.N)
    return ["k", "alpha", "n", "regime", "leading"], [(args.k, args.alpha, args.N, regime, value)]


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zetashift", description="Shifted zeta moment experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--out", default=None, help="CSV path (default <command>.csv)")
        p.add_argument("--seed", type=_int_like, default=0)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        return p

    p = add("primes", cmd_primes, "list primes up to a limit")
    p.add_argument("--limit", type=_int_like, required=True)

    p = add("zeta", cmd_zeta, "zeta(1/2+it) on a grid")
    p.add_argument("--t", type=_floats, default=None)
    p.add_argument("--t-start", type=float, default=100.0)
    p.add_argument("--t-stop", type=float, default=110.0)
    p.add_argument("--num", type=int, default=101)
    p.add_argument("--method", choices=["riemann_siegel", "euler_maclaurin"], default="riemann_siegel")
    p.add_argument("--rs-terms", type=int, default=4)

    p = add("moment", cmd_moment, "shifted moment over [T, 2T]")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--dyadic", action="store_true", help="integrate over [0, T] by dyadic blocks")
    _add_config(p)

    p = add("measure", cmd_measure, "level-set measure against the bound")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--points", type=_int_like, default=100_000)
    p.add_argument("--v-grid", type=_floats, default=None)
    p.add_argument("--v-min", type=float, default=0.0)
    p.add_argument("--v-max", type=float, default=8.0)
    p.add_argument("--v-num", type=int, default=33)
    _add_config(p)

    p = add("layer-cake", cmd_layer_cake, "layer-cake identity on a shared point set")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--points", type=_int_like, default=100_000)
    p.add_argument("--v-step", type=float, default=mom.V_STEP)
    p.add_argument("--v-min", type=float, default=mom.V_RANGE[0])
    p.add_argument("--v-max", type=float, default=mom.V_RANGE[1])
    _add_config(p)

    p = add("check-prop-main", cmd_check_prop_main, "pointwise log|zeta| majorant sweep")
    p.add_argument("--t-min", type=float, default=1e4)
    p.add_argument("--t-max", type=float, default=1e5)
    p.add_argument("--count", type=_int_like, default=10_000)
    p.add_argument("--x-powers", type=_floats, default=_floats("0.1,0.3"))
    p.add_argument("--lam", type=float, default=None, help="default lambda0")

    p = add("check-uppco", cmd_check_uppco, "prime cosine sum against log min(1/a, log z)")
    p.add_argument("--a-min", type=float, default=1e-3)
    p.add_argument("--a-max", type=float, default=10.0)
    p.add_argument("--num", type=int, default=30)
    p.add_argument("--z", type=_floats, default=_floats("1e4,1e5,1e6"))

    p = add("mean-square", cmd_mean_square, "mean square of the Dirichlet polynomial A(t)")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--x", type=_int_like, required=True)
    p.add_argument("--step", type=float, default=0.05)
    _add_config(p, "0,0.5")

    p = add("smoothed-l", cmd_smoothed_l, "smoothed Dirichlet series against the zeta product")
    p.add_argument("--t", type=_floats, required=True)
    p.add_argument("--X", type=float, required=True)
    p.add_argument("--n-max", type=_int_like, default=None)
    _add_config(p)

    p = add("s1", cmd_s1, "kernel-weighted integral of L times conj(A)")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--x", type=_int_like, default=None)
    p.add_argument("--X", type=float, default=None)
    p.add_argument("--n-max", type=_int_like, default=None)
    _add_config(p, "0,0.3")

    p = add("rmt-mc", cmd_rmt_mc, "Monte-Carlo CUE characteristic polynomial moment")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--k", type=_floats, default=_floats("1"))
    p.add_argument("--angles", type=_floats, default=_floats("0"))
    p.add_argument("--samples", type=_int_like, default=100_000)
    p.add_argument("--chunk", type=_int_like, default=1000)
    p.add_argument("--variance-reduction", choices=["none", "rotation", "palm"], default="none")

    p = add("rmt-conjecture", cmd_rmt_conjecture, "regime predictions, optionally with MC")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--alphas", type=_floats, required=True)
    p.add_argument("--samples", type=_int_like, default=0)
    p.add_argument("--chunk", type=_int_like, default=1000)

    p = add("confluent", cmd_confluent, "confluent sinc-determinant ratio")
    p.add_argument("--nodes", default=None, help="value:multiplicity,... (overrides --k/--c)")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--c", type=float, default=1.0)

    p = add("regime", cmd_regime, "regime and leading term of the shifted CUE moment")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--N", type=int, required=True)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        schema, rows = args.func(args)
    except NumericalInstabilityError as exc:
        print(f"zetashift: numerical instability: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    except ValueError as exc:
        print(f"zetashift: invalid arguments: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    out = Path(args.out or f"{args.command}.csv")
    emit_csv(rows, schema, out)
    params = {k: v for k, v in vars(args).items() if k not in ("func", "out", "command", "seed", "threads")}
    seed = args.seed if args.command in _SEEDED else None
    manifest = RunManifest(command=args.command, parameters=params, seed=seed,
                           wall_time_seconds=time.perf_counter() - start,
                           output_files=[str(out)])
    manifest.write(out.with_suffix(".json"))
    return EXIT_OK


def main() -> None:
    sys.exit(run())
