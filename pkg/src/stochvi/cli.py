"""Command-line interface.

Subcommands: generate, constants, run, verify, sweep, plot.  Exit codes:
0 success, 1 check failure, 2 configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import constants as consts
from . import experiments as exps
from . import numerics, verify
from .errors import (
    ConfigError,
    InvalidRangeError,
    NoClosedFormError,
    NoConvergenceError,
    NotCocoerciveError,
    NotStronglyMonotoneError,
    SingularMatrixError,
    StepSizeOutOfRangeError,
    StochviError,
    SupportTooLargeError,
    TooFewSeedsError,
    UnsupportedSchemeError,
)
from .sampling import SamplingScheme
from .solvers import METHODS, ConstantSchedule, RunConfig, run

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_CONFIG_ERRORS = (
    ConfigError,
    InvalidRangeError,
    UnsupportedSchemeError,
    NoClosedFormError,
    SupportTooLargeError,
    TooFewSeedsError,
)
_NUMERICAL_ERRORS = (
    SingularMatrixError,
    NotStronglyMonotoneError,
    NotCocoerciveError,
    NoConvergenceError,
    StepSizeOutOfRangeError,
)


def _out_path(args, name: str) -> Path:
    base = Path(args.out_dir) if args.out_dir else Path(".")
    base.mkdir(parents=True, exist_ok=True)
    return base / name


def _resolve(args, path_str: str) -> Path:
    p = Path(path_str)
    if p.is_absolute() or args.out_dir is None:
        return p
    return _out_path(args, path_str)


def _scheme(args, n: int) -> SamplingScheme:
    return exps._scheme_by_name(args.scheme, n, getattr(args, "b", None))


def _load_game(path: str) -> exps.QuadraticGame:
    game, _ = exps.read_game(path)
    return game


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = exps.GameGenConfig(
        n=args.n, d1=args.d1, d2=args.d2,
        mu_a=args.mu_a, l_a=args.l_a, mu_b=args.mu_b, l_b=args.l_b,
        mu_c=args.mu_c, l_c=args.l_c, seed=args.seed,
    )
    game = exps.generate_game(cfg)
    out = _resolve(args, args.out)
    exps.write_game(out, game, cfg)
    print(f"wrote {out} (n={cfg.n}, d1={cfg.d1}, d2={cfg.d2}, seed={cfg.seed})")
    return EXIT_OK


def cmd_constants(args) -> int:
    game = _load_game(args.game)
    scheme = _scheme(args, game.n)
    gc = consts.game_constants(game)
    ec = consts.ec_constants(gc, scheme, game)
    gc = consts.fill_kappa(gc, ec)
    pairs = {
        "n": gc.n,
        "mu": gc.mu,
        "ell": gc.ell,
        "ell_max": gc.ell_max,
        "sigma1_sq": gc.sigma1_sq,
        "scheme": scheme.label(),
        "ell_xi": ec.ell_xi,
        "sigma_sq": ec.sigma_sq,
        "kappa_g": gc.kappa_g,
    }
    for i, ell_i in enumerate(gc.ell_i):
        pairs[f"ell_{i}"] = ell_i
    try:
        ham = consts.hamiltonian_constants(game, scheme)
        pairs.update(
            mu_h=ham.mu_h, l_h=ham.l_h, cal_l_h=ham.cal_l_h, sigma_h_sq=ham.sigma_h_sq
        )
    except UnsupportedSchemeError:
        pass
    if args.epsilon is not None:
        opt = consts.optimal_minibatch(gc, args.epsilon)
        pairs.update(b_star_real=opt.b_star_real, b_star=opt.b_star)
    for key, value in pairs.items():
        print(f"{key}: {value}")
    return EXIT_OK


def _parse_schedule(args, method: str, prof) -> object:
    if args.schedule == "constant":
        if args.alpha is None and args.gamma is None:
            raise ConfigError("constant schedule needs --alpha and/or --gamma")
        return ConstantSchedule(alpha=args.alpha or 0.0, gamma=args.gamma or 0.0)
    if args.schedule == "theory":
        return exps.theory_schedule(method, prof)
    if args.schedule == "switching":
        return exps.switching_schedule(method, prof)
    raise ConfigError(f"unknown schedule {args.schedule!r}")


def cmd_run(args) -> int:
    game = _load_game(args.game)
    scheme = _scheme(args, game.n)
    methods = tuple(args.method.split(","))
    schedules = {}
    if args.schedule == "constant":
        for m in methods:
            schedules[m] = ConstantSchedule(alpha=args.alpha or 0.0, gamma=args.gamma or 0.0)
    else:
        for m in methods:
            schedules[m] = args.schedule
    cfg = exps.ExperimentConfig(
        game=game,
        methods=methods,
        scheme=scheme,
        schedules=schedules,
        iterations=args.iters,
        seeds=args.seeds,
        base_seed=args.seed,
    )
    table, prof, _ = exps.run_experiment(cfg, threads=args.threads)
    out = _resolve(args, args.out)
    exps.emit_csv(table, out)
    print(f"wrote {out}")
    if args.svg:
        svg = _resolve(args, args.svg)
        exps.emit_svg(table, svg)
        print(f"wrote {svg}")
    if args.dump_iterates is not None:
        # One CSV of iterate coordinates for the first seed of each method.
        lines = ["method,iteration," + ",".join(f"x{i}" for i in range(game.dim))]
        for method in methods:
            run_scheme = scheme
            prof_m = prof
            if method in ("gda", "co"):
                run_scheme = SamplingScheme.full_batch(game.n)
                if not scheme.is_deterministic:
                    prof_m = exps.profile(game, run_scheme)
            trace = run(
                RunConfig(
                    method=method,
                    operator=game,
                    scheme=run_scheme,
                    schedule=exps._resolve_schedule(
                        method, cfg.schedules.get(method, "theory"), prof_m
                    ),
                    iterations=args.iters,
                    seed=args.seed,
                ),
                record_iterates=True,
            )
            for k, xk in enumerate(trace.iterates):
                lines.append(f"{method},{k}," + ",".join(repr(float(v)) for v in xk))
        dump = _resolve(args, args.dump_iterates)
        with open(dump, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {dump}")
    return EXIT_OK


def cmd_verify(args) -> int:
    game = _load_game(args.game)
    scheme = _scheme(args, game.n)
    rng = numerics.make_rng(args.seed)
    gc = consts.game_constants(game)
    ec = consts.ec_constants(gc, scheme, game)
    checks = args.checks.split(",")
    reports = []
    for name in checks:
        if name == "ec":
            reports.append(
                verify.check_ec(game, scheme, ec.ell_xi, args.points, args.radius, rng)
            )
        elif name == "class":
            lipschitz = numerics.singular_values(game.mean_jacobian())[0]
            ell_star = lipschitz**2 / gc.mu
            reports.append(
                verify.check_monotonicity_class(
                    game, gc.mu, ell_star, args.points, args.radius, rng
                )
            )
        elif name == "unbiased":
            reports.append(
                verify.check_unbiasedness(game, scheme, min(args.points, 50), args.radius, rng)
            )
        elif name == "envelope":
            schedule = ConstantSchedule(alpha=1.0 / (2.0 * ec.ell_xi))
            traces = [
                run(
                    RunConfig(
                        method="sgda",
                        operator=game,
                        scheme=scheme,
                        schedule=schedule,
                        iterations=args.envelope_iters,
                        seed=args.seed + s,
                    )
                )
                for s in range(args.envelope_seeds)
            ]
            params = dict(
                alpha=schedule.alpha, mu=gc.mu, ell_xi=ec.ell_xi, sigma_sq=ec.sigma_sq
            )
            reports.append(
                verify.check_bound_envelope(traces, consts.SGDA_CONSTANT, params, 1.05)
            )
        else:
            raise ConfigError(f"unknown check {name!r}")
    failed = [r for r in reports if not r.passed]
    for r in reports:
        state = "PASS" if r.passed else "FAIL"
        print(
            f"[{state}] {r.name}: worst margin {r.worst_margin:.3e} "
            f"(tolerance {r.tolerance:.1e}, {r.points} points)"
        )
    if args.out:
        doc = [
            {
                "name": r.name,
                "passed": r.passed,
                "worst_margin": r.worst_margin,
                "tolerance": r.tolerance,
                "points": r.points,
                "witness": None
                if r.witness is None
                else np.asarray(r.witness, dtype=float).reshape(-1).tolist(),
            }
            for r in reports
        ]
        out = _resolve(args, args.out)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        print(f"wrote {out}")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_sweep(args) -> int:
    if args.target_kappa is not None:
        cfg, kappa = exps.find_generator_for_kappa(
            args.target_kappa, args.n, args.d1, args.d2, args.scheme,
            getattr(args, "b", None), args.seed,
        )
        game = exps.generate_game(cfg)
        out = _resolve(args, args.out)
        exps.write_game(out, game, cfg)
        print(f"wrote {out} (kappa_g={kappa:.3f}, l_a={cfg.l_a!r})")
        return EXIT_OK
    game = _load_game(args.game)
    scheme = _scheme(args, game.n)
    methods = tuple(args.methods.split(","))
    multipliers = tuple(float(m) for m in args.multipliers.split(","))
    table = exps.sweep_step_sizes(
        game, scheme, methods, multipliers, args.iters, args.seeds,
        base_seed=args.seed, threads=args.threads,
    )
    out = _resolve(args, args.out)
    exps.emit_csv(table, out)
    print(f"wrote {out}")
    if args.svg:
        svg = _resolve(args, args.svg)
        exps.emit_svg(table, svg)
        print(f"wrote {svg}")
    return EXIT_OK


def cmd_plot(args) -> int:
    table = exps.read_csv(args.csv)
    out = _resolve(args, args.svg)
    exps.emit_svg(table, out)
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochvi",
        description="Finite-sum variational-inequality solvers and verification oracles",
    )
    parser.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    parser.add_argument("--out-dir", default=None, help="directory for output files")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for runs")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a random quadratic game file")
    g.add_argument("--n", type=int, default=20)
    g.add_argument("--d1", type=int, default=20)
    g.add_argument("--d2", type=int, default=20)
    g.add_argument("--mu-a", type=float, default=1.0)
    g.add_argument("--l-a", type=float, default=4.0)
    g.add_argument("--mu-b", type=float, default=0.0)
    g.add_argument("--l-b", type=float, default=1.0)
    g.add_argument("--mu-c", type=float, default=1.0)
    g.add_argument("--l-c", type=float, default=4.0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("constants", help="print all constants for a game and scheme")
    c.add_argument("game")
    c.add_argument("--scheme", default="single_element_uniform")
    c.add_argument("--b", type=int, default=None)
    c.add_argument("--epsilon", type=float, default=None,
                   help="accuracy for the optimal minibatch size")
    c.set_defaults(func=cmd_constants)

    r = sub.add_parser("run", help="run methods on a game and emit aggregates")
    r.add_argument("--game", required=True)
    r.add_argument("--method", required=True, help="comma-separated subset of "
                   + ",".join(METHODS))
    r.add_argument("--scheme", default="single_element_uniform")
    r.add_argument("--b", type=int, default=None)
    r.add_argument("--schedule", default="theory",
                   choices=("theory", "constant", "switching"))
    r.add_argument("--alpha", type=float, default=None)
    r.add_argument("--gamma", type=float, default=None)
    r.add_argument("--iters", type=int, required=True)
    r.add_argument("--seeds", type=int, default=5)
    r.add_argument("--out", required=True)
    r.add_argument("--svg", default=None)
    r.add_argument("--dump-iterates", default=None,
                   help="also write per-iteration coordinates for seed 0")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run assumption/envelope checks on a game")
    v.add_argument("game")
    v.add_argument("--scheme", default="single_element_uniform")
    v.add_argument("--b", type=int, default=None)
    v.add_argument("--checks", default="ec,class,unbiased")
    v.add_argument("--points", type=int, default=200)
    v.add_argument("--radius", type=float, default=verify.DEFAULT_RADIUS)
    v.add_argument("--envelope-seeds", type=int, default=30)
    v.add_argument("--envelope-iters", type=int, default=500)
    v.add_argument("--out", default=None, help="machine-readable JSON report path")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="step-size grid, or search for a target kappa")
    s.add_argument("--game", default=None)
    s.add_argument("--methods", default="sgda,sco,shgd")
    s.add_argument("--multipliers", default="0.25,0.5,1,2")
    s.add_argument("--scheme", default="single_element_uniform")
    s.add_argument("--b", type=int, default=None)
    s.add_argument("--iters", type=int, default=1000)
    s.add_argument("--seeds", type=int, default=5)
    s.add_argument("--out", required=True)
    s.add_argument("--svg", default=None)
    s.add_argument("--target-kappa", type=float, default=None)
    s.add_argument("--n", type=int, default=20)
    s.add_argument("--d1", type=int, default=20)
    s.add_argument("--d2", type=int, default=20)
    s.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="re-render an aggregate CSV as SVG")
    p.add_argument("--csv", required=True)
    p.add_argument("--svg", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StochviError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
