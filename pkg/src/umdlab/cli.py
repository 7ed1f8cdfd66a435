"""Command line entry point: ``umdlab <subcommand> [options]``.

Exit codes: 0 when every verdict passes, 2 when any verdict fails,
1 on an execution error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import bellman, harness
from .lpnorm import MultiplierOperator, norm_lower_bound
from .martingale import ADAPTED, LEVEL, optimize_tree
from .multipliers import lattice_table, symbol_from_json
from .properties import CHECKS
from .spaces import SpaceSpec
from .symbolsets import CoefficientSet

log = logging.getLogger("umdlab")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _coeffs(text: str):
    """'-1,1' or '1+2j,0.5' -> list of complex."""
    return [complex(s.strip().replace("i", "j")) for s in text.split(",")]


def _floats(text: str):
    return [float(s) for s in text.split(",")]


def _ints(text: str):
    return [int(s) for s in text.split(",")]


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global options")
    g.add_argument("--config", type=Path,
                   help="ExperimentConfig JSON (object or list)")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--out", type=Path, default=Path("."),
                   help="output directory")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--no-timing", action="store_true",
                   help="write wall_ms as 0 for byte-stable reports")
    g.add_argument("--cache", type=Path, default=None,
                   help="result cache directory")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="umdlab",
        description="Numerical bounds for UMD_p^A constants and for Fourier "
                    "multiplier norms.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("beta-estimate", help="martingale lower bound for "
                                             "beta^A_p")
    p.add_argument("--A", type=_coeffs, default=[-1, 1])
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--mode", choices=(LEVEL, ADAPTED), default=LEVEL)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--exponent", type=float, default=2.0)
    _common(p)

    p = sub.add_parser("bellman", help="Bellman threshold or one iteration")
    p.add_argument("--b", type=float, default=-1.0)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--M", type=int, default=201)
    p.add_argument("--beta", type=float, default=None,
                   help="iterate at this beta instead of bisecting")
    p.add_argument("--bracket", type=_floats, default=None)
    _common(p)

    p = sub.add_parser("mult-norm", help="FFT lower bound for ||T_m||_p")
    p.add_argument("--symbol", required=True,
                   help="symbol JSON text or path to a JSON file")
    p.add_argument("--N", type=int, default=32)
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--restarts", type=int, default=8)
    _common(p)

    for name, kind, help_ in (
            ("identity-check", "IdentityCheck", "sandwich identity check"),
            ("counterexample", "CounterexampleSweep",
             "counterexample resolution sweep"),
            ("properties", "PropertySuite", "instance-level property suite")):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(kind=kind)
        p.add_argument("--A", type=_coeffs, default=None)
        p.add_argument("--p", type=_floats, default=None)
        p.add_argument("--depths", type=_ints, default=None)
        p.add_argument("--resolutions", type=_ints, default=None)
        p.add_argument("--restarts", type=int, default=None)
        p.add_argument("--checks", default=None,
                       help="comma separated; 'all' for every check")
        _common(p)

    p = sub.add_parser("report", help="run every config in --config")
    _common(p)

    p = sub.add_parser("recipes", help="shipped reproduction recipes")
    rs = p.add_subparsers(dest="recipes_command", required=True)
    r = rs.add_parser("run")
    r.add_argument("--tier", default="smoke")
    _common(r)
    return ap


def _emit(report: harness.Report, args, stem: str) -> Path:
    path = args.out / f"{stem}.{args.format}"
    harness.emit(report, args.format, path)
    log.info("wrote %s", path)
    return path


def _finish(report: harness.Report, args, stem: str) -> int:
    path = _emit(report, args, stem)
    for r in report.verdicts:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.experiment_id} "
              f"{r.quantity[len('verdict:'):]}")
    print(f"report: {path}")
    return EXIT_OK if report.all_passed else EXIT_FAIL


def _configs_from_args(args) -> list:
    if args.config is not None:
        cfgs = harness.load_configs(args.config)
    else:
        cfgs = [None]
    out = []
    for cfg in cfgs:
        doc = cfg.to_json() if cfg is not None else {
            "experiment_id": args.command, "kind": args.kind}
        for key in ("A", "p", "depths", "resolutions", "restarts"):
            val = getattr(args, key, None)
            if val is not None:
                doc[key] = [[z.real, z.imag] for z in val] if key == "A" \
                    else val
        if getattr(args, "checks", None):
            doc["checks"] = sorted(CHECKS) if args.checks == "all" \
                else args.checks.split(",")
        elif doc["kind"] == "PropertySuite" and not doc.get("checks"):
            doc["checks"] = sorted(CHECKS)
        if args.seed is not None:
            doc["seed"] = args.seed
        out.append(harness.ExperimentConfig.from_json(doc))
    return out


def _cmd_beta(args) -> int:
    A = CoefficientSet(args.A)
    space = SpaceSpec(args.dim, args.exponent)
    seed = args.seed or 0
    rep = harness.Report(timing=not args.no_timing)
    with harness._Timer() as t:
        est = optimize_tree(A, args.p, args.depth, space, args.restarts,
                            seed, args.mode, threads=args.threads)
    rep.add("beta-estimate", "beta_lower", "martingale", est.value,
            {"A": [str(a) for a in A], "p": args.p, "depth": args.depth,
             "restarts": args.restarts, "seed": seed, "mode": args.mode},
            t.ms)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "beta-witness.json").write_text(
        json.dumps(est.to_json(), indent=2))
    print(f"beta lower bound {est.value:.10f}")
    return _finish(rep, args, "beta-estimate")


def _cmd_bellman(args) -> int:
    rep = harness.Report(timing=not args.no_timing)
    args.out.mkdir(parents=True, exist_ok=True)
    if args.beta is not None:
        g = bellman.BellmanGrid(args.p, args.b, args.B, args.beta, args.L,
                                args.M)
        with harness._Timer() as t:
            res = bellman.iterate(g)
        bellman.export_surface(res, args.out / "bellman-surface.csv")
        rep.add("bellman", "iterations", "bellman", res.iterations,
                {"beta": args.beta, "status": res.status.value,
                 "p": args.p, "b": args.b, "B": args.B, "M": args.M}, t.ms)
        print(f"{res.status.value} after {res.iterations} iterations")
        return _finish(rep, args, "bellman")
    with harness._Timer() as t:
        thr = bellman.beta_threshold(args.b, args.B, args.p, args.L, args.M,
                                     bracket=args.bracket)
    rep.add("bellman", "beta_hat", "bellman", thr.beta_hat,
            {"p": args.p, "b": args.b, "B": args.B, "L": args.L, "M": args.M,
             "width": thr.width, "lo_status": thr.lo_status.value,
             "hi_status": thr.hi_status.value}, t.ms)
    print(f"beta_hat {thr.beta_hat:.6f} (bracket [{thr.lo:.6f}, "
          f"{thr.hi:.6f}])")
    return _finish(rep, args, "bellman")


def _cmd_mult(args) -> int:
    text = args.symbol
    if Path(text).is_file():
        text = Path(text).read_text()
    spec = symbol_from_json(json.loads(text))
    seed = args.seed or 0
    rep = harness.Report(timing=not args.no_timing)
    with harness._Timer() as t:
        est = norm_lower_bound(MultiplierOperator(lattice_table(spec, args.N)),
                               args.p, args.restarts, seed=seed,
                               threads=args.threads)
    rep.add("mult-norm", "mult_norm_lower", "fft", est.value,
            {"symbol": spec.to_json(), "N": args.N, "p": args.p,
             "restarts": args.restarts, "seed": seed}, t.ms)
    print(f"norm lower bound {est.value:.10f}")
    return _finish(rep, args, "mult-norm")


def _cmd_experiments(args) -> int:
    cfgs = _configs_from_args(args)
    rep = harness.run_batch(cfgs, args.threads, timing=not args.no_timing,
                            cache_dir=args.cache)
    return _finish(rep, args, args.command)


def _cmd_report(args) -> int:
    if args.config is None:
        raise SystemExit("report needs --config")
    cfgs = harness.load_configs(args.config)
    if args.seed is not None:
        cfgs = [replace(c, seed=args.seed) for c in cfgs]
    rep = harness.run_batch(cfgs, args.threads, timing=not args.no_timing,
                            cache_dir=args.cache)
    return _finish(rep, args, "report")


def _cmd_recipes(args) -> int:
    from .recipes import run_recipes
    summary = run_recipes(args.tier, threads=args.threads,
                          timing=not args.no_timing)
    rows = harness.Report(timing=not args.no_timing)
    for item in summary:
        rows.extend(item.report)
        print(f"{'PASS' if item.passed else 'FAIL'} {item.name} "
              f"({item.seconds:.1f} s)")
    path = _emit(rows, args, f"recipes-{args.tier}")
    print(f"report: {path}")
    return EXIT_OK if all(i.passed for i in summary) else EXIT_FAIL


COMMANDS = {
    "beta-estimate": _cmd_beta,
    "bellman": _cmd_bellman,
    "mult-norm": _cmd_mult,
    "identity-check": _cmd_experiments,
    "counterexample": _cmd_experiments,
    "properties": _cmd_experiments,
    "report": _cmd_report,
    "recipes": _cmd_recipes,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 is reserved for failures
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else
                        logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SystemExit:
        raise
    except Exception as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        if args.verbose:
            raise
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
