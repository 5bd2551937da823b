"""Command-line interface: ``transdro fit | simulate | gen``.

Exit codes: 0 success, 2 malformed input or usage error, 3 dimension
mismatch, 4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .errors import BadSpec, BisectionBracketExhausted, DimensionMismatch, NonFinite, TransDROError
from .evaluation import DEFAULT_METHODS, METHODS, default_threads, run_benchmark
from .io import (MalformedCSV, read_labeled_csv, read_unlabeled_csv, write_labeled_csv,
                 write_report_csv, write_report_json, write_unlabeled_csv)
from .pipeline import fit_maximin, fit_source_models, fit_transdro, target_pool
from .simulation import PROFILES, SETTINGS, ScenarioSpec, generate, replication_rng

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DIMENSION = 3
EXIT_SOLVER = 4

BASELINES = {"zero": "zero", "target": "target_lasso", "convex": "convex_combo", "bounded": "bounded_combo"}

log = logging.getLogger("transdro")


class _UsageError(Exception):
    pass


def _tau(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        v = float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid tau {text!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError("tau must be nonnegative")
    return v


def _setting(text: str) -> str:
    if text not in SETTINGS:
        raise argparse.ArgumentTypeError(f"unknown setting {text!r}; choose from {', '.join(SETTINGS)}")
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transdro", description="Distributionally robust transfer learning.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit on target and source CSV files")
    f.add_argument("--target", required=True, help="labeled target CSV (y,x1..xp)")
    f.add_argument("--source", action="append", required=True, help="labeled source CSV; repeat per site")
    f.add_argument("--tau", type=_tau, default=None, help="constraint slack, a real >= 0 or inf (default 1/n)")
    f.add_argument("--baseline", choices=sorted(BASELINES), default=None, help="default convex")
    f.add_argument("--maximin", action="store_true",
                   help="drop the target column; zero baseline, no loss constraint")
    f.add_argument("--target-column", choices=("full", "split"), default="full",
                   help="target fit used as the first weight column (default full)")
    f.add_argument("--unlabeled", help="extra target covariates (x1..xp) for the second-moment estimate")
    f.add_argument("--seed", type=int, default=0, help="seed for the target split")
    f.add_argument("--out", required=True, help="output report path")
    f.add_argument("--format", choices=("json", "csv"), default="json")
    f.add_argument("--threads", type=int, default=None, help="accepted for symmetry; fitting is serial")

    s = sub.add_parser("simulate", help="run a seeded simulation benchmark")
    s.add_argument("--setting", type=_setting, required=True)
    s.add_argument("--reps", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--u", type=float, default=None)
    s.add_argument("--tau", type=_tau, default=None)
    s.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    s.add_argument("--methods", default=",".join(DEFAULT_METHODS),
                   help=f"comma-separated subset of {', '.join(METHODS)} or external:<csv>")
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--out", required=True, help="output directory")

    g = sub.add_parser("gen", help="dump one replication of a setting to CSV")
    g.add_argument("--setting", type=_setting, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--rep", type=int, default=0, help="replication index within the seeded run")
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--u", type=float, default=None)
    g.add_argument("--n-unlabeled", type=int, default=None)
    g.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    g.add_argument("--out", required=True, help="output directory")
    return parser


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_fit(args) -> int:
    target = read_labeled_csv(args.target, site_id=0)
    sources = [read_labeled_csv(path, site_id=l) for l, path in enumerate(args.source, start=1)]
    x_unl = read_unlabeled_csv(args.unlabeled) if args.unlabeled else None
    for path, d in zip([args.target, *args.source], [target, *sources]):
        if d.p != target.p:
            raise DimensionMismatch(f"{path}: p={d.p} but the target has p={target.p}")
    if x_unl is not None and x_unl.shape[1] != target.p:
        raise DimensionMismatch(f"{args.unlabeled}: p={x_unl.shape[1]} but the target has p={target.p}")

    if args.maximin:
        if args.baseline not in (None, "zero"):
            log.warning("--maximin uses the zero baseline; --baseline %s ignored", args.baseline)
        b_hat = fit_source_models(sources)
        report = fit_maximin(target_pool(target, x_unl), b_hat)
    else:
        report = fit_transdro(target, sources, kind=BASELINES[args.baseline or "convex"], tau=args.tau,
                              seed=args.seed, x_unlabeled=x_unl, fallback=False,
                              target_column=args.target_column)

    if args.format == "csv":
        write_report_csv(args.out, report)
    else:
        write_report_json(args.out, report)
    labels = ([] if args.maximin else ["target"]) + [Path(p).name for p in args.source]
    for name, w in zip(labels, report.gamma.w):
        print(f"{w:10.6f}  {name}")
    return EXIT_OK


def _spec_from(args, **extra) -> ScenarioSpec:
    return ScenarioSpec.for_setting(args.setting, profile=args.profile, n=args.n, u=args.u, **extra)


def cmd_simulate(args) -> int:
    if args.reps < 1:
        raise _UsageError("--reps must be >= 1")
    spec = _spec_from(args, tau=args.tau, seed=args.seed)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS and not m.startswith("external:"):
            raise _UsageError(f"unknown method {m!r}")
    threads = default_threads() if os.environ.get("TRANSDRO_THREADS") or args.threads is None else args.threads
    table = run_benchmark(spec, methods, reps=args.reps, seed=args.seed, threads=threads)
    out = Path(args.out)
    table.write(out)
    echo = spec.to_dict()
    echo.update(reps=args.reps, methods=methods)
    _write_json(out / "spec.json", _json_safe(echo))
    for row in table.summary():
        if row["metric"] == "excess_risk":
            print(f"{row['method']:18s} excess_risk {row['mean']:.6g} (sd {row['sd']:.3g}, reps {row['reps']})")
    for err in table.errors:
        print(f"error rep {err['rep']} {err['method']}: {err['error']}", file=sys.stderr)
    return EXIT_OK


def _json_safe(d: dict) -> dict:
    return {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}


def cmd_gen(args) -> int:
    extra = {} if args.n_unlabeled is None else {"n_unlabeled": args.n_unlabeled}
    spec = _spec_from(args, seed=args.seed, **extra)
    scn = generate(spec, replication_rng(args.seed, args.rep))
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for l, src in enumerate(scn.sources, start=1):
            write_labeled_csv(out / f"source_{l}.csv", src)
        write_labeled_csv(out / "target.csv", scn.target)
        write_labeled_csv(out / "validation.csv", scn.validation)
        if scn.x_unlabeled.shape[0]:
            write_unlabeled_csv(out / "unlabeled.csv", scn.x_unlabeled)
        _write_json(out / "truth.json", scn.truth.to_dict())
        _write_json(out / "spec.json", _json_safe(dict(spec.to_dict(), rep=args.rep)))
    except OSError as exc:
        raise MalformedCSV(f"{out}: {exc}") from None
    print(f"wrote setting {spec.setting_id} (p={spec.p}, L={spec.L}, n={spec.n}) to {out}")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "gen": cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 with usage on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DimensionMismatch as exc:
        print(f"error: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except (BisectionBracketExhausted, NonFinite) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (MalformedCSV, BadSpec, TransDROError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
