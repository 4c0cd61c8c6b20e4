"""Command-line entry point.

Subcommands: simulate, exponents, verify, bench, plotdata.
Exit codes: 0 = all verdicts pass, 1 = any fail, 2 = usage/config error.
The only environment variable honored is LANDAULAB_THREADS (worker count for
the embarrassingly parallel inequality bench).
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

from .config import ConfigError, parse_config
from .exponents import CSV_HEADER, DomainError, ExponentSet, prodi_serrin_classify
from .grid import VelocityGrid

USAGE_ERROR = 2


def thread_count() -> int:
    raw = os.environ.get("LANDAULAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r} ({exc})")


def cmd_simulate(args) -> int:
    from .rundir import write_run_directory
    from .solver import simulate

    config_path = Path(args.config)
    config = parse_config(config_path)
    traj = simulate(config)
    out = write_run_directory(Path(args.out), traj,
                              config_text=config_path.read_text())
    print(f"run written to {out} (outcome: {traj.outcome}, "
          f"{len(traj.dt_history)} steps, {len(traj.snapshot_times)} snapshots)")
    return 0


def cmd_exponents(args) -> int:
    exps = ExponentSet.from_pm(args.p, args.m)
    print(exps.pretty())
    print()
    print(CSV_HEADER)
    print(exps.csv_row())
    if args.r is not None:
        r = float("inf") if args.r in ("inf", "infinity") else float(Fraction(args.r))
        cls = prodi_serrin_classify(args.p, r, args.m)
        print()
        print(f"prodi_serrin: 2/r + 3/p = {cls.criticality:.15g} ({cls.label})")
        print(f"r_infimum    = {cls.r_infimum:.15g}")
        print(f"p*alpha1 - p = {cls.p_alpha1_minus_p:.15g}")
        print(f"gronwall_ok  = {cls.gronwall_ok}")
    return 0


def cmd_verify(args) -> int:
    from .harness import ALL_SUITES, run_suites
    from .rundir import load_trajectory, write_fit_csv, write_new_file

    run_dir = Path(args.run)
    traj = load_trajectory(run_dir)
    suites = ALL_SUITES if args.suite == "all" else [args.suite]
    verdicts = run_suites(traj, suites)
    from .harness import EstimateVerdict

    lines = [EstimateVerdict.CSV_HEADER]
    all_pass = True
    for verdict in verdicts:
        lines.append(verdict.csv_row())
        status = "PASS" if verdict.passed else "FAIL"
        if not verdict.applicable:
            status += " (not applicable)"
        print(f"{verdict.estimate:<28s} {status}")
        all_pass &= verdict.passed
        for name, columns in verdict.fit_data.items():
            write_fit_csv(run_dir / f"fit_{name}.csv", columns)
    write_new_file(run_dir / "verdicts.csv", "\n".join(lines) + "\n")
    return 0 if all_pass else 1


def cmd_bench(args) -> int:
    from concurrent.futures import ThreadPoolExecutor

    from . import inequalities as ineq

    grid = VelocityGrid(args.n, args.L)
    settings = ineq.BenchSettings()
    if args.calibrate:
        constants = ineq.calibrate(grid, args.corpus_seed, settings)
        out = Path(args.calibration)
        ineq.write_calibration(out, constants, args.corpus_seed, grid, settings)
        print(f"calibration written to {out}")
        for key, value in sorted(constants.items()):
            print(f"  {key} = {value:.6g}")
        return 0
    if args.calibration and Path(args.calibration).exists():
        constants = ineq.read_calibration(Path(args.calibration))
    else:
        constants = ineq.packaged_calibration()
    fields = ineq.build_corpus(grid, args.corpus_seed + 1, args.holdout)
    which = args.inequality

    def evaluate(item):
        i, field = item
        label = f"holdout_{i:03d}"
        reports = []
        if which in ("sobolev", "all"):
            reports.append(ineq.weighted_sobolev(field, settings.sobolev_s,
                                                 constants["sobolev_C"],
                                                 constants["sobolev_C"], label))
        if which in ("interp", "all"):
            reports.append(ineq.lp_interpolation(field, settings.p, settings.m, label))
        if which in ("eps-poincare", "all"):
            reports.append(ineq.eps_poincare(field, settings.q, settings.eps,
                                             settings.radius, settings.p,
                                             constants["eps_poincare_C"], label))
        return reports

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            grouped = list(pool.map(evaluate, enumerate(fields)))
    else:
        grouped = [evaluate(item) for item in enumerate(fields)]

    rows = [ineq.InequalityReport.CSV_HEADER]
    all_pass = True
    for reports in grouped:
        for rep in reports:
            slack = 1e-10 * max(rep.left, 1.0) if rep.inequality == "interp" else 0.0
            ok = rep.margin >= -slack
            all_pass &= ok
            rows.append(rep.csv_row())
    text = "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"bench results written to {args.out}")
    else:
        print(text, end="")
    print(f"bench: {'all pass' if all_pass else 'FAILURES'} "
          f"({len(rows) - 1} rows, {workers} worker(s))")
    return 0 if all_pass else 1


def cmd_plotdata(args) -> int:
    from .plots import emit_plotdata

    written = emit_plotdata(Path(args.run), args.kind,
                            Path(args.out) if args.out else None)
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landaulab",
        description="Numerical laboratory for the homogeneous Landau-Coulomb equation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="integrate a configuration and write a run directory")
    p_sim.add_argument("--config", required=True, help="JSON run configuration")
    p_sim.add_argument("--out", required=True, help="output run directory (must be empty)")
    p_sim.set_defaults(func=cmd_simulate)

    p_exp = sub.add_parser("exponents", help="print the exponent set for (p, m)")
    p_exp.add_argument("--p", type=_fraction, required=True)
    p_exp.add_argument("--m", type=_fraction, required=True)
    p_exp.add_argument("--r", default=None, help="optional time exponent (number or 'inf')")
    p_exp.set_defaults(func=cmd_exponents)

    p_ver = sub.add_parser("verify", help="run estimate verdicts on a finished run")
    p_ver.add_argument("--run", required=True, help="run directory from simulate")
    p_ver.add_argument("--suite", default="all",
                       choices=["conservation", "moments", "lp", "smoothing",
                                "degiorgi", "prodi-serrin", "all"])
    p_ver.set_defaults(func=cmd_verify)

    p_bench = sub.add_parser("bench", help="inequality bench on a random corpus")
    p_bench.add_argument("--inequality", default="all",
                         choices=["sobolev", "interp", "eps-poincare", "all"])
    p_bench.add_argument("--corpus-seed", type=int, default=2026)
    p_bench.add_argument("--calibrate", action="store_true",
                         help="fit constants on the calibration corpus and write them")
    p_bench.add_argument("--calibration", default="calibration.txt",
                         help="calibration file to write (with --calibrate) or read")
    p_bench.add_argument("--holdout", type=int, default=100)
    p_bench.add_argument("--n", type=int, default=32)
    p_bench.add_argument("--L", type=float, default=8.0)
    p_bench.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    p_bench.set_defaults(func=cmd_bench)

    p_plot = sub.add_parser("plotdata", help="emit tidy CSVs and SVG figures from a run")
    p_plot.add_argument("--run", required=True)
    p_plot.add_argument("--kind", required=True, choices=["smoothing", "entropy", "degiorgi"])
    p_plot.add_argument("--out", default=None, help="output directory (default: <run>/plots)")
    p_plot.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, DomainError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
