"""Command line front end.

Exit codes: 0 pass, 1 verification failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__, artifacts, enclosure
from .grid import (BadSet, CoordinateRatioTooSmall, EmptyBlock, InfeasibleParameters,
                   NotEnoughIndices, assign_targets, cube_csv_rows, grid_artifact,
                   load_grid_artifact, partition_indices, plan_parameters,
                   solve_all_rotations, verify_sweepout)
from .randomseq import (GridCoverageError, ProbabilityProfile, build_interval_grid,
                        density_csv_rows, density_report, sample_sequence, thin,
                        verify_thinning)
from .rotation import BinConstraint, Infeasible, RatioTooSmall, solve_rotation, verify_rotation
from .sequences import (GrowthSpec, IndexTooSmall, SequenceError, UndefinedBound,
                        generate_paper_example, generate_ratio_sequence, read_sequence,
                        verify_growth, write_sequence)
from .torus import format_rational

log = logging.getLogger("sweepout")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

INPUT_ERRORS = (ValueError, OSError, KeyError, IndexTooSmall, InfeasibleParameters,
                NotEnoughIndices, GridCoverageError, RatioTooSmall, EmptyBlock,
                SequenceError, UndefinedBound, enclosure.PrecisionExhausted)


def rational(s: str) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {s!r}")


def int_list(s: str) -> list:
    return [int(x) for x in s.replace(",", " ").split()]


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- subcommands

def cmd_gen_seq(args, manifest) -> int:
    if args.kind == "paper":
        if args.eta is None:
            raise UsageError("--kind paper needs --eta")
        seq = generate_paper_example(args.eta, args.n0, args.count,
                                     precision_cap=args.precision_cap)
    else:
        if args.rho is None:
            raise UsageError("--kind ratio needs --rho")
        seq = generate_ratio_sequence(args.rho, args.start, args.count)
    write_sequence(seq, args.out)
    manifest.outputs.append(args.out)
    log.info("wrote %d terms to %s", len(seq), args.out)
    return EXIT_OK


def _growth_spec(args) -> GrowthSpec:
    if args.kind == "fixed-ratio":
        return GrowthSpec.fixed_ratio(args.rho)
    if args.kind == "lacunary":
        return GrowthSpec.lacunary(args.eta)
    if args.kind == "loglog":
        return GrowthSpec.loglog(args.eta)
    weights = [Fraction(line) for line in Path(args.weights).read_text().split()]
    return GrowthSpec.loglog_weighted(args.eta, weights)


def cmd_verify_growth(args, manifest) -> int:
    seq = read_sequence(args.seq)
    manifest.inputs.append(args.seq)
    report = verify_growth(seq, _growth_spec(args), strict_domain=args.strict_domain,
                           precision_cap=args.precision_cap)
    artifacts.write_json({"holds": report.holds, "first_violation": report.first_violation,
                          "checked": report.checked, "skipped": list(report.skipped)}, args.out)
    manifest.outputs.append(args.out)
    return EXIT_OK if report.holds else EXIT_FAIL


def cmd_solve_rotation(args, manifest) -> int:
    if len(args.a) != len(args.targets):
        raise UsageError("--a and --targets must have the same length")
    constraints = [BinConstraint(a, p) for a, p in zip(args.a, args.targets)]
    trace: list = []
    r = solve_rotation(constraints, args.Q, trace=trace)
    ok = verify_rotation(r, constraints, args.Q)
    artifacts.write_json({"Q": args.Q, "a": args.a, "targets": args.targets,
                          "r": format_rational(r), "verified": ok}, args.out)
    manifest.outputs.append(args.out)
    if args.trace:
        Path(args.trace).write_text("".join(line + "\n" for line in trace))
        manifest.outputs.append(args.trace)
    return EXIT_OK if ok else EXIT_FAIL


def _plan(args):
    return plan_parameters(args.eta, args.epsilon, args.C, args.mode, Q=args.Q, K=args.K,
                           block_length=args.block_length, N1=args.N1,
                           precision_cap=args.precision_cap)


def cmd_build_grid(args, manifest) -> int:
    seq = read_sequence(args.seq)
    manifest.inputs.append(args.seq)
    params = _plan(args)
    partition = partition_indices(params, seq.end_index)
    assignment = assign_targets(partition, params, seq)
    r = solve_all_rotations(seq, assignment, params, threads=args.threads)
    artifacts.write_json(grid_artifact(params, partition, r, str(args.seq)), args.out)
    manifest.outputs.append(args.out)
    return EXIT_OK


def cmd_verify_sweepout(args, manifest) -> int:
    seq = read_sequence(args.seq)
    manifest.inputs.append(args.seq)
    if args.grid:
        params, partition, r, _ = load_grid_artifact(artifacts.read_json(args.grid))
        manifest.inputs.append(args.grid)
        params = plan_parameters(params.eta, params.epsilon, params.C, params.mode,
                                 Q=params.Q, K=params.K, block_length=params.block_length or None,
                                 N1=params.N1, precision_cap=args.precision_cap)
        assignment = assign_targets(partition, params, seq)
    else:
        params = _plan(args)
        partition = partition_indices(params, seq.end_index)
        assignment = assign_targets(partition, params, seq)
        r = solve_all_rotations(seq, assignment, params, threads=args.threads)
    report = verify_sweepout(seq, params, partition, assignment, r, BadSet(params.K, params.Q),
                             args.samples, seed=args.seed, threads=args.threads)
    out = report.to_dict()
    out["rotation"] = [format_rational(c) for c in r.coords]
    artifacts.write_json(out, args.out)
    csv_path = Path(args.out).with_suffix(".csv")
    artifacts.write_csv(cube_csv_rows(report), csv_path)
    manifest.outputs += [args.out, csv_path]
    for c in report.failures[:5]:
        log.warning("cube %d failed: %s", c.cube_index, c.witness)
    return EXIT_OK if report.full_cover and report.measure_ok else EXIT_FAIL


def cmd_random(args, manifest) -> int:
    profile = ProbabilityProfile(args.eta, args.n_start)
    draw = sample_sequence(profile, args.tmax, args.seed)
    artifacts.write_draw(draw, args.out)
    manifest.outputs.append(args.out)
    log.info("selected %d indices", len(draw))
    return EXIT_OK


def cmd_thin(args, manifest) -> int:
    draw = artifacts.read_draw(args.draw)
    manifest.inputs.append(args.draw)
    grid = build_interval_grid(args.eta, draw.t_max, precision_cap=args.precision_cap)
    result = thin(draw, grid)
    report = verify_thinning(result, grid, args.eta, precision_cap=args.precision_cap)
    artifacts.write_thinning(result, args.out, eta=args.eta, t_max=draw.t_max)
    report_path = f"{args.out}.report.json"
    artifacts.write_json({"ok": report.ok, "violations": report.violations,
                          "pairs_checked": report.pairs_checked,
                          "grid": {"m0": grid.m0, "starts": list(grid.starts)}}, report_path)
    manifest.outputs += [args.out, report_path]
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_density(args, manifest) -> int:
    draw = artifacts.read_draw(args.draw)
    meta, sections = artifacts.read_thinning(args.thin)
    manifest.inputs += [args.draw, args.thin]
    if Fraction(meta.get("eta", "0")) != draw.profile.eta:
        raise GridCoverageError("thinning file and draw disagree on eta")
    grid = build_interval_grid(draw.profile.eta, draw.t_max, precision_cap=args.precision_cap)
    result = artifacts.thinning_from_sections(sections, grid)
    checkpoints = args.checkpoints or [draw.t_max]
    artifacts.write_csv(density_csv_rows(density_report(draw, result, checkpoints)), args.out)
    manifest.outputs.append(args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="primary output path")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--precision-cap", type=int, default=enclosure.PRECISION_CAP,
                        help="maximum working precision in bits (default %(default)s)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sweepout", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-seq", parents=[common], help="generate an integer sequence")
    p.add_argument("--kind", choices=["paper", "ratio"], required=True)
    p.add_argument("--eta", type=rational)
    p.add_argument("--n0", type=int, default=3)
    p.add_argument("--rho", type=rational)
    p.add_argument("--start", type=int, default=1)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_gen_seq)

    p = sub.add_parser("verify-growth", parents=[common], help="check a ratio growth bound")
    p.add_argument("--seq", required=True)
    p.add_argument("--kind", choices=["loglog", "loglog-weighted", "fixed-ratio", "lacunary"],
                   required=True)
    p.add_argument("--eta", type=rational)
    p.add_argument("--rho", type=rational)
    p.add_argument("--weights", help="file of rational weights w(1), w(2), ...")
    p.add_argument("--strict-domain", action="store_true")
    p.set_defaults(func=cmd_verify_growth)

    p = sub.add_parser("solve-rotation", parents=[common], help="solve one bin-placement problem")
    p.add_argument("--Q", type=int, required=True)
    p.add_argument("--a", type=int_list, required=True, help="comma separated a_j")
    p.add_argument("--targets", type=int_list, required=True, help="comma separated bins")
    p.add_argument("--trace", help="write the solver trace here")
    p.set_defaults(func=cmd_solve_rotation)

    def grid_flags(p):
        p.add_argument("--seq", required=True)
        p.add_argument("--Q", type=int)
        p.add_argument("--K", type=int)
        p.add_argument("--block-length", type=int)
        p.add_argument("--epsilon", type=rational, default=Fraction(1, 2))
        p.add_argument("--C", type=rational, default=Fraction(2))
        p.add_argument("--eta", type=rational, default=Fraction(1, 2))
        p.add_argument("--mode", choices=["demo", "full"], default="demo")
        p.add_argument("--N1", type=int, default=0)

    p = sub.add_parser("build-grid", parents=[common], help="solve rotations for a grid")
    grid_flags(p)
    p.set_defaults(func=cmd_build_grid)

    p = sub.add_parser("verify-sweepout", parents=[common], help="certify full coverage")
    grid_flags(p)
    p.add_argument("--samples", type=int, default=3)
    p.add_argument("--grid", help="use the rotation and blocks of this grid artifact")
    p.set_defaults(func=cmd_verify_sweepout)

    p = sub.add_parser("random", parents=[common], help="sample a random sequence")
    p.add_argument("--eta", type=rational, required=True)
    p.add_argument("--tmax", type=int, required=True)
    p.add_argument("--n-start", type=int, default=16)
    p.set_defaults(func=cmd_random)

    p = sub.add_parser("thin", parents=[common], help="thin a draw into B/D/E")
    p.add_argument("--draw", required=True)
    p.add_argument("--eta", type=rational, required=True)
    p.set_defaults(func=cmd_thin)

    p = sub.add_parser("density", parents=[common], help="B(t)/A(t) at checkpoints")
    p.add_argument("--draw", required=True)
    p.add_argument("--thin", required=True)
    p.add_argument("--checkpoints", type=int_list)
    p.set_defaults(func=cmd_density)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    params = {k: (format_rational(v) if isinstance(v, Fraction) else v)
              for k, v in vars(args).items() if k != "func"}
    manifest = artifacts.Manifest(args.command, params)
    try:
        status = args.func(args, manifest)
    except Infeasible:
        raise
    except INPUT_ERRORS as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        status = EXIT_USAGE
    try:
        manifest.write(args.out, status)
    except OSError as exc:
        log.error("could not write manifest: %s", exc)
    return status


if __name__ == "__main__":
    sys.exit(main())
