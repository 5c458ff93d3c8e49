"""Command-line front end.

Verbs: ``run`` (one campaign), ``matrix`` (the full experiment matrix),
``simulate`` (emit one trace CSV), ``validate`` (check sequence or
assessment documents).  Exit codes: 0 for a falsifying run or a
completed matrix, 4 for a single campaign that completed without
falsifying, 1 for any error.  Seeds are explicit by default so repeated
invocations are reproducible; pass ``--entropy`` to seed from the OS.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from pathlib import Path

from . import assessment as assess_mod
from . import harness, testseq
from .assessment import DEFAULT_R3_MARGIN
from .search import SearchConfig

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_FALSIFIED = 4


def _add_common_search_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--runs", type=int, default=10, help="independent runs per campaign")
    parser.add_argument("--max-iters", type=int, default=50, help="iteration budget per run")
    parser.add_argument("--seed", type=int, default=harness.DEFAULT_SEED)
    parser.add_argument("--threshold", type=float, default=0.0, help="falsification threshold")
    parser.add_argument(
        "--entropy", action="store_true", help="seed from the OS instead of --seed"
    )


def _add_plant_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--plant-params", type=Path, default=None,
        help="JSON file overriding plant parameters by field name",
    )
    parser.add_argument(
        "--r3-margin", type=float, default=DEFAULT_R3_MARGIN,
        help="additive rpm tolerance of the r3 assessment",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bikebench",
        description="Search-based falsification benchmark for the surrogate e-bike powertrain",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="one falsification campaign")
    run.add_argument("--model", required=True, choices=["pwm", "buck"])
    run.add_argument("--assessment", required=True,
                     help="built-in name (r1|r2|r3|fig3b) or a JSON document path")
    run.add_argument("--pts", required=True,
                     help="built-in name (t-pyramid-0 .. rect-pulse-130) or a JSON document path")
    run.add_argument("--out", type=Path, default=None, help="artifact directory")
    _add_common_search_flags(run)
    _add_plant_flags(run)

    matrix = sub.add_parser("matrix", help="the full benchmark matrix")
    matrix.add_argument("--spec", type=Path, default=None, help="matrix spec JSON file")
    matrix.add_argument("--out", type=Path, required=True)
    matrix.add_argument("--jobs", type=int, default=1, help="campaigns to run in parallel")
    _add_common_search_flags(matrix)

    sim = sub.add_parser("simulate", help="simulate one test sequence and dump the trace")
    sim.add_argument("--model", required=True, choices=["pwm", "buck"])
    sim.add_argument("--pts", required=True)
    sim.add_argument(
        "--param", action="append", default=[], metavar="NAME=VALUE",
        help="search parameter binding, repeatable",
    )
    sim.add_argument("--out", type=Path, required=True, help="trace CSV path")
    sim.add_argument("--horizon", type=float, default=35.0)
    _add_plant_flags(sim)

    val = sub.add_parser("validate", help="validate sequence or assessment documents")
    val.add_argument("--pts", default=None)
    val.add_argument("--assessment", default=None)
    return parser


def _resolve_seed(args: argparse.Namespace) -> int:
    return secrets.randbits(63) if args.entropy else args.seed


def _load_overrides(path: Path | None) -> dict | None:
    if path is None:
        return None
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = SearchConfig(
        seed=_resolve_seed(args),
        max_iterations=args.max_iters,
        runs=args.runs,
        threshold=args.threshold,
    )
    exp = harness.ExperimentSpec(
        model=args.model,
        assessment=args.assessment,
        pts=args.pts,
        cfg=cfg,
        r3_margin=args.r3_margin,
        plant_overrides=_load_overrides(args.plant_params),
    )
    code, result = harness.run_single(exp, args.out)
    best = min(r.best.fitness for r in result.runs)
    print(f"experiment: {exp.key}")
    print(f"FR: {result.fr_numerator}/{result.fr_denominator}")
    if result.fr_numerator > 0:
        print(f"iterations: mean={result.mean_iterations:.1f} median={result.median_iterations:.1f}")
    else:
        print("iterations: - (no falsifying run)")
    print(f"best fitness: {best!r}")
    return code


def _cmd_matrix(args: argparse.Namespace) -> int:
    if args.spec is not None:
        spec = harness.MatrixSpec.from_file(args.spec)
    else:
        spec = harness.MatrixSpec(
            runs=args.runs,
            max_iterations=args.max_iters,
            seed=_resolve_seed(args),
            threshold=args.threshold,
        )
    results = harness.run_matrix(spec, args.out, jobs=args.jobs)
    print((Path(args.out) / "table.txt").read_text(), end="")
    falsified = sum(r.fr_numerator > 0 for _, r in results)
    print(f"{falsified}/{len(results)} experiments falsified; artifacts in {args.out}")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    valuation: dict[str, float] = {}
    for binding in args.param:
        name, _, value = binding.partition("=")
        if not _:
            raise ValueError(f"--param expects NAME=VALUE, got {binding!r}")
        valuation[name.strip()] = float(value)
    trace = harness.emit_trace(
        args.model,
        args.pts,
        valuation,
        args.out,
        horizon=args.horizon,
        plant_overrides=_load_overrides(args.plant_params),
    )
    print(f"wrote {trace.grid.n} samples x {len(trace.channel_names)} channels to {args.out}")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    if args.pts is None and args.assessment is None:
        raise ValueError("validate needs --pts and/or --assessment")
    diagnostics: list[str] = []
    if args.pts is not None:
        pts = testseq.resolve_pts(args.pts)
        diagnostics += [f"pts: {d}" for d in testseq.validate(pts)]
    if args.assessment is not None:
        assessment = assess_mod.resolve_assessment(args.assessment)
        diagnostics += [f"assessment: {d}" for d in assess_mod.validate(assessment)]
    for diag in diagnostics:
        print(diag)
    if diagnostics:
        return EXIT_ERROR
    print("ok")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "matrix": _cmd_matrix,
        "simulate": _cmd_simulate,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.verb](args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
