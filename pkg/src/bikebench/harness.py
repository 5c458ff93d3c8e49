"""Benchmark harness: the experiment matrix, result files, and tables.

The default benchmark reproduces the study layout at desk scale: two
controller models x three requirement assessments x six parameterized
test sequences = 36 campaigns of 10 runs each.  Every campaign derives
its seed deterministically from the matrix seed and its position, so a
matrix run is reproducible end to end.

Output layout under ``--out``::

    results.csv        one row per run, deterministic, golden-file safe
    table.txt          falsification-rate table (dash = never falsified)
    metadata.json      wall times and environment, the only timed file
    <model>-<assessment>-<pts>/run-<k>.json   per-run forensics

``results.csv`` columns: ``model,assessment,pts,run,seed,falsified,
iterations,best_fitness``.  Wall times never appear in it.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .assessment import DEFAULT_R3_MARGIN, resolve_assessment
from .plant import ControllerKind, default_params, params_with_overrides, simulate
from .search import CampaignResult, RunResult, SearchConfig, campaign
from .signals import TimeGrid, Trace
from .testseq import BUILTIN_PTS_NAMES, generate_signal, instantiate, resolve_pts

DEFAULT_MODELS = ("pwm", "buck")
DEFAULT_ASSESSMENTS = ("r1", "r2", "r3")
DEFAULT_SEED = 2026
ABSENT = "-"


@dataclass(frozen=True)
class ExperimentSpec:
    model: str
    assessment: str
    pts: str
    cfg: SearchConfig
    r3_margin: float = DEFAULT_R3_MARGIN
    plant_overrides: Mapping[str, float] | None = None

    @property
    def key(self) -> str:
        return f"{self.model}-{self.assessment}-{self.pts}"


@dataclass(frozen=True)
class MatrixSpec:
    models: tuple[str, ...] = DEFAULT_MODELS
    assessments: tuple[str, ...] = DEFAULT_ASSESSMENTS
    pts: tuple[str, ...] = BUILTIN_PTS_NAMES
    runs: int = 10
    max_iterations: int = 50
    seed: int = DEFAULT_SEED
    threshold: float = 0.0
    r3_margin: float = DEFAULT_R3_MARGIN
    plant_overrides: Mapping[str, Mapping[str, float]] | None = None

    @classmethod
    def from_dict(cls, doc: Mapping) -> "MatrixSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown matrix spec key(s): {sorted(unknown)}")
        kwargs = dict(doc)
        for list_key in ("models", "assessments", "pts"):
            if list_key in kwargs:
                kwargs[list_key] = tuple(kwargs[list_key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "MatrixSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def campaign_seed(matrix_seed: int, experiment_index: int) -> int:
    """Decorrelated per-campaign seed, stable for a given matrix layout."""
    seq = np.random.SeedSequence((matrix_seed, experiment_index))
    return int(seq.generate_state(1, np.uint64)[0])


def expand_experiments(spec: MatrixSpec) -> list[ExperimentSpec]:
    """The campaign list in canonical (model, assessment, pts) order."""
    if not (spec.models and spec.assessments and spec.pts):
        raise ValueError("matrix spec expands to no experiments")
    experiments: list[ExperimentSpec] = []
    index = 0
    for model in spec.models:
        overrides = (spec.plant_overrides or {}).get(model)
        for assessment in spec.assessments:
            for pts_name in spec.pts:
                cfg = SearchConfig(
                    seed=campaign_seed(spec.seed, index),
                    max_iterations=spec.max_iterations,
                    runs=spec.runs,
                    threshold=spec.threshold,
                )
                experiments.append(
                    ExperimentSpec(
                        model=model,
                        assessment=assessment,
                        pts=pts_name,
                        cfg=cfg,
                        r3_margin=spec.r3_margin,
                        plant_overrides=overrides,
                    )
                )
                index += 1
    return experiments


def _plant_for(exp: ExperimentSpec):
    kind = ControllerKind(exp.model)
    params = default_params(kind)
    if exp.plant_overrides:
        params = params_with_overrides(params, exp.plant_overrides)
    return kind, params


def run_experiment(exp: ExperimentSpec) -> CampaignResult:
    """Execute one campaign."""
    kind, params = _plant_for(exp)
    pts = resolve_pts(exp.pts)
    assessment = resolve_assessment(exp.assessment, r3_margin=exp.r3_margin)
    return campaign(pts, assessment, kind, params, exp.cfg)


def run_matrix(
    spec: MatrixSpec,
    out_dir: str | Path,
    jobs: int = 1,
) -> list[tuple[ExperimentSpec, CampaignResult]]:
    """Execute every campaign of the matrix and write all artifacts."""
    experiments = expand_experiments(spec)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            campaigns = list(pool.map(run_experiment, experiments))
    else:
        campaigns = [run_experiment(exp) for exp in experiments]
    results = list(zip(experiments, campaigns))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(out / "results.csv", results)
    (out / "table.txt").write_text(render_table(results), encoding="utf-8")
    write_metadata(out / "metadata.json", spec, results)
    for exp, result in results:
        exp_dir = out / exp.key
        exp_dir.mkdir(exist_ok=True)
        for run in result.runs:
            path = exp_dir / f"run-{run.run_index}.json"
            path.write_text(json.dumps(run_record(run), indent=2), encoding="utf-8")
    return results


def run_record(run: RunResult) -> dict:
    return {
        "run_index": run.run_index,
        "falsified": run.falsified,
        "iterations_used": run.iterations_used,
        "vacuous_count": run.vacuous_count,
        "best": {
            "index": run.best.index,
            "valuation": run.best.valuation,
            "fitness": run.best.fitness,
        },
        "records": [
            {
                "index": r.index,
                "valuation": r.valuation,
                "fitness": r.fitness,
                "wall_time": r.wall_time,
                "error": r.error,
            }
            for r in run.records
        ],
    }


RESULTS_HEADER = (
    "model",
    "assessment",
    "pts",
    "run",
    "seed",
    "falsified",
    "iterations",
    "best_fitness",
)


def write_results_csv(
    path: str | Path,
    results: Sequence[tuple[ExperimentSpec, CampaignResult]],
) -> None:
    """Deterministic per-run rows; floats use shortest round-trip form."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for exp, result in results:
            for run in result.runs:
                writer.writerow(
                    [
                        exp.model,
                        exp.assessment,
                        exp.pts,
                        run.run_index,
                        exp.cfg.seed,
                        "true" if run.falsified else "false",
                        run.iterations_used,
                        repr(run.best.fitness),
                    ]
                )


def read_results_csv(path: str | Path) -> dict[tuple[str, str, str], dict]:
    """Reconstruct per-experiment aggregates from an emitted results CSV."""
    rows: dict[tuple[str, str, str], list[dict]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["model"], row["assessment"], row["pts"])
            rows.setdefault(key, []).append(row)
    aggregates: dict[tuple[str, str, str], dict] = {}
    for key, entries in rows.items():
        iterations = [int(e["iterations"]) for e in entries if e["falsified"] == "true"]
        aggregates[key] = {
            "fr_numerator": len(iterations),
            "fr_denominator": len(entries),
            "mean_iterations": statistics.fmean(iterations) if iterations else None,
            "median_iterations": float(statistics.median(iterations)) if iterations else None,
            "best_fitness": min(float(e["best_fitness"]) for e in entries),
        }
    return aggregates


def campaign_aggregates(result: CampaignResult) -> dict:
    """The same aggregate view, computed from a live campaign result."""
    return {
        "fr_numerator": result.fr_numerator,
        "fr_denominator": result.fr_denominator,
        "mean_iterations": result.mean_iterations,
        "median_iterations": result.median_iterations,
        "best_fitness": min(r.best.fitness for r in result.runs),
    }


def _fmt_stat(value: float | None) -> str:
    return ABSENT if value is None else f"{value:.1f}"


def render_table(results: Sequence[tuple[ExperimentSpec, CampaignResult]]) -> str:
    """Falsification-rate table: one row per (model, pts), grouped columns."""
    assessments: list[str] = []
    rows: dict[tuple[str, str], dict[str, CampaignResult]] = {}
    for exp, result in results:
        if exp.assessment not in assessments:
            assessments.append(exp.assessment)
        rows.setdefault((exp.model, exp.pts), {})[exp.assessment] = result
    header = ["model", "pts"]
    for name in assessments:
        header += [f"{name}:FR", f"{name}:mean", f"{name}:median"]
    lines = [header]
    for (model, pts_name), by_assessment in rows.items():
        line = [model, pts_name]
        for name in assessments:
            result = by_assessment.get(name)
            if result is None:
                line += [ABSENT, ABSENT, ABSENT]
                continue
            line.append(f"{result.fr_numerator}/{result.fr_denominator}")
            line.append(_fmt_stat(result.mean_iterations))
            line.append(_fmt_stat(result.median_iterations))
        lines.append(line)
    widths = [max(len(row[c]) for row in lines) for c in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in lines
    ) + "\n"


def write_metadata(
    path: str | Path,
    spec: MatrixSpec,
    results: Sequence[tuple[ExperimentSpec, CampaignResult]],
) -> None:
    """Everything time-dependent lives here, away from the golden CSV."""
    doc = {
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": spec.seed,
        "runs": spec.runs,
        "max_iterations": spec.max_iterations,
        "threshold": spec.threshold,
        "r3_margin": spec.r3_margin,
        "wall_times": {
            exp.key: {
                "mean": result.time_mean,
                "min": result.time_min,
                "max": result.time_max,
                "std": result.time_std,
            }
            for exp, result in results
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2), encoding="utf-8")


def run_single(exp: ExperimentSpec, out_dir: str | Path | None = None) -> tuple[int, CampaignResult]:
    """One campaign with artifacts; exit code 0 falsified, 4 otherwise."""
    result = run_experiment(exp)
    if out_dir is not None:
        out = Path(out_dir)
        exp_dir = out / exp.key
        exp_dir.mkdir(parents=True, exist_ok=True)
        for run in result.runs:
            path = exp_dir / f"run-{run.run_index}.json"
            path.write_text(json.dumps(run_record(run), indent=2), encoding="utf-8")
        write_results_csv(out / "results.csv", [(exp, result)])
        write_metadata(out / "metadata.json", MatrixSpec(seed=exp.cfg.seed), [(exp, result)])
        if result.fr_numerator > 0:
            falsifying = min(
                (r for r in result.runs if r.falsified),
                key=lambda r: r.best.fitness,
            )
            emit_trace(
                exp.model,
                exp.pts,
                falsifying.best.valuation,
                exp_dir / "falsifying-trace.csv",
                plant_overrides=exp.plant_overrides,
            )
    return (0 if result.fr_numerator > 0 else 4), result


def emit_trace(
    model: str,
    pts_name: str,
    valuation: Mapping[str, float],
    out_path: str | Path,
    horizon: float = 35.0,
    plant_overrides: Mapping[str, float] | None = None,
) -> Trace:
    """Simulate one concrete test sequence and write the trace CSV."""
    kind = ControllerKind(model)
    params = default_params(kind)
    if plant_overrides:
        params = params_with_overrides(params, plant_overrides)
    pts = resolve_pts(pts_name)
    sequence = instantiate(pts, dict(valuation))
    n = int(round(horizon / params.dt)) + 1
    grid = TimeGrid(0.0, params.dt, n)
    trace = simulate(kind, generate_signal(sequence, grid), params)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        trace.write_csv(fh)
    return trace
