"""Falsification search: sample, simulate, assess, stop on failure.

A *run* repeatedly draws a parameter valuation uniformly at random,
turns it into an input signal, simulates the plant, and evaluates the
assessment fitness; it stops early as soon as the fitness drops below
the threshold or the iteration budget is exhausted.  A *campaign* is a
set of independent runs whose per-run random streams are derived from
``(seed, run_index)`` with numpy's ``SeedSequence``, so runs are
reproducible individually and in any execution order.

Falsification-rate statistics follow the usual reporting convention:
iteration and timing statistics aggregate over the falsified runs only
and are absent when no run falsified.
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .assessment import Assessment, evaluate
from .plant import ControllerKind, PlantParams, SimulationDivergedError, simulate
from .signals import TimeGrid
from .testseq import ParameterizedTestSequence, ParamSpec, Valuation, generate_signal, instantiate

#: total simulated time per iteration, seconds
DEFAULT_HORIZON = 35.0

SOLVERS = ("uniform_random",)

#: an objective maps a valuation to (fitness, vacuous)
Objective = Callable[[Valuation], tuple[float, bool]]


@dataclass(frozen=True)
class SearchConfig:
    seed: int
    solver: str = "uniform_random"
    max_iterations: int = 50
    runs: int = 10
    threshold: float = 0.0

    def __post_init__(self) -> None:
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; available: {SOLVERS}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")


@dataclass(frozen=True)
class IterationRecord:
    index: int  # 1-based
    valuation: Valuation
    fitness: float
    wall_time: float
    error: str | None = None


@dataclass(frozen=True)
class RunResult:
    run_index: int
    falsified: bool
    iterations_used: int
    best: IterationRecord
    records: tuple[IterationRecord, ...]
    vacuous_count: int

    @property
    def wall_time(self) -> float:
        return sum(r.wall_time for r in self.records)


@dataclass(frozen=True)
class CampaignResult:
    fr_numerator: int
    fr_denominator: int
    mean_iterations: float | None
    median_iterations: float | None
    time_mean: float | None
    time_min: float | None
    time_max: float | None
    time_std: float | None
    runs: tuple[RunResult, ...]


def run_rng(seed: int, run_index: int) -> np.random.Generator:
    """Independent random stream for one run of a campaign."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, run_index))))


def sample_uniform(params: Sequence[ParamSpec], rng: np.random.Generator) -> Valuation:
    """Draw each parameter independently and uniformly within its bounds.

    Advances *rng* in place; identical generator state yields identical
    draws.
    """
    return {p.name: float(rng.uniform(p.lower, p.upper)) for p in params}


def falsify_objective(
    objective: Objective,
    params: Sequence[ParamSpec],
    cfg: SearchConfig,
    run_index: int,
) -> RunResult:
    """One search run against an arbitrary fitness objective."""
    rng = run_rng(cfg.seed, run_index)
    records: list[IterationRecord] = []
    vacuous_count = 0
    falsified = False
    for index in range(1, cfg.max_iterations + 1):
        valuation = sample_uniform(params, rng)
        started = time.perf_counter()
        error: str | None = None
        try:
            fitness, vacuous = objective(valuation)
        except SimulationDivergedError as exc:
            # an aborted simulation is an errored iteration, not a failure
            fitness, vacuous = math.inf, False
            error = str(exc)
        elapsed = time.perf_counter() - started
        if vacuous:
            vacuous_count += 1
        records.append(IterationRecord(index, valuation, float(fitness), elapsed, error))
        if fitness < cfg.threshold:
            falsified = True
            break
    best = min(records, key=lambda r: r.fitness)
    return RunResult(
        run_index=run_index,
        falsified=falsified,
        iterations_used=len(records),
        best=best,
        records=tuple(records),
        vacuous_count=vacuous_count,
    )


def system_objective(
    pts: ParameterizedTestSequence,
    assessment: Assessment,
    kind: ControllerKind,
    plant_params: PlantParams,
    threshold: float,
    horizon: float = DEFAULT_HORIZON,
) -> Objective:
    """The benchmark pipeline: valuation -> signal -> plant -> fitness."""
    n = int(round(horizon / plant_params.dt)) + 1
    grid = TimeGrid(0.0, plant_params.dt, n)

    def objective(valuation: Valuation) -> tuple[float, bool]:
        sequence = instantiate(pts, valuation)
        stimulus = generate_signal(sequence, grid)
        trace = simulate(kind, stimulus, plant_params)
        verdict = evaluate(assessment, trace, threshold)
        return verdict.fitness, verdict.vacuous

    return objective


def falsify(
    pts: ParameterizedTestSequence,
    assessment: Assessment,
    kind: ControllerKind,
    plant_params: PlantParams,
    cfg: SearchConfig,
    run_index: int,
    horizon: float = DEFAULT_HORIZON,
) -> RunResult:
    """One search run against the simulated plant."""
    objective = system_objective(pts, assessment, kind, plant_params, cfg.threshold, horizon)
    return falsify_objective(objective, pts.params, cfg, run_index)


def aggregate(runs: Sequence[RunResult]) -> CampaignResult:
    """Campaign statistics; iteration/timing stats cover falsified runs only."""
    falsified = [r for r in runs if r.falsified]
    if falsified:
        iterations = [r.iterations_used for r in falsified]
        times = [r.wall_time for r in falsified]
        stats = dict(
            mean_iterations=statistics.fmean(iterations),
            median_iterations=float(statistics.median(iterations)),
            time_mean=statistics.fmean(times),
            time_min=min(times),
            time_max=max(times),
            time_std=statistics.pstdev(times),
        )
    else:
        stats = dict(
            mean_iterations=None,
            median_iterations=None,
            time_mean=None,
            time_min=None,
            time_max=None,
            time_std=None,
        )
    return CampaignResult(
        fr_numerator=len(falsified),
        fr_denominator=len(runs),
        runs=tuple(runs),
        **stats,
    )


def campaign_objective(
    objective: Objective,
    params: Sequence[ParamSpec],
    cfg: SearchConfig,
) -> CampaignResult:
    """Repeated independent runs against an arbitrary objective."""
    runs = [falsify_objective(objective, params, cfg, k) for k in range(cfg.runs)]
    return aggregate(runs)


def campaign(
    pts: ParameterizedTestSequence,
    assessment: Assessment,
    kind: ControllerKind,
    plant_params: PlantParams,
    cfg: SearchConfig,
    horizon: float = DEFAULT_HORIZON,
) -> CampaignResult:
    """Repeated independent falsification runs against the plant."""
    objective = system_objective(pts, assessment, kind, plant_params, cfg.threshold, horizon)
    return campaign_objective(objective, pts.params, cfg)
