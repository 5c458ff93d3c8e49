"""Parameterized test sequences: step machines that emit input signals.

A :class:`ParameterizedTestSequence` (PTS) declares output channels,
bounded search parameters, and a chain of steps whose assignments are
expressions over the parameters and the two time sources.  Binding a
parameter valuation yields a concrete :class:`TestSequence`, and
executing that over a :class:`~bikebench.signals.TimeGrid` produces the
input :class:`~bikebench.signals.Trace` for the system under test.

Two benchmark families ship built in, each in three offset variants
(``-0``, ``-85``, ``-130``):

* ``t-pyramid``: seven 5 s segments forming a double truncated pyramid,
  ramping 0 -> sp -> 0 -> sp -> 0 with plateaus at the peak.
* ``rect-pulse``: 1 s at the base then 4 s at sp, cycled for the whole
  horizon (5 s period).

Both expose a single search parameter ``sp`` bounded to [0, 170] rpm;
the offset is added to every output sample after evaluation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from . import expressions as ex
from .signals import Channel, TimeGrid, Trace
from .stepmachine import (
    Transition,
    segment_sample_ranges,
    structure_diagnostics,
    walk_segments,
)

SeqTransition = Transition

#: parameter bounds for the built-in families, rpm
BUILTIN_PARAM = "sp"
BUILTIN_BOUNDS = (0.0, 170.0)

Valuation = dict[str, float]


@dataclass(frozen=True)
class ParamSpec:
    """A named search parameter with inclusive bounds."""

    name: str
    lower: float
    upper: float


@dataclass(frozen=True)
class SeqStep:
    """One step: an expression per declared output channel."""

    name: str
    assignments: Mapping[str, ex.Expr]


@dataclass(frozen=True)
class ParameterizedTestSequence:
    outputs: Mapping[str, str]  # channel name -> unit
    params: tuple[ParamSpec, ...]
    steps: tuple[SeqStep, ...]
    transitions: tuple[Transition, ...]
    initial: str
    offset: float = 0.0


@dataclass(frozen=True)
class TestSequence:
    """A PTS with every parameter reference replaced by a constant."""

    outputs: Mapping[str, str]
    steps: tuple[SeqStep, ...]
    transitions: tuple[Transition, ...]
    initial: str
    offset: float = 0.0


def validate(pts: ParameterizedTestSequence) -> list[str]:
    """All invariant violations as diagnostics; empty list means valid."""
    diags = structure_diagnostics(
        [s.name for s in pts.steps], pts.transitions, pts.initial
    )
    param_names = set()
    for p in pts.params:
        if p.name in param_names:
            diags.append(f"duplicate parameter {p.name!r}")
        param_names.add(p.name)
        if not (p.lower <= p.upper):
            diags.append(f"parameter {p.name!r} has lower {p.lower} > upper {p.upper}")
    if not (pts.offset >= 0.0 and math.isfinite(pts.offset)):
        diags.append(f"offset must be a finite non-negative number, got {pts.offset}")
    if not pts.outputs:
        diags.append("sequence declares no output channels")
    for step in pts.steps:
        missing = set(pts.outputs) - set(step.assignments)
        for out in sorted(missing):
            diags.append(f"step {step.name!r} does not assign output {out!r}")
        extra = set(step.assignments) - set(pts.outputs)
        for out in sorted(extra):
            diags.append(f"step {step.name!r} assigns undeclared output {out!r}")
        for out, expr in step.assignments.items():
            unknown = ex.referenced_names(expr) - param_names
            for ident in sorted(unknown):
                diags.append(
                    f"step {step.name!r} references unknown parameter {ident!r}"
                )
            for problem in ex.constant_zero_divisions(expr):
                diags.append(f"step {step.name!r}, output {out!r}: {problem}")
    return diags


def instantiate(pts: ParameterizedTestSequence, valuation: Mapping[str, float]) -> TestSequence:
    """Bind a valuation, checking coverage and bounds."""
    expected = {p.name for p in pts.params}
    given = set(valuation)
    if given != expected:
        missing = sorted(expected - given)
        extra = sorted(given - expected)
        raise ValueError(
            f"valuation does not match parameter set (missing={missing}, extra={extra})"
        )
    for p in pts.params:
        v = float(valuation[p.name])
        if not (p.lower <= v <= p.upper):
            raise ValueError(
                f"value {v} for parameter {p.name!r} outside bounds [{p.lower}, {p.upper}]"
            )
    steps = tuple(
        SeqStep(s.name, {out: ex.substitute(e, valuation) for out, e in s.assignments.items()})
        for s in pts.steps
    )
    return TestSequence(pts.outputs, steps, pts.transitions, pts.initial, pts.offset)


def generate_signal(ts: TestSequence, grid: TimeGrid) -> Trace:
    """Execute the step machine over the grid and emit the output trace.

    Within each activation segment the assignments see
    ``sim_time() = t - t0`` and ``step_time() = t - entry`` for every
    sample time ``t``; the sequence offset is added to every sample of
    every output.
    """
    steps_by_name = {s.name: s for s in ts.steps}
    ranges = segment_sample_ranges(walk_segments(ts.transitions, ts.initial, grid), grid)
    times = grid.times()
    arrays = {out: np.empty(grid.n) for out in ts.outputs}
    for seg, k_start, k_stop in ranges:
        step = steps_by_name[seg.step]
        sim_time = times[k_start:k_stop] - grid.t0
        step_time = times[k_start:k_stop] - seg.start
        for out, expr in step.assignments.items():
            value = ex.evaluate(expr, sim_time=sim_time, step_time=step_time)
            arrays[out][k_start:k_stop] = value
    channels = [
        Channel(out, unit, arrays[out] + ts.offset) for out, unit in ts.outputs.items()
    ]
    return Trace(grid, channels)


def _pyramid_steps() -> tuple[tuple[SeqStep, ...], tuple[Transition, ...]]:
    ramp_up = ex.parse_expression(f"{BUILTIN_PARAM} / 5 * step_time()")
    plateau = ex.parse_expression(BUILTIN_PARAM)
    ramp_down = ex.parse_expression(f"{BUILTIN_PARAM} - {BUILTIN_PARAM} / 5 * step_time()")
    base = ex.Const(0.0)
    names_exprs = [
        ("ramp_up_1", ramp_up),
        ("plateau_1", plateau),
        ("ramp_down_1", ramp_down),
        ("base_hold", base),
        ("ramp_up_2", ramp_up),
        ("plateau_2", plateau),
        ("ramp_down_2", ramp_down),
    ]
    steps = tuple(SeqStep(n, {"desired_speed": e}) for n, e in names_exprs)
    transitions = tuple(
        Transition(names_exprs[i][0], 5.0, names_exprs[i + 1][0])
        for i in range(len(names_exprs) - 1)
    )
    return steps, transitions


def _pulse_steps() -> tuple[tuple[SeqStep, ...], tuple[Transition, ...]]:
    steps = (
        SeqStep("base", {"desired_speed": ex.Const(0.0)}),
        SeqStep("pulse", {"desired_speed": ex.parse_expression(BUILTIN_PARAM)}),
    )
    transitions = (
        Transition("base", 1.0, "pulse"),
        Transition("pulse", 4.0, "base"),
    )
    return steps, transitions


BUILTIN_PTS_NAMES = (
    "t-pyramid-0",
    "t-pyramid-85",
    "t-pyramid-130",
    "rect-pulse-0",
    "rect-pulse-85",
    "rect-pulse-130",
)


def builtin_pts(name: str) -> ParameterizedTestSequence:
    """One of the six benchmark sequences (family plus offset suffix)."""
    if name not in BUILTIN_PTS_NAMES:
        raise KeyError(
            f"unknown test sequence {name!r}; built-ins are {BUILTIN_PTS_NAMES}"
        )
    family, _, suffix = name.rpartition("-")
    offset = float(suffix)
    steps, transitions = _pyramid_steps() if family == "t-pyramid" else _pulse_steps()
    return ParameterizedTestSequence(
        outputs={"desired_speed": "rpm"},
        params=(ParamSpec(BUILTIN_PARAM, *BUILTIN_BOUNDS),),
        steps=steps,
        transitions=transitions,
        initial=steps[0].name,
        offset=offset,
    )


def pts_from_dict(doc: Mapping) -> ParameterizedTestSequence:
    """Build a PTS from its JSON-shaped document form.

    Document keys: ``outputs`` (list of name/unit), ``params`` (list of
    name/lower/upper), ``steps`` (name plus assignment strings in the
    expression grammar), ``transitions`` (from/after/next), ``initial``,
    ``offset``.
    """
    outputs = {o["name"]: o["unit"] for o in doc["outputs"]}
    params = tuple(
        ParamSpec(p["name"], float(p["lower"]), float(p["upper"])) for p in doc.get("params", [])
    )
    steps = tuple(
        SeqStep(
            s["name"],
            {out: ex.parse_expression(src) for out, src in s["assignments"].items()},
        )
        for s in doc["steps"]
    )
    transitions = tuple(
        Transition(t["from"], float(t["after"]), t["next"]) for t in doc.get("transitions", [])
    )
    return ParameterizedTestSequence(
        outputs=outputs,
        params=params,
        steps=steps,
        transitions=transitions,
        initial=doc["initial"],
        offset=float(doc.get("offset", 0.0)),
    )


def load_pts(path: str | Path) -> ParameterizedTestSequence:
    with open(path, encoding="utf-8") as fh:
        return pts_from_dict(json.load(fh))


def resolve_pts(name_or_path: str) -> ParameterizedTestSequence:
    """Built-in name, or a path to a JSON sequence document."""
    if name_or_path in BUILTIN_PTS_NAMES:
        return builtin_pts(name_or_path)
    if Path(name_or_path).exists():
        return load_pts(name_or_path)
    raise KeyError(
        f"{name_or_path!r} is neither a built-in test sequence nor an existing file"
    )
