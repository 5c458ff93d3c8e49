"""Test assessments: verify-step machines evaluated over traces.

An :class:`Assessment` has the same step/transition structure as a test
sequence, but steps carry ``verify`` predicates instead of output
assignments.  Evaluating one against a trace yields a :class:`Verdict`
holding both the boolean outcome and a quantitative robustness value
(the fitness the search minimises):

* ``rob(a <= b) = b - a`` and ``rob(a >= b) = a - b`` per sample; the
  strict operators share the formula of their non-strict counterparts,
  so the measure-zero ``rob == 0`` boundary is the only place where the
  robustness sign and the strict boolean reading can disagree.
* ``fitness`` is the minimum robustness over every (sample, active
  verify) pair; the trace fails when ``fitness < threshold``.
* A run where no verify ever becomes active is *vacuous*: it passes
  with ``fitness = +inf`` but is flagged so campaigns never count it as
  evidence of correctness.

Built-in assessments cover the three e-bike requirements (speed never
negative, speed below the 170 rpm regulatory cap, speed never above the
rider's request plus a small margin) plus ``fig3b``, a four-step cyclic
machine that watches a literal 11 rpm bound in two 4 s windows per
30 s period.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import expressions as ex
from .signals import Trace
from .stepmachine import (
    Transition,
    segment_sample_ranges,
    structure_diagnostics,
    walk_segments,
)

COMPARATORS = ("<=", ">=", "<", ">")


@dataclass(frozen=True)
class Predicate:
    """``lhs op rhs`` over channel expressions."""

    lhs: ex.Expr
    op: str
    rhs: ex.Expr

    def __post_init__(self) -> None:
        if self.op not in COMPARATORS:
            raise ValueError(f"unsupported comparator {self.op!r}")

    def robustness(self, channels: Mapping[str, np.ndarray]) -> np.ndarray:
        """Signed margin per sample; positive means satisfied."""
        lhs = ex.evaluate(self.lhs, names=channels)
        rhs = ex.evaluate(self.rhs, names=channels)
        if self.op in ("<=", "<"):
            return np.asarray(rhs - lhs, dtype=np.float64)
        return np.asarray(lhs - rhs, dtype=np.float64)

    def holds(self, channels: Mapping[str, float]) -> bool:
        """Direct boolean comparison at a single sample (strict ops strict)."""
        lhs = float(ex.evaluate(self.lhs, names=channels))
        rhs = float(ex.evaluate(self.rhs, names=channels))
        if self.op == "<=":
            return lhs <= rhs
        if self.op == ">=":
            return lhs >= rhs
        if self.op == "<":
            return lhs < rhs
        return lhs > rhs


@dataclass(frozen=True)
class AssessStep:
    name: str
    verifies: tuple[Predicate, ...] = ()


@dataclass(frozen=True)
class Assessment:
    steps: tuple[AssessStep, ...]
    transitions: tuple[Transition, ...]
    initial: str


@dataclass(frozen=True)
class Verdict:
    passed: bool
    fitness: float
    first_violation: float | None
    vacuous: bool


def validate(assessment: Assessment) -> list[str]:
    """Structural diagnostics plus predicate sanity; empty means valid."""
    diags = structure_diagnostics(
        [s.name for s in assessment.steps], assessment.transitions, assessment.initial
    )
    for step in assessment.steps:
        for pred in step.verifies:
            for side in (pred.lhs, pred.rhs):
                if ex.uses_time(side):
                    diags.append(
                        f"step {step.name!r}: time functions are not allowed in verify"
                    )
                for problem in ex.constant_zero_divisions(side):
                    diags.append(f"step {step.name!r}: {problem}")
    return diags


def referenced_channels(assessment: Assessment) -> set[str]:
    names: set[str] = set()
    for step in assessment.steps:
        for pred in step.verifies:
            names |= ex.referenced_names(pred.lhs) | ex.referenced_names(pred.rhs)
    return names


def evaluate(assessment: Assessment, trace: Trace, threshold: float = 0.0) -> Verdict:
    """Run the assessment machine over the trace grid.

    Robustness arrays are computed once per predicate over the full
    trace, then masked to each step's activation samples.
    """
    if not math.isfinite(threshold):
        raise ValueError("threshold must be finite")
    missing = referenced_channels(assessment) - set(trace.channel_names)
    if missing:
        raise KeyError(f"trace is missing channels {sorted(missing)}")
    channels = {name: trace.values(name) for name in trace.channel_names}
    steps_by_name = {s.name: s for s in assessment.steps}
    ranges = segment_sample_ranges(
        walk_segments(assessment.transitions, assessment.initial, trace.grid),
        trace.grid,
    )
    rob_cache: dict[int, np.ndarray] = {}
    fitness = math.inf
    first_violation: float | None = None
    any_active = False
    for seg, k_start, k_stop in ranges:
        step = steps_by_name[seg.step]
        for pred in step.verifies:
            any_active = True
            rob = rob_cache.get(id(pred))
            if rob is None:
                rob = pred.robustness(channels)
                rob_cache[id(pred)] = rob
            window = rob[k_start:k_stop]
            low = float(window.min())
            if low < fitness:
                fitness = low
            bad = np.nonzero(window < threshold)[0]
            if bad.size:
                t_bad = trace.grid.time_of(k_start + int(bad[0]))
                if first_violation is None or t_bad < first_violation:
                    first_violation = t_bad
    if not any_active:
        return Verdict(passed=True, fitness=math.inf, first_violation=None, vacuous=True)
    passed = fitness >= threshold
    return Verdict(
        passed=passed,
        fitness=fitness,
        first_violation=None if passed else first_violation,
        vacuous=False,
    )


def evaluate_boolean_oracle(assessment: Assessment, trace: Trace) -> bool:
    """Independent per-sample boolean check, no robustness involved.

    Steps the machine sample by sample with the plain firing rule and
    compares each active predicate directly.  Exists as a second route
    for property tests; production verdicts come from :func:`evaluate`.
    """
    missing = referenced_channels(assessment) - set(trace.channel_names)
    if missing:
        raise KeyError(f"trace is missing channels {sorted(missing)}")
    outgoing = {tr.source: tr for tr in assessment.transitions}
    steps_by_name = {s.name: s for s in assessment.steps}
    grid = trace.grid
    current = assessment.initial
    entry = grid.t0
    for k in range(grid.n):
        t = grid.time_of(k)
        while True:
            tr = outgoing.get(current)
            if tr is None or t - entry < tr.after - 1e-9:
                break
            entry = entry + tr.after
            current = tr.target
        step = steps_by_name[current]
        if step.verifies:
            sample = {name: float(trace.values(name)[k]) for name in trace.channel_names}
            for pred in step.verifies:
                if not pred.holds(sample):
                    return False
    return True


def parse_predicate(text: str) -> Predicate:
    """Parse ``<expr> <op> <expr>`` with op in ``<= >= < >``."""
    tokens = ex.tokenize(text)
    split = [i for i, tok in enumerate(tokens) if tok in COMPARATORS]
    if len(split) != 1:
        raise ex.ExpressionError(
            f"predicate needs exactly one comparison operator: {text!r}"
        )
    i = split[0]
    lhs = ex.parse_expression(" ".join(tokens[:i]))
    rhs = ex.parse_expression(" ".join(tokens[i + 1 :]))
    return Predicate(lhs, tokens[i], rhs)


BUILTIN_ASSESSMENT_NAMES = ("r1", "r2", "r3", "fig3b")

#: default additive tolerance (rpm) for the request-tracking check r3
DEFAULT_R3_MARGIN = 1.0


def _single_step(name: str, predicate: str) -> Assessment:
    step = AssessStep(name, (parse_predicate(predicate),))
    return Assessment(steps=(step,), transitions=(), initial=name)


def builtin_assessment(name: str, r3_margin: float = DEFAULT_R3_MARGIN) -> Assessment:
    """One of the built-in requirement checks.

    ``r1``/``r2``/``r3`` are always-active single-step machines; ``r3``
    allows the measured speed to exceed the request by ``r3_margin``
    rpm (additive, default 1).  ``fig3b`` is the cyclic windowed
    variant: quiet 6 s, watch 4 s, quiet 16 s, watch 4 s, repeat, with
    the literal bound ``measured_speed <= 11``.
    """
    if name == "r1":
        return _single_step("always", "measured_speed >= 0")
    if name == "r2":
        return _single_step("always", "measured_speed <= 170")
    if name == "r3":
        return _single_step("always", f"measured_speed <= desired_speed + {r3_margin}")
    if name == "fig3b":
        watch = (parse_predicate("measured_speed <= 11"),)
        steps = (
            AssessStep("quiet_1"),
            AssessStep("watch_1", watch),
            AssessStep("quiet_2"),
            AssessStep("watch_2", watch),
        )
        transitions = (
            Transition("quiet_1", 6.0, "watch_1"),
            Transition("watch_1", 4.0, "quiet_2"),
            Transition("quiet_2", 16.0, "watch_2"),
            Transition("watch_2", 4.0, "quiet_1"),
        )
        return Assessment(steps=steps, transitions=transitions, initial="quiet_1")
    raise KeyError(
        f"unknown assessment {name!r}; built-ins are {BUILTIN_ASSESSMENT_NAMES}"
    )


def assessment_from_dict(doc: Mapping) -> Assessment:
    """Same document shape as test sequences, with ``verifies`` strings."""
    steps = tuple(
        AssessStep(
            s["name"],
            tuple(parse_predicate(p) for p in s.get("verifies", [])),
        )
        for s in doc["steps"]
    )
    transitions = tuple(
        Transition(t["from"], float(t["after"]), t["next"]) for t in doc.get("transitions", [])
    )
    return Assessment(steps=steps, transitions=transitions, initial=doc["initial"])


def load_assessment(path: str | Path) -> Assessment:
    with open(path, encoding="utf-8") as fh:
        return assessment_from_dict(json.load(fh))


def resolve_assessment(name_or_path: str, r3_margin: float = DEFAULT_R3_MARGIN) -> Assessment:
    """Built-in name, or a path to a JSON assessment document."""
    if name_or_path in BUILTIN_ASSESSMENT_NAMES:
        return builtin_assessment(name_or_path, r3_margin=r3_margin)
    if Path(name_or_path).exists():
        return load_assessment(name_or_path)
    raise KeyError(
        f"{name_or_path!r} is neither a built-in assessment nor an existing file"
    )
