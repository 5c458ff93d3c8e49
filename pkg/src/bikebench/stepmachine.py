"""Step/transition walking shared by test sequences and assessments.

Both machine kinds are linear or single-cycle chains of named steps
joined by ``after``-guarded transitions.  A transition fires once the
time spent in its source step reaches ``after``, and the entry time of
the next step advances by exactly ``after`` so periodic machines do not
drift.  Step ``j`` entered at ``e_j`` is therefore active on the
half-open interval ``[e_j, e_j + after_j)``; a step without an outgoing
transition is held to the end of the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .signals import TIME_SLACK, TimeGrid

#: hard cap on machine segments per walk, guards against degenerate `after`
MAX_SEGMENTS = 1_000_000


@dataclass(frozen=True)
class Transition:
    """``source`` hands over to ``target`` once ``after`` seconds elapsed."""

    source: str
    after: float
    target: str


@dataclass(frozen=True)
class Segment:
    """One activation of a step: active on ``[start, end)`` (end may be inf)."""

    step: str
    start: float
    end: float


def structure_diagnostics(
    step_names: Sequence[str],
    transitions: Iterable[Transition],
    initial: str,
) -> list[str]:
    """Structural problems as human-readable strings (empty means valid)."""
    diags: list[str] = []
    seen: set[str] = set()
    for name in step_names:
        if name in seen:
            diags.append(f"duplicate step name {name!r}")
        seen.add(name)
    if initial not in seen:
        diags.append(f"initial step {initial!r} does not exist")
    outgoing: dict[str, Transition] = {}
    wiring_ok = initial in seen
    for tr in transitions:
        if tr.source not in seen:
            diags.append(f"transition source {tr.source!r} does not exist")
            wiring_ok = False
        if tr.target not in seen:
            diags.append(f"transition target {tr.target!r} does not exist")
            wiring_ok = False
        if not (tr.after > 0.0 and math.isfinite(tr.after)):
            diags.append(f"transition from {tr.source!r} must have after > 0")
        if tr.source in outgoing:
            diags.append(f"step {tr.source!r} has more than one outgoing transition")
            wiring_ok = False
        outgoing[tr.source] = tr
    # Reachability only makes sense once the wiring itself is sound,
    # otherwise a single broken transition fans out into noise.
    if wiring_ok:
        reached: set[str] = set()
        cur = initial
        while cur not in reached:
            reached.add(cur)
            tr = outgoing.get(cur)
            if tr is None:
                break
            cur = tr.target
        for name in step_names:
            if name not in reached:
                diags.append(f"step {name!r} is unreachable from the initial step")
    return diags


def walk_segments(
    transitions: Iterable[Transition],
    initial: str,
    grid: TimeGrid,
) -> list[Segment]:
    """Activation segments of the machine over the grid horizon.

    The walk stops once a segment starts past the last sample time; a
    terminal step yields a final segment with ``end = inf``.
    """
    outgoing = {tr.source: tr for tr in transitions}
    horizon_end = grid.t_end
    segments: list[Segment] = []
    t = grid.t0
    cur = initial
    while True:
        tr = outgoing.get(cur)
        if tr is None:
            segments.append(Segment(cur, t, math.inf))
            break
        segments.append(Segment(cur, t, t + tr.after))
        t = t + tr.after
        cur = tr.target
        if t > horizon_end + TIME_SLACK:
            break
        if len(segments) >= MAX_SEGMENTS:
            raise ValueError(
                "step machine produced too many segments over the horizon "
                "(check transition 'after' durations)"
            )
    return segments


def segment_sample_ranges(
    segments: Sequence[Segment],
    grid: TimeGrid,
) -> list[tuple[Segment, int, int]]:
    """Map each segment to its grid sample indices ``[k_start, k_stop)``.

    Sample ``k`` belongs to the segment whose half-open interval contains
    ``t0 + k * dt`` (with slack so exact boundaries land in the newly
    entered step).  Segments that contain no samples are dropped.
    """
    ranges: list[tuple[Segment, int, int]] = []
    for seg in segments:
        k_start = int(math.ceil((seg.start - grid.t0 - TIME_SLACK) / grid.dt))
        if math.isinf(seg.end):
            k_stop = grid.n
        else:
            k_stop = int(math.ceil((seg.end - grid.t0 - TIME_SLACK) / grid.dt))
        k_start = max(k_start, 0)
        k_stop = min(k_stop, grid.n)
        if k_start < k_stop:
            ranges.append((seg, k_start, k_stop))
    return ranges
