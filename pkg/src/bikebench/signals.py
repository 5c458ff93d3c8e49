"""Uniform-grid time series shared by every other module.

A :class:`Trace` is an immutable bundle of named channels sampled on a
common :class:`TimeGrid`.  Sample ``k`` lives at ``t0 + k * dt`` exactly
(computed, never accumulated), all values are finite, and queries use
zero-order hold between samples so that boolean and robustness
semantics coincide with per-sample evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, Mapping

import numpy as np

#: absolute slack for time comparisons against grid points
TIME_SLACK = 1e-9

UNITS = ("rpm", "seconds", "dimensionless", "fraction")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid: ``n`` samples starting at ``t0``, spaced ``dt``."""

    t0: float
    dt: float
    n: int

    def __post_init__(self) -> None:
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be a positive finite number, got {self.dt}")
        if self.n < 1:
            raise ValueError(f"grid needs at least one sample, got n={self.n}")
        if not math.isfinite(self.t0):
            raise ValueError("t0 must be finite")

    @property
    def t_end(self) -> float:
        return self.t0 + (self.n - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n) * self.dt

    def time_of(self, k: int) -> float:
        return self.t0 + k * self.dt

    def index_at_or_before(self, t: float) -> int:
        """Largest sample index whose time is <= t (within slack)."""
        if t < self.t0 - TIME_SLACK or t > self.t_end + TIME_SLACK:
            raise ValueError(
                f"time {t} outside grid range [{self.t0}, {self.t_end}]"
            )
        k = int(math.floor((t - self.t0 + TIME_SLACK) / self.dt))
        return min(max(k, 0), self.n - 1)


@dataclass(frozen=True)
class Channel:
    """A named, unit-tagged sample sequence conforming to some grid."""

    name: str
    unit: str
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.unit not in UNITS:
            raise ValueError(f"unknown unit {self.unit!r}, expected one of {UNITS}")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("channel values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"channel {self.name!r} contains non-finite samples")
        object.__setattr__(self, "values", values)


class Trace:
    """Immutable multi-channel time series on a shared grid."""

    def __init__(self, grid: TimeGrid, channels: Iterable[Channel] = ()):
        self.grid = grid
        self._channels: dict[str, Channel] = {}
        for ch in channels:
            self._check_new(ch)
            self._channels[ch.name] = ch

    def _check_new(self, ch: Channel) -> None:
        if ch.name in self._channels:
            raise ValueError(f"duplicate channel name {ch.name!r}")
        if len(ch.values) != self.grid.n:
            raise ValueError(
                f"channel {ch.name!r} has {len(ch.values)} samples, grid expects {self.grid.n}"
            )

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(self._channels)

    def channel(self, name: str) -> Channel:
        try:
            return self._channels[name]
        except KeyError:
            raise KeyError(
                f"unknown channel {name!r}; trace has {sorted(self._channels)}"
            ) from None

    def values(self, name: str) -> np.ndarray:
        return self.channel(name).values

    def value_at(self, name: str, t: float) -> float:
        """Sample value at the nearest grid index at or before *t* (ZOH)."""
        ch = self.channel(name)
        return float(ch.values[self.grid.index_at_or_before(t)])

    def window_extrema(self, name: str, t_from: float, t_to: float) -> tuple[float, float]:
        """(min, max) over samples whose time lies in ``[t_from, t_to]``."""
        if t_from > t_to:
            raise ValueError(f"empty window: from={t_from} > to={t_to}")
        g = self.grid
        k_lo = int(math.ceil((t_from - g.t0 - TIME_SLACK) / g.dt))
        k_hi = int(math.floor((t_to - g.t0 + TIME_SLACK) / g.dt))
        k_lo = max(k_lo, 0)
        k_hi = min(k_hi, g.n - 1)
        if k_lo > k_hi:
            raise ValueError(
                f"window [{t_from}, {t_to}] contains no grid samples"
            )
        window = self.channel(name).values[k_lo : k_hi + 1]
        return float(window.min()), float(window.max())

    def append_channel(self, ch: Channel) -> "Trace":
        """New trace with *ch* added; the receiver is left unchanged."""
        self._check_new(ch)
        out = Trace(self.grid)
        out._channels = dict(self._channels)
        out._channels[ch.name] = ch
        return out

    def write_csv(self, out: IO[str]) -> None:
        """Write ``time,<channel>,...`` rows, one per grid sample."""
        names = list(self._channels)
        out.write("time," + ",".join(names) + "\n")
        times = self.grid.times()
        columns = [self._channels[n].values for n in names]
        for k in range(self.grid.n):
            row = ",".join(repr(float(col[k])) for col in columns)
            out.write(f"{times[k]:.6f},{row}\n")


def constant_trace(grid: TimeGrid, name: str, value: float, unit: str = "rpm") -> Trace:
    """Convenience: single-channel trace holding *value* everywhere."""
    return Trace(grid, [Channel(name, unit, np.full(grid.n, float(value)))])
