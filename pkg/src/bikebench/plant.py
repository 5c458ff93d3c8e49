"""Surrogate discrete-time e-bike powertrain with two swappable controllers.

The real powertrain this stands in for is not public, so the model here
is the simplest structure that reproduces the qualitative failure
modes the benchmark needs:

* The **PWM** controller switches between a motoring and a regenerative
  braking algorithm on the raw sign of the speed error, every control
  step, with no hysteresis.  Together with a braking stage whose torque
  authority is deliberately oversized (``regen_gain``), any crossing of
  the set point excites a violent limit cycle that can push the wheel
  speed below zero: the controller's injected defect.
* The **Buck** controller drives a current reference through a PI speed
  loop; the reference is clamped at zero, so it can never brake
  actively.  Negative speed is structurally impossible, tracking during
  deceleration is poor (friction only), and the under-damped speed loop
  overshoots steps and ramp corners.

All numeric defaults are implementer-chosen fixtures, frozen once the
benchmark matrix behaves as required; none of them are measurements.
Integration is explicit Euler at ``dt = 1e-3 s`` (halving the step
moves the settled speed of the reference fixture by well under 1%).
Wheel speed is kept in rpm, rotor angle in radians, torque in N*m.

The per-step update is compiled with numba; a full 35 s simulation is
~35 000 steps and runs in well under a millisecond, which is what makes
multi-thousand-iteration search campaigns practical.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np
from numba import njit

from .signals import Channel, TimeGrid, Trace

TWO_PI = 2.0 * math.pi
SECTOR_WIDTH = math.pi / 3.0
RPM_TO_RADS = TWO_PI / 60.0
RADS_TO_RPM = 60.0 / TWO_PI

#: energy bookkeeping constants (battery sizing is not part of the benchmark)
BATTERY_CAPACITY_J = 3.6e5
REGEN_EFFICIENCY = 0.6
INITIAL_SOC = 0.8

DESIRED = "desired_speed"
MEASURED = "measured_speed"
SECTOR = "sector"
ACTUATION = "actuation"
SOC = "soc"


class SimulationDivergedError(RuntimeError):
    """A simulation produced a non-finite state and was aborted."""


class ControllerKind(str, Enum):
    PWM = "pwm"
    BUCK = "buck"


_KIND_CODE = {ControllerKind.PWM: 0, ControllerKind.BUCK: 1}


@dataclass(frozen=True)
class PlantParams:
    """Physical and control constants of the surrogate powertrain.

    ``kp_i``/``ki_i`` belong to the Buck's inner current loop, which the
    surrogate abstracts into the closed-loop lag ``tau_i``; they are kept
    in the parameter set so override files stay complete.
    """

    J: float          # lumped wheel+rotor inertia, kg*m^2
    Kt: float         # torque constant, N*m/A
    Imax: float       # current limit, A
    c0: float         # static friction torque, N*m
    c1: float         # viscous drag, N*m per rpm
    c2: float         # aerodynamic drag, N*m per rpm^2
    kp_s: float       # speed loop proportional gain
    ki_s: float       # speed loop integral gain, 1/s
    kp_i: float       # current loop proportional gain (abstracted, see tau_i)
    ki_i: float       # current loop integral gain (abstracted, see tau_i)
    tau_i: float      # closed current-loop lag, s
    dt: float         # integration step, s
    regen_gain: float  # braking torque scale relative to motoring (PWM)

    def __post_init__(self) -> None:
        for field_name in ("J", "Kt", "Imax", "dt"):
            if not getattr(self, field_name) > 0.0:
                raise ValueError(f"{field_name} must be positive")
        for field_name in ("c0", "c1", "c2"):
            if getattr(self, field_name) < 0.0:
                raise ValueError(f"{field_name} must be non-negative")
        if self.tau_i < self.dt:
            raise ValueError("tau_i must be at least dt for a stable current lag")


@dataclass(frozen=True)
class PlantState:
    theta: float = 0.0      # rotor angle, rad
    omega: float = 0.0      # wheel speed, rpm
    i: float = 0.0          # motor current, A
    soc: float = INITIAL_SOC
    mode: int = 0           # 0 motoring, 1 braking (the PWM binary flag)
    pi_state: float = 0.0   # speed-loop integrator accumulator


@njit(cache=True)
def _sector_of(theta: float) -> int:
    wrapped = theta % TWO_PI
    k = int(wrapped / SECTOR_WIDTH)
    if k > 5:
        k = 5
    if k < 0:
        k = 0
    return k


@njit(cache=True)
def _step_kernel(
    kind: int,
    theta: float,
    omega: float,
    current: float,
    soc: float,
    integ: float,
    desired: float,
    J: float,
    Kt: float,
    Imax: float,
    c0: float,
    c1: float,
    c2: float,
    kp_s: float,
    ki_s: float,
    tau_i: float,
    dt: float,
    regen_gain: float,
):
    err = desired - omega
    if kind == 0:  # PWM
        if omega > desired:
            mode = 1
            u_raw = kp_s * (-err) + integ
            duty = min(max(u_raw, 0.0), 1.0)
            if duty == u_raw:  # integrator freezes while saturated
                integ = integ + ki_s * (-err) * dt
            torque = -regen_gain * duty * Kt * Imax
            current_new = -duty * Imax
        else:
            mode = 0
            u_raw = kp_s * err + integ
            duty = min(max(u_raw, 0.0), 1.0)
            if duty == u_raw:
                integ = integ + ki_s * err * dt
            torque = duty * Kt * Imax
            current_new = duty * Imax
        actuation = duty
    else:  # Buck: current reference clamped at zero, no active braking
        mode = 0
        u_raw = kp_s * err + integ
        i_ref = min(max(u_raw, 0.0), Imax)
        if i_ref == u_raw:
            integ = integ + ki_s * err * dt
        current_new = current + dt * (i_ref - current) / tau_i
        torque = Kt * current_new
        actuation = current_new

    if omega > 0.0:
        t_load = c0 + c1 * omega + c2 * omega * omega
    elif omega < 0.0:
        t_load = -(c0 - c1 * omega + c2 * omega * omega)
    else:
        t_load = 0.0

    omega_new = omega + dt * (torque - t_load) * RADS_TO_RPM / J
    # friction opposes motion but cannot reverse it within a step
    if omega > 0.0 and omega_new < 0.0 and torque >= 0.0:
        omega_new = 0.0
    elif omega < 0.0 and omega_new > 0.0 and torque <= 0.0:
        omega_new = 0.0
    theta_new = theta + dt * omega_new * RPM_TO_RADS

    power = torque * omega_new * RPM_TO_RADS  # W, negative while regenerating
    if kind == 0 and power < 0.0:
        soc_new = soc + dt * REGEN_EFFICIENCY * (-power) / BATTERY_CAPACITY_J
    else:
        soc_new = soc - dt * max(power, 0.0) / BATTERY_CAPACITY_J
    soc_new = min(max(soc_new, 0.0), 1.0)

    return theta_new, omega_new, current_new, soc_new, integ, mode, actuation


@njit(cache=True)
def _simulate_kernel(
    kind: int,
    desired: np.ndarray,
    J: float,
    Kt: float,
    Imax: float,
    c0: float,
    c1: float,
    c2: float,
    kp_s: float,
    ki_s: float,
    tau_i: float,
    dt: float,
    regen_gain: float,
    theta0: float,
    omega0: float,
    current0: float,
    soc0: float,
    integ0: float,
):
    n = desired.shape[0]
    omega_out = np.empty(n)
    sector_out = np.empty(n)
    actuation_out = np.empty(n)
    soc_out = np.empty(n)
    theta = theta0
    omega = omega0
    current = current0
    soc = soc0
    integ = integ0
    omega_out[0] = omega
    sector_out[0] = float(_sector_of(theta))
    actuation_out[0] = 0.0
    soc_out[0] = soc
    for k in range(1, n):
        theta, omega, current, soc, integ, mode, actuation = _step_kernel(
            kind, theta, omega, current, soc, integ, desired[k - 1],
            J, Kt, Imax, c0, c1, c2, kp_s, ki_s, tau_i, dt, regen_gain,
        )
        if not (
            math.isfinite(omega)
            and math.isfinite(theta)
            and math.isfinite(current)
            and math.isfinite(integ)
        ):
            return k, omega_out, sector_out, actuation_out, soc_out
        omega_out[k] = omega
        sector_out[k] = float(_sector_of(theta))
        actuation_out[k] = actuation
        soc_out[k] = soc
    return -1, omega_out, sector_out, actuation_out, soc_out


def sector(theta: float) -> int:
    """Active commutation sector (0..5) for a rotor angle in radians."""
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    return int(_sector_of(theta))


def step(
    kind: ControllerKind,
    state: PlantState,
    desired: float,
    params: PlantParams,
) -> PlantState:
    """Advance the plant by one ``params.dt`` under the given set point."""
    theta, omega, current, soc, integ, mode, _ = _step_kernel(
        _KIND_CODE[kind],
        state.theta,
        state.omega,
        state.i,
        state.soc,
        state.pi_state,
        float(desired),
        params.J,
        params.Kt,
        params.Imax,
        params.c0,
        params.c1,
        params.c2,
        params.kp_s,
        params.ki_s,
        params.tau_i,
        params.dt,
        params.regen_gain,
    )
    if not all(math.isfinite(v) for v in (theta, omega, current, soc, integ)):
        raise SimulationDivergedError("plant state became non-finite")
    return PlantState(theta, omega, current, soc, mode, integ)


def simulate(
    kind: ControllerKind,
    desired: Trace,
    params: PlantParams,
    channel: str = DESIRED,
) -> Trace:
    """Drive the plant with the desired-speed channel of *desired*.

    The desired trace must be sampled at the integration step; the
    returned trace shares its grid and carries the channels
    ``desired_speed``, ``measured_speed``, ``sector``, ``actuation``
    (duty for PWM, current for Buck) and ``soc``.  The initial state is
    at rest with the battery at the 0.8 state of charge.
    """
    grid = desired.grid
    if abs(grid.dt - params.dt) > 1e-12:
        raise ValueError(
            f"desired trace is sampled at dt={grid.dt}, plant integrates at dt={params.dt}"
        )
    setpoint = desired.values(channel)
    status, omega, sector_arr, actuation, soc = _simulate_kernel(
        _KIND_CODE[kind],
        setpoint,
        params.J,
        params.Kt,
        params.Imax,
        params.c0,
        params.c1,
        params.c2,
        params.kp_s,
        params.ki_s,
        params.tau_i,
        params.dt,
        params.regen_gain,
        0.0,
        0.0,
        0.0,
        INITIAL_SOC,
        0.0,
    )
    if status >= 0:
        raise SimulationDivergedError(
            f"simulation produced a non-finite state at t={grid.time_of(int(status)):.6f}s"
        )
    actuation_unit = "fraction" if kind is ControllerKind.PWM else "dimensionless"
    return Trace(
        grid,
        [
            Channel(DESIRED, "rpm", setpoint.copy()),
            Channel(MEASURED, "rpm", omega),
            Channel(SECTOR, "dimensionless", sector_arr),
            Channel(ACTUATION, actuation_unit, actuation),
            Channel(SOC, "fraction", soc),
        ],
    )


#: frozen benchmark fixtures; see module docstring for the tuning intent
_PWM_DEFAULTS = PlantParams(
    J=0.05,
    Kt=0.8,
    Imax=300.0,
    c0=0.02,
    c1=3.0e-4,
    c2=1.0e-6,
    kp_s=0.05,
    ki_s=2.0,
    kp_i=0.4,
    ki_i=20.0,
    tau_i=0.02,
    dt=1.0e-3,
    regen_gain=3.5,
)

_BUCK_DEFAULTS = PlantParams(
    J=0.05,
    Kt=0.8,
    Imax=60.0,
    c0=0.02,
    c1=3.0e-4,
    c2=1.0e-6,
    kp_s=0.0105,
    ki_s=0.041,
    kp_i=0.4,
    ki_i=20.0,
    tau_i=0.05,
    dt=1.0e-3,
    regen_gain=0.0,
)


def default_params(kind: ControllerKind) -> PlantParams:
    """Frozen per-controller defaults used by the benchmark matrix."""
    return _PWM_DEFAULTS if kind is ControllerKind.PWM else _BUCK_DEFAULTS


def params_with_overrides(base: PlantParams, overrides: Mapping[str, float]) -> PlantParams:
    """Apply a field-keyed override mapping, rejecting unknown keys."""
    known = set(asdict(base))
    unknown = set(overrides) - known
    if unknown:
        raise KeyError(f"unknown plant parameter(s): {sorted(unknown)}")
    return replace(base, **{k: float(v) for k, v in overrides.items()})


def load_param_overrides(path: str | Path, kind: ControllerKind) -> PlantParams:
    with open(path, encoding="utf-8") as fh:
        return params_with_overrides(default_params(kind), json.load(fh))
