"""Classical RK4 time stepping with a transport-speed CFL limit and
wave-breaking halt logic."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import CorruptStateError, SpectralField, analyticity_strip, derivative
from .model import FieldPair, ModelParams, rhs

log = logging.getLogger(__name__)

SPEED_EPS = 1e-12

# forcing(t) -> (F_u, F_rho) arrays; used for manufactured solutions
Forcing = Callable[[float], tuple]


@dataclass(frozen=True)
class StepControl:
    t_end: float
    cfl: float = 0.3
    dt_min: float = 1e-10
    dt_max: float = 1e-2
    breaking_threshold: float = -1e6
    # halt once the analyticity strip of u is narrower than this many grid
    # spacings; None disables the check
    strip_floor: float | None = 1.0
    # subgrid refinement for the halting monitor; a moving front otherwise
    # makes the grid minimum oscillate by up to one cell's worth
    monitor_refine: int = 8

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not 0 < self.dt_min < self.dt_max:
            raise ValueError("need 0 < dt_min < dt_max")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.breaking_threshold >= 0:
            raise ValueError("breaking_threshold must be negative")
        if self.monitor_refine < 1:
            raise ValueError("monitor_refine must be >= 1")
        if self.strip_floor is not None and not self.strip_floor > 0:
            raise ValueError("strip_floor must be positive or None")


class RunStatus(str, enum.Enum):
    COMPLETED = "completed"
    BREAKING_DETECTED = "breaking_detected"
    CORRUPT_STATE = "corrupt_state"


@dataclass(frozen=True)
class RunOutcome:
    status: RunStatus
    final_state: FieldPair
    halt_time: float
    halt_reason: str
    steps: int = 0
    min_k_u_ux_trace: tuple = ()
    trajectories: object = None


class StageError(CorruptStateError):
    def __init__(self, stage: int, cause: CorruptStateError):
        self.stage = stage
        self.term = cause.term
        FloatingPointError.__init__(self, f"RK4 stage {stage}: {cause}")


def _shift(state: FieldPair, du, drho, h: float, time: float) -> FieldPair:
    g = state.grid
    return FieldPair(
        g.field(state.u.values + h * du),
        g.field(state.rho.values + h * drho),
        time,
    )


def _eval(params, state, forcing, stage):
    try:
        du, drho = rhs(params, state)
    except CorruptStateError as exc:
        raise StageError(stage, exc) from exc
    du, drho = du.values, drho.values
    if forcing is not None:
        fu, frho = forcing(state.time)
        du = du + fu
        drho = drho + frho
    return du, drho


def rk4_stages(params: ModelParams, state: FieldPair, dt: float, forcing: Forcing | None = None):
    """One RK4 step; returns the new state and the four stage states."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    t = state.time
    s1 = state
    k1 = _eval(params, s1, forcing, 1)
    s2 = _shift(state, *k1, dt / 2, t + dt / 2)
    k2 = _eval(params, s2, forcing, 2)
    s3 = _shift(state, *k2, dt / 2, t + dt / 2)
    k3 = _eval(params, s3, forcing, 3)
    s4 = _shift(state, *k3, dt, t + dt)
    k4 = _eval(params, s4, forcing, 4)
    du = (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6
    drho = (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6
    new = _shift(state, du, drho, dt, t + dt)
    return new, (s1, s2, s3, s4)


def step(params: ModelParams, state: FieldPair, dt: float, forcing: Forcing | None = None) -> FieldPair:
    return rk4_stages(params, state, dt, forcing)[0]


def min_k_u_ux(params: ModelParams, u: SpectralField, refine: int = 1) -> float:
    """min_x k u u_x, on the grid or on a ``refine``-times finer interpolating grid."""
    ux = derivative(u)
    if refine > 1:
        g = u.grid
        return float(np.min(params.k * g.refine(u.values, refine) * g.refine(ux.values, refine)))
    return float(np.min(params.k * u.values * ux.values))


def cfl_dt(params: ModelParams, state: FieldPair, ctrl: StepControl) -> float:
    speed = np.max(abs(params.k) * state.u.values**2 + SPEED_EPS)
    return min(ctrl.dt_max, ctrl.cfl * state.grid.dx / speed)


def run(
    params: ModelParams,
    init: FieldPair,
    ctrl: StepControl,
    observers: Sequence[Callable] = (),
    *,
    forcing: Forcing | None = None,
    trajectories=None,
) -> RunOutcome:
    """Integrate from ``init`` to ``ctrl.t_end``.

    Each observer is called as ``observer(state, trajectories)`` on the
    initial state and after every accepted step, in list order; the second
    argument is None unless a :class:`~novikov.characteristics.TrajectorySet`
    was passed, in which case it is advanced in lockstep with the fields
    using the same RK4 stage states.
    """
    from .characteristics import advance_trajectories

    state = init
    trace = []
    ts = trajectories
    nsteps = 0

    def finish(status, reason):
        return RunOutcome(status, state, state.time, reason, nsteps, tuple(trace), ts)

    if not state.is_finite:
        return finish(RunStatus.CORRUPT_STATE, "initial data not finite")
    trace.append(min_k_u_ux(params, state.u, ctrl.monitor_refine))
    for obs in observers:
        obs(state, ts)
    t_end = ctrl.t_end
    while state.time < t_end - ctrl.dt_min:
        dt = cfl_dt(params, state, ctrl)
        if dt < ctrl.dt_min:
            return finish(RunStatus.BREAKING_DETECTED, f"time step collapsed to {dt:.3e}")
        if state.time + dt > t_end - ctrl.dt_min:
            # absorb a sub-dt_min remainder into this step
            dt = t_end - state.time
        try:
            new, stages = rk4_stages(params, state, dt, forcing)
        except CorruptStateError as exc:
            return finish(RunStatus.CORRUPT_STATE, str(exc))
        if not new.is_finite:
            return finish(RunStatus.CORRUPT_STATE, "non-finite field after step")
        if ts is not None:
            try:
                ts = advance_trajectories(ts, state, params, dt, stage_states=stages)
            except CorruptStateError as exc:
                return finish(RunStatus.CORRUPT_STATE, str(exc))
        if t_end - new.time < ctrl.dt_min:
            new = new.replace(time=t_end)
        state = new
        nsteps += 1
        m = min_k_u_ux(params, state.u, ctrl.monitor_refine)
        trace.append(m)
        for obs in observers:
            obs(state, ts)
        if not np.isfinite(m):
            return finish(RunStatus.CORRUPT_STATE, "non-finite k u u_x")
        if m < ctrl.breaking_threshold:
            return finish(
                RunStatus.BREAKING_DETECTED,
                f"min k u u_x = {m:.6e} below threshold {ctrl.breaking_threshold:g}",
            )
        if ctrl.strip_floor is not None:
            delta = analyticity_strip(state.u)
            if delta < ctrl.strip_floor * state.grid.dx:
                return finish(
                    RunStatus.BREAKING_DETECTED,
                    f"analyticity strip {delta:.4e} narrower than "
                    f"{ctrl.strip_floor:g} grid spacings (min k u u_x = {m:.6e})",
                )
    return finish(RunStatus.COMPLETED, "reached t_end")
