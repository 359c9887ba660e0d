"""Particle trajectories dq/dt = k u^2(t, q) and the identities they carry.

Along each trajectory two running integrals are kept:

* ``jacobian_log``  = int_0^t 2k u u_x dtau, so that q_x = exp(jacobian_log);
* ``transport_log`` = -k int_0^t u u_x dtau, so that rho(t, q) = rho0 * exp(transport_log).

Positions are stored unwrapped (monotone in the label); the field is
periodic, so evaluation wraps automatically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SpectralField, check_finite, derivative
from .model import FieldPair, ModelParams


@dataclass(frozen=True)
class TrajectorySet:
    labels: np.ndarray
    positions: np.ndarray
    jacobian_log: np.ndarray
    transport_log: np.ndarray

    @classmethod
    def start(cls, labels) -> "TrajectorySet":
        x = np.asarray(labels, dtype=float).copy()
        return cls(x, x.copy(), np.zeros_like(x), np.zeros_like(x))

    @classmethod
    def centered(cls, count: int, span: float, center: float = 0.0) -> "TrajectorySet":
        return cls.start(center + np.linspace(-span / 2, span / 2, count))

    def wrapped_positions(self, half_length: float) -> np.ndarray:
        period = 2 * half_length
        return (self.positions + half_length) % period - half_length

    def to_rows(self):
        return list(zip(self.labels, self.positions, self.jacobian_log, self.transport_log))


def _velocities(state: FieldPair, params: ModelParams, q: np.ndarray):
    g = state.grid
    u = g.interpolate(state.u, q)
    ux = g.interpolate(derivative(state.u), q)
    check_finite(u, "u at trajectories")
    check_finite(ux, "u_x at trajectories")
    k = params.k
    uux = u * ux
    return k * u * u, 2 * k * uux, -k * uux


def advance_trajectories(
    ts: TrajectorySet,
    state: FieldPair,
    params: ModelParams,
    dt: float,
    stage_states=None,
) -> TrajectorySet:
    """One RK4 step of the trajectory system.

    ``stage_states`` are the four field states at which the PDE's own RK4
    stages were evaluated; passing them makes the combined (field, trajectory)
    system a single RK4 step. Without them the field is held frozen at
    ``state``.
    """
    stages = stage_states if stage_states is not None else (state,) * 4
    q0 = ts.positions
    offs = (0.0, dt / 2, dt / 2, dt)
    kq, kj, kt = [], [], []
    for i, s in enumerate(stages):
        q = q0 if i == 0 else q0 + offs[i] * kq[-1]
        a, b, c = _velocities(s, params, q)
        kq.append(a)
        kj.append(b)
        kt.append(c)

    def comb(ks):
        return (ks[0] + 2 * ks[1] + 2 * ks[2] + ks[3]) / 6

    return TrajectorySet(
        ts.labels,
        q0 + dt * comb(kq),
        ts.jacobian_log + dt * comb(kj),
        ts.transport_log + dt * comb(kt),
    )


@dataclass(frozen=True)
class JacobianReport:
    max_rel_discrepancy: float
    min_fd_jacobian: float
    monotone: bool

    @property
    def positive(self) -> bool:
        return self.min_fd_jacobian > 0


def verify_jacobian(ts: TrajectorySet, state: FieldPair | None = None) -> JacobianReport:
    """Compare finite-difference dq/dx across labels with exp(jacobian_log).

    Central differences (nonuniform three-point) are used in the interior and
    one-sided three-point stencils at the two ends.
    """
    x, q = ts.labels, ts.positions
    if len(x) < 3 or np.any(np.diff(x) <= 0):
        raise ValueError("need at least 3 strictly increasing labels")
    fd = np.gradient(q, x, edge_order=2)
    exact = np.exp(ts.jacobian_log)
    rel = np.abs(fd - exact) / np.abs(exact)
    monotone = bool(np.all(np.diff(q) > 0))
    return JacobianReport(float(np.max(rel)), float(np.min(fd)), monotone)


@dataclass(frozen=True)
class TransportReport:
    max_rel_transport: float
    max_rel_quadratic: float
    max_abs_rho_along: float


def verify_transport(ts: TrajectorySet, rho: SpectralField, rho0: SpectralField) -> TransportReport:
    """Check rho(t,q) = rho0(x) exp(transport_log) and
    rho(t,q)^2 exp(jacobian_log) = rho0(x)^2 on every trajectory.

    Errors are relative to max |rho0| over the labels (absolute when rho0 = 0).
    """
    r_t = rho.grid.interpolate(rho, ts.positions)
    r_0 = rho0.grid.interpolate(rho0, ts.labels)
    scale = max(float(np.max(np.abs(r_0))), 1e-300)
    e1 = np.abs(r_t * np.exp(-ts.transport_log) - r_0)
    e2 = np.abs(r_t**2 * np.exp(ts.jacobian_log) - r_0**2)
    if np.max(np.abs(r_0)) == 0:
        rel1, rel2 = float(np.max(e1)), float(np.max(e2))
    else:
        rel1, rel2 = float(np.max(e1)) / scale, float(np.max(e2)) / scale**2
    return TransportReport(rel1, rel2, float(np.max(np.abs(r_t))))
