"""Refinement studies: temporal order from a manufactured solution, spatial
refinement on smooth data, and divergence of perturbed initial data."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import SpectralGrid, derivative
from .integrator import StepControl, RunStatus, run, step
from .model import FieldPair, ModelParams, rhs


class ManufacturedSolution:
    """u*(x,t) = rho*(x,t) = exp(-t) s(x) made exact by a forcing term.

    The forcing is d/dt(u*, rho*) minus the discrete right-hand side at
    (u*, rho*), so u* solves the forced semi-discrete system exactly and the
    measured error is purely temporal.
    """

    def __init__(self, params: ModelParams, grid: SpectralGrid, profile=None):
        self.params = params
        self.grid = grid
        prof = profile if profile is not None else (lambda x: 1 / np.cosh(x))
        self.shape = np.asarray(prof(grid.x), dtype=float)

    def exact(self, t: float) -> FieldPair:
        v = math.exp(-t) * self.shape
        return FieldPair.from_arrays(self.grid, v, v, t)

    def forcing(self, t: float):
        ex = self.exact(t)
        du, drho = rhs(self.params, ex)
        dt_exact = -ex.u.values
        return dt_exact - du.values, dt_exact - drho.values

    def error(self, dt: float, t_end: float) -> float:
        nsteps = int(round(t_end / dt))
        if not math.isclose(nsteps * dt, t_end, rel_tol=1e-12):
            raise ValueError("t_end must be an integer multiple of dt")
        state = self.exact(0.0)
        for _ in range(nsteps):
            state = step(self.params, state, dt, self.forcing)
        ex = self.exact(state.time)
        return float(
            max(np.max(np.abs(state.u.values - ex.u.values)),
                np.max(np.abs(state.rho.values - ex.rho.values)))
        )


@dataclass(frozen=True)
class OrderStudy:
    dts: tuple
    errors: tuple
    pairwise_orders: tuple
    fitted_order: float


def temporal_order(ms: ManufacturedSolution, dts=(0.1, 0.05, 0.025, 0.0125), t_end: float = 1.0) -> OrderStudy:
    errs = [ms.error(dt, t_end) for dt in dts]
    pair = tuple(
        math.log(errs[i] / errs[i + 1]) / math.log(dts[i] / dts[i + 1])
        for i in range(len(dts) - 1)
    )
    fit = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    return OrderStudy(tuple(dts), tuple(errs), pair, fit)


def h1_norm(u: np.ndarray, grid: SpectralGrid) -> float:
    ux = derivative(grid.field(u)).values
    return math.sqrt(float(np.sum(u * u + ux * ux) * grid.dx))


def pair_h1_distance(a: FieldPair, b: FieldPair) -> float:
    """H^1 distance in u plus L^2 distance in rho."""
    g = a.grid
    du = a.u.values - b.u.values
    dr = a.rho.values - b.rho.values
    return h1_norm(du, g) + math.sqrt(float(np.sum(dr * dr) * g.dx))


@dataclass(frozen=True)
class SpatialStudy:
    n_coarse: int
    n_fine: int
    n_reference: int
    error_coarse: float
    error_fine: float
    ratio: float


def spatial_refinement(params: ModelParams, init_fn, half_length: float, ctrl: StepControl,
                       n_coarse: int = 128, n_fine: int = 256, n_reference: int = 512) -> SpatialStudy:
    """Errors at t_end of the n_coarse and n_fine solutions against n_reference.

    ``init_fn(x) -> (u0, rho0)``. All runs use the same fixed time step so
    the temporal error is common to the three and largely cancels. Errors
    are compared on the coarse grid points, which all three grids share.
    """
    finals = {}
    for n in (n_coarse, n_fine, n_reference):
        g = SpectralGrid(n, half_length)
        u0, r0 = init_fn(g.x)
        s = FieldPair.from_arrays(g, u0, r0)
        nsteps = int(round(ctrl.t_end / ctrl.dt_max))
        for _ in range(nsteps):
            s = step(params, s, ctrl.dt_max)
        finals[n] = s
    ref = finals[n_reference]

    def err(n):
        stride_r = n_reference // n_coarse
        stride_n = n // n_coarse
        a = finals[n]
        return float(max(
            np.max(np.abs(a.u.values[::stride_n] - ref.u.values[::stride_r])),
            np.max(np.abs(a.rho.values[::stride_n] - ref.rho.values[::stride_r])),
        ))

    ec, ef = err(n_coarse), err(n_fine)
    return SpatialStudy(n_coarse, n_fine, n_reference, ec, ef, ec / max(ef, 1e-300))


@dataclass(frozen=True)
class DivergenceStudy:
    initial_distance: float
    final_distance: float
    ratio: float
    status_base: str
    status_perturbed: str


def perturbation_divergence(params: ModelParams, init: FieldPair, ctrl: StepControl,
                            size: float = 1e-6, seed: int = 0) -> DivergenceStudy:
    """Evolve init and init + delta with ||delta|| = ``size`` (H^1 x L^2).

    delta is a smooth random band-limited bump scaled to the requested size.
    """
    g = init.grid
    rng = np.random.default_rng(seed)
    env = np.exp(-(g.x**2) / 4)
    modes = np.arange(1, 6)
    bu = sum(rng.normal() * np.cos(m * g.x / 2 + rng.uniform(0, 2 * np.pi)) for m in modes) * env
    br = sum(rng.normal() * np.cos(m * g.x / 2 + rng.uniform(0, 2 * np.pi)) for m in modes) * env
    pert0 = FieldPair.from_arrays(g, init.u.values + bu, init.rho.values + br)
    scale = size / pair_h1_distance(pert0, init)
    pert = FieldPair.from_arrays(g, init.u.values + scale * bu, init.rho.values + scale * br)
    d0 = pair_h1_distance(pert, init)
    a = run(params, init, ctrl)
    b = run(params, pert, ctrl)
    d1 = pair_h1_distance(a.final_state, b.final_state)
    return DivergenceStudy(d0, d1, d1 / d0, a.status.value, b.status.value)


def is_smooth(outcome) -> bool:
    return outcome.status == RunStatus.COMPLETED
