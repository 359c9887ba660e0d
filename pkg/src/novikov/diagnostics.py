"""Scalar observables of a state and their time-series serialization."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Mapping

import numpy as np

from .grid import derivative
from .integrator import min_k_u_ux
from .model import FieldPair, ModelParams, momentum_density
from .weights import eval_weight


def _quad(values: np.ndarray, dx: float) -> float:
    # rectangle rule == trapezoid rule on a periodic uniform grid
    return float(np.sum(values) * dx)


def energy(state: FieldPair) -> float:
    """int (u^2 + u_x^2) dx."""
    u = state.u.values
    ux = derivative(state.u).values
    return _quad(u * u + ux * ux, state.grid.dx)


def rho_mass2(state: FieldPair) -> float:
    r = state.rho.values
    return _quad(r * r, state.grid.dx)


def y_l2(state: FieldPair) -> float:
    y = momentum_density(state).values
    return math.sqrt(_quad(y * y, state.grid.dx))


def breaking_monitor(params: ModelParams, state: FieldPair, refine: int = 1) -> float:
    """min_x k u u_x over the grid points (or a refined grid)."""
    return min_k_u_ux(params, state.u, refine)


def sup_norms(state: FieldPair):
    """(max|u|, max|u_x|, max|rho|) over the grid points."""
    return (
        float(np.max(np.abs(state.u.values))),
        float(np.max(np.abs(derivative(state.u).values))),
        float(np.max(np.abs(state.rho.values))),
    )


def lp_norm(values: np.ndarray, dx: float, p: float) -> float:
    if math.isinf(p):
        return float(np.max(np.abs(values)))
    return float((np.sum(np.abs(values) ** p) * dx) ** (1.0 / p))


def weighted_norms(state: FieldPair, w, p: float = 2.0):
    """(||u psi||_p, ||u_x psi||_p, ||rho psi||_p) on the grid.

    Raises :class:`~novikov.weights.WeightOverflowError` if psi overflows
    somewhere on the domain.
    """
    if not (p >= 2 or math.isinf(p)):
        raise ValueError(f"p must be >= 2 or inf, got {p}")
    g = state.grid
    psi = eval_weight(w, g.x)
    ux = derivative(state.u).values
    return tuple(
        lp_norm(f * psi, g.dx, p) for f in (state.u.values, ux, state.rho.values)
    )


@dataclass(frozen=True)
class WeightChoice:
    """A weight tracked during a run together with its Lebesgue exponent."""

    name: str
    weight: object
    p: float = 2.0


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    energy: float
    rho_mass2: float
    min_k_u_ux: float
    max_abs_u: float
    max_abs_ux: float
    max_abs_rho: float
    y_l2: float
    weighted_norms: Mapping[str, tuple] = field(default_factory=dict)

    def to_json(self) -> str:
        """One NDJSON line, numbers printed with 17 significant digits."""
        w = ", ".join(
            f'"{name}": [{", ".join(_num(v) for v in vals)}]'
            for name, vals in self.weighted_norms.items()
        )
        return (
            f'{{"t": {_num(self.time)}, "E": {_num(self.energy)}, '
            f'"R2": {_num(self.rho_mass2)}, "minKUUx": {_num(self.min_k_u_ux)}, '
            f'"maxU": {_num(self.max_abs_u)}, "maxUx": {_num(self.max_abs_ux)}, '
            f'"maxRho": {_num(self.max_abs_rho)}, "yL2": {_num(self.y_l2)}, '
            f'"weighted": {{{w}}}}}'
        )

    @classmethod
    def from_json(cls, obj: Mapping) -> "DiagnosticsRecord":
        def num(v):
            return float("nan") if v is None else float(v)

        return cls(
            num(obj["t"]), num(obj["E"]), num(obj["R2"]), num(obj["minKUUx"]),
            num(obj["maxU"]), num(obj["maxUx"]), num(obj["maxRho"]), num(obj["yL2"]),
            {k: tuple(num(x) for x in v) for k, v in obj["weighted"].items()},
        )


def _num(v: float) -> str:
    v = float(v)
    if not math.isfinite(v):
        return "null"
    return format(v, ".17g")


def record(params: ModelParams, state: FieldPair, weights=()) -> DiagnosticsRecord:
    if not state.is_finite:
        # a corrupt final state is still recorded; every observable is null
        nan = float("nan")
        return DiagnosticsRecord(state.time, nan, nan, nan, nan, nan, nan, nan,
                                 {wc.name: (nan, nan, nan) for wc in weights})
    mu, mux, mrho = sup_norms(state)
    wn = {}
    for wc in weights:
        wn[wc.name] = weighted_norms(state, wc.weight, wc.p)
    return DiagnosticsRecord(
        time=state.time,
        energy=energy(state),
        rho_mass2=rho_mass2(state),
        min_k_u_ux=breaking_monitor(params, state),
        max_abs_u=mu,
        max_abs_ux=mux,
        max_abs_rho=mrho,
        y_l2=y_l2(state),
        weighted_norms=wn,
    )


class DiagnosticsRecorder:
    """Run observer that keeps a record every ``stride`` steps.

    The final state of a run is always recorded, even off-stride; call
    :meth:`finalize` with it after the run returns.
    """

    def __init__(self, params: ModelParams, weights=(), stride: int = 1, sink: IO | None = None):
        self.params = params
        self.weights = tuple(weights)
        self.stride = max(1, int(stride))
        self.sink = sink
        self.records: list[DiagnosticsRecord] = []
        self._calls = 0
        self._last_time = None

    def __call__(self, state: FieldPair, trajectories=None) -> None:
        if self._calls % self.stride == 0:
            self._add(state)
        self._calls += 1

    def finalize(self, state: FieldPair) -> None:
        if self._last_time != state.time:
            self._add(state)

    def _add(self, state):
        rec = record(self.params, state, self.weights)
        self.records.append(rec)
        self._last_time = state.time
        if self.sink is not None:
            self.sink.write(rec.to_json() + "\n")


def energy_law_defect(records, lam: float) -> float:
    """max_t |E(t) exp(2 lam t) / E(0) - 1|."""
    e0 = records[0].energy
    if e0 == 0:
        return max(abs(r.energy) for r in records)
    return max(abs(r.energy * math.exp(2 * lam * r.time) / e0 - 1) for r in records)


def rho_mass_defect(records) -> float:
    r0 = records[0].rho_mass2
    return max(abs(r.rho_mass2 - r0) for r in records) / max(r0, 1e-30)


@dataclass(frozen=True)
class PersistenceFit:
    """At-most-exponential growth of W(t) = sum of the weighted norms.

    ``c_hat`` is the smallest C with log W(t) - log W(0) <= (C M^2 + lam) t
    at every recorded time, where M is the running sup of
    max|u| + max|u_x| + max|rho|.
    """

    name: str
    c_hat: float
    m_hat: float
    all_finite: bool
    max_log_growth: float


def persistence_fit(records, name: str, lam: float) -> PersistenceFit:
    W = np.array([sum(r.weighted_norms[name]) for r in records])
    t = np.array([r.time for r in records])
    M = max(r.max_abs_u + r.max_abs_ux + r.max_abs_rho for r in records)
    finite = bool(np.all(np.isfinite(W)) and np.all(W > 0))
    if not finite:
        return PersistenceFit(name, float("inf"), M, False, float("inf"))
    growth = np.log(W) - np.log(W[0])
    pos = t > 0
    c_hat = 0.0
    if np.any(pos) and M > 0:
        excess = (growth[pos] - lam * t[pos]) / (M**2 * t[pos])
        c_hat = max(0.0, float(np.max(excess)))
    return PersistenceFit(name, c_hat, M, True, float(np.max(growth)))
