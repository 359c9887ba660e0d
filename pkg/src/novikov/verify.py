"""Bundled invariant checks behind the ``verify`` subcommand.

Every check returns a :class:`CheckResult`; expensive simulations are run
once per :class:`VerifyContext` and shared between the checks that need them.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import grid as sg
from .characteristics import TrajectorySet, verify_jacobian, verify_transport
from .convergence import ManufacturedSolution, perturbation_divergence, spatial_refinement, temporal_order
from .diagnostics import DiagnosticsRecorder, WeightChoice, energy_law_defect, persistence_fit, rho_mass_defect
from .integrator import RunStatus, StepControl, run
from .model import NOVIKOV_G, FieldPair, ModelParams, rhs, rhs_convolution_form
from .weights import WeightSpec, check_moderate, check_submultiplicative, check_truncation, min_theta


@dataclass
class VerifyHooks:
    """Fault injection for exercising the harness itself."""

    corrupt_helmholtz: bool = False
    lambda_shift: float = 0.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


SMALL_L, SMALL_N = 20.0, 256


def small_data(grid, amp=0.05):
    g = np.exp(-grid.x**2)
    return FieldPair.from_arrays(grid, amp * g, amp * g)


class VerifyContext:
    def __init__(self, hooks: VerifyHooks | None = None):
        self.hooks = hooks or VerifyHooks()

    def make_grid(self, n: int, L: float) -> sg.SpectralGrid:
        g = sg.SpectralGrid(n, L)
        if self.hooks.corrupt_helmholtz:
            bad = np.array(g.inverse_helmholtz_symbol)
            bad[1] *= 1.01
            bad.flags.writeable = False
            object.__setattr__(g, "inverse_helmholtz_symbol", bad)
        return g

    @cached_property
    def small_params(self):
        return ModelParams(1.0, 0.5, NOVIKOV_G)

    @cached_property
    def small_run(self):
        g = self.make_grid(SMALL_N, SMALL_L)
        rec = DiagnosticsRecorder(self.small_params, [WeightChoice("exp_half", WeightSpec(0.5, 1, 0, 0), 2.0)])
        out = run(self.small_params, small_data(g), StepControl(t_end=2.0), [rec])
        return out, rec.records

    @cached_property
    def characteristics_run(self):
        g = self.make_grid(SMALL_N, SMALL_L)
        init = small_data(g)
        ts = TrajectorySet.centered(64, 0.063)
        monotone = []
        out = run(self.small_params, init, StepControl(t_end=1.0),
                  [lambda s, t: monotone.append(bool(np.all(np.diff(t.positions) > 0)))],
                  trajectories=ts)
        return out, init, all(monotone)


CHECKS: dict[str, Callable[[VerifyContext], tuple]] = {}


def check(name):
    def deco(fn):
        CHECKS[name] = fn
        return fn

    return deco


@check("grid.round_trip")
def _round_trip(ctx):
    g = ctx.make_grid(256, 20.0)
    f = np.random.default_rng(1).standard_normal(256)
    err = np.max(np.abs(g.inverse_transform(g.transform(f)) - f)) / np.max(np.abs(f))
    return err <= 1e-12, f"relative error {err:.2e}"


@check("grid.helmholtz_eigenfunctions")
def _helmholtz_eigen(ctx):
    g = ctx.make_grid(64, math.pi)
    worst = 0.0
    for m in range(0, 20):
        out = sg.helmholtz_inverse(g.sample(lambda x: np.cos(m * x))).values
        worst = max(worst, np.max(np.abs(out - np.cos(m * g.x) / (1 + m * m))))
    return worst <= 1e-13, f"max error {worst:.2e} over cos(mx), m < 20"


@check("grid.derivative_gaussian")
def _deriv(ctx):
    g = ctx.make_grid(256, 20.0)
    d = sg.derivative(g.sample(lambda x: np.exp(-x * x))).values
    err = np.max(np.abs(d + 2 * g.x * np.exp(-g.x**2)))
    return err <= 1e-8, f"max error {err:.2e}"


@check("grid.dealiased_cubic")
def _cubic(ctx):
    g = ctx.make_grid(16, math.pi)
    c = g.sample(np.cos)
    err = np.max(np.abs(sg.dealiased_product([c, c, c]).values - (3 * np.cos(g.x) + np.cos(3 * g.x)) / 4))
    return err <= 1e-12, f"max error {err:.2e}"


@check("grid.integration_by_parts")
def _ibp(ctx):
    g = ctx.make_grid(128, 10.0)
    rng = np.random.default_rng(2)
    f = g.field(rng.standard_normal(128))
    h = g.field(rng.standard_normal(128))
    skew = abs(np.dot(sg.derivative(f).values, f.values))
    sym = abs(np.dot(sg.helmholtz_inverse(f).values, h.values) - np.dot(f.values, sg.helmholtz_inverse(h).values))
    pos = np.dot(sg.helmholtz_inverse(f).values, f.values)
    ok = skew <= 1e-10 and sym <= 1e-10 and pos >= 0
    return ok, f"<f_x,f> = {skew:.1e}, asymmetry {sym:.1e}, <Lf,f> = {pos:.3g}"


@check("model.convolution_form")
def _conv(ctx):
    g = ctx.make_grid(256, 20.0)
    p = ModelParams(1.0, 0.3, NOVIKOV_G)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        a, b, c = rng.uniform(-1, 1, 3)
        s = FieldPair.from_arrays(g, a * np.exp(-(g.x - c) ** 2), b * np.exp(-((g.x + c) ** 2) / 2))
        r1, r2 = rhs(p, s), rhs_convolution_form(p, s)
        worst = max(worst, np.max(np.abs(r1[0].values - r2[0].values)), np.max(np.abs(r1[1].values - r2[1].values)))
    return worst <= 1e-12, f"max difference {worst:.2e} over 100 states"


@check("model.groupings_agree")
def _groupings(ctx):
    g = ctx.make_grid(256, 20.0)
    p = ModelParams(-0.7, 0.2, (0.1, 0.0, 4 / 3))
    s = FieldPair.from_arrays(g, 0.6 * np.exp(-g.x**2), 0.4 / np.cosh(g.x))
    a, b = rhs(p, s)[0].values, rhs(p, s, grouping="split")[0].values
    err = np.max(np.abs(a - b))
    return err <= 1e-12, f"max difference {err:.2e}"


@check("diagnostics.energy_law")
def _energy(ctx):
    out, recs = ctx.small_run
    lam = ctx.small_params.lam + ctx.hooks.lambda_shift
    defect = energy_law_defect(recs, lam)
    r_end = recs[-1]
    rate = -math.log(r_end.energy / recs[0].energy) / (2 * r_end.time)
    ok = out.status == RunStatus.COMPLETED and defect <= 1e-6
    return ok, f"max |E e^(2 lam t)/E0 - 1| = {defect:.2e}; measured decay rate {rate:.9f} vs lambda {lam:g}"


@check("diagnostics.rho_mass")
def _rho(ctx):
    _, recs = ctx.small_run
    d = rho_mass_defect(recs)
    return d <= 1e-8, f"max relative drift {d:.2e}"


@check("diagnostics.persistence")
def _persist(ctx):
    _, recs = ctx.small_run
    fit = persistence_fit(recs, "exp_half", ctx.small_params.lam)
    return fit.all_finite and fit.c_hat <= 10, f"C_hat = {fit.c_hat:.3g}, M = {fit.m_hat:.3g}"


@check("integrator.breaking_pair")
def _breaking(ctx):
    g = ctx.make_grid(256, 20.0)
    p = ModelParams(1.0, 0.0, NOVIKOV_G)
    steep = FieldPair.from_arrays(g, -2 * g.x * np.exp(-g.x**2), np.zeros(256))
    a = run(p, steep, StepControl(t_end=5.0))
    tr = np.array(a.min_k_u_ux_trace)
    tail = tr[int(0.8 * len(tr)):]
    mono = bool(np.all(np.diff(tail) < 0))
    b = run(p, small_data(g, 0.01), StepControl(t_end=5.0))
    low = min(b.min_k_u_ux_trace)
    ok = a.status == RunStatus.BREAKING_DETECTED and mono and b.status == RunStatus.COMPLETED and low >= -1
    return ok, (f"steep: {a.status.value} at t={a.halt_time:.3f}, tail monotone {mono}; "
                f"small: {b.status.value}, min k u u_x {low:.3g}")


@check("characteristics.identities")
def _chars(ctx):
    out, init, monotone = ctx.characteristics_run
    jr = verify_jacobian(out.trajectories)
    tr = verify_transport(out.trajectories, out.final_state.rho, init.rho)
    ok = (jr.max_rel_discrepancy <= 1e-4 and jr.positive and monotone
          and tr.max_rel_transport <= 1e-5 and tr.max_rel_quadratic <= 1e-5)
    return ok, (f"q_x discrepancy {jr.max_rel_discrepancy:.1e}, monotone {monotone}, "
                f"transport {tr.max_rel_transport:.1e}, quadratic {tr.max_rel_quadratic:.1e}")


@check("weights.submultiplicative")
def _submult(ctx):
    r = check_submultiplicative(WeightSpec(1, 0.5, 1, 1), 100_000, (-50, 50), seed=0)
    return r.passed, f"worst ratio {r.worst_ratio:.6f}"


@check("weights.moderate_and_truncation")
def _moderate(ctx):
    f = WeightSpec(1, 0.5, 1, 1)
    psi = WeightSpec(0.5, 0.5, 0.5, 0.5)
    m = check_moderate(psi, f, 100_000, (-50, 50), seed=0)
    inf_f = float(np.exp(np.min(f.log_eval(np.linspace(-50, 50, 100001)))))
    t = check_truncation(psi, f, 20.0, m.c0, inf_f, 100_000, (-50, 50), seed=1)
    return m.passed and t.passed, (f"C0 = {m.c0:.4f} (doubling {m.rel_change_samples:.1%}), "
                                   f"truncation worst {t.worst_ratio:.4f} <= C1 {t.c1:.4f}")


@check("weights.admissible_theta")
def _theta(ctx):
    th = min_theta(WeightSpec(0.5, 1, 0, 0))
    return 0.45 <= th <= 0.55, f"minimal theta {th:.6f}"


@check("convergence.temporal_order")
def _order(ctx):
    p = ModelParams(1.0, 0.5, NOVIKOV_G)
    st = temporal_order(ManufacturedSolution(p, ctx.make_grid(256, 30.0)))
    ok = 3.7 <= st.fitted_order <= 4.3 and all(3.7 <= o <= 4.3 for o in st.pairwise_orders)
    return ok, "orders " + ", ".join(f"{o:.3f}" for o in st.pairwise_orders)


@check("convergence.spatial")
def _spatial(ctx):
    p = ModelParams(1.0, 0.5, NOVIKOV_G)
    st = spatial_refinement(p, lambda x: (0.05 * np.exp(-x * x), 0.05 * np.exp(-x * x)), 20.0,
                            StepControl(t_end=1.0, dt_max=0.01))
    return st.ratio > 1e3, f"error {st.error_coarse:.2e} -> {st.error_fine:.2e}, ratio {st.ratio:.3g}"


@check("convergence.continuous_dependence")
def _cdep(ctx):
    g = ctx.make_grid(256, 20.0)
    st = perturbation_divergence(ctx.small_params, small_data(g), StepControl(t_end=1.0))
    return st.final_distance <= 1e-3, f"{st.initial_distance:.1e} -> {st.final_distance:.2e}"


def run_checks(name_filter: str | None = None, hooks: VerifyHooks | None = None, progress=None):
    ctx = VerifyContext(hooks)
    results = []
    for name, fn in CHECKS.items():
        if name_filter and name_filter not in name:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn(ctx)
        except Exception as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        res = CheckResult(name, bool(ok), detail, time.perf_counter() - t0)
        results.append(res)
        if progress:
            progress(res)
    return results


def format_table(results) -> str:
    w = max((len(r.name) for r in results), default=4)
    lines = [f"{'check':<{w}}  result  time    detail"]
    for r in results:
        lines.append(f"{r.name:<{w}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:5.1f}s  {r.detail}")
    return "\n".join(lines)
