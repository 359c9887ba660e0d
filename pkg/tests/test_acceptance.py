"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[acceptance N] PASS|FAIL: ...`` line (visible
without ``-s``) before asserting, so a run of this module doubles as a report.
"""
import math
import time

import numpy as np
import pytest

from novikov.characteristics import TrajectorySet, verify_jacobian, verify_transport
from novikov.config import initial_profiles, load_config, with_override
from novikov.convergence import ManufacturedSolution, perturbation_divergence, spatial_refinement, temporal_order
from novikov.diagnostics import energy_law_defect, persistence_fit
from novikov.grid import SpectralGrid, helmholtz_inverse
from novikov.integrator import RunStatus, run
from novikov.model import FieldPair, rhs, rhs_convolution_form
from novikov.runner import run_scenario
from novikov.verify import run_checks
from novikov.weights import (
    WeightSpec,
    check_moderate,
    check_submultiplicative,
    check_truncation,
    eval_weight,
    min_theta,
)


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def small_gaussian(tmp_path_factory):
    cfg, path = load_config("small_gaussian")
    out = tmp_path_factory.mktemp("small_gaussian")
    t0 = time.perf_counter()
    outcome, manifest = run_scenario(cfg, out, path.parent)
    elapsed = time.perf_counter() - t0
    import json

    records = [json.loads(ln) for ln in (out / "diagnostics.ndjson").read_text().splitlines()]
    return cfg, outcome, records, elapsed


def test_1_energy_decay_law(small_gaussian, capsys):
    cfg, outcome, rows, elapsed = small_gaussian
    lam = cfg.model.lambda_
    e0 = rows[0]["E"]
    defect = max(abs(r["E"] * math.exp(2 * lam * r["t"]) / e0 - 1) for r in rows)
    at_one = [r for r in rows if abs(r["t"] - 1.0) < 1e-9]
    raw = at_one[0]["E"] / e0 if at_one else float("nan")
    ok = (outcome.status == RunStatus.COMPLETED and defect <= 1e-6 and elapsed <= 10
          and abs(raw - math.exp(-1)) <= 1e-6)
    report(capsys, 1, ok, f"max|E e^(2 lam t)/E0 - 1| = {defect:.2e}, E(1)/E(0) = {raw:.10f} "
                          f"(e^-1 = {math.exp(-1):.10f}), runtime {elapsed:.2f} s")


def test_2_rho_mass_conservation(small_gaussian, capsys):
    _, _, rows, _ = small_gaussian
    r0 = rows[0]["R2"]
    drift = max(abs(r["R2"] / r0 - 1) for r in rows)
    report(capsys, 2, drift <= 1e-8, f"max|R2(t)/R2(0) - 1| = {drift:.2e} over {len(rows)} records")


def _random_smooth_state(grid, rng):
    def bumps():
        a = rng.uniform(-1, 1, 3)
        c = rng.uniform(-5, 5, 3)
        w = rng.uniform(0.5, 2.0, 3)
        return sum(ai * np.exp(-((grid.x - ci) / wi) ** 2) for ai, ci, wi in zip(a, c, w))

    return FieldPair.from_arrays(grid, bumps(), bumps())


def test_3_helmholtz_green_equivalence(capsys):
    from novikov.model import ModelParams, NOVIKOV_G

    rng = np.random.default_rng(2024)
    g = SpectralGrid(256, 20.0)
    worst = 0.0
    for _ in range(100):
        p = ModelParams(rng.uniform(0.5, 2.0) * rng.choice([-1, 1]), rng.uniform(0, 1), NOVIKOV_G)
        s = _random_smooth_state(g, rng)
        a, b = rhs(p, s), rhs_convolution_form(p, s)
        worst = max(worst, float(np.max(np.abs(a[0].values - b[0].values))),
                    float(np.max(np.abs(a[1].values - b[1].values))))
    report(capsys, 3, worst <= 1e-12, f"max pointwise difference over 100 random states = {worst:.2e}")


def test_4_spectral_eigenfunctions(capsys):
    worst = 0.0
    for L, n in ((math.pi, 32), (math.pi, 64), (5.0, 128)):
        g = SpectralGrid(n, L)
        for j in range(n // 2):
            kk = math.pi * j / L
            out = helmholtz_inverse(g.sample(lambda x: np.cos(kk * x))).values
            worst = max(worst, float(np.max(np.abs(out - np.cos(kk * g.x) / (1 + kk * kk)))))
    report(capsys, 4, worst <= 1e-13, f"max eigenfunction error = {worst:.2e}")


def test_5_rk4_order_and_spatial_convergence(capsys):
    cfg, path = load_config("small_gaussian")
    params = cfg.build_params()
    ms = ManufacturedSolution(params, SpectralGrid(256, 30.0))
    st = temporal_order(ms)
    ok_t = 3.7 <= st.fitted_order <= 4.3 and all(3.7 <= o <= 4.3 for o in st.pairwise_orders)
    ctrl = with_override(cfg, "control.t_end", 1.0).build_control()
    sp = spatial_refinement(params, lambda x: initial_profiles(cfg.initial, x), cfg.grid.half_length, ctrl)
    ok = ok_t and sp.ratio > 1e3
    orders = ", ".join(f"{o:.3f}" for o in st.pairwise_orders)
    report(capsys, 5, ok, f"temporal order fit {st.fitted_order:.3f} (pairwise {orders}); "
                          f"spatial error {sp.error_coarse:.2e} -> {sp.error_fine:.2e} (ratio {sp.ratio:.2e})")


def test_6_breaking_monitor_pair(capsys):
    steep, _ = load_config("steep")
    a = run(steep.build_params(), steep.build_initial(), steep.build_control())
    trace = np.array(a.min_k_u_ux_trace)
    tail = trace[int(0.8 * len(trace)):]
    mono = bool(np.all(np.diff(tail) < 0))
    small, _ = load_config("small_novikov")
    b = run(small.build_params(), small.build_initial(), small.build_control())
    lowest = min(b.min_k_u_ux_trace)
    ok = (a.status == RunStatus.BREAKING_DETECTED and mono and b.status == RunStatus.COMPLETED
          and b.final_state.time == small.control.t_end and lowest >= -1)
    report(capsys, 6, ok, f"steep: {a.status.value} at t = {a.halt_time:.4f}, monitor strictly decreasing "
                          f"over final {len(tail)} steps = {mono}; small: {b.status.value} to t = "
                          f"{b.final_state.time:g}, min k u u_x = {lowest:.3e}")


def test_7_characteristics(capsys):
    cfg, _ = load_config("small_gaussian")
    cfg = with_override(cfg, "control.t_end", 1.0)
    init = cfg.build_initial()
    ts = TrajectorySet.centered(cfg.trajectories.count, cfg.trajectories.span, cfg.trajectories.center)
    monotone = []
    out = run(cfg.build_params(), init, cfg.build_control(),
              [lambda s, t: monotone.append(bool(np.all(np.diff(t.positions) > 0)))], trajectories=ts)
    jr = verify_jacobian(out.trajectories)
    tr = verify_transport(out.trajectories, out.final_state.rho, init.rho)
    ok = (out.status == RunStatus.COMPLETED and len(ts.labels) == 64 and jr.max_rel_discrepancy <= 1e-4
          and jr.positive and all(monotone) and tr.max_rel_transport <= 1e-5 and tr.max_rel_quadratic <= 1e-5)
    report(capsys, 7, ok, f"q_x discrepancy {jr.max_rel_discrepancy:.2e}, monotone at all {len(monotone)} steps = "
                          f"{all(monotone)}, transport {tr.max_rel_transport:.2e}, quadratic {tr.max_rel_quadratic:.2e}")


def test_8_persistence(small_gaussian, capsys):
    from novikov.diagnostics import DiagnosticsRecord

    cfg, outcome, rows, _ = small_gaussian
    records = [DiagnosticsRecord.from_json(r) for r in rows]
    fit = persistence_fit(records, "exp_half", cfg.model.lambda_)
    W = np.array([sum(r.weighted_norms["exp_half"]) for r in records])
    t = np.array([r.time for r in records])
    bound_ok = bool(np.all(np.log(W) - np.log(W[0]) <= (fit.c_hat * fit.m_hat**2 + cfg.model.lambda_) * t + 1e-12))
    ok = outcome.status == RunStatus.COMPLETED and fit.all_finite and bound_ok and fit.c_hat <= 10
    report(capsys, 8, ok, f"weighted norms finite = {fit.all_finite}, fitted C = {fit.c_hat:.3g}, "
                          f"M = {fit.m_hat:.3g}, bound holds at all {len(records)} records = {bound_ok}")


def test_9_weight_machinery(capsys):
    f = WeightSpec(1.0, 0.5, 1.0, 1.0)
    sub = check_submultiplicative(f, samples=100_000, span=(-50, 50), seed=0)
    psi = WeightSpec(0.5, 0.5, 0.5, 0.5)
    mod = check_moderate(psi, f, samples=100_000, span=(-50, 50), seed=0)
    theta = min_theta(WeightSpec(0.5, 1.0))
    inf_f = float(np.min(eval_weight(f, np.linspace(-50, 50, 20001))))
    tr = check_truncation(psi, f, 20.0, mod.c0, inf_f)
    ok = sub.passed and mod.rel_change_samples <= 0.1 and 0.45 <= theta <= 0.55 and tr.passed
    report(capsys, 9, ok, f"sub-multiplicative worst ratio {sub.worst_ratio:.6f}; C0 = {mod.c0:.4f} "
                          f"(doubled samples {mod.c0_doubled_samples:.4f}, {100 * mod.rel_change_samples:.1f}%); "
                          f"theta_min = {theta:.4f}; truncation worst {tr.worst_ratio:.4f} <= C1 = {tr.c1:.4f}")


def test_10_continuous_dependence(capsys):
    cfg, _ = load_config("small_gaussian")
    cfg = with_override(cfg, "control.t_end", 1.0)
    dv = perturbation_divergence(cfg.build_params(), cfg.build_initial(), cfg.build_control(), 1e-6)
    ok = abs(dv.initial_distance - 1e-6) < 1e-12 and dv.final_distance <= 1e-3 and dv.status_perturbed == "completed"
    report(capsys, 10, ok, f"perturbation {dv.initial_distance:.2e} -> {dv.final_distance:.2e} at t = 1")


def test_11_verify_suite_runtime(capsys):
    t0 = time.perf_counter()
    results = run_checks()
    elapsed = time.perf_counter() - t0
    failed = [r.name for r in results if not r.passed]
    ok = not failed and elapsed <= 60
    report(capsys, 11, ok, f"{len(results) - len(failed)}/{len(results)} checks passed in {elapsed:.1f} s"
                           + (f"; failed: {', '.join(failed)}" if failed else ""))
