import math

import numpy as np
import pytest

from novikov.convergence import ManufacturedSolution
from novikov.grid import SpectralGrid
from novikov.integrator import RunStatus, StepControl, cfl_dt, min_k_u_ux, run, step
from novikov.model import NOVIKOV_G, FieldPair, ModelParams

G = SpectralGrid(128, 20.0)


def gaussian_state(grid, amp_u, amp_rho=0.0, derivative=False):
    x = grid.x
    shape = -2 * x * np.exp(-x * x) if derivative else np.exp(-x * x)
    return FieldPair.from_arrays(grid, amp_u * shape, amp_rho * shape)


def rk4_amplification(z):
    return 1 - z + z**2 / 2 - z**3 / 6 + z**4 / 24


class TestStepControl:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(t_end=1, cfl=0.0),
            dict(t_end=1, cfl=1.5),
            dict(t_end=1, dt_min=1e-2, dt_max=1e-3),
            dict(t_end=-1),
            dict(t_end=1, breaking_threshold=1.0),
            dict(t_end=1, monitor_refine=0),
            dict(t_end=1, strip_floor=0.0),
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            StepControl(**kwargs)

    def test_defaults(self):
        c = StepControl(1.0)
        assert c.breaking_threshold == -1e6 and c.cfl == 0.3


class TestStep:
    def test_zero_state_stays_zero(self):
        p = ModelParams(1.0, 0.5, NOVIKOV_G)
        out = step(p, FieldPair(G.zeros(), G.zeros()), 0.01)
        assert np.all(out.u.values == 0) and np.all(out.rho.values == 0)
        assert out.time == pytest.approx(0.01)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            step(ModelParams(1.0, 0.0), FieldPair(G.zeros(), G.zeros()), 0.0)

    def test_linear_decay_matches_rk4_polynomial(self):
        # amplitude 1e-8 makes the cubic terms ~1e-24 relative to damping
        lam, dt, n = 0.5, 0.01, 100
        p = ModelParams(1.0, lam, NOVIKOV_G)
        state = gaussian_state(G, 1e-8)
        u0 = state.u.values
        for _ in range(n):
            state = step(p, state, dt)
        expect = u0 * rk4_amplification(lam * dt) ** n
        assert np.max(np.abs(state.u.values - expect)) <= 1e-12 * np.max(np.abs(u0))
        assert abs(state.u.values[64] / u0[64] - math.exp(-lam)) < 1e-11

    def test_rho_frozen_without_u(self):
        p = ModelParams(1.0, 0.3, NOVIKOV_G)
        state = FieldPair(G.zeros(), G.sample(lambda x: np.exp(-x * x)))
        out = step(p, state, 0.05)
        assert np.array_equal(out.rho.values, state.rho.values)

    def test_manufactured_local_error_fifth_order(self):
        p = ModelParams(1.0, 0.5, NOVIKOV_G)
        ms = ManufacturedSolution(p, SpectralGrid(256, 30.0))
        errs = []
        for dt in (0.1, 0.05):
            s = step(p, ms.exact(0.0), dt, ms.forcing)
            errs.append(np.max(np.abs(s.u.values - ms.exact(dt).u.values)))
        order = math.log2(errs[0] / errs[1])
        assert 4.6 < order < 5.4


class TestRun:
    def test_t_end_zero_returns_initial(self):
        p = ModelParams(1.0, 0.0, NOVIKOV_G)
        init = gaussian_state(G, 0.1)
        out = run(p, init, StepControl(0.0))
        assert out.status == RunStatus.COMPLETED
        assert out.steps == 0 and out.final_state is init

    def test_lands_exactly_on_t_end(self):
        p = ModelParams(1.0, 0.5, NOVIKOV_G)
        out = run(p, gaussian_state(G, 0.05), StepControl(0.237, dt_max=0.01))
        assert out.status == RunStatus.COMPLETED
        assert out.final_state.time == 0.237

    def test_observers_called_in_order(self):
        calls = []
        p = ModelParams(1.0, 0.0, NOVIKOV_G)
        obs = [lambda s, ts: calls.append(("a", s.time)), lambda s, ts: calls.append(("b", s.time))]
        out = run(p, gaussian_state(G, 0.05), StepControl(0.05, dt_max=0.01), obs)
        assert len(calls) == 2 * (out.steps + 1)
        assert [c[0] for c in calls[:4]] == ["a", "b", "a", "b"]
        times = [t for name, t in calls if name == "a"]
        assert times == sorted(times) and times[0] == 0.0

    def test_non_finite_initial_data(self):
        v = np.zeros(128)
        v[0] = np.nan
        out = run(ModelParams(1.0, 0.0), FieldPair(G.field(v), G.zeros()), StepControl(1.0))
        assert out.status == RunStatus.CORRUPT_STATE

    def test_small_data_completes(self):
        p = ModelParams(1.0, 0.0, NOVIKOV_G)
        out = run(p, gaussian_state(SpectralGrid(256, 20.0), 0.01, 0.01), StepControl(2.0))
        assert out.status == RunStatus.COMPLETED
        assert min(out.min_k_u_ux_trace) > -1e-3

    def test_steep_data_breaks_with_decreasing_monitor(self):
        p = ModelParams(1.0, 0.0, NOVIKOV_G)
        out = run(p, gaussian_state(SpectralGrid(256, 20.0), 1.0, derivative=True), StepControl(5.0))
        assert out.status == RunStatus.BREAKING_DETECTED
        assert 0.3 < out.halt_time < 1.0
        tail = np.array(out.min_k_u_ux_trace[int(0.8 * len(out.min_k_u_ux_trace)):])
        assert np.all(np.diff(tail) < 0)

    def test_threshold_trigger(self):
        p = ModelParams(1.0, 0.0, NOVIKOV_G)
        ctrl = StepControl(5.0, breaking_threshold=-2.0, strip_floor=None)
        out = run(p, gaussian_state(SpectralGrid(256, 20.0), 1.0, derivative=True), ctrl)
        assert out.status == RunStatus.BREAKING_DETECTED
        assert "threshold" in out.halt_reason
        assert out.min_k_u_ux_trace[-1] < -2.0

    def test_deterministic(self):
        p = ModelParams(1.0, 0.5, NOVIKOV_G)
        a = run(p, gaussian_state(G, 0.2, 0.1), StepControl(0.3))
        b = run(p, gaussian_state(G, 0.2, 0.1), StepControl(0.3))
        assert np.array_equal(a.final_state.u.values, b.final_state.u.values)
        assert a.min_k_u_ux_trace == b.min_k_u_ux_trace


class TestMonitorAndCfl:
    def test_min_k_u_ux_sine(self):
        g = SpectralGrid(64, math.pi)
        u = g.sample(np.sin)
        # k sin cos = (k/2) sin 2x, minimum -k/2
        assert min_k_u_ux(ModelParams(2.0, 0.0), u) == pytest.approx(-1.0, abs=1e-12)
        assert min_k_u_ux(ModelParams(2.0, 0.0), u, refine=8) == pytest.approx(-1.0, abs=1e-12)

    def test_cfl_dt_caps(self):
        p = ModelParams(1.0, 0.0)
        ctrl = StepControl(1.0, cfl=0.5, dt_max=0.01)
        assert cfl_dt(p, FieldPair(G.zeros(), G.zeros()), ctrl) == 0.01
        big = FieldPair.from_arrays(G, np.full(128, 10.0), np.zeros(128))
        assert cfl_dt(p, big, ctrl) == pytest.approx(0.5 * G.dx / 100)
