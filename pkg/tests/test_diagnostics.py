import io
import json
import math

import numpy as np
import pytest

from novikov.diagnostics import (
    DiagnosticsRecord,
    DiagnosticsRecorder,
    WeightChoice,
    breaking_monitor,
    energy,
    energy_law_defect,
    lp_norm,
    persistence_fit,
    record,
    rho_mass2,
    rho_mass_defect,
    sup_norms,
    weighted_norms,
    y_l2,
)
from novikov.grid import SpectralGrid
from novikov.integrator import StepControl, run
from novikov.model import NOVIKOV_G, FieldPair, ModelParams
from novikov.weights import CustomWeight, WeightOverflowError, WeightSpec

PI_GRID = SpectralGrid(64, math.pi)
G = SpectralGrid(256, 20.0)
UNIT = CustomWeight(lambda x: np.zeros_like(x), name="unit")
KEYS = {"t", "E", "R2", "minKUUx", "maxU", "maxUx", "maxRho", "yL2", "weighted"}


def gaussian_pair(grid=G, a=1.0, r=1.0):
    return FieldPair(grid.sample(lambda x: a * np.exp(-x * x)), grid.sample(lambda x: r * np.exp(-x * x)))


class TestScalars:
    def test_energy_of_sine(self):
        assert energy(FieldPair(PI_GRID.sample(np.sin), PI_GRID.zeros())) == pytest.approx(2 * math.pi, rel=1e-14)

    def test_energy_of_gaussian(self):
        assert energy(gaussian_pair()) == pytest.approx(2 * math.sqrt(math.pi / 2), rel=1e-12)

    def test_rho_mass_of_sech(self):
        s = FieldPair(G.zeros(), G.sample(lambda x: 1 / np.cosh(x)))
        assert rho_mass2(s) == pytest.approx(2.0, rel=1e-12)

    def test_y_l2_of_sine(self):
        # y = 2 sin x, ||y||^2 = 4 pi
        assert y_l2(FieldPair(PI_GRID.sample(np.sin), PI_GRID.zeros())) == pytest.approx(2 * math.sqrt(math.pi))

    def test_zero_state(self):
        z = FieldPair(G.zeros(), G.zeros())
        assert energy(z) == rho_mass2(z) == y_l2(z) == 0.0
        assert sup_norms(z) == (0.0, 0.0, 0.0)

    def test_sup_norms(self):
        s = FieldPair(PI_GRID.sample(lambda x: 3 * np.sin(x)), PI_GRID.sample(lambda x: -2 * np.cos(x)))
        mu, mux, mrho = sup_norms(s)
        assert mu == pytest.approx(3.0) and mux == pytest.approx(3.0) and mrho == pytest.approx(2.0)

    def test_breaking_monitor_against_dense_scan(self):
        # k u u_x = -2 k x exp(-2 x^2); scan the closed form on a 1e-6 lattice
        k = 1.7
        xs = np.arange(-3, 3, 1e-6)
        oracle = float(np.min(-2 * k * xs * np.exp(-2 * xs * xs)))
        p = ModelParams(k, 0.0)
        state = gaussian_pair()
        coarse = breaking_monitor(p, state)
        fine = breaking_monitor(p, state, refine=8)
        assert oracle <= fine <= coarse
        assert fine - oracle < 1e-3
        assert oracle == pytest.approx(-k * math.exp(-0.5), rel=1e-10)

    def test_lp_norm_inf(self):
        assert lp_norm(np.array([1.0, -3.0, 2.0]), 0.1, math.inf) == 3.0


class TestWeightedNorms:
    def test_unit_weight_gives_plain_norms(self):
        s = gaussian_pair(r=0.5)
        wu, wux, wr = weighted_norms(s, UNIT, 2.0)
        assert wu == pytest.approx((math.pi / 2) ** 0.25, rel=1e-12)
        assert wr == pytest.approx(0.5 * (math.pi / 2) ** 0.25, rel=1e-12)
        assert wux**2 == pytest.approx(energy(s) - wu**2, rel=1e-12)

    def test_zero_state(self):
        z = FieldPair(G.zeros(), G.zeros())
        assert weighted_norms(z, WeightSpec(0.5, 1.0), 2.0) == (0.0, 0.0, 0.0)

    def test_sup_norm_of_weighted(self):
        s = gaussian_pair()
        wu, _, _ = weighted_norms(s, WeightSpec(), math.inf)
        assert wu == pytest.approx(2.0)

    def test_truncation_monotone(self):
        s = FieldPair(G.sample(lambda x: np.exp(-np.sqrt(x * x + 0.01))), G.zeros())
        w = WeightSpec(0.5, 1.0)
        vals = [weighted_norms(s, w.truncated(n), 2.0)[0] for n in (2.5, 5.0, 50.0, 1e6)]
        assert vals == sorted(vals)
        assert vals[-1] == pytest.approx(weighted_norms(s, w, 2.0)[0])

    def test_overflow_reported(self):
        s = gaussian_pair(SpectralGrid(256, 2000.0))
        with pytest.raises(WeightOverflowError):
            weighted_norms(s, WeightSpec(0.9, 1.0), 2.0)

    def test_rejects_small_p(self):
        with pytest.raises(ValueError):
            weighted_norms(gaussian_pair(), UNIT, 1.5)


class TestRecordSerialization:
    def test_keys_and_round_trip(self):
        wc = WeightChoice("exp_half", WeightSpec(0.5, 1.0), 2.0)
        rec = record(ModelParams(1.0, 0.0), gaussian_pair(a=0.3), [wc])
        obj = json.loads(rec.to_json())
        assert set(obj) == KEYS
        assert set(obj["weighted"]) == {"exp_half"} and len(obj["weighted"]["exp_half"]) == 3
        back = DiagnosticsRecord.from_json(obj)
        assert back.energy == rec.energy and back.weighted_norms == rec.weighted_norms

    def test_seventeen_digits(self):
        rec = DiagnosticsRecord(0.1, 1 / 3, 0.0, -0.5, 0.0, 0.0, 0.0, 0.0)
        assert '"E": 0.33333333333333331' in rec.to_json()

    def test_non_finite_is_null(self):
        rec = DiagnosticsRecord(0.0, float("nan"), 0.0, -math.inf, 0.0, 0.0, 0.0, 0.0)
        obj = json.loads(rec.to_json())
        assert obj["E"] is None and obj["minKUUx"] is None


class TestRecorder:
    def test_stride_and_final_record(self):
        p = ModelParams(1.0, 0.5, NOVIKOV_G)
        sink = io.StringIO()
        rec = DiagnosticsRecorder(p, stride=3, sink=sink)
        out = run(p, gaussian_pair(a=0.05, r=0.05), StepControl(0.1, dt_max=0.01), [rec])
        rec.finalize(out.final_state)
        times = [r.time for r in rec.records]
        assert times[0] == 0.0 and times[-1] == out.final_state.time
        assert len(times) == len(set(times))
        lines = sink.getvalue().splitlines()
        assert len(lines) == len(rec.records)
        assert all(set(json.loads(ln)) == KEYS for ln in lines)

    def test_energy_law_on_small_run(self):
        p = ModelParams(1.0, 0.5, NOVIKOV_G)
        rec = DiagnosticsRecorder(p)
        run(p, gaussian_pair(a=0.05, r=0.05), StepControl(1.0), [rec])
        assert energy_law_defect(rec.records, 0.5) < 1e-8
        assert rho_mass_defect(rec.records) < 1e-10


def _synthetic(times, W, M=1.0):
    return [DiagnosticsRecord(t, 1.0, 1.0, 0.0, M, 0.0, 0.0, 0.0, {"w": (w, 0.0, 0.0)}) for t, w in zip(times, W)]


class TestPersistenceFit:
    def test_exponential_growth_recovered(self):
        t = np.linspace(0, 2, 21)
        fit = persistence_fit(_synthetic(t, np.exp(0.7 * t), M=1.0), "w", 0.0)
        assert fit.c_hat == pytest.approx(0.7, rel=1e-9) and fit.all_finite

    def test_decay_gives_zero(self):
        t = np.linspace(0, 2, 21)
        assert persistence_fit(_synthetic(t, np.exp(-t)), "w", 0.1).c_hat == 0.0

    def test_infinite_norm_flagged(self):
        fit = persistence_fit(_synthetic([0.0, 1.0], [1.0, math.inf]), "w", 0.0)
        assert not fit.all_finite
