"""Execute one configured scenario and persist its artifacts."""
from __future__ import annotations

import csv
import json
import os
import tempfile
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .characteristics import TrajectorySet, verify_jacobian, verify_transport
from .config import ScenarioConfig, boundary_warnings
from .diagnostics import DiagnosticsRecorder, energy_law_defect, persistence_fit, rho_mass_defect
from .integrator import RunOutcome, RunStatus, run
from .model import momentum_density

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BREAKING = 2

STATUS_EXIT = {
    RunStatus.COMPLETED: EXIT_OK,
    RunStatus.BREAKING_DETECTED: EXIT_BREAKING,
    RunStatus.CORRUPT_STATE: EXIT_FAILURE,
}


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_snapshot(path: Path, state) -> None:
    y = momentum_density(state).values if state.is_finite else np.full(state.grid.n_modes, np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u", "rho", "y"])
        for row in zip(state.grid.x, state.u.values, state.rho.values, y):
            w.writerow([format(v, ".17g") for v in row])


def write_trajectories(path: Path, ts: TrajectorySet) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "q", "jacobian_log", "transport_log"])
        for row in ts.to_rows():
            w.writerow([format(float(v), ".17g") for v in row])


def read_trajectories(path: Path) -> TrajectorySet:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return TrajectorySet(data[:, 0], data[:, 1], data[:, 2], data[:, 3])


class SnapshotWriter:
    """Run observer writing field (and trajectory) CSV files every ``stride`` steps."""

    def __init__(self, directory: Path, stride: int):
        self.dir = Path(directory)
        self.stride = stride
        self.calls = 0
        self.files = []
        self.last = None

    def __call__(self, state, ts=None):
        if self.calls % self.stride == 0:
            self._write(state, ts, self.calls)
        self.calls += 1

    def finalize(self, state, ts=None):
        if self.last != self.calls - 1:
            self._write(state, ts, self.calls - 1)

    def _write(self, state, ts, idx):
        snap = self.dir / "snapshots" / f"snapshot_{idx:06d}.csv"
        write_snapshot(snap, state)
        entry = {"step": idx, "t": state.time, "fields": str(snap.relative_to(self.dir))}
        if ts is not None:
            tp = self.dir / "trajectories" / f"trajectories_{idx:06d}.csv"
            write_trajectories(tp, ts)
            entry["trajectories"] = str(tp.relative_to(self.dir))
        self.files.append(entry)
        self.last = idx


def outcome_summary(outcome: RunOutcome) -> dict:
    trace = outcome.min_k_u_ux_trace
    return {
        "status": outcome.status.value,
        "halt_time": outcome.halt_time,
        "halt_reason": outcome.halt_reason,
        "steps": outcome.steps,
        "min_k_u_ux_final": trace[-1] if trace else None,
        "min_k_u_ux_run": min(trace) if trace else None,
    }


def run_scenario(cfg: ScenarioConfig, out_dir: Path | None = None, base_dir: Path | None = None):
    """Run ``cfg``, write all artifacts and the manifest; returns (outcome, manifest)."""
    t0 = time.perf_counter()
    out = Path(out_dir) if out_dir is not None else cfg.output_dir()
    (out / "snapshots").mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        manifest_path.unlink()

    grid = cfg.build_grid()
    params = cfg.build_params()
    ctrl = cfg.build_control()
    weights = cfg.build_weights()
    init = cfg.build_initial(grid, base_dir)
    ts = None
    if cfg.trajectories.count:
        (out / "trajectories").mkdir(exist_ok=True)
        ts = TrajectorySet.centered(cfg.trajectories.count, cfg.trajectories.span, cfg.trajectories.center)

    diag_path = out / "diagnostics.ndjson"
    jac_monotone = True

    def monotone_watch(state, tset):
        nonlocal jac_monotone
        if tset is not None and not np.all(np.diff(tset.positions) > 0):
            jac_monotone = False

    with open(diag_path, "w") as sink:
        rec = DiagnosticsRecorder(params, weights, cfg.output.diagnostics_stride, sink)
        snaps = SnapshotWriter(out, cfg.output.snapshot_stride)
        outcome = run(params, init, ctrl, [rec, snaps, monotone_watch], trajectories=ts)
        rec.finalize(outcome.final_state)
        snaps.finalize(outcome.final_state, outcome.trajectories)

    checks = {"boundary_warnings": boundary_warnings(cfg, base_dir)}
    records = rec.records
    if records:
        checks["energy_law_defect"] = energy_law_defect(records, params.lam)
        checks["rho_mass_defect"] = rho_mass_defect(records)
        checks["persistence"] = {
            w.name: asdict(persistence_fit(records, w.name, params.lam)) for w in weights
        }
    if outcome.trajectories is not None and outcome.status != RunStatus.CORRUPT_STATE:
        jr = verify_jacobian(outcome.trajectories)
        tr = verify_transport(outcome.trajectories, outcome.final_state.rho, init.rho)
        checks["jacobian"] = {**asdict(jr), "monotone_every_step": jac_monotone}
        checks["transport"] = asdict(tr)

    manifest = {
        "config_hash": cfg.config_hash(),
        "scenario": cfg.name,
        "provenance": cfg.provenance,
        "outcome": outcome_summary(outcome),
        "checks": checks,
        "artifacts": {
            "diagnostics": diag_path.name,
            "snapshots": snaps.files,
        },
        "config": cfg.model_dump(by_alias=True, mode="json"),
        "tool_version": __version__,
        "wall_time_s": time.perf_counter() - t0,
    }
    text = json.dumps(_finite_or_null(manifest), indent=2, default=_json_default, allow_nan=False)
    atomic_write_text(manifest_path, text + "\n")
    return outcome, manifest


def _finite_or_null(o):
    # strict JSON has no NaN/Infinity
    if isinstance(o, dict):
        return {k: _finite_or_null(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite_or_null(v) for v in o]
    if isinstance(o, (float, np.floating)) and not np.isfinite(o):
        return None
    return o


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))
