"""Cartesian-product parameter sweeps over a base scenario."""
from __future__ import annotations

import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import ConfigError, OUTPUT_ROOT_ENV, ScenarioConfig, load_config, with_override
from .runner import outcome_summary, run_scenario


class Axis(BaseModel):
    model_config = ConfigDict(extra="forbid")
    parameter: str
    values: list


class SweepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    base: str
    axes: list[Axis]
    workers: int = Field(1, ge=1)
    output: str = "sweep"


def load_sweep(path) -> tuple[SweepSpec, ScenarioConfig, Path]:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(path, [str(exc)]) from exc
    try:
        spec = SweepSpec.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(path, [f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors()]) from exc
    base_ref = Path(spec.base)
    if not base_ref.is_absolute() and (path.parent / base_ref).exists():
        base_ref = path.parent / base_ref
    base, base_path = load_config(base_ref)
    return spec, base, base_path


def expand(spec: SweepSpec, base: ScenarioConfig):
    """All (overrides, config) points of the product; raises ConfigError on bad paths."""
    names = [a.parameter for a in spec.axes]
    points = []
    for combo in itertools.product(*(a.values for a in spec.axes)):
        overrides = dict(zip(names, combo))
        cfg = base
        for k, v in overrides.items():
            cfg = with_override(cfg, k, v)
        points.append((overrides, cfg))
    return points


def _run_point(index: int, overrides: dict, cfg_doc: dict, out_dir: str, base_dir: str):
    try:
        cfg = ScenarioConfig.model_validate(cfg_doc)
        outcome, _ = run_scenario(cfg, Path(out_dir), Path(base_dir))
        s = outcome_summary(outcome)
        return {
            "index": index,
            "params": overrides,
            "status": s["status"],
            "halt_time": s["halt_time"],
            "min_k_u_ux_final": s["min_k_u_ux_final"],
            "directory": out_dir,
        }
    except Exception as exc:  # one bad point must not sink the sweep
        return {
            "index": index,
            "params": overrides,
            "status": "error",
            "halt_time": None,
            "min_k_u_ux_final": None,
            "error": f"{type(exc).__name__}: {exc}",
            "directory": out_dir,
        }


def run_sweep(spec: SweepSpec, base: ScenarioConfig, base_dir: Path, out_root: Path | None = None,
              workers: int | None = None):
    """Run every point; returns the summary rows sorted by index.

    Rows are appended to ``summary.ndjson`` in completion order by the parent
    process only.
    """
    points = expand(spec, base)
    if not points:
        raise ConfigError("<sweep>", ["sweep has an empty parameter product"])
    root = Path(out_root) if out_root is not None else Path(spec.output)
    env_root = os.environ.get(OUTPUT_ROOT_ENV)
    if out_root is None and env_root and not root.is_absolute():
        root = Path(env_root) / root
    root.mkdir(parents=True, exist_ok=True)
    summary_path = root / "summary.ndjson"
    nworkers = workers or spec.workers
    rows = []
    jobs = [
        (i, ov, cfg.model_dump(by_alias=True, mode="json"), str(root / f"run_{i:03d}"), str(base_dir))
        for i, (ov, cfg) in enumerate(points)
    ]
    with open(summary_path, "w") as sink:
        if nworkers == 1:
            for job in jobs:
                row = _run_point(*job)
                rows.append(row)
                sink.write(json.dumps(row) + "\n")
                sink.flush()
        else:
            with ProcessPoolExecutor(max_workers=nworkers) as pool:
                futs = [pool.submit(_run_point, *job) for job in jobs]
                for fut in as_completed(futs):
                    row = fut.result()
                    rows.append(row)
                    sink.write(json.dumps(row) + "\n")
                    sink.flush()
    return sorted(rows, key=lambda r: r["index"]), summary_path
