"""Scenario configuration: YAML documents validated with pydantic.

Physical parameters (k, lambda, g) have no defaults and must be spelled out;
numerical controls do.
"""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .grid import SpectralGrid
from .integrator import StepControl
from .model import FieldPair, ModelParams
from .weights import WeightSpec

OUTPUT_ROOT_ENV = "NOVIKOV_OUTPUT_ROOT"
BOUNDARY_TOL = 1e-14
SCENARIO_DIR = Path(__file__).parent / "scenarios"


class ConfigError(Exception):
    """Unreadable or invalid configuration; ``problems`` lists every issue found."""

    def __init__(self, source, problems):
        self.source = str(source)
        self.problems = list(problems)
        super().__init__(f"{self.source}: " + "; ".join(self.problems))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    n_modes: int
    half_length: float = Field(gt=0)

    @field_validator("n_modes")
    @classmethod
    def _even(cls, v):
        if v < 8 or v % 2:
            raise ValueError("n_modes must be an even integer >= 8")
        return v


class ModelConfig(_Strict):
    k: float
    lambda_: float = Field(alias="lambda", ge=0)
    g_coeffs: list[float]

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @field_validator("k")
    @classmethod
    def _nonzero(cls, v):
        if v == 0:
            raise ValueError("k must be nonzero")
        return v


class InitialConfig(_Strict):
    kind: Literal["gaussian", "mollified_peakon", "sine", "sech", "file"]
    u_amplitude: float = 0.0
    rho_amplitude: float = 0.0
    width: float = Field(1.0, gt=0)
    center: float = 0.0
    # gaussian only: 0 gives exp(-s^2), 1 gives d/dx of it, i.e. -2 s exp(-s^2)
    derivative: Literal[0, 1] = 0
    # sine only: angular wavenumber (must be a grid wavenumber for periodicity)
    wavenumber: float = 1.0
    # mollified_peakon only: A exp(-sqrt(s^2 + eps^2))
    epsilon: float = Field(0.1, gt=0)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _file_has_path(self):
        if self.kind == "file" and not self.path:
            raise ValueError("initial kind 'file' needs a path")
        return self


class ControlConfig(_Strict):
    t_end: float = Field(ge=0)
    cfl: float = Field(0.3, gt=0, le=1)
    dt_min: float = Field(1e-10, gt=0)
    dt_max: float = Field(1e-2, gt=0)
    breaking_threshold: float = Field(-1e6, lt=0)
    strip_floor: Optional[float] = Field(1.0, gt=0)
    monitor_refine: int = Field(8, ge=1)

    @model_validator(mode="after")
    def _order(self):
        if not self.dt_min < self.dt_max:
            raise ValueError("dt_min must be smaller than dt_max")
        return self


class WeightConfig(_Strict):
    name: str
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    p: float = 2.0
    truncation: Optional[float] = None
    theta: Optional[float] = None

    @model_validator(mode="after")
    def _family(self):
        WeightSpec(self.a, self.b, self.c, self.d, self.theta, self.truncation, self.name)
        if not (self.p >= 2):
            raise ValueError("p must be >= 2 (use .inf for the sup norm)")
        return self


class TrajectoryConfig(_Strict):
    count: int = Field(0, ge=0)
    span: float = Field(1.0, gt=0)
    center: float = 0.0


class OutputConfig(_Strict):
    directory: str = "out"
    snapshot_stride: int = Field(100, ge=1)
    diagnostics_stride: int = Field(1, ge=1)


class ScenarioConfig(_Strict):
    name: str = "scenario"
    provenance: str = "constructed"
    grid: GridConfig
    model: ModelConfig
    initial: InitialConfig
    control: ControlConfig
    weights: list[WeightConfig] = []
    trajectories: TrajectoryConfig = TrajectoryConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _unique_weights(self):
        names = [w.name for w in self.weights]
        if len(set(names)) != len(names):
            raise ValueError("weight names must be unique")
        if self.trajectories.count in (1, 2):
            raise ValueError("trajectories.count must be 0 or >= 3")
        return self

    # -- builders ---------------------------------------------------------

    def build_grid(self) -> SpectralGrid:
        return SpectralGrid(self.grid.n_modes, self.grid.half_length)

    def build_params(self) -> ModelParams:
        return ModelParams(self.model.k, self.model.lambda_, tuple(self.model.g_coeffs))

    def build_control(self) -> StepControl:
        return StepControl(**self.control.model_dump())

    def build_weights(self):
        from .diagnostics import WeightChoice

        return [
            WeightChoice(w.name, WeightSpec(w.a, w.b, w.c, w.d, w.theta, w.truncation, w.name), w.p)
            for w in self.weights
        ]

    def build_initial(self, grid: SpectralGrid | None = None, base_dir: Path | None = None) -> FieldPair:
        g = grid or self.build_grid()
        u0, r0 = initial_profiles(self.initial, g.x, base_dir)
        return FieldPair.from_arrays(g, u0, r0)

    def config_hash(self) -> str:
        blob = json.dumps(self.model_dump(by_alias=True, mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def output_dir(self) -> Path:
        d = Path(self.output.directory)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not d.is_absolute():
            d = Path(root) / d
        return d


def initial_profiles(ic: InitialConfig, x: np.ndarray, base_dir: Path | None = None):
    s = (x - ic.center) / ic.width
    if ic.kind == "gaussian":
        shape = np.exp(-s * s) if ic.derivative == 0 else -2 * s * np.exp(-s * s)
    elif ic.kind == "sech":
        shape = 1 / np.cosh(s)
    elif ic.kind == "sine":
        shape = np.sin(ic.wavenumber * (x - ic.center))
    elif ic.kind == "mollified_peakon":
        shape = np.exp(-np.sqrt(s * s + ic.epsilon**2))
    elif ic.kind == "file":
        path = Path(ic.path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        data = load_samples(path, len(x))
        return data[:, 0], data[:, 1]
    else:  # pragma: no cover - guarded by the Literal
        raise ValueError(ic.kind)
    return ic.u_amplitude * shape, ic.rho_amplitude * shape


def load_samples(path: Path, n: int) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(path, [f"initial data file unreadable: {exc}"]) from exc
    rows = [ln.replace(",", " ").split() for ln in text.splitlines()]
    rows = [r for r in rows if r and not r[0].startswith("#")]
    try:
        data = np.array(rows, dtype=float)
    except ValueError:
        # allow a single header line
        try:
            data = np.array(rows[1:], dtype=float)
        except ValueError as exc:
            raise ConfigError(path, [f"initial data file is not numeric: {exc}"]) from exc
    if data.ndim != 2 or data.shape != (n, 2):
        raise ConfigError(path, [f"expected {n} rows of two columns (u, rho), got shape {data.shape}"])
    return data


def boundary_warnings(cfg: ScenarioConfig, base_dir: Path | None = None) -> list[str]:
    """Flag data that does not decay to BOUNDARY_TOL at x = +-L.

    A periodic truncation of the line is only faithful if the data and its
    first derivative essentially vanish at the edges.
    """
    if cfg.initial.kind == "sine":
        return []
    state = cfg.build_initial(base_dir=base_dir)
    out = []
    for name, f in (("u0", state.u), ("rho0", state.rho)):
        edge = max(abs(f.values[0]), abs(f.values[-1]))
        # one-sided differences: the spectral derivative carries ~1e-14 FFT
        # roundoff even where the data vanish identically
        v = f.values
        dedge = max(abs(v[1] - v[0]), abs(v[-1] - v[-2])) / state.grid.dx
        if max(edge, dedge) > BOUNDARY_TOL:
            out.append(
                f"{name} or its derivative is {max(edge, dedge):.2e} at the boundary "
                f"(> {BOUNDARY_TOL:g}); consider a larger half_length"
            )
    return out


def _format_validation(err: ValidationError, marks: dict) -> list[str]:
    probs = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"])
        line = marks.get(tuple(e["loc"][:2])) or marks.get(tuple(e["loc"][:1]))
        where = f" (line {line})" if line else ""
        probs.append(f"{loc or '<root>'}: {e['msg']}{where}")
    return probs


def _key_lines(node, prefix=()) -> dict:
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = prefix + (k.value,)
            out[key] = k.start_mark.line + 1
            if len(key) < 2:
                out.update(_key_lines(v, key))
    return out


def parse_config(text: str, source="<string>") -> ScenarioConfig:
    try:
        node = yaml.compose(text)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(source, [f"YAML error: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ConfigError(source, ["top level must be a mapping"])
    marks = _key_lines(node)
    try:
        return ScenarioConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(source, _format_validation(exc, marks)) from exc


def resolve_config_path(ref: str) -> Path:
    p = Path(ref)
    if p.is_file():
        return p
    builtin = SCENARIO_DIR / f"{ref}.yaml"
    if builtin.exists():
        return builtin
    return p


def load_config(ref) -> tuple[ScenarioConfig, Path]:
    path = resolve_config_path(str(ref))
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(path, [f"cannot read config: {exc}"]) from exc
    cfg = parse_config(text, path)
    if cfg.initial.kind == "file":
        cfg.build_initial(base_dir=path.parent)
    return cfg, path


def builtin_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.yaml"))


def with_override(cfg: ScenarioConfig, dotted: str, value) -> ScenarioConfig:
    """Copy of ``cfg`` with one dotted key replaced, e.g. ``model.lambda``."""
    doc = cfg.model_dump(by_alias=True, mode="json")
    node = doc
    keys = dotted.split(".")
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError("<sweep>", [f"unknown parameter path {dotted!r}"])
        node = node[k]
    if keys[-1] not in node and keys[-1] not in _optional_keys(keys[0]):
        raise ConfigError("<sweep>", [f"unknown parameter path {dotted!r}"])
    node[keys[-1]] = value
    try:
        return ScenarioConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError("<sweep>", _format_validation(exc, {})) from exc


def _optional_keys(section: str) -> set:
    model = ScenarioConfig.model_fields.get(section)
    if model is None:
        return set()
    ann = model.annotation
    fields = getattr(ann, "model_fields", {})
    return set(fields) | {f.alias for f in fields.values() if f.alias}
