"""Run configuration: YAML schema, presets and validation with line-anchored errors."""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .biology import BioParams
from .forcing import WheelConfig
from .state import PhysParams

# F giving ~0.48 m/s mean speed at 0.85 rad/s on the 20 m x 0.5 m pool; see scripts/calibrate_wheel.py
DEFAULT_WHEEL_MAGNITUDE = 31000.0


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        where = ""
        if source:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


@dataclass
class GridConfig:
    length: float = 20.0
    cells: int = 100
    layers: int = 10
    fractions: list | None = None
    topography: str = "flat"


@dataclass
class BoundaryConfig:
    left: str = "periodic"
    right: str = "periodic"


@dataclass
class InitialConfig:
    H: float = 0.5
    u: Any = 0.0
    T: float = 4.0
    C1: float = 0.0
    q0: float | None = None
    C2: float | None = None
    C3: float = 0.0


@dataclass
class SchemeConfig:
    order: int = 1
    cfl: float = 0.9
    dt_max: float = 0.5
    bio_stride: int = 1


@dataclass
class AnalyticConfig:
    alpha: float = 0.4
    beta: float = 1.5
    H_ref: float = 0.5
    x_ref: float = 8.0


@dataclass
class LongRunConfig:
    spin_up: float = 600.0
    window_periods: int = 8
    reaction_dt: float = 7.4


@dataclass
class RunSection:
    duration: float = 60.0
    start_time: float = 0.0
    method: str = "direct"          # direct | transport_operator
    long_run: LongRunConfig = field(default_factory=LongRunConfig)


@dataclass
class OutputConfig:
    directory: str = "output"
    snapshot_interval: float = 0.0   # 0 -> initial and final snapshots only
    snapshot_start: float = 0.0      # delay before periodic snapshots begin
    timeseries_interval: float = 1.0


@dataclass
class LightConfig:
    """Attenuation used for stored light when biology is not simulated."""

    C2: float = 5.0
    gamma: float = 0.25


@dataclass
class ParticleConfig:
    count: int = 100
    x0: float = 15.0
    dt: float = 0.1
    seed: int | None = None
    threshold: float = 0.5
    record_every: int = 5


@dataclass
class RunConfig:
    scenario: str = "raceway"        # raceway | analytic
    grid: GridConfig = field(default_factory=GridConfig)
    physics: PhysParams = field(default_factory=PhysParams)
    wheel: WheelConfig = field(default_factory=lambda: WheelConfig(magnitude=DEFAULT_WHEEL_MAGNITUDE,
                                                                  enabled=False))
    biology_enabled: bool = False
    biology: BioParams = field(default_factory=BioParams)
    initial: InitialConfig = field(default_factory=InitialConfig)
    boundary: BoundaryConfig = field(default_factory=BoundaryConfig)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    analytic: AnalyticConfig = field(default_factory=AnalyticConfig)
    run: RunSection = field(default_factory=RunSection)
    output: OutputConfig = field(default_factory=OutputConfig)
    light: LightConfig = field(default_factory=LightConfig)
    particles: ParticleConfig = field(default_factory=ParticleConfig)

    def to_dict(self) -> dict:
        d = asdict(self)
        bio = d.pop("biology")
        d["biology"] = {"enabled": d.pop("biology_enabled"), **bio}
        return d


SECTIONS = {
    "grid": GridConfig, "physics": PhysParams, "wheel": WheelConfig, "biology": BioParams,
    "initial": InitialConfig, "boundary": BoundaryConfig, "scheme": SchemeConfig,
    "analytic": AnalyticConfig, "run": RunSection, "output": OutputConfig,
    "light": LightConfig, "particles": ParticleConfig,
}
TOP_LEVEL = {"scenario", "preset", *SECTIONS}


# ---- presets ---------------------------------------------------------------
_RACEWAY_PHYSICS = {"viscosity": 1e-3, "friction": 1e-2}
_BIO_RUNS = {1: (25.0, 0.2, False), 2: (25.0, 0.2, True), 3: (50.0, 0.1, False),
           4: (50.0, 0.1, True), 5: (83.0, 0.06, False), 6: (83.0, 0.06, True)}


def _bio_preset(n: int) -> dict:
    C1, q0, agitated = _BIO_RUNS[n]
    return {
        "scenario": "raceway",
        "grid": {"length": 20.0, "cells": 100, "layers": 10},
        "physics": dict(_RACEWAY_PHYSICS),
        "wheel": {"enabled": agitated, "omega": 0.85},
        "biology": {"enabled": True},
        "initial": {"H": 0.5, "T": 4.0, "C1": C1, "q0": q0, "C3": 5.0},
        "run": {"duration": 20 * 86400.0, "method": "transport_operator"},
        "output": {"timeseries_interval": 3600.0},
    }


PRESETS = {
    "analytic-channel": {
        "scenario": "analytic",
        "grid": {"length": 20.0, "cells": 300, "layers": 20, "topography": "two_bump"},
        "physics": {"alpha_T": 0.0},
        "boundary": {"left": "imposed_discharge", "right": "imposed_height"},
        "run": {"duration": 500.0},
        "output": {"timeseries_interval": 5.0},
    },
    "raceway-mixing": {
        "scenario": "raceway",
        "grid": {"length": 20.0, "cells": 100, "layers": 10},
        "physics": dict(_RACEWAY_PHYSICS),
        "wheel": {"enabled": True, "omega": 0.85},
        "initial": {"H": 0.5, "T": 4.0},
        "light": {"C2": 5.0, "gamma": 0.1},
        "run": {"duration": 3600.0, "start_time": 21600.0},
        "output": {"snapshot_interval": 0.5, "timeseries_interval": 1.0},
    },
    **{f"raceway-bio-simu{n}": _bio_preset(n) for n in _BIO_RUNS},
}


# ---- loading ---------------------------------------------------------------
def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _lines(node, prefix=()) -> dict:
    """Map key paths to 1-based line numbers from a composed YAML node."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for knode, vnode in node.value:
            path = prefix + (knode.value,)
            out[path] = knode.start_mark.line + 1
            out.update(_lines(vnode, path))
    return out


def _build(cls, data: dict, path: tuple, lines: dict, source):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{'.'.join(path)}' must be a mapping",
                          lines.get(path), source)
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key '{key}' in section '{'.'.join(path)}'",
                              lines.get(path + (key,)), source)
        nested = {"long_run": LongRunConfig}.get(key)
        if nested is not None:
            value = _build(nested, value, path + (key,), lines, source)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section '{'.'.join(path)}': {exc}",
                          lines.get(path), source) from None


def config_from_dict(data: dict, lines: dict | None = None, source: str | None = None) -> RunConfig:
    lines = lines or {}
    data = dict(data or {})
    for key in data:
        if key not in TOP_LEVEL:
            raise ConfigError(f"unknown top-level key '{key}'", lines.get((key,)), source)
    preset = data.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}'; available: {', '.join(PRESETS)}",
                              lines.get(("preset",)), source)
        data = _merge(PRESETS[preset], data)
    cfg = RunConfig()
    cfg.scenario = data.get("scenario", "raceway")
    if cfg.scenario not in ("raceway", "analytic"):
        raise ConfigError(f"unknown scenario '{cfg.scenario}'", lines.get(("scenario",)), source)
    for name, cls in SECTIONS.items():
        if name not in data:
            continue
        section = dict(data[name]) if isinstance(data[name], dict) else data[name]
        if name == "biology" and isinstance(section, dict):
            cfg.biology_enabled = bool(section.pop("enabled", False))
        if name == "wheel" and isinstance(section, dict):
            section.setdefault("magnitude", DEFAULT_WHEEL_MAGNITUDE)
            section.setdefault("enabled", True)
        setattr(cfg, name, _build(cls, section, (name,), lines, source))
    _validate(cfg, lines, source)
    return cfg


def _validate(cfg: RunConfig, lines, source):
    def fail(msg, path):
        raise ConfigError(msg, lines.get(path), source)

    if cfg.run.duration < 0:
        fail("run duration must be non-negative", ("run", "duration"))
    if cfg.output.snapshot_start < 0:
        fail("snapshot start must be non-negative", ("output", "snapshot_start"))
    if cfg.run.method not in ("direct", "transport_operator"):
        fail(f"unknown run method '{cfg.run.method}'", ("run", "method"))
    if cfg.grid.cells < 2 or cfg.grid.layers < 1 or cfg.grid.length <= 0:
        fail("grid needs length > 0, cells >= 2 and layers >= 1", ("grid",))
    if cfg.grid.topography not in ("flat", "two_bump"):
        fail(f"unknown topography '{cfg.grid.topography}'", ("grid", "topography"))
    if cfg.initial.H <= 0:
        fail("initial water height must be positive", ("initial", "H"))
    if cfg.initial.C1 < 0 or cfg.initial.C3 < 0 or (cfg.initial.C2 or 0) < 0:
        fail("initial concentrations must be non-negative", ("initial",))
    if cfg.initial.q0 is not None and cfg.initial.C2 is not None:
        fail("give either initial.q0 or initial.C2, not both", ("initial",))
    if cfg.scheme.order not in (1, 2):
        fail("scheme order must be 1 or 2", ("scheme", "order"))
    if not 0 < cfg.scheme.cfl <= 1:
        fail("CFL coefficient must lie in (0, 1]", ("scheme", "cfl"))
    kinds = ("periodic", "imposed_discharge", "imposed_height")
    for side in ("left", "right"):
        if getattr(cfg.boundary, side) not in kinds:
            fail(f"unknown boundary kind '{getattr(cfg.boundary, side)}'", ("boundary", side))
    if (cfg.boundary.left == "periodic") != (cfg.boundary.right == "periodic"):
        fail("periodic boundaries must be used on both sides", ("boundary",))
    if cfg.scenario == "analytic" and cfg.boundary.left == "periodic":
        fail("the analytic channel needs inflow/outflow boundaries", ("boundary",))
    if cfg.run.method == "transport_operator" and cfg.boundary.left != "periodic":
        fail("the transport-operator method needs periodic boundaries", ("run", "method"))


def load_config(path) -> RunConfig:
    """Read a YAML run configuration, a preset name, or a file naming a preset."""
    p = Path(path)
    if not p.exists():
        if str(path) in PRESETS:
            return config_from_dict({"preset": str(path)})
        raise ConfigError(f"no such file or preset: {path}")
    text = p.read_text()
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, str(p)) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", 1, str(p))
    return config_from_dict(data, _lines(node) if node is not None else {}, str(p))


def dump_config(cfg: RunConfig, path):
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
