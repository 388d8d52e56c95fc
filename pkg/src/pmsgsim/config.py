"""Scenario configuration: schema, INI loading, dotted overrides, validation.

A scenario file is a plain INI document with one section per model block::

    [pmsg]
    r_s = 2.5e-3
    pole_pairs = 60

Every key maps onto a dataclass field; values are coerced by the field's
annotated type.  Overrides use ``section.key=value``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import math
import re
import typing
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .control import DroopParams
from .grid import FaultSpec, GridParams
from .pmsg import PmsgParams
from .turbine import MechParams, TurbineParams


class ConfigParseError(ValueError):
    """Scenario text (or an override) could not be parsed."""


class ConfigError(ValueError):
    """A parsed value violates a model invariant.  ``key`` names it."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class SimSettings:
    t_end: float = 2.0
    dt_plant: float = 20e-6
    dt_ctrl: float = 100e-6
    sample_dt: float = 100e-6
    turbine_connected: bool = True
    angle_source: str = "ideal"
    flat_start: bool = True
    p_rated: float = 2.0e6

    def __post_init__(self):
        if self.p_rated <= 0:
            raise ValueError("p_rated must be > 0")
        if self.t_end <= 0:
            raise ValueError("t_end must be > 0")
        if self.dt_plant <= 0:
            raise ValueError("dt_plant must be > 0")
        if not _is_multiple(self.dt_ctrl, self.dt_plant):
            raise ValueError("dt_ctrl must be an integer multiple of dt_plant")
        if not _is_multiple(self.sample_dt, self.dt_ctrl):
            raise ValueError("sample_dt must be an integer multiple of dt_ctrl")
        if not _is_multiple(self.t_end, self.sample_dt):
            raise ValueError("t_end must be an integer multiple of sample_dt")
        if self.angle_source not in ("ideal", "pll"):
            raise ValueError(f"angle_source must be 'ideal' or 'pll', got {self.angle_source!r}")


@dataclass(frozen=True)
class WindProfile:
    """Piecewise-constant wind speed: ``speed`` from t=0, then ``steps``."""

    speed: float = 10.0
    steps: tuple = ()

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        times = [t for t, _ in self.steps]
        if times != sorted(times) or any(t < 0 for t in times):
            raise ValueError("steps must be time-ordered with t >= 0")
        if any(v < 0 for _, v in self.steps):
            raise ValueError("steps speeds must be >= 0")

    def at(self, t: float) -> float:
        v = self.speed
        for t_step, v_step in self.steps:
            if t >= t_step:
                v = v_step
            else:
                break
        return v


@dataclass(frozen=True)
class ConverterSettings:
    c_dc: float = 0.02
    m_max: float = 1.15
    v_floor_pu: float = 0.01

    def __post_init__(self):
        if self.c_dc <= 0:
            raise ValueError("c_dc must be > 0")
        if not 0.0 < self.m_max <= 1.15:
            raise ValueError("m_max must lie in (0, 1.15]")
        if not 0.0 <= self.v_floor_pu < 1.0:
            raise ValueError("v_floor_pu must lie in [0, 1)")


@dataclass(frozen=True)
class FaultSettings:
    enabled: bool = True
    t_on: float = 0.5
    t_off: float = 1.2
    r_fault: float = 0.05
    location: str = "pcc"

    def __post_init__(self):
        FaultSpec(self.t_on, self.t_off, self.r_fault, self.location)

    def spec(self) -> FaultSpec | None:
        if not self.enabled:
            return None
        return FaultSpec(self.t_on, self.t_off, self.r_fault, self.location)


@dataclass(frozen=True)
class MscSettings:
    speed_mode: str = "mppt"
    w_rated: float = 2.78
    i_sd_ref: float = 0.0
    kp_w: float = 1.0
    ki_w: float = 1.0
    kp_i: float = 1.0
    ki_i: float = 1.0
    i_max: float = 3000.0
    feedforward: bool = True

    def __post_init__(self):
        if self.speed_mode not in ("mppt", "rated"):
            raise ValueError(f"speed_mode must be 'mppt' or 'rated', got {self.speed_mode!r}")
        if self.w_rated <= 0:
            raise ValueError("w_rated must be > 0")
        if self.i_max <= 0:
            raise ValueError("i_max must be > 0")
        for name in ("kp_w", "ki_w", "kp_i", "ki_i"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class GscSettings:
    v_dc_ref: float = 1200.0
    q_mode: str = "droop"
    q_ref: float = 0.0
    kp_v: float = 1.0
    ki_v: float = 1.0
    kp_q: float = 0.0
    ki_q: float = 0.1
    kp_i: float = 1.0
    ki_i: float = 1.0
    i_max: float = 3000.0
    feedforward: bool = True
    q_feedforward: bool = False

    def __post_init__(self):
        if self.q_mode not in ("fixed", "droop"):
            raise ValueError(f"q_mode must be 'fixed' or 'droop', got {self.q_mode!r}")
        if self.v_dc_ref <= 0:
            raise ValueError("v_dc_ref must be > 0")
        if self.i_max <= 0:
            raise ValueError("i_max must be > 0")
        for name in ("kp_v", "ki_v", "kp_q", "ki_q", "kp_i", "ki_i"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class PllSettings:
    kp: float = 132.0
    ki: float = 8.9e3

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0:
            raise ValueError("kp and ki must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    sim: SimSettings
    wind: WindProfile
    turbine: TurbineParams
    mech: MechParams
    pmsg: PmsgParams
    converter: ConverterSettings
    grid: GridParams
    fault: FaultSettings
    msc: MscSettings
    gsc: GscSettings
    droop: DroopParams
    pll: PllSettings = field(default_factory=PllSettings)

    def __post_init__(self):
        # line-to-line peak at nominal PCC voltage
        v_ll_peak = math.sqrt(3.0) * self.grid.v_nom
        if self.gsc.v_dc_ref <= v_ll_peak:
            raise ConfigError("gsc.v_dc_ref",
                              f"must exceed the PCC line-to-line peak {v_ll_peak:.1f} V")
        if self.fault.enabled and self.fault.t_on >= self.sim.t_end:
            raise ConfigError("fault.t_on", "fault starts after the end of the run")

    @property
    def fault_spec(self) -> FaultSpec | None:
        return self.fault.spec()

    @property
    def rated_power(self) -> float:
        return self.sim.p_rated

    def to_ini(self) -> str:
        return dump_ini(self)

    def digest(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:16]


SECTIONS: dict[str, type] = {
    "sim": SimSettings,
    "wind": WindProfile,
    "turbine": TurbineParams,
    "mech": MechParams,
    "pmsg": PmsgParams,
    "converter": ConverterSettings,
    "grid": GridParams,
    "fault": FaultSettings,
    "msc": MscSettings,
    "gsc": GscSettings,
    "droop": DroopParams,
    "pll": PllSettings,
}


def _is_multiple(a: float, b: float) -> bool:
    n = round(a / b)
    return n >= 1 and math.isclose(n * b, a, rel_tol=1e-9, abs_tol=1e-15)


def _init_fields(cls) -> list[dataclasses.Field]:
    return [f for f in dataclasses.fields(cls) if f.init]


def _coerce(text: str, typ, key: str):
    text = text.strip()
    try:
        if typ is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if typ is int:
            value = float(text)
            if value != int(value):
                raise ValueError(f"not an integer: {text!r}")
            return int(value)
        if typ is float:
            return float(text)
        if typ is str:
            return text
        if typ is tuple:
            return _parse_tuple(text)
        origin = typing.get_origin(typ)
        args = typing.get_args(typ)
        if origin is typing.Union or (origin is not None and type(None) in args):
            if text.lower() in ("", "none"):
                return None
            inner = [a for a in args if a is not type(None)][0]
            return _coerce(text, inner, key)
    except ValueError as exc:
        raise ConfigParseError(f"{key}: {exc}") from None
    raise ConfigParseError(f"{key}: unsupported field type {typ!r}")


def _parse_tuple(text: str) -> tuple:
    """``"1, 2, 3"`` -> floats; ``"0.5:10, 1:12"`` -> (t, v) pairs."""
    if not text:
        return ()
    items = [s.strip() for s in text.split(",") if s.strip()]
    if any(":" in s for s in items):
        pairs = []
        for s in items:
            t, v = s.split(":")
            pairs.append((float(t), float(v)))
        return tuple(pairs)
    return tuple(float(s) for s in items)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        parts = []
        for item in value:
            if isinstance(item, tuple):
                parts.append(":".join(repr(float(x)) for x in item))
            else:
                parts.append(repr(float(item)))
        return ", ".join(parts)
    if value is None:
        return "none"
    return str(value)


def _field_key(cls, message: str) -> str | None:
    names = {f.name for f in _init_fields(cls)}
    for token in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", message):
        if token in names:
            return token
    return None


def _build_section(name: str, values: dict[str, str]):
    cls = SECTIONS[name]
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for f in _init_fields(cls):
        if f.name in values:
            kwargs[f.name] = _coerce(values[f.name], hints[f.name], f"{name}.{f.name}")
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        key = _field_key(cls, str(exc))
        raise ConfigError(f"{name}.{key}" if key else name, str(exc)) from None


def _read_ini(text: str, source: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigParseError(f"{source}: {exc}") from None
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(section, "unknown section")
        known = {f.name for f in _init_fields(SECTIONS[section])}
        for key in parser[section]:
            if key not in known:
                raise ConfigError(f"{section}.{key}", "unknown key")
    return parser


def apply_overrides(parser: configparser.ConfigParser, overrides) -> None:
    for item in overrides or ():
        if "=" not in item:
            raise ConfigParseError(f"override {item!r} is not of the form section.key=value")
        dotted, value = item.split("=", 1)
        dotted = dotted.strip()
        if "." not in dotted:
            raise ConfigParseError(f"override key {dotted!r} is not of the form section.key")
        section, key = dotted.split(".", 1)
        if section not in SECTIONS:
            raise ConfigError(dotted, "unknown section")
        if key not in {f.name for f in _init_fields(SECTIONS[section])}:
            raise ConfigError(dotted, "unknown key")
        if not parser.has_section(section):
            parser.add_section(section)
        parser[section][key] = value.strip()


def config_from_text(text: str, overrides=(), source: str = "<string>") -> ScenarioConfig:
    parser = _read_ini(text, source)
    apply_overrides(parser, overrides)
    blocks = {}
    for name in SECTIONS:
        values = dict(parser[name]) if parser.has_section(name) else {}
        blocks[name] = _build_section(name, values)
    try:
        return ScenarioConfig(**blocks)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("scenario", str(exc)) from None


def load_config(path=None, overrides=()) -> ScenarioConfig:
    """Load a scenario file (the shipped reference set when ``path`` is None)."""
    if path is None:
        return reference_config(overrides=overrides)
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from None
    return config_from_text(text, overrides, source=str(path))


def scenario_text(name: str) -> str:
    return resources.files("pmsgsim.scenarios").joinpath(f"{name}.ini").read_text()


def reference_config(name: str = "reference", overrides=()) -> ScenarioConfig:
    return config_from_text(scenario_text(name), overrides, source=f"{name}.ini")


def replace(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    """Return a copy with dotted-key changes, e.g. ``replace(cfg, **{"sim.t_end": 1.0})``."""
    overrides = [f"{k}={_format(v)}" for k, v in changes.items()]
    return config_from_text(dump_ini(cfg), overrides)


def dump_ini(cfg: ScenarioConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for name in SECTIONS:
        block = getattr(cfg, name)
        parser.add_section(name)
        for f in _init_fields(type(block)):
            parser[name][f.name] = _format(getattr(block, f.name))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
