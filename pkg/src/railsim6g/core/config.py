"""Scenario files: a line-oriented ``key = value`` tree with optional sections.

::

    # comment
    scenario_name = sched_fig18
    seed = 7
    trials = 10

    [channel]
    carrier_freq = 340 GHz      # becomes channel.carrier_freq = 3.4e11

Keys are dotted paths; a ``[section]`` header prefixes the keys below it.
Quantities take unit suffixes and are stored in SI. Unknown keys are errors.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .rng import MAX_SEED
from .units import UnitError, parse_quantity


class ScenarioParseError(ValueError):
    """The file is not valid scenario syntax."""


class ConfigError(ValueError):
    """A key is unknown or its value is out of range."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class Param:
    kind: str                       # int, float, bool, str, list kinds or a unit kind
    default: Any
    low: float | None = None
    high: float | None = None
    unit: str | None = None         # unit assumed for bare numbers
    doc: str = ""


def _p(kind, default, low=None, high=None, unit=None, doc=""):
    return Param(kind, default, low, high, unit, doc)


# fmt: off
SCHEMA: dict[str, Param] = {
    # THz link (scheduler rates)
    "channel.carrier_freq":   _p("frequency", 340e9, 1e9, 10e12, doc="THz carrier"),
    "channel.bandwidth":      _p("frequency", 2e9, 1e3, 1e12),
    "channel.tx_power":       _p("power", 0.1, 0, 1e3, doc="bare numbers in W"),
    "channel.tx_gain":        _p("db", 30.0, -30, 80, doc="dBi"),
    "channel.rx_gain":        _p("db", 30.0, -30, 80, doc="dBi"),
    "channel.noise_psd":      _p("psd", 10 ** ((-164 - 30) / 10), 0, 1, unit="dbm/hz"),
    "channel.absorption":     _p("attenuation", 1e-4, 0, 1, doc="molecular absorption, 1/m"),
    "channel.efficiency":     _p("float", 0.5, 0, 1),
    # scheduler
    "sched.flow_counts":      _p("intlist", [2, 4, 8, 12, 16, 20, 24], 0, 1000),
    "sched.mrs":              _p("int", 24, 1, 1000),
    "sched.raus":             _p("int", 7, 1, 1000),
    "sched.rau_spacing":      _p("length", 100.0, 1, 1e5),
    "sched.mr_spacing":       _p("length", 8.0, 0.1, 1e3),
    "sched.bs_offset":        _p("length", 60.0, 0.1, 1e4),
    "sched.max_range":        _p("length", 120.0, 1, 1e5),
    "sched.train_window":     _p("length", 150.0, 0, 1e5),
    "sched.bs_antennas":      _p("int", 4, 1, 1024),
    "sched.slots":            _p("int", 64, 1, 100000),
    "sched.slot_len":         _p("time", 1e-3, 1e-9, 10, unit="ms"),
    "sched.pilot_time":       _p("time", 6.4e-3, 0, 10, unit="ms"),
    "sched.qos_min":          _p("rate", 10e6, 1, 1e13, unit="mbps"),
    "sched.qos_max":          _p("rate", 500e6, 1, 1e13, unit="mbps"),
    "sched.beamwidth":        _p("angle", math.radians(2.0), 1e-6, math.pi, unit="deg"),
    "sched.sidelobe_gain":    _p("db", -10.0, -100, 80),
    "sched.direct_links":     _p("bool", False),
    # grant-free access
    "access.n_rail":          _p("int", 40, 0, 100000),
    "access.n_onboard":       _p("int", 60, 0, 100000),
    "access.pilot_len":       _p("int", 32, 1, 100000),
    "access.activity_prob":   _p("float", 0.06, 0, 1),
    "access.train_present_prob": _p("float", 0.5, 0, 1),
    "access.snr_list":        _p("floatlist", [0.0, 10.0, 20.0, 30.0], -50, 100, doc="dB"),
    "access.solvers":         _p("strlist", ["omp", "sp", "cosamp", "ista", "amp", "samp"]),
    "access.frame_len":       _p("int", 16, 2, 4096),
    "access.lengths":         _p("intlist", [6, 11, 16], 1, 4096),
    # RIS channel and aging
    "ris.elements":           _p("intlist", [8, 32, 128], 1, 1 << 20),
    "ris.carrier_freq":       _p("frequency", 28e9, 1e8, 1e13),
    "ris.train_speed":        _p("speed", 350 / 3.6, 0, 1000, unit="km/h"),
    "aging.elements":         _p("intlist", [32, 128], 1, 1 << 20),
    "aging.fdts":             _p("floatlist", [0.0, 0.01, 0.05], 0, 0.5),
    "aging.horizon":          _p("int", 50, 0, 100000),
    "aging.tx_antennas":      _p("int", 4, 1, 1024),
    "aging.snr_db":           _p("float", 10.0, -50, 100),
    "aging.realizations":     _p("int", 50, 1, 10 ** 7),
    # OTFS
    "otfs.subcarriers":       _p("int", 64, 4, 1 << 16),
    "otfs.symbols":           _p("int", 32, 4, 1 << 16),
    "otfs.subcarrier_spacing": _p("frequency", 15e3, 1, 1e9, unit="khz"),
    "otfs.taps":              _p("int", 3, 1, 1000),
    "otfs.offsets":           _p("floatlist", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5], 0, 0.5),
    "otfs.coherence_ratio":   _p("float", 0.25, 1e-6, 1e6, doc="coherence time / frame"),
    # federated learning
    "fed.users":              _p("int", 8, 1, 10000),
    "fed.tasks":              _p("int", 2, 1, 1000),
    "fed.bandwidth":          _p("frequency", 20e6, 1, 1e12, unit="mhz"),
    "fed.quota":              _p("int", 3, 0, 10000),
    "fed.rounds":             _p("int", 10, 1, 10 ** 6),
    # digital twins
    "twin.bss":               _p("int", 3, 1, 1000),
    "twin.twins":             _p("int", 8, 0, 10000),
    "twin.producers":         _p("int", 2, 1, 1000),
    "twin.block_size":        _p("bits", 8e6, 1, 1e15),
    "twin.model_size":        _p("bits", 1e6, 1, 1e15),
}
# fmt: on

# accepted spellings that map onto a canonical key with a scale factor
ALIASES: dict[str, tuple[str, float]] = {
    "channel.carrier_ghz": ("channel.carrier_freq", 1e9),
    "channel.bandwidth_ghz": ("channel.bandwidth", 1e9),
    "sched.qos_min_mbps": ("sched.qos_min", 1e6),
    "sched.qos_max_mbps": ("sched.qos_max", 1e6),
}

TOP_LEVEL = ("scenario_name", "seed", "trials", "output_path")


@dataclass
class ScenarioConfig:
    scenario_name: str
    seed: int = 0
    trials: int = 1
    output_path: str | None = None
    params: dict[str, Any] = field(default_factory=dict)
    given: frozenset[str] | None = None     # keys set explicitly (None: those in params)

    def __post_init__(self):
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", self.scenario_name or ""):
            raise ConfigError("scenario_name", f"{self.scenario_name!r} is not an identifier")
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if self.given is None:
            self.given = frozenset(self.params)
        full = {k: p.default for k, p in SCHEMA.items()}
        for key, value in self.params.items():
            if key not in SCHEMA:
                raise ConfigError(key, "unknown key")
            full[key] = value
        self.params = full

    def __getitem__(self, key: str) -> Any:
        return self.params[key]

    def section(self, prefix: str) -> dict[str, Any]:
        """Parameters under ``prefix.`` with the prefix stripped."""
        head = prefix + "."
        return {k[len(head):]: v for k, v in self.params.items() if k.startswith(head)}

    def with_overrides(self, **top: Any) -> "ScenarioConfig":
        values = {"scenario_name": self.scenario_name, "seed": self.seed, "trials": self.trials,
                  "output_path": self.output_path}
        values.update({k: v for k, v in top.items() if v is not None})
        return ScenarioConfig(params=dict(self.params), given=self.given, **values)

    def with_defaults(self, defaults: dict[str, Any]) -> "ScenarioConfig":
        """Apply ``defaults`` to keys the scenario file did not set."""
        params = dict(self.params)
        params.update({k: v for k, v in defaults.items() if k not in self.given})
        return ScenarioConfig(self.scenario_name, self.seed, self.trials, self.output_path,
                              params, self.given)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _scalar(kind: str, text: str, unit: str | None) -> Any:
    if kind == "int":
        if not re.fullmatch(r"[-+]?\d+", text.strip()):
            raise ValueError(f"{text!r} is not an integer")
        return int(text)
    if kind == "float":
        return parse_quantity(text, None)
    if kind == "bool":
        return _parse_bool(text)
    if kind == "str":
        return text.strip()
    return parse_quantity(text, kind, unit)


def _check_range(key: str, p: Param, v: Any) -> None:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        if not math.isfinite(v):
            raise ConfigError(key, "value must be finite")
        if p.low is not None and v < p.low:
            raise ConfigError(key, f"{v} below minimum {p.low}")
        if p.high is not None and v > p.high:
            raise ConfigError(key, f"{v} above maximum {p.high}")


def coerce(key: str, text: str) -> Any:
    """Convert the raw text of ``key`` to its typed SI value, validating the range."""
    scale = 1.0
    if key in ALIASES:
        key, scale = ALIASES[key]
    if key not in SCHEMA:
        raise ConfigError(key, "unknown key")
    p = SCHEMA[key]
    try:
        if p.kind.endswith("list"):
            base = p.kind[:-4]
            items = [s for s in (t.strip() for t in text.split(",")) if s]
            if not items:
                raise ValueError("empty list")
            value: Any = [_scalar(base, s, p.unit) for s in items]
            for v in value:
                _check_range(key, p, v)
        else:
            value = _scalar(p.kind, text, p.unit)
            if scale != 1.0:
                value = value * scale
            _check_range(key, p, value)
    except (ValueError, UnitError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(key, str(exc)) from None
    return key, value


def parse_scenario_text(text: str) -> ScenarioConfig:
    top: dict[str, Any] = {}
    params: dict[str, Any] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_][\w.]*)\s*\]", line)
        if m:
            section = m.group(1)
            continue
        if "=" not in line:
            raise ScenarioParseError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not re.fullmatch(r"[A-Za-z_][\w.]*", key):
            raise ScenarioParseError(f"line {lineno}: bad key {key!r}")
        if not value:
            raise ScenarioParseError(f"line {lineno}: empty value for {key!r}")
        full = f"{section}.{key}" if section else key
        if full in TOP_LEVEL:
            if full in top:
                raise ScenarioParseError(f"line {lineno}: duplicate key {full!r}")
            top[full] = value
            continue
        canon, typed = coerce(full, value)
        if canon in params:
            raise ScenarioParseError(f"line {lineno}: duplicate key {canon!r}")
        params[canon] = typed
    if "scenario_name" not in top:
        raise ConfigError("scenario_name", "missing")
    try:
        seed = int(top.get("seed", "0"))
    except ValueError:
        raise ConfigError("seed", f"{top['seed']!r} is not an integer") from None
    try:
        trials = int(top.get("trials", "1"))
    except ValueError:
        raise ConfigError("trials", f"{top['trials']!r} is not an integer") from None
    return ScenarioConfig(top["scenario_name"], seed, trials, top.get("output_path"), params)


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read and validate a scenario file; defaults fill every key not given."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioParseError(f"{path}: not UTF-8 text ({exc})") from None
    return parse_scenario_text(text)

