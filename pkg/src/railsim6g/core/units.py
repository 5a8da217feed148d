"""Quantity parsing for scenario values carrying unit suffixes."""
from __future__ import annotations

import math
import re

# kind -> {suffix: callable(value) -> SI value}
_LINEAR = {
    "frequency": {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "thz": 1e12},
    "rate": {"bps": 1.0, "kbps": 1e3, "mbps": 1e6, "gbps": 1e9, "tbps": 1e12},
    "speed": {"m/s": 1.0, "km/h": 1.0 / 3.6, "kmh": 1.0 / 3.6},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9},
    "length": {"m": 1.0, "km": 1e3, "cm": 1e-2, "mm": 1e-3},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0},
    "bits": {"bit": 1.0, "bits": 1.0, "kbit": 1e3, "mbit": 1e6, "gbit": 1e9,
             "b": 8.0, "kb": 8e3, "mb": 8e6},
    "cycles": {"cycles": 1.0, "cycles/s": 1.0, "mcycles": 1e6, "gcycles": 1e9,
               "ghz": 1e9, "mhz": 1e6},
    "db": {"db": 1.0, "dbi": 1.0},
    "attenuation": {"1/m": 1.0, "1/km": 1e-3},
}

_LOG = {
    # dB-scaled powers converted to watts
    "power": {"w": lambda v: v, "mw": lambda v: v * 1e-3,
              "dbm": lambda v: 10 ** ((v - 30.0) / 10.0),
              "dbw": lambda v: 10 ** (v / 10.0)},
    "psd": {"w/hz": lambda v: v,
            "dbm/hz": lambda v: 10 ** ((v - 30.0) / 10.0),
            "dbw/hz": lambda v: 10 ** (v / 10.0)},
}

KINDS = set(_LINEAR) | set(_LOG)

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z/%]*)\s*$")


class UnitError(ValueError):
    """Raised when a value cannot be read as a quantity of the expected kind."""


def to_si(value: float, unit: str, kind: str) -> float:
    unit = unit.strip().lower()
    if kind in _LINEAR:
        table = _LINEAR[kind]
        if unit not in table:
            raise UnitError(f"unit {unit!r} is not a {kind} unit (allowed: {sorted(table)})")
        return value * table[unit]
    if kind in _LOG:
        table = _LOG[kind]
        if unit not in table:
            raise UnitError(f"unit {unit!r} is not a {kind} unit (allowed: {sorted(table)})")
        return table[unit](value)
    raise UnitError(f"unknown quantity kind {kind!r}")


def parse_quantity(text: str, kind: str | None, default_unit: str | None = None) -> float:
    """Parse ``"340 GHz"`` style text into an SI float.

    A bare number is taken in ``default_unit`` when given, otherwise as SI.
    """
    m = _QUANTITY.match(text)
    if m is None:
        raise UnitError(f"cannot read {text!r} as a number")
    value = float(m.group(1))
    unit = m.group(2)
    if kind is None:
        if unit:
            raise UnitError(f"{text!r}: this key takes a plain number, not a unit")
        return value
    if not unit:
        if default_unit is None:
            return value
        unit = default_unit
    return to_si(value, unit, kind)
