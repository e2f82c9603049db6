"""Unit-suffixed quantity parsing for configuration files.

Device dimensions mix millimetres, micrometres and angstroms, circuit values
mix nano/picofarads and megaohms.  Forcing an explicit unit suffix on every
configured value keeps those scales from being silently confused; everything
is converted to SI base units at parse time and stays SI internally.
"""

from __future__ import annotations

import re


class UnitError(ValueError):
    """Raised for a malformed quantity string or an unknown unit."""


# Multipliers to the SI base unit of each quantity kind.  Keys are
# case-sensitive ("Mohm" != "mohm").
_UNIT_TABLES: dict[str, dict[str, float]] = {
    "length": {
        "m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6,
        "nm": 1e-9, "A": 1e-10, "angstrom": 1e-10,
    },
    "area": {"m^2": 1.0, "m2": 1.0, "cm^2": 1e-4, "cm2": 1e-4, "mm^2": 1e-6, "mm2": 1e-6},
    "mass": {"kg": 1.0, "g": 1e-3, "mg": 1e-6},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6},
    "capacitance": {"F": 1.0, "mF": 1e-3, "uF": 1e-6, "µF": 1e-6, "nF": 1e-9, "pF": 1e-12},
    "resistance": {"ohm": 1.0, "Ohm": 1.0, "kohm": 1e3, "Mohm": 1e6, "Gohm": 1e9},
    "voltage": {"V": 1.0, "mV": 1e-3, "kV": 1e3},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6, "nW": 1e-9},
    "acceleration": {"m/s^2": 1.0, "m/s2": 1.0},
    "stiffness": {"N/m": 1.0, "kN/m": 1e3},
    "dimensionless": {"": 1.0},
}

# Unit used when serializing a value back to text.
_BASE_UNIT = {
    "length": "m", "area": "m^2", "mass": "kg", "time": "s",
    "frequency": "Hz", "capacitance": "F", "resistance": "ohm",
    "voltage": "V", "power": "W", "acceleration": "m/s^2",
    "stiffness": "N/m", "dimensionless": "",
}

_QUANTITY_RE = re.compile(r"^\s*([-+]?[0-9.]+(?:[eE][-+]?[0-9]+)?)\s*(.*?)\s*$")


def parse_quantity(text: str, kind: str) -> float:
    """Parse e.g. ``"35 um"`` into metres.  ``kind`` selects the unit table."""
    try:
        table = _UNIT_TABLES[kind]
    except KeyError:
        raise UnitError(f"unknown quantity kind {kind!r}") from None
    match = _QUANTITY_RE.match(text)
    if match is None:
        raise UnitError(f"cannot parse quantity {text!r}")
    number, unit = match.groups()
    try:
        value = float(number)
    except ValueError:
        raise UnitError(f"bad number in quantity {text!r}") from None
    if unit not in table:
        allowed = ", ".join(repr(u) for u in table)
        raise UnitError(f"unknown {kind} unit {unit!r} in {text!r} (allowed: {allowed})")
    return value * table[unit]


def format_quantity(value: float, kind: str) -> str:
    """Serialize ``value`` (SI base units) so parse_quantity round-trips it."""
    if kind not in _BASE_UNIT:
        raise UnitError(f"unknown quantity kind {kind!r}")
    unit = _BASE_UNIT[kind]
    return f"{value!r} {unit}".strip()
