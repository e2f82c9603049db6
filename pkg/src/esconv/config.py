"""Strict key-value configuration with explicit unit suffixes.

Every dimensioned value carries a unit ("35 um", "500 A", "8 Mohm"), parsed
to SI at load time; unknown sections or keys are rejected outright.  The
five device sections are mandatory and complete; the remaining sections
hold optional per-command settings.
"""

from __future__ import annotations

import configparser
import csv as _csv
import math
from dataclasses import dataclass, field

from .dynamics import SimOptions
from .model import (CircuitParams, DeviceDesign, DeviceGeometry, MaterialProps,
                    MechanicalParams, VibrationSource, natural_frequency)
from .units import format_quantity, parse_quantity


class ConfigError(ValueError):
    """Malformed configuration or spectrum input."""


# section -> key -> quantity kind ("count", "string" and "*_list" are special)
_SCHEMA: dict[str, dict[str, str]] = {
    "geometry": {
        "shuttle_width": "length", "shuttle_length": "length",
        "finger_length": "length", "finger_width": "length",
        "structure_thickness": "length", "initial_gap": "length",
        "min_gap": "length", "finger_count": "count",
        "usable_edge_length": "length", "chip_area": "area",
    },
    "materials": {
        "dielectric_thickness": "length", "dielectric_constant": "dimensionless",
    },
    "circuit": {
        "input_voltage": "voltage", "storage_capacitance": "capacitance",
        "load_resistance": "resistance", "max_output_voltage": "voltage",
        "min_output_power": "power",
    },
    "mechanics": {
        "shuttle_mass": "mass", "spring_constant": "stiffness",
        "damping_scale": "dimensionless", "restitution": "dimensionless",
    },
    "source": {
        "acceleration": "acceleration", "frequency": "frequency",
    },
    "static": {"c_max": "capacitance", "c_min": "capacitance"},
    "sim": {
        "time_step": "time", "duration": "time",
        "sample_stride": "count", "event_tolerance": "time",
    },
    "sweep": {
        "gap_start": "length", "gap_stop": "length", "gap_step": "length",
        "dielectric_values": "length_list",
        "r_load_start": "resistance", "r_load_stop": "resistance",
        "r_load_points": "count",
        "c_stor_start": "capacitance", "c_stor_stop": "capacitance",
        "c_stor_points": "count",
    },
    "response": {
        "acceleration": "acceleration", "freq_start": "frequency",
        "freq_stop": "frequency", "freq_points": "count",
    },
    "sizing": {
        "z_target": "length", "mass_values": "mass_list", "duration": "time",
    },
    "parasitics": {"c_par": "capacitance", "r_par": "resistance"},
    "output": {"directory": "string", "formats": "string"},
}

_REQUIRED_SECTIONS = ("geometry", "materials", "circuit", "mechanics", "source")


def _parse_value(raw: str, kind: str, where: str):
    try:
        if kind == "count":
            return int(raw)
        if kind == "string":
            return raw.strip()
        if kind.endswith("_list"):
            base = kind[:-5]
            return tuple(parse_quantity(item.strip(), base)
                         for item in raw.split(",") if item.strip())
        return parse_quantity(raw, kind)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration: the design plus per-command settings."""

    design: DeviceDesign
    raw_text: str
    static_c_max: float | None = None
    static_c_min: float | None = None
    sim_options: SimOptions = field(default_factory=SimOptions)
    gap_start: float | None = None
    gap_stop: float | None = None
    gap_step: float | None = None
    dielectric_values: tuple[float, ...] | None = None
    r_load_start: float | None = None
    r_load_stop: float | None = None
    r_load_points: int | None = None
    c_stor_start: float | None = None
    c_stor_stop: float | None = None
    c_stor_points: int | None = None
    response_accel: float | None = None
    freq_start: float | None = None
    freq_stop: float | None = None
    freq_points: int | None = None
    sizing_z_target: float | None = None
    sizing_masses: tuple[float, ...] | None = None
    sizing_duration: float | None = None
    c_par: float | None = None
    r_par: float | None = None
    out_dir: str = "out"
    formats: tuple[str, ...] = ("csv", "json")

    def gap_values(self) -> list[float]:
        start = self.gap_start if self.gap_start is not None else 5e-6
        stop = self.gap_stop if self.gap_stop is not None else 100e-6
        step = self.gap_step if self.gap_step is not None else 2.5e-6
        return _linear_grid(start, stop, step)

    def dielectric_grid(self) -> list[float]:
        if self.dielectric_values is not None:
            return list(self.dielectric_values)
        return [self.design.materials.dielectric_thickness]

    def r_load_values(self) -> list[float]:
        base = self.design.circuit.load_resistance
        start = self.r_load_start if self.r_load_start is not None else base / 4.0
        stop = self.r_load_stop if self.r_load_stop is not None else base * 4.0
        points = self.r_load_points if self.r_load_points is not None else 9
        return _geometric_grid(start, stop, points)

    def c_stor_values(self) -> list[float]:
        start = self.c_stor_start if self.c_stor_start is not None else 5e-9
        stop = self.c_stor_stop if self.c_stor_stop is not None else 100e-9
        points = self.c_stor_points if self.c_stor_points is not None else 9
        return _geometric_grid(start, stop, points)

    def response_frequencies(self) -> list[float]:
        f0 = natural_frequency(self.design.mechanics.spring_constant,
                               self.design.mechanics.shuttle_mass)
        start = self.freq_start if self.freq_start is not None else 0.5 * f0
        stop = self.freq_stop if self.freq_stop is not None else 2.0 * f0
        points = self.freq_points if self.freq_points is not None else 1501
        if points < 3:
            raise ConfigError("freq_points must be >= 3")
        step = (stop - start) / (points - 1)
        return [start + i * step for i in range(points)]


def _linear_grid(start: float, stop: float, step: float) -> list[float]:
    if step <= 0 or stop < start:
        raise ConfigError(f"bad linear grid: start={start}, stop={stop}, step={step}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(n)]


def _geometric_grid(start: float, stop: float, points: int) -> list[float]:
    if start <= 0 or stop < start or points < 1:
        raise ConfigError(f"bad geometric grid: start={start}, stop={stop}, points={points}")
    if points == 1:
        return [start]
    ratio = (stop / start) ** (1.0 / (points - 1))
    return [start * ratio ** i for i in range(points)]


def parse_config(text: str) -> RunConfig:
    """Parse and strictly validate a configuration string."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                       interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None

    for section in _REQUIRED_SECTIONS:
        if not parser.has_section(section):
            raise ConfigError(f"missing required section [{section}]")

    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        schema = _SCHEMA[section]
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[section][key] = _parse_value(raw, schema[key], f"[{section}] {key}")

    for section in _REQUIRED_SECTIONS:
        missing = sorted(set(_SCHEMA[section]) - set(values[section]))
        if missing:
            raise ConfigError(f"missing keys in [{section}]: {', '.join(missing)}")

    g = values["geometry"]
    design = DeviceDesign(
        geometry=DeviceGeometry(
            shuttle_width=g["shuttle_width"], shuttle_length=g["shuttle_length"],
            finger_length=g["finger_length"], finger_width=g["finger_width"],
            structure_thickness=g["structure_thickness"],
            initial_gap=g["initial_gap"], min_gap=g["min_gap"],
            finger_count=g["finger_count"],
            usable_edge_length=g["usable_edge_length"], chip_area=g["chip_area"]),
        materials=MaterialProps(
            dielectric_thickness=values["materials"]["dielectric_thickness"],
            dielectric_constant=values["materials"]["dielectric_constant"]),
        circuit=CircuitParams(
            input_voltage=values["circuit"]["input_voltage"],
            storage_capacitance=values["circuit"]["storage_capacitance"],
            load_resistance=values["circuit"]["load_resistance"],
            max_output_voltage=values["circuit"]["max_output_voltage"],
            min_output_power=values["circuit"]["min_output_power"]),
        mechanics=MechanicalParams(
            shuttle_mass=values["mechanics"]["shuttle_mass"],
            spring_constant=values["mechanics"]["spring_constant"],
            damping_scale=values["mechanics"]["damping_scale"],
            restitution=values["mechanics"]["restitution"]),
        source=VibrationSource(
            acceleration_amplitude=values["source"]["acceleration"],
            frequency=values["source"]["frequency"]),
    )

    sim = values.get("sim", {})
    sim_options = SimOptions(
        time_step=sim.get("time_step"),
        duration=sim.get("duration", 5.0),
        sample_stride=sim.get("sample_stride"),
        event_tolerance=sim.get("event_tolerance"))

    sweep = values.get("sweep", {})
    response = values.get("response", {})
    sizing = values.get("sizing", {})
    par = values.get("parasitics", {})
    out = values.get("output", {})
    formats = tuple(out.get("formats", "csv json").split())
    for fmt in formats:
        if fmt not in ("csv", "json"):
            raise ConfigError(f"unknown output format {fmt!r}")

    static = values.get("static", {})
    return RunConfig(
        design=design, raw_text=text,
        static_c_max=static.get("c_max"), static_c_min=static.get("c_min"),
        sim_options=sim_options,
        gap_start=sweep.get("gap_start"), gap_stop=sweep.get("gap_stop"),
        gap_step=sweep.get("gap_step"),
        dielectric_values=sweep.get("dielectric_values"),
        r_load_start=sweep.get("r_load_start"), r_load_stop=sweep.get("r_load_stop"),
        r_load_points=sweep.get("r_load_points"),
        c_stor_start=sweep.get("c_stor_start"), c_stor_stop=sweep.get("c_stor_stop"),
        c_stor_points=sweep.get("c_stor_points"),
        response_accel=response.get("acceleration"),
        freq_start=response.get("freq_start"), freq_stop=response.get("freq_stop"),
        freq_points=response.get("freq_points"),
        sizing_z_target=sizing.get("z_target"),
        sizing_masses=sizing.get("mass_values"),
        sizing_duration=sizing.get("duration"),
        c_par=par.get("c_par"), r_par=par.get("r_par"),
        out_dir=out.get("directory", "out"), formats=formats)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


_SERIALIZE_ORDER = (
    ("geometry", (("shuttle_width", "length"), ("shuttle_length", "length"),
                  ("finger_length", "length"), ("finger_width", "length"),
                  ("structure_thickness", "length"), ("initial_gap", "length"),
                  ("min_gap", "length"), ("finger_count", "count"),
                  ("usable_edge_length", "length"), ("chip_area", "area"))),
    ("materials", (("dielectric_thickness", "length"),
                   ("dielectric_constant", "dimensionless"))),
    ("circuit", (("input_voltage", "voltage"), ("storage_capacitance", "capacitance"),
                 ("load_resistance", "resistance"), ("max_output_voltage", "voltage"),
                 ("min_output_power", "power"))),
    ("mechanics", (("shuttle_mass", "mass"), ("spring_constant", "stiffness"),
                   ("damping_scale", "dimensionless"), ("restitution", "dimensionless"))),
    ("source", (("acceleration", "acceleration"), ("frequency", "frequency"))),
)

_FIELD_MAP = {
    ("source", "acceleration"): "acceleration_amplitude",
}


def serialize_design(design: DeviceDesign) -> str:
    """Emit the design as config text (SI units) that parses back identically."""
    lines = []
    for section, keys in _SERIALIZE_ORDER:
        lines.append(f"[{section}]")
        obj = getattr(design, section)
        for key, kind in keys:
            attr = _FIELD_MAP.get((section, key), key)
            value = getattr(obj, attr)
            if kind == "count":
                lines.append(f"{key} = {value}")
            elif kind == "dimensionless":
                lines.append(f"{key} = {value!r}")
            else:
                lines.append(f"{key} = {format_quantity(value, kind)}")
        lines.append("")
    return "\n".join(lines)


def design_to_dict(design: DeviceDesign) -> dict:
    """Nested plain-float snapshot of the design (SI), for JSON envelopes."""
    d = design
    return {
        "geometry": {
            "shuttle_width_m": d.geometry.shuttle_width,
            "shuttle_length_m": d.geometry.shuttle_length,
            "finger_length_m": d.geometry.finger_length,
            "finger_width_m": d.geometry.finger_width,
            "structure_thickness_m": d.geometry.structure_thickness,
            "initial_gap_m": d.geometry.initial_gap,
            "min_gap_m": d.geometry.min_gap,
            "finger_count": d.geometry.finger_count,
            "usable_edge_length_m": d.geometry.usable_edge_length,
            "chip_area_m2": d.geometry.chip_area,
        },
        "materials": {
            "dielectric_thickness_m": d.materials.dielectric_thickness,
            "dielectric_constant": d.materials.dielectric_constant,
        },
        "circuit": {
            "input_voltage_v": d.circuit.input_voltage,
            "storage_capacitance_f": d.circuit.storage_capacitance,
            "load_resistance_ohm": d.circuit.load_resistance,
            "max_output_voltage_v": d.circuit.max_output_voltage,
            "min_output_power_w": d.circuit.min_output_power,
        },
        "mechanics": {
            "shuttle_mass_kg": d.mechanics.shuttle_mass,
            "spring_constant_n_m": d.mechanics.spring_constant,
            "damping_scale": d.mechanics.damping_scale,
            "restitution": d.mechanics.restitution,
        },
        "source": {
            "acceleration_m_s2": d.source.acceleration_amplitude,
            "frequency_hz": d.source.frequency,
        },
    }


def ingest_spectrum(path) -> VibrationSource:
    """Read a measured vibration spectrum and select its dominant peak.

    Expects a CSV with header ``frequency_hz,accel_ms2`` and a strictly
    increasing frequency column.  The returned source drives at the peak
    acceleration line; the full spectrum is retained for reporting.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty spectrum file") from None
        if [h.strip() for h in header] != ["frequency_hz", "accel_ms2"]:
            raise ConfigError(
                f"{path}: expected header 'frequency_hz,accel_ms2', got {','.join(header)!r}")
        rows: list[tuple[float, float]] = []
        for i, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ConfigError(f"{path}:{i}: expected 2 columns, got {len(row)}")
            try:
                f, a = float(row[0]), float(row[1])
            except ValueError:
                raise ConfigError(f"{path}:{i}: malformed row {row!r}") from None
            if f <= 0:
                raise ConfigError(f"{path}:{i}: frequency must be > 0")
            if a < 0:
                raise ConfigError(f"{path}:{i}: acceleration must be >= 0")
            if rows and f <= rows[-1][0]:
                raise ConfigError(f"{path}:{i}: frequency column must be strictly increasing")
            rows.append((f, a))
    if not rows:
        raise ConfigError(f"{path}: no spectrum rows")
    peak_f, peak_a = max(rows, key=lambda r: r[1])
    return VibrationSource(acceleration_amplitude=peak_a, frequency=peak_f,
                           spectrum=tuple(rows))
