"""Core domain model: device description, physical constants, validation.

All quantities are SI base units (m, kg, s, F, ohm, V, W).  The dataclasses
are frozen; every operation in the package is a pure function over them, so
designs can be shared freely between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Physical constants (not configurable).
VACUUM_PERMITTIVITY = 8.854e-12  # F/m
AIR_VISCOSITY = 1.85e-5          # Pa*s, dynamic viscosity of air at room temp


@dataclass(frozen=True)
class DeviceGeometry:
    """In-plane gap-closing comb geometry.

    Each movable finger faces two fixed fingers: a closing gap and an opening
    gap, both ``initial_gap`` wide at rest.  Travel is limited by mechanical
    stops to ``z_stop = initial_gap - min_gap``.  ``usable_edge_length`` is
    the layout budget available for finger cells of pitch
    ``2 * (initial_gap + finger_width)``; it drives the finger count in gap
    sweeps where the count must be re-derived per gap value.
    """

    shuttle_width: float        # m
    shuttle_length: float       # m
    finger_length: float        # m
    finger_width: float         # m
    structure_thickness: float  # m (device-layer thickness = finger height)
    initial_gap: float          # m
    min_gap: float              # m (set by the stops)
    finger_count: int
    usable_edge_length: float   # m
    chip_area: float            # m^2

    @property
    def z_stop(self) -> float:
        """Travel limit: displacement at which the stops engage."""
        return self.initial_gap - self.min_gap

    @property
    def face_area(self) -> float:
        """Overlap area of one finger face pair."""
        return self.finger_length * self.structure_thickness


@dataclass(frozen=True)
class MaterialProps:
    """Side-wall dielectric coating (one layer on each gap wall)."""

    dielectric_thickness: float  # m, per wall
    dielectric_constant: float

    @property
    def vacuum_permittivity(self) -> float:
        return VACUUM_PERMITTIVITY


@dataclass(frozen=True)
class CircuitParams:
    input_voltage: float        # V, priming source
    storage_capacitance: float  # F
    load_resistance: float      # ohm
    max_output_voltage: float   # V, downstream compatibility bound
    min_output_power: float     # W, application requirement


@dataclass(frozen=True)
class MechanicalParams:
    shuttle_mass: float      # kg, total moving mass (plate plus attached mass)
    spring_constant: float   # N/m
    damping_scale: float     # multiplier on the squeeze-film damping model
    restitution: float       # stop-impact restitution, 0 = perfectly inelastic


@dataclass(frozen=True)
class VibrationSource:
    """Sinusoidal base excitation, optionally carrying a measured spectrum.

    When built from a spectrum, ``acceleration_amplitude``/``frequency`` hold
    the dominant peak (single-tone drive); the full spectrum is kept for
    reporting only.
    """

    acceleration_amplitude: float  # m/s^2
    frequency: float               # Hz
    spectrum: tuple[tuple[float, float], ...] | None = None


@dataclass(frozen=True)
class DeviceDesign:
    geometry: DeviceGeometry
    materials: MaterialProps
    circuit: CircuitParams
    mechanics: MechanicalParams
    source: VibrationSource


@dataclass(frozen=True)
class Violation:
    """One violated design invariant; violations are data, not exceptions."""

    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


def validate_design(design: DeviceDesign) -> list[Violation]:
    """Check every type invariant; returns an empty list iff the design is valid."""
    v: list[Violation] = []
    g = design.geometry

    for name in ("shuttle_width", "shuttle_length", "finger_length", "finger_width",
                 "structure_thickness", "initial_gap", "min_gap", "usable_edge_length"):
        if getattr(g, name) <= 0:
            v.append(Violation(f"geometry.{name}", "must be > 0"))
    if g.chip_area <= 0:
        v.append(Violation("geometry.chip_area", "must be > 0"))
    if g.finger_count < 1:
        v.append(Violation("geometry.finger_count", "must be >= 1"))
    if g.min_gap > 0 and g.initial_gap > 0:
        if not g.min_gap < g.initial_gap:
            v.append(Violation("geometry.min_gap", "min_gap must be < initial_gap (d_min < d)"))
        elif not 0 < g.z_stop < g.initial_gap:
            v.append(Violation("geometry.min_gap", "travel limit must satisfy 0 < z_stop < d"))
    # Layout budget: a count derived from the edge budget always satisfies
    # N <= E / (2 (d + W_f)); a calibrated count may exceed the floor by at
    # most one cell of rounding.
    if g.usable_edge_length > 0 and g.initial_gap > 0 and g.finger_width > 0:
        pitch = 2.0 * (g.initial_gap + g.finger_width)
        if g.finger_count > g.usable_edge_length / pitch + 1.0:
            v.append(Violation("geometry.finger_count",
                               "finger count exceeds the usable edge budget"))

    m = design.materials
    if m.dielectric_thickness < 0:
        v.append(Violation("materials.dielectric_thickness", "must be >= 0"))
    if m.dielectric_constant < 1:
        v.append(Violation("materials.dielectric_constant", "must be >= 1"))

    c = design.circuit
    for name in ("input_voltage", "storage_capacitance", "load_resistance",
                 "max_output_voltage", "min_output_power"):
        if getattr(c, name) <= 0:
            v.append(Violation(f"circuit.{name}", "must be > 0"))

    mech = design.mechanics
    if mech.shuttle_mass <= 0:
        v.append(Violation("mechanics.shuttle_mass", "must be > 0"))
    if mech.spring_constant <= 0:
        v.append(Violation("mechanics.spring_constant", "must be > 0"))
    if mech.damping_scale < 0:
        v.append(Violation("mechanics.damping_scale", "must be >= 0"))
    if not 0.0 <= mech.restitution <= 1.0:
        v.append(Violation("mechanics.restitution", "restitution must be in [0, 1]"))

    s = design.source
    if s.acceleration_amplitude < 0:
        v.append(Violation("source.acceleration_amplitude", "must be >= 0"))
    if s.frequency <= 0:
        v.append(Violation("source.frequency", "must be > 0"))
    if s.spectrum is not None:
        for i, (freq, accel) in enumerate(s.spectrum):
            if freq <= 0:
                v.append(Violation(f"source.spectrum[{i}]", "frequency must be > 0"))
            if accel < 0:
                v.append(Violation(f"source.spectrum[{i}]", "acceleration must be >= 0"))

    return v


def conversion_cycle_time(source: VibrationSource | float) -> float:
    """Time of one charge-transfer cycle: half a vibration period.

    The capacitor sweeps max -> min twice per mechanical period, so charge is
    delivered every 1/(2 f).  Accepts a source or a bare frequency in Hz.
    """
    f = source.frequency if isinstance(source, VibrationSource) else float(source)
    if f <= 0:
        raise ValueError(f"frequency must be > 0, got {f}")
    return 1.0 / (2.0 * f)


def natural_frequency(k: float, m: float) -> float:
    """Undamped resonance of the suspension, Hz."""
    if k <= 0 or m <= 0:
        raise ValueError(f"k and m must be > 0, got k={k}, m={m}")
    return math.sqrt(k / m) / (2.0 * math.pi)


def reference_design() -> DeviceDesign:
    """The bundled 1 cm^2 reference design point.

    35 um initial gap, 500 A nitride side-wall coating, 20 nF storage,
    8 Mohm load, 3.3 V priming supply, 7.2 g moving mass tuned near the
    120 Hz drive.  The finger count (377) and the usable edge budget
    (33.9 mm) are calibrated so the profile lands at ~7 nF max capacitance.
    """
    return DeviceDesign(
        geometry=DeviceGeometry(
            shuttle_width=10e-3,
            shuttle_length=8e-3,
            finger_length=1200e-6,
            finger_width=10e-6,
            structure_thickness=200e-6,
            initial_gap=35e-6,
            min_gap=0.1e-6,
            finger_count=377,
            usable_edge_length=33.9e-3,
            chip_area=1e-4,
        ),
        materials=MaterialProps(
            dielectric_thickness=500e-10,
            dielectric_constant=7.0,
        ),
        circuit=CircuitParams(
            input_voltage=3.3,
            storage_capacitance=20e-9,
            load_resistance=8e6,
            max_output_voltage=40.0,
            min_output_power=200e-6,
        ),
        mechanics=MechanicalParams(
            shuttle_mass=7.2e-3,
            spring_constant=4.3e3,
            damping_scale=1.0,
            restitution=0.0,
        ),
        source=VibrationSource(
            acceleration_amplitude=2.25,
            frequency=120.0,
        ),
    )
