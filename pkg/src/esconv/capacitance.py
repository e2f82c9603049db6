"""Capacitance model of the dielectric-coated gap-closing comb.

Each movable finger forms two parallel-plate gaps that change oppositely
with displacement z.  A dielectric layer of thickness t_d on each gap wall
adds a series stack dielectric-air-dielectric, equivalent to an air gap
enlarged by 2 t_d / eps_r.  Fringing fields, finger-tip capacitance and
overlap change are neglected; the overlap area is constant at
finger_length * structure_thickness per face.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import VACUUM_PERMITTIVITY, DeviceDesign


@dataclass(frozen=True)
class GapStack:
    """One wall-to-wall gap: dielectric / air / dielectric in series."""

    air_gap: float              # m, may be 0 only as a limit
    dielectric_thickness: float  # m, per wall
    dielectric_constant: float
    plate_area: float           # m^2

    @property
    def effective_gap(self) -> float:
        """Air-equivalent gap of the series stack."""
        return self.air_gap + 2.0 * self.dielectric_thickness / self.dielectric_constant


@dataclass(frozen=True)
class CapacitanceProfile:
    c_max: float   # F, at the travel limit
    c_min: float   # F, at rest
    z_stop: float  # m
    per_finger_c_max: float
    per_finger_c_min: float


def gap_stack_capacitance(stack: GapStack) -> float:
    """Capacitance of a single coated gap."""
    g_eff = stack.effective_gap
    if g_eff <= 0:
        raise ValueError(f"effective gap must be > 0, got {g_eff}")
    return VACUUM_PERMITTIVITY * stack.plate_area / g_eff


def _gap_offset(design: DeviceDesign) -> float:
    """Air-equivalent thickness added by the two wall coatings."""
    m = design.materials
    return 2.0 * m.dielectric_thickness / m.dielectric_constant


def comb_capacitance(z: float, design: DeviceDesign) -> float:
    """Total comb capacitance at displacement z (even in z).

    C(z) = N eps0 A [1/(d - z + 2 t_d/eps_r) + 1/(d + z + 2 t_d/eps_r)]
    """
    g = design.geometry
    if abs(z) > g.z_stop:
        raise ValueError(f"|z|={abs(z):.3e} exceeds travel limit {g.z_stop:.3e}")
    u = g.initial_gap + _gap_offset(design)
    coef = g.finger_count * VACUUM_PERMITTIVITY * g.face_area
    return coef * (1.0 / (u - z) + 1.0 / (u + z))


def capacitance_gradient(z: float, design: DeviceDesign) -> float:
    """Analytic dC/dz; odd in z, zero at the rest position."""
    g = design.geometry
    if abs(z) >= g.z_stop:
        raise ValueError(f"|z|={abs(z):.3e} must be inside the travel limit {g.z_stop:.3e}")
    u = g.initial_gap + _gap_offset(design)
    coef = g.finger_count * VACUUM_PERMITTIVITY * g.face_area
    return coef * (1.0 / (u - z) ** 2 - 1.0 / (u + z) ** 2)


def capacitance_profile(design: DeviceDesign) -> CapacitanceProfile:
    """Capacitance extrema over the allowed travel."""
    g = design.geometry
    c_min = comb_capacitance(0.0, design)
    c_max = comb_capacitance(g.z_stop, design)
    return CapacitanceProfile(
        c_max=c_max,
        c_min=c_min,
        z_stop=g.z_stop,
        per_finger_c_max=c_max / g.finger_count,
        per_finger_c_min=c_min / g.finger_count,
    )


def electrostatic_force(z: float, q: float, design: DeviceDesign) -> float:
    """Force on the shuttle from stored charge q, at constant charge.

    F = +1/2 (q/C)^2 dC/dz = -d/dz [q^2 / (2 C(z))]: the charged comb pulls
    the shuttle toward increasing capacitance (gap closing).
    """
    c = comb_capacitance(z, design)
    dc = capacitance_gradient(z, design)
    return 0.5 * (q / c) ** 2 * dc
