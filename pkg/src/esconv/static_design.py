"""Closed-form charge-cycle analysis and design-space sweeps.

One conversion cycle: the comb is primed at its capacitance maximum, carried
at constant charge to the minimum (voltage rises, vibration energy becomes
electrostatic energy), then shared into the storage capacitor which feeds
the load.  The steady-state saturation voltage has a closed form; two regime
approximations and their validity flags are provided alongside.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

from .capacitance import capacitance_profile
from .model import CircuitParams, DeviceDesign, conversion_cycle_time

# Threshold for "much larger than" in the regime checks below.
REGIME_FACTOR = 20.0

# Uncoated fingers short when they touch, so a sweep cell without a
# dielectric coating cannot use a sub-half-micron stop gap.
BARE_FINGER_MIN_GAP = 0.5e-6

# exp() argument above which the storage fully discharges between transfers
# (the closed form underflows to zero well before float overflow at ~709).
_EXP_OVERFLOW = 700.0


def v_sat_exact(c_max: float, c_min: float, c_stor: float,
                r_l: float, v_in: float, dt: float) -> float:
    """Steady-state pre-transfer terminal voltage of the charge-discharge cycle.

    Returns +0.0 when the discharge time constant is so small that the
    storage empties between transfers (exp overflow regime).
    """
    for name, val in (("c_max", c_max), ("c_min", c_min), ("c_stor", c_stor),
                      ("r_l", r_l), ("v_in", v_in), ("dt", dt)):
        if val <= 0:
            raise ValueError(f"{name} must be > 0, got {val}")
    x = dt / (r_l * c_stor)
    if x > _EXP_OVERFLOW:
        return 0.0
    return (c_max / c_stor) * v_in / ((1.0 + c_min / c_stor) * math.exp(x) - 1.0)


def v_sat_approx(c_max: float, c_min: float, c_stor: float,
                 r_l: float, v_in: float, dt: float) -> float:
    """Small-ripple approximation, valid when r_l * c_stor >> dt."""
    return c_max * v_in / (c_min * (1.0 + dt / (r_l * c_min) + dt / (r_l * c_stor)))


def v_sat_simplified(c_max: float, r_l: float, v_in: float, dt: float) -> float:
    """Fully simplified form (c_stor >> c_min and r_l * c_min << dt):
    saturation voltage is the per-cycle charge rate times the load."""
    return c_max * v_in * r_l / dt


def p_out(v_sat: float, r_l: float) -> float:
    """Load power at a given saturation voltage."""
    return v_sat * v_sat / r_l


def p_out_simplified(c_max: float, v_in: float, r_l: float, dt: float) -> float:
    """Load power in the fully simplified regime."""
    rate = c_max * v_in / dt
    return rate * rate * r_l


def max_load_resistance(v_max: float, p_min: float) -> float:
    """Largest load satisfying both the voltage cap and the power floor."""
    if v_max <= 0 or p_min <= 0:
        raise ValueError("v_max and p_min must be > 0")
    return v_max * v_max / p_min


def required_cmax(p_min: float, r_l: float, v_in: float, dt: float) -> float:
    """Maximum capacitance needed for p_min at the given load (simplified regime)."""
    if min(p_min, r_l, v_in, dt) <= 0:
        raise ValueError("all arguments must be > 0")
    return (dt / v_in) * math.sqrt(p_min / r_l)


@dataclass(frozen=True)
class CyclePrediction:
    """Closed-form cycle outcome plus regime bookkeeping.

    ripple_fraction is the fraction of the post-transfer peak lost to the
    load within one cycle, 1 - exp(-dt / (r_l c_stor)).
    """

    v_sat: float
    p_out: float
    ripple_fraction: float
    storage_dominates: bool  # c_stor >> c_min
    slow_discharge: bool     # r_l c_stor >> dt


def cycle_prediction(c_max: float, c_min: float, circuit: CircuitParams,
                     dt: float) -> CyclePrediction:
    """Exact-path prediction for one capacitance profile and circuit."""
    v = v_sat_exact(c_max, c_min, circuit.storage_capacitance,
                    circuit.load_resistance, circuit.input_voltage, dt)
    x = dt / (circuit.load_resistance * circuit.storage_capacitance)
    ripple = 1.0 - math.exp(-x) if x < _EXP_OVERFLOW else 1.0
    return CyclePrediction(
        v_sat=v,
        p_out=p_out(v, circuit.load_resistance),
        ripple_fraction=ripple,
        storage_dominates=circuit.storage_capacitance > REGIME_FACTOR * c_min,
        slow_discharge=circuit.load_resistance * circuit.storage_capacitance
        > REGIME_FACTOR * dt,
    )


def finger_count_for_layout(d: float, w_f: float, e_budget: float) -> int:
    """Fingers that fit the edge budget at pitch 2 (d + w_f), floor convention.

    One movable-plus-fixed finger cell occupies two gaps and one finger width
    on each side of the cell boundary.
    """
    if min(d, w_f, e_budget) <= 0:
        raise ValueError("d, w_f and e_budget must be > 0")
    n = math.floor(e_budget / (2.0 * (d + w_f)))
    if n < 1:
        raise ValueError(f"gap {d:.3e} m too large for layout budget {e_budget:.3e} m")
    return n


@dataclass(frozen=True)
class SweepCell:
    """One grid point of a design sweep.  ``error`` is set (and the numeric
    fields are NaN) when the cell could not be evaluated."""

    axis1: float
    axis2: float
    finger_count: int
    c_max: float
    c_min: float
    v_sat: float
    p_out: float
    v_sat_ok: bool
    p_out_ok: bool
    slow_discharge: bool
    error: str | None = None


@dataclass(frozen=True)
class SweepTable:
    """Dense grid of sweep cells; cells appear in axis1-major order."""

    axis_names: tuple[str, str]
    cells: tuple[SweepCell, ...]

    _COLUMNS = ("finger_count", "c_max_f", "c_min_f", "v_sat_v", "p_out_w",
                "v_sat_ok", "p_out_ok", "slow_discharge", "error")

    def header(self) -> list[str]:
        return [self.axis_names[0], self.axis_names[1], *self._COLUMNS]

    def rows(self) -> list[list[str]]:
        out = []
        for c in self.cells:
            out.append([
                repr(c.axis1), repr(c.axis2), str(c.finger_count),
                repr(c.c_max), repr(c.c_min), repr(c.v_sat), repr(c.p_out),
                "true" if c.v_sat_ok else "false",
                "true" if c.p_out_ok else "false",
                "true" if c.slow_discharge else "false",
                c.error or "",
            ])
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.header())
            writer.writerows(self.rows())

    def to_json_dict(self) -> dict:
        keys = self.header()
        return {"columns": keys,
                "cells": [dict(zip(keys, row)) for row in self.rows()]}


_NAN_CELL = dict(finger_count=0, c_max=float("nan"), c_min=float("nan"),
                 v_sat=float("nan"), p_out=float("nan"),
                 v_sat_ok=False, p_out_ok=False, slow_discharge=False)


def sweep_gap(design: DeviceDesign, gap_values, dielectric_values) -> SweepTable:
    """Saturation voltage and power versus initial gap and coating thickness.

    Every cell re-derives the finger count from the layout budget, rebuilds
    the capacitance profile and evaluates the exact cycle closed form.
    Uncoated cells (t_d = 0) keep at least BARE_FINGER_MIN_GAP of stop
    clearance since bare fingers must not touch.  Cell failures are recorded
    in the cell, never raised.
    """
    gaps = list(gap_values)
    thicknesses = list(dielectric_values)
    if not gaps or not thicknesses:
        raise ValueError("sweep ranges must be non-empty")
    dt = conversion_cycle_time(design.source)
    circuit = design.circuit
    cells = []
    for d in gaps:
        for t_d in thicknesses:
            try:
                d_min = design.geometry.min_gap if t_d > 0 else max(
                    design.geometry.min_gap, BARE_FINGER_MIN_GAP)
                if d_min >= d:
                    raise ValueError(f"stop gap {d_min:.3e} not below initial gap {d:.3e}")
                n = finger_count_for_layout(d, design.geometry.finger_width,
                                            design.geometry.usable_edge_length)
                cand = replace(
                    design,
                    geometry=replace(design.geometry, initial_gap=d, min_gap=d_min,
                                     finger_count=n),
                    materials=replace(design.materials, dielectric_thickness=t_d),
                )
                prof = capacitance_profile(cand)
                pred = cycle_prediction(prof.c_max, prof.c_min, circuit, dt)
                cells.append(SweepCell(
                    axis1=d, axis2=t_d, finger_count=n,
                    c_max=prof.c_max, c_min=prof.c_min,
                    v_sat=pred.v_sat, p_out=pred.p_out,
                    v_sat_ok=pred.v_sat <= circuit.max_output_voltage,
                    p_out_ok=pred.p_out >= circuit.min_output_power,
                    slow_discharge=pred.slow_discharge,
                ))
            except ValueError as exc:
                cells.append(SweepCell(axis1=d, axis2=t_d, error=str(exc), **_NAN_CELL))
    return SweepTable(axis_names=("gap_m", "dielectric_m"), cells=tuple(cells))


def sweep_load_storage(design: DeviceDesign, r_l_values, c_stor_values) -> SweepTable:
    """Load power over a load-resistance / storage-capacitance grid at the
    design's fixed capacitance profile."""
    r_values = list(r_l_values)
    c_values = list(c_stor_values)
    if not r_values or not c_values:
        raise ValueError("sweep ranges must be non-empty")
    dt = conversion_cycle_time(design.source)
    prof = capacitance_profile(design)
    cells = []
    for r_l in r_values:
        for c_stor in c_values:
            try:
                circuit = replace(design.circuit, load_resistance=r_l,
                                  storage_capacitance=c_stor)
                pred = cycle_prediction(prof.c_max, prof.c_min, circuit, dt)
                cells.append(SweepCell(
                    axis1=r_l, axis2=c_stor,
                    finger_count=design.geometry.finger_count,
                    c_max=prof.c_max, c_min=prof.c_min,
                    v_sat=pred.v_sat, p_out=pred.p_out,
                    v_sat_ok=pred.v_sat <= design.circuit.max_output_voltage,
                    p_out_ok=pred.p_out >= design.circuit.min_output_power,
                    slow_discharge=pred.slow_discharge,
                ))
            except ValueError as exc:
                cells.append(SweepCell(axis1=r_l, axis2=c_stor, error=str(exc),
                                       **_NAN_CELL))
    return SweepTable(axis_names=("r_load_ohm", "c_stor_f"), cells=tuple(cells))


def optimal_gap(table: SweepTable, v_max: float) -> tuple[float, float, float]:
    """Best feasible sweep cell: maximum power with v_sat <= v_max.

    Ties go to the larger gap (easier to fabricate).  Returns
    (gap, dielectric_thickness, p_out).
    """
    best: SweepCell | None = None
    for c in table.cells:
        if c.error is not None or math.isnan(c.p_out) or c.v_sat > v_max:
            continue
        if best is None or c.p_out > best.p_out or (
                c.p_out == best.p_out and c.axis1 > best.axis1):
            best = c
    if best is None:
        raise ValueError("no feasible cell: every grid point violates the voltage cap")
    return best.axis1, best.axis2, best.p_out
