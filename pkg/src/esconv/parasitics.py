"""Measured non-idealities: parasitic capacitance and conductance.

The plate-to-substrate capacitance loads both capacitance extrema equally
(it does not move with the shuttle), and the parasitic conductance sits in
parallel with the load across the output node.  Both feed the exact cycle
closed form to predict the degraded output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .capacitance import capacitance_profile
from .model import DeviceDesign, conversion_cycle_time
from .static_design import CyclePrediction, cycle_prediction


@dataclass(frozen=True)
class ParasiticModel:
    c_par: float  # F, in parallel with the variable capacitor
    r_par: float  # ohm, parallel conductance path (may be math.inf)

    def __post_init__(self):
        if self.c_par < 0:
            raise ValueError("c_par must be >= 0")
        if not self.r_par > 0:
            raise ValueError("r_par must be > 0")


def estimate_cpar(c_measured: float, c_calculated: float) -> float:
    """Parasitic capacitance as the excess of measurement over geometry."""
    if c_measured < c_calculated:
        raise ValueError(
            f"measured capacitance {c_measured:.3e} below calculated {c_calculated:.3e}")
    return c_measured - c_calculated


def degraded_output(design: DeviceDesign, parasitic: ParasiticModel) -> CyclePrediction:
    """Cycle prediction with the parasitics folded in.

    c_par adds to both capacitance extrema; r_par combines in parallel with
    the load.  A vanishing prediction (discharge-dominated regime) is the
    expected outcome for a low-resistance particle path.
    """
    prof = capacitance_profile(design)
    dt = conversion_cycle_time(design.source)
    r_l = design.circuit.load_resistance
    r_eff = r_l if math.isinf(parasitic.r_par) else (
        r_l * parasitic.r_par / (r_l + parasitic.r_par))
    circuit = replace(design.circuit, load_resistance=r_eff)
    pred = cycle_prediction(prof.c_max + parasitic.c_par,
                            prof.c_min + parasitic.c_par, circuit, dt)
    # Report the power actually delivered to the load resistor.
    return CyclePrediction(
        v_sat=pred.v_sat,
        p_out=pred.v_sat ** 2 / r_l,
        ripple_fraction=pred.ripple_fraction,
        storage_dominates=pred.storage_dominates,
        slow_discharge=pred.slow_discharge,
    )
