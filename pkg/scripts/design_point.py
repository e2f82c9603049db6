#!/usr/bin/env python3
"""Walk the full static design chain for the reference converter.

Prints the constraint derivations (load bound, required capacitance), the
closed-form cycle prediction, and the gap sweep optimum, and writes the
sweep table for plotting.
"""

import argparse
import os

from esconv.capacitance import capacitance_profile
from esconv.config import load_config
from esconv.model import conversion_cycle_time
from esconv.static_design import (cycle_prediction, max_load_resistance,
                                  optimal_gap, required_cmax, sweep_gap,
                                  v_sat_simplified)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=os.path.join(
        os.path.dirname(__file__), "..", "configs", "reference.cfg"))
    ap.add_argument("--out", default="out")
    args = ap.parse_args()

    cfg = load_config(args.config)
    design = cfg.design
    circ = design.circuit
    dt = conversion_cycle_time(design.source)

    print("== constraint derivations ==")
    r_bound = max_load_resistance(circ.max_output_voltage, circ.min_output_power)
    c_req = required_cmax(circ.min_output_power, circ.load_resistance,
                          circ.input_voltage, dt)
    print(f"load bound for {circ.max_output_voltage:.0f} V / "
          f"{circ.min_output_power * 1e6:.0f} uW: {r_bound / 1e6:.1f} Mohm")
    print(f"required c_max at {circ.load_resistance / 1e6:.0f} Mohm: "
          f"{c_req * 1e9:.2f} nF")

    print("\n== capacitance profile ==")
    prof = capacitance_profile(design)
    print(f"c_min = {prof.c_min * 1e12:.1f} pF, c_max = {prof.c_max * 1e9:.2f} nF "
          f"({design.geometry.finger_count} fingers)")

    print("\n== cycle prediction (round-number capacitance pair) ==")
    c_max = cfg.static_c_max or prof.c_max
    c_min = cfg.static_c_min or prof.c_min
    pred = cycle_prediction(c_max, c_min, circ, dt)
    print(f"v_sat = {pred.v_sat:.2f} V, p_out = {pred.p_out * 1e6:.1f} uW, "
          f"ripple = {pred.ripple_fraction * 100:.2f}%")
    print(f"simplified bound: {v_sat_simplified(c_max, circ.load_resistance, circ.input_voltage, dt):.2f} V")

    print("\n== gap sweep ==")
    table = sweep_gap(design, cfg.gap_values(), cfg.dielectric_grid())
    d_best, td_best, p_best = optimal_gap(table, circ.max_output_voltage)
    print(f"optimum: gap = {d_best * 1e6:.1f} um at t_d = {td_best * 1e10:.0f} A, "
          f"p_out = {p_best * 1e6:.1f} uW")

    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "design_point_sweep.csv")
    table.write_csv(path)
    print(f"sweep table -> {path}")


if __name__ == "__main__":
    main()
