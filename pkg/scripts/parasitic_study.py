#!/usr/bin/env python3
"""Map the output degradation over a parasitic capacitance/resistance grid.

Reproduces the measurement post-mortem: a few hundred pF to the substrate
alone only dents the output, but a kilo-ohm-scale parallel conductance
collapses it entirely.
"""

import argparse
import csv
import math
import os

from esconv.config import load_config
from esconv.parasitics import ParasiticModel, degraded_output


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=os.path.join(
        os.path.dirname(__file__), "..", "configs", "reference.cfg"))
    ap.add_argument("--out", default="out")
    args = ap.parse_args()

    design = load_config(args.config).design
    clean = degraded_output(design, ParasiticModel(0.0, math.inf))
    print(f"clean prediction: {clean.v_sat:.2f} V / {clean.p_out * 1e6:.1f} uW")

    c_values = [0.0, 100e-12, 500e-12, 1e-9]
    r_values = [math.inf, 1e9, 1e7, 1e5, 1e4, 2.5e3]

    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "parasitic_grid.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["c_par_f", "r_par_ohm", "v_sat_v", "p_out_w"])
        for c_par in c_values:
            for r_par in r_values:
                pred = degraded_output(design, ParasiticModel(c_par, r_par))
                writer.writerow([repr(c_par), repr(r_par),
                                 repr(pred.v_sat), repr(pred.p_out)])
    print(f"grid -> {path}")

    measured = degraded_output(design, ParasiticModel(500e-12, 2.5e3))
    print(f"measured parasitics (500 pF, 2.5 kohm): v_sat = "
          f"{measured.v_sat:.2e} V -> output effectively zero")


if __name__ == "__main__":
    main()
