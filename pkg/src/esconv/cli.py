"""Command-line surface binding the analysis modules to config files.

Subcommands: validate, static, sweep-gap, sweep-load, simulate,
freq-response, size-mass, parasitics.  Exit codes: 0 success, 1 validation
or configuration failure, 2 numerical non-convergence, 3 I/O error.  Every
JSON envelope echoes the config text so a run is reproducible from its
outputs alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

from . import __version__
from .capacitance import capacitance_profile
from .config import (ConfigError, RunConfig, design_to_dict, ingest_spectrum,
                     load_config)
from .dynamics import (NotConvergedError, SimOptions, SimulationFault,
                       StepSizeError, energy_audit, simulate,
                       size_attached_mass, steady_state_voltage)
from .mechanical import frequency_response
from .model import conversion_cycle_time, validate_design
from .parasitics import ParasiticModel, degraded_output
from .static_design import (cycle_prediction, optimal_gap, sweep_gap,
                            sweep_load_storage, v_sat_approx, v_sat_exact,
                            v_sat_simplified)
from .units import UnitError, parse_quantity


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _write_envelope(args, name: str, results: dict, cfg: RunConfig) -> None:
    payload = {
        "command": name,
        "tool_version": __version__,
        "config": cfg.raw_text,
        "design": design_to_dict(cfg.design),
        "results": results,
    }
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{name.replace('-', '_')}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {}
    if args.out is None:
        args.out = cfg.out_dir
    if getattr(args, "format", None):
        overrides["formats"] = (args.format,)
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _check_design(cfg: RunConfig) -> None:
    violations = validate_design(cfg.design)
    if violations:
        for v in violations:
            print(f"invalid design: {v}", file=sys.stderr)
        raise SystemExit(1)


def _apply_spectrum(args, cfg: RunConfig) -> RunConfig:
    if getattr(args, "spectrum", None):
        source = ingest_spectrum(args.spectrum)
        return dataclasses.replace(cfg, design=dataclasses.replace(
            cfg.design, source=source))
    return cfg


def _grid_overrides(args, cfg: RunConfig, command: str) -> RunConfig:
    grid = getattr(args, "grid", None)
    if not grid:
        return cfg
    overrides: dict = {}
    for part in grid.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad --grid entry {part!r}; expected name=values")
        name, rhs = (s.strip() for s in part.split("=", 1))
        if command == "sweep-gap" and name == "gap":
            start, stop, step = _span3(rhs, "length")
            overrides.update(gap_start=start, gap_stop=stop, gap_step=step)
        elif command == "sweep-gap" and name == "dielectric":
            overrides["dielectric_values"] = tuple(
                parse_quantity(v.strip(), "length") for v in rhs.split(","))
        elif command == "sweep-load" and name == "rload":
            start, stop, n = _span_count(rhs, "resistance")
            overrides.update(r_load_start=start, r_load_stop=stop, r_load_points=n)
        elif command == "sweep-load" and name == "cstor":
            start, stop, n = _span_count(rhs, "capacitance")
            overrides.update(c_stor_start=start, c_stor_stop=stop, c_stor_points=n)
        elif command == "freq-response" and name == "freq":
            start, stop, n = _span_count(rhs, "frequency")
            overrides.update(freq_start=start, freq_stop=stop, freq_points=n)
        else:
            raise ConfigError(f"--grid axis {name!r} not valid for {command}")
    return dataclasses.replace(cfg, **overrides)


def _span3(rhs: str, kind: str) -> tuple[float, float, float]:
    parts = rhs.split(":")
    if len(parts) != 3:
        raise ConfigError(f"expected START:STOP:STEP, got {rhs!r}")
    return tuple(parse_quantity(p.strip(), kind) for p in parts)  # type: ignore


def _span_count(rhs: str, kind: str) -> tuple[float, float, int]:
    parts = rhs.split(":")
    if len(parts) != 3:
        raise ConfigError(f"expected START:STOP:POINTS, got {rhs!r}")
    try:
        n = int(parts[2].strip())
    except ValueError:
        raise ConfigError(f"bad point count in {rhs!r}") from None
    return (parse_quantity(parts[0].strip(), kind),
            parse_quantity(parts[1].strip(), kind), n)


def _cmd_validate(args) -> int:
    cfg = _load(args)
    violations = validate_design(cfg.design)
    if violations:
        for v in violations:
            print(f"invalid design: {v}", file=sys.stderr)
        return 1
    _say(args, "design ok")
    return 0


def _cmd_static(args) -> int:
    cfg = _apply_spectrum(args, _load(args))
    _check_design(cfg)
    prof = capacitance_profile(cfg.design)
    c_max = cfg.static_c_max if cfg.static_c_max is not None else prof.c_max
    c_min = cfg.static_c_min if cfg.static_c_min is not None else prof.c_min
    dt = conversion_cycle_time(cfg.design.source)
    circ = cfg.design.circuit
    pred = cycle_prediction(c_max, c_min, circ, dt)
    results = {
        "c_max_f": c_max,
        "c_min_f": c_min,
        "geometric_c_max_f": prof.c_max,
        "geometric_c_min_f": prof.c_min,
        "cycle_time_s": dt,
        "v_sat_v": pred.v_sat,
        "v_sat_small_ripple_v": v_sat_approx(
            c_max, c_min, circ.storage_capacitance, circ.load_resistance,
            circ.input_voltage, dt),
        "v_sat_simplified_v": v_sat_simplified(
            c_max, circ.load_resistance, circ.input_voltage, dt),
        "p_out_w": pred.p_out,
        "ripple_fraction": pred.ripple_fraction,
        "storage_dominates": pred.storage_dominates,
        "slow_discharge": pred.slow_discharge,
    }
    if "csv" in cfg.formats:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "static.csv"), "w", encoding="utf-8") as fh:
            keys = list(results)
            fh.write(",".join(keys) + "\n")
            fh.write(",".join(_csv_cell(results[k]) for k in keys) + "\n")
    _write_envelope(args, "static", results, cfg)
    _say(args, f"v_sat = {pred.v_sat:.3f} V, p_out = {pred.p_out * 1e6:.1f} uW, "
               f"ripple = {100 * pred.ripple_fraction:.2f}%, "
               f"storage_dominates = {str(pred.storage_dominates).lower()}, "
               f"slow_discharge = {str(pred.slow_discharge).lower()}")
    return 0


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _cmd_sweep_gap(args) -> int:
    cfg = _grid_overrides(args, _load(args), "sweep-gap")
    _check_design(cfg)
    table = sweep_gap(cfg.design, cfg.gap_values(), cfg.dielectric_grid())
    results: dict = {"cells": len(table.cells)}
    try:
        d_best, td_best, p_best = optimal_gap(
            table, cfg.design.circuit.max_output_voltage)
        results["optimum"] = {"gap_m": d_best, "dielectric_m": td_best,
                              "p_out_w": p_best}
        _say(args, f"optimum: gap = {d_best * 1e6:.2f} um, "
                   f"dielectric = {td_best * 1e10:.0f} A, "
                   f"p_out = {p_best * 1e6:.1f} uW")
    except ValueError as exc:
        results["optimum"] = None
        _say(args, f"optimum: none ({exc})")
    if "csv" in cfg.formats:
        os.makedirs(args.out, exist_ok=True)
        table.write_csv(os.path.join(args.out, "sweep_gap.csv"))
    if "json" in cfg.formats:
        results["table"] = table.to_json_dict()
    _write_envelope(args, "sweep-gap", results, cfg)
    return 0


def _cmd_sweep_load(args) -> int:
    cfg = _grid_overrides(args, _load(args), "sweep-load")
    _check_design(cfg)
    table = sweep_load_storage(cfg.design, cfg.r_load_values(), cfg.c_stor_values())
    results: dict = {"cells": len(table.cells)}
    if "csv" in cfg.formats:
        os.makedirs(args.out, exist_ok=True)
        table.write_csv(os.path.join(args.out, "sweep_load.csv"))
    if "json" in cfg.formats:
        results["table"] = table.to_json_dict()
    _write_envelope(args, "sweep-load", results, cfg)
    _say(args, f"swept {len(table.cells)} load/storage cells")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _apply_spectrum(args, _load(args))
    _check_design(cfg)
    options = cfg.sim_options
    if args.duration is not None:
        options = dataclasses.replace(options, duration=args.duration)
    trace = simulate(cfg.design, options=options)
    if "csv" in cfg.formats:
        os.makedirs(args.out, exist_ok=True)
        trace.write_csv(os.path.join(args.out, "trace.csv"))
        trace.write_events_csv(os.path.join(args.out, "events.csv"))
        trace.write_cycles_csv(os.path.join(args.out, "cycles.csv"))
    results: dict = {
        "samples": len(trace.times),
        "events": len(trace.events),
        "cycles": len(trace.cycles),
        "options": {
            "time_step_s": trace.options.time_step,
            "duration_s": trace.options.duration,
            "sample_stride": trace.options.sample_stride,
            "event_tolerance_s": trace.options.event_tolerance,
        },
    }
    v_sat, ripple = steady_state_voltage(trace)  # raises NotConvergedError
    c_max_achieved, c_min_achieved = trace.achieved_capacitances()
    circ = cfg.design.circuit
    v_pred = v_sat_exact(c_max_achieved, c_min_achieved, circ.storage_capacitance,
                         circ.load_resistance, circ.input_voltage,
                         conversion_cycle_time(cfg.design.source))
    balances = energy_audit(trace)
    worst = max((b.relative_residual for b in balances[len(balances) // 2:]),
                default=float("nan"))
    results["steady_state"] = {
        "v_sat_v": v_sat,
        "ripple_v": ripple,
        "achieved_c_max_f": c_max_achieved,
        "achieved_c_min_f": c_min_achieved,
        "v_sat_closed_form_v": v_pred,
        "p_out_w": v_sat * v_sat / circ.load_resistance,
        "worst_cycle_energy_residual": worst,
    }
    _write_envelope(args, "simulate", results, cfg)
    _say(args, f"steady v_sat = {v_sat:.3f} V (closed form {v_pred:.3f} V), "
               f"ripple = {ripple:.3f} V, p_out = {v_sat * v_sat / circ.load_resistance * 1e6:.1f} uW")
    return 0


def _cmd_freq_response(args) -> int:
    cfg = _grid_overrides(args, _load(args), "freq-response")
    _check_design(cfg)
    accel = (cfg.response_accel if cfg.response_accel is not None
             else cfg.design.source.acceleration_amplitude)
    try:
        resp = frequency_response(cfg.design, accel, cfg.response_frequencies())
    except ValueError as exc:
        print(f"frequency response failed: {exc}", file=sys.stderr)
        return 2
    if "csv" in cfg.formats:
        os.makedirs(args.out, exist_ok=True)
        resp.write_csv(os.path.join(args.out, "freq_response.csv"))
    results = {"acceleration_m_s2": accel, **resp.to_json_dict()}
    _write_envelope(args, "freq-response", results, cfg)
    _say(args, f"f_0 = {resp.f_0:.2f} Hz, bandwidth = {resp.delta_f:.2f} Hz, "
               f"Q = {resp.q:.2f}")
    return 0


def _cmd_size_mass(args) -> int:
    cfg = _load(args)
    _check_design(cfg)
    if cfg.sizing_z_target is None or not cfg.sizing_masses:
        print("size-mass needs a [sizing] section with z_target and mass_values",
              file=sys.stderr)
        return 1
    options = SimOptions(duration=cfg.sizing_duration or 1.0)
    sizing = size_attached_mass(cfg.design, cfg.design.source,
                                cfg.sizing_z_target, cfg.sizing_masses, options)
    if "csv" in cfg.formats:
        os.makedirs(args.out, exist_ok=True)
        sizing.write_csv(os.path.join(args.out, "size_mass.csv"))
    _write_envelope(args, "size-mass", sizing.to_json_dict(), cfg)
    _say(args, f"selected mass = {sizing.selected_mass * 1e3:.2f} g, "
               f"spring = {sizing.selected_spring:.1f} N/m")
    return 0


def _cmd_parasitics(args) -> int:
    cfg = _load(args)
    _check_design(cfg)
    c_par = parse_quantity(args.cpar, "capacitance") if args.cpar else cfg.c_par
    r_par = parse_quantity(args.rpar, "resistance") if args.rpar else cfg.r_par
    if c_par is None or r_par is None:
        print("parasitics needs c_par and r_par (config [parasitics] or "
              "--cpar/--rpar)", file=sys.stderr)
        return 1
    model = ParasiticModel(c_par=c_par, r_par=r_par)
    degraded = degraded_output(cfg.design, model)
    clean = degraded_output(cfg.design, ParasiticModel(c_par=0.0, r_par=math.inf))
    results = {
        "c_par_f": c_par,
        "r_par_ohm": r_par,
        "degraded": {"v_sat_v": degraded.v_sat, "p_out_w": degraded.p_out,
                     "slow_discharge": degraded.slow_discharge},
        "clean": {"v_sat_v": clean.v_sat, "p_out_w": clean.p_out,
                  "slow_discharge": clean.slow_discharge},
    }
    _write_envelope(args, "parasitics", results, cfg)
    _say(args, f"clean v_sat = {clean.v_sat:.3f} V -> degraded v_sat = "
               f"{degraded.v_sat:.3e} V")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esconv",
        description="Electrostatic vibration-to-electricity converter design tool")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spectrum=False, grid=False, duration=False, parasitic=False):
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=("csv", "json"),
                       help="restrict tabular output to one format")
        p.add_argument("--quiet", action="store_true", help="suppress stdout summary")
        if spectrum:
            p.add_argument("--spectrum", help="vibration spectrum CSV "
                           "(frequency_hz,accel_ms2); dominant peak drives the run")
        if grid:
            p.add_argument("--grid", help="grid override, e.g. "
                           "\"gap=5 um:100 um:2.5 um; dielectric=500 A,0 A\"")
        if duration:
            p.add_argument("--duration", type=float, default=None,
                           help="simulated time, seconds")

    common(sub.add_parser("validate", help="check the design invariants"))
    common(sub.add_parser("static", help="closed-form cycle prediction"),
           spectrum=True)
    common(sub.add_parser("sweep-gap", help="gap / coating design sweep"), grid=True)
    common(sub.add_parser("sweep-load", help="load / storage sweep"), grid=True)
    common(sub.add_parser("simulate", help="transient simulation"),
           spectrum=True, duration=True)
    common(sub.add_parser("freq-response", help="linear frequency response and Q"),
           grid=True)
    common(sub.add_parser("size-mass", help="resonance-matched mass sizing"))
    p_par = sub.add_parser("parasitics", help="degraded-output prediction")
    common(p_par)
    p_par.add_argument("--cpar", help='parasitic capacitance, e.g. "500 pF"')
    p_par.add_argument("--rpar", help='parasitic resistance, e.g. "2.5 kohm"')

    return parser


_HANDLERS = {
    "validate": _cmd_validate,
    "static": _cmd_static,
    "sweep-gap": _cmd_sweep_gap,
    "sweep-load": _cmd_sweep_load,
    "simulate": _cmd_simulate,
    "freq-response": _cmd_freq_response,
    "size-mass": _cmd_size_mass,
    "parasitics": _cmd_parasitics,
}


def run(argv=None) -> int:
    """Entry point returning the exit code (0 ok, 1 config/validation,
    2 non-convergence, 3 I/O)."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    except (ConfigError, UnitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NotConvergedError, StepSizeError, SimulationFault) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
