"""Hybrid electro-mechanical transient simulation.

The shuttle obeys m z'' + b(z) z' + k z = F_es(z, q) + m a(t) with squeeze-film
damping b(z), the constant-charge electrostatic force F_es, and frame drive
a(t) = A sin(2 pi f t) (frame acceleration convention y'' = -A sin).  Charge
events are switched by capacitance extrema: the comb is primed from the input
source at each local C maximum (SW1) and shares its charge into the storage
node at each local C minimum (SW2); travel is limited by stops with a
restitution-coefficient impact model.

Integration is classical fixed-step RK4 with bisection event localization,
chosen over adaptive stepping for bit-exact reproducibility.  `simulate` runs
on the compiled kernel in `_kernel`; `step` is the pure-Python reference of
the same algorithm.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernel
from .model import (AIR_VISCOSITY, VACUUM_PERMITTIVITY, DeviceDesign,
                    VibrationSource)

MIN_STEPS_PER_PERIOD = 200
DEFAULT_STEPS_PER_PERIOD = 5000
DEFAULT_MAX_SAMPLES = 60_000


class StepSizeError(RuntimeError):
    """Two switch events landed in one step: the step size is too coarse."""


class NotConvergedError(RuntimeError):
    """A trace or search did not reach a usable steady state."""


class SimulationFault(RuntimeError):
    """The integrator produced an invalid state."""


class SwitchPhase(enum.IntEnum):
    AWAITING_CMAX = _kernel.PHASE_AWAITING_CMAX
    CHARGED_CONSTANT_Q = _kernel.PHASE_CHARGED_CONSTANT_Q


@dataclass(frozen=True)
class SimState:
    t: float = 0.0
    z: float = 0.0
    z_dot: float = 0.0
    q_v: float = 0.0     # C, charge on the variable capacitor
    v_stor: float = 0.0  # V, storage/load terminal voltage
    phase: SwitchPhase = SwitchPhase.AWAITING_CMAX


@dataclass(frozen=True)
class SimOptions:
    """Stepping controls; unset fields are derived from the drive frequency."""

    time_step: float | None = None      # s
    duration: float = 5.0               # s
    sample_stride: int | None = None
    event_tolerance: float | None = None  # s

    def resolved(self, source: VibrationSource) -> "SimOptions":
        period = 1.0 / source.frequency
        h = self.time_step if self.time_step is not None else period / DEFAULT_STEPS_PER_PERIOD
        if h <= 0:
            raise ValueError("time_step must be > 0")
        if h > period / MIN_STEPS_PER_PERIOD:
            raise ValueError(
                f"time_step {h:.3e} s gives fewer than {MIN_STEPS_PER_PERIOD} steps "
                f"per vibration period")
        if self.duration <= 0:
            raise ValueError("duration must be > 0")
        n_steps = max(1, round(self.duration / h))
        stride = self.sample_stride if self.sample_stride is not None else max(
            1, n_steps // DEFAULT_MAX_SAMPLES)
        if stride < 1:
            raise ValueError("sample_stride must be >= 1")
        tol = self.event_tolerance if self.event_tolerance is not None else h * 1e-3
        if tol <= 0:
            raise ValueError("event_tolerance must be > 0")
        return SimOptions(time_step=h, duration=self.duration,
                          sample_stride=stride, event_tolerance=tol)


_EVENT_NAMES = {_kernel.EV_SW1: "SW1_CHARGE",
                _kernel.EV_SW2: "SW2_TRANSFER",
                _kernel.EV_STOP: "STOP_IMPACT"}


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    z: float
    cap: float
    q_before: float
    q_after: float
    v_before: float
    v_after: float
    energy_in: float      # J delivered by the input source (SW1 only)
    energy_loss: float    # J lost in the ideal-switch commutation / impact
    speed_before: float
    speed_after: float


@dataclass(frozen=True)
class CycleRecord:
    """One conversion cycle, closed at its SW2 transfer."""

    index: int
    time: float
    c_at_charge: float     # F at the cycle's SW1 (NaN before the first SW1)
    c_at_transfer: float   # F at the closing SW2
    energy_converted: float  # J moved from mechanical to electrical at constant q


def _coeffs(design: DeviceDesign) -> dict[str, float]:
    g = design.geometry
    mat = design.materials
    mech = design.mechanics
    circ = design.circuit
    return dict(
        m=mech.shuttle_mass,
        k=mech.spring_constant,
        b_coef=mech.damping_scale * AIR_VISCOSITY * g.finger_count
        * g.finger_length * g.structure_thickness ** 3,
        cap_coef=g.finger_count * VACUUM_PERMITTIVITY * g.face_area,
        u_gap=g.initial_gap + 2.0 * mat.dielectric_thickness / mat.dielectric_constant,
        d_gap=g.initial_gap,
        z_stop=g.z_stop,
        e_r=mech.restitution,
        v_in=circ.input_voltage,
        c_stor=circ.storage_capacitance,
        r_l=circ.load_resistance,
    )


def damping_coefficient(z: float, design: DeviceDesign) -> float:
    """Squeeze-film damping coefficient b(z) >= 0, N s/m.

    b(z) = scale * mu * N * L_f * t^3 * [1/(d-z)^3 + 1/(d+z)^3]; the cubic
    gap dependence makes the film a stiff cushion near the stops.  z is
    clamped to the travel limit (trial states may transiently exceed it).
    """
    c = _coeffs(design)
    return _kernel._damping(z, c["b_coef"], c["d_gap"], c["z_stop"])


def mech_damping_force(z: float, z_dot: float, design: DeviceDesign) -> float:
    """Signed squeeze-film force, -b(z) * z_dot: always opposes the velocity."""
    return -damping_coefficient(z, design) * z_dot


def cycle_map(v_l: float, c_max: float, c_min: float, c_stor: float,
              r_l: float, v_in: float, dt: float) -> float:
    """One charge-share-then-discharge iteration of the storage voltage.

    The steady-state saturation voltage is the fixed point of this map and
    coincides with the closed form in `static_design.v_sat_exact`.
    """
    return math.exp(-dt / (r_l * c_stor)) * (c_max * v_in + c_stor * v_l) / (c_min + c_stor)


def _drive(source: VibrationSource) -> tuple[float, float]:
    return source.acceleration_amplitude, 2.0 * math.pi * source.frequency


def step(state: SimState, design: DeviceDesign, source: VibrationSource,
         options: SimOptions, events: list[Event] | None = None) -> SimState:
    """Advance one fixed step, applying any events triggered within it.

    Pure-Python reference of the kernel algorithm; use `simulate` for long
    runs.  Triggered events are appended to ``events`` when provided.
    """
    opts = options.resolved(source)
    c = _coeffs(design)
    amp, omega = _drive(source)
    h = opts.time_step
    tau = c["r_l"] * c["c_stor"]
    args = (c["m"], c["k"], c["b_coef"], c["cap_coef"], c["u_gap"], c["d_gap"],
            c["z_stop"], amp, omega)

    t_cur = state.t
    t_next = state.t + h
    z, zd, q, v = state.z, state.z_dot, state.q_v, state.v_stor
    phase = int(state.phase)
    h_rem = t_next - t_cur
    sw1_seen = sw2_seen = stop_seen = guard = 0
    z_stop = c["z_stop"]

    def _apply_stop() -> None:
        nonlocal z, zd, stop_seen
        stop_seen += 1
        zd_before = zd
        z = z_stop if z > 0.0 else -z_stop
        zd = -c["e_r"] * zd_before
        if events is not None and abs(zd_before) > _kernel.STOP_LOG_MIN_SPEED:
            events.append(Event(
                time=t_cur, kind="STOP_IMPACT", z=z,
                cap=_kernel._cap(z, c["cap_coef"], c["u_gap"], z_stop),
                q_before=q, q_after=q, v_before=v, v_after=v,
                energy_in=0.0,
                energy_loss=0.5 * c["m"] * (zd_before ** 2 - zd ** 2),
                speed_before=zd_before, speed_after=zd))

    while h_rem > 0.0:
        guard += 1
        if guard > 64:
            raise SimulationFault("event localization did not terminate within one step")

        if abs(z) > z_stop:
            _apply_stop()
            if stop_seen >= 3:
                zd = 0.0
                v *= math.exp(-h_rem / tau)
                h_rem = 0.0
                break

        z1, zd1 = _kernel._rk4(t_cur, z, zd, q, h_rem, *args)
        trig_stop = abs(z1) > z_stop
        g0 = _kernel._dcdt(z, zd, c["cap_coef"], c["u_gap"], z_stop)
        g1 = _kernel._dcdt(z1, zd1, c["cap_coef"], c["u_gap"], z_stop)
        if phase == _kernel.PHASE_AWAITING_CMAX:
            trig_sw = (g0 > 0.0 and g1 <= 0.0) or (g0 >= 0.0 and g1 < 0.0)
        else:
            trig_sw = (g0 < 0.0 and g1 >= 0.0) or (g0 <= 0.0 and g1 > 0.0)

        if not trig_stop and not trig_sw:
            z, zd = z1, zd1
            v *= math.exp(-h_rem / tau)
            h_rem = 0.0
            break

        h_stop = h_rem + 1.0
        h_sw = h_rem + 1.0
        if trig_stop:
            lo, hi = 0.0, h_rem
            while hi - lo > opts.event_tolerance:
                mid = 0.5 * (lo + hi)
                zm, _ = _kernel._rk4(t_cur, z, zd, q, mid, *args)
                if abs(zm) > z_stop:
                    hi = mid
                else:
                    lo = mid
            h_stop = hi
        if trig_sw:
            lo, hi = 0.0, h_rem
            while hi - lo > opts.event_tolerance:
                mid = 0.5 * (lo + hi)
                zm, zdm = _kernel._rk4(t_cur, z, zd, q, mid, *args)
                gm = _kernel._dcdt(zm, zdm, c["cap_coef"], c["u_gap"], z_stop)
                if (phase == _kernel.PHASE_AWAITING_CMAX and gm <= 0.0) or (
                        phase == _kernel.PHASE_CHARGED_CONSTANT_Q and gm >= 0.0):
                    hi = mid
                else:
                    lo = mid
            h_sw = hi

        if trig_stop and trig_sw:
            is_sw = h_sw < h_stop - opts.event_tolerance
        else:
            is_sw = trig_sw
        h_star = h_sw if is_sw else h_stop
        z, zd = _kernel._rk4(t_cur, z, zd, q, h_star, *args)
        v *= math.exp(-h_star / tau)
        t_cur += h_star
        h_rem -= h_star

        if is_sw:
            c_ev = _kernel._cap(z, c["cap_coef"], c["u_gap"], z_stop)
            if phase == _kernel.PHASE_AWAITING_CMAX:
                sw1_seen += 1
                q_old = q
                q = c_ev * c["v_in"]
                if events is not None:
                    events.append(Event(
                        time=t_cur, kind="SW1_CHARGE", z=z, cap=c_ev,
                        q_before=q_old, q_after=q, v_before=v, v_after=v,
                        energy_in=c["v_in"] * (q - q_old),
                        energy_loss=0.5 * (q - q_old) ** 2 / c_ev,
                        speed_before=zd, speed_after=zd))
                phase = _kernel.PHASE_CHARGED_CONSTANT_Q
            else:
                sw2_seen += 1
                q_old, v_old = q, v
                v_new = (q + c["c_stor"] * v) / (c_ev + c["c_stor"])
                q = c_ev * v_new
                v = v_new
                if events is not None:
                    events.append(Event(
                        time=t_cur, kind="SW2_TRANSFER", z=z, cap=c_ev,
                        q_before=q_old, q_after=q, v_before=v_old, v_after=v_new,
                        energy_in=0.0,
                        energy_loss=0.5 * (c_ev * c["c_stor"] / (c_ev + c["c_stor"]))
                        * (q_old / c_ev - v_old) ** 2,
                        speed_before=zd, speed_after=zd))
                phase = _kernel.PHASE_AWAITING_CMAX
            if sw1_seen and sw2_seen:
                raise StepSizeError(
                    "both switch events inside one step: reduce time_step")
        else:
            _apply_stop()
            if stop_seen >= 3:
                zd = 0.0
                v *= math.exp(-h_rem / tau)
                h_rem = 0.0
                break

    if not (math.isfinite(z) and math.isfinite(zd) and math.isfinite(v)):
        raise SimulationFault(f"non-finite state after step at t={t_next:.6e}")

    return SimState(t=t_next, z=z, z_dot=zd, q_v=q, v_stor=v,
                    phase=SwitchPhase(phase))


def detect_events(prev: SimState, next: SimState,
                  design: DeviceDesign) -> list[Event]:
    """Events triggered between two consecutive states, one step apart.

    Times and values are first-order (linear interpolation of the trigger
    function); the stepper itself refines the instant by bisection before
    applying the transform.
    """
    c = _coeffs(design)
    z_stop = c["z_stop"]
    out: list[Event] = []
    g0 = _kernel._dcdt(prev.z, prev.z_dot, c["cap_coef"], c["u_gap"], z_stop)
    g1 = _kernel._dcdt(next.z, next.z_dot, c["cap_coef"], c["u_gap"], z_stop)

    def _interp(f0: float, f1: float) -> float:
        if f1 == f0:
            return prev.t
        w = -f0 / (f1 - f0)
        w = min(max(w, 0.0), 1.0)
        return prev.t + w * (next.t - prev.t)

    if abs(next.z) > z_stop and abs(prev.z) <= z_stop:
        t_ev = _interp(abs(prev.z) - z_stop, abs(next.z) - z_stop)
        zc = z_stop if next.z > 0 else -z_stop
        zd_after = -c["e_r"] * next.z_dot
        out.append(Event(
            time=t_ev, kind="STOP_IMPACT", z=zc,
            cap=_kernel._cap(zc, c["cap_coef"], c["u_gap"], z_stop),
            q_before=prev.q_v, q_after=prev.q_v,
            v_before=prev.v_stor, v_after=prev.v_stor,
            energy_in=0.0,
            energy_loss=0.5 * c["m"] * (next.z_dot ** 2 - zd_after ** 2),
            speed_before=next.z_dot, speed_after=zd_after))

    if prev.phase == SwitchPhase.AWAITING_CMAX:
        triggered = (g0 > 0.0 and g1 <= 0.0) or (g0 >= 0.0 and g1 < 0.0)
    else:
        triggered = (g0 < 0.0 and g1 >= 0.0) or (g0 <= 0.0 and g1 > 0.0)
    if triggered:
        t_ev = _interp(g0, g1)
        w = 0.0 if next.t == prev.t else (t_ev - prev.t) / (next.t - prev.t)
        z_ev = prev.z + w * (next.z - prev.z)
        c_ev = _kernel._cap(z_ev, c["cap_coef"], c["u_gap"], z_stop)
        if prev.phase == SwitchPhase.AWAITING_CMAX:
            q_new = c_ev * c["v_in"]
            out.append(Event(
                time=t_ev, kind="SW1_CHARGE", z=z_ev, cap=c_ev,
                q_before=prev.q_v, q_after=q_new,
                v_before=prev.v_stor, v_after=prev.v_stor,
                energy_in=c["v_in"] * (q_new - prev.q_v),
                energy_loss=0.5 * (q_new - prev.q_v) ** 2 / c_ev,
                speed_before=prev.z_dot, speed_after=prev.z_dot))
        else:
            v_new = (prev.q_v + c["c_stor"] * prev.v_stor) / (c_ev + c["c_stor"])
            out.append(Event(
                time=t_ev, kind="SW2_TRANSFER", z=z_ev, cap=c_ev,
                q_before=prev.q_v, q_after=c_ev * v_new,
                v_before=prev.v_stor, v_after=v_new,
                energy_in=0.0,
                energy_loss=0.5 * (c_ev * c["c_stor"] / (c_ev + c["c_stor"]))
                * (prev.q_v / c_ev - prev.v_stor) ** 2,
                speed_before=prev.z_dot, speed_after=prev.z_dot))

    out.sort(key=lambda e: e.time)
    return out


@dataclass(frozen=True)
class SimTrace:
    """Sampled states, event log and per-cycle records of one run."""

    times: np.ndarray
    z: np.ndarray
    z_dot: np.ndarray
    q_v: np.ndarray
    v_stor: np.ndarray
    cap: np.ndarray
    events: tuple[Event, ...]
    cycles: tuple[CycleRecord, ...]
    options: SimOptions
    design: DeviceDesign
    final_state: SimState

    TRACE_COLUMNS = ("t_s", "z_m", "z_dot_m_s", "q_v_c", "v_stor_v", "c_v_f")
    EVENT_COLUMNS = ("t_s", "kind", "z_m", "c_v_f", "q_before_c", "q_after_c",
                     "v_before_v", "v_after_v", "energy_in_j", "energy_loss_j",
                     "speed_before_m_s", "speed_after_m_s")
    CYCLE_COLUMNS = ("index", "t_s", "c_at_charge_f", "c_at_transfer_f",
                     "energy_converted_j")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.TRACE_COLUMNS)
            for i in range(len(self.times)):
                writer.writerow([repr(float(col[i])) for col in
                                 (self.times, self.z, self.z_dot,
                                  self.q_v, self.v_stor, self.cap)])

    def write_events_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.EVENT_COLUMNS)
            for e in self.events:
                writer.writerow([repr(e.time), e.kind, repr(e.z), repr(e.cap),
                                 repr(e.q_before), repr(e.q_after),
                                 repr(e.v_before), repr(e.v_after),
                                 repr(e.energy_in), repr(e.energy_loss),
                                 repr(e.speed_before), repr(e.speed_after)])

    def write_cycles_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CYCLE_COLUMNS)
            for r in self.cycles:
                writer.writerow([str(r.index), repr(r.time), repr(r.c_at_charge),
                                 repr(r.c_at_transfer), repr(r.energy_converted)])

    def steady_cycles(self) -> tuple[CycleRecord, ...]:
        """Post-transient cycles: the last half of the run, at least 10."""
        n = len(self.cycles)
        if n < 20:
            raise NotConvergedError(
                f"only {n} conversion cycles in the trace; need >= 20 "
                "(10 post-transient)")
        return self.cycles[n // 2:]

    def achieved_capacitances(self) -> tuple[float, float]:
        """(C at charge, C at transfer) averaged over the steady cycles."""
        cycles = [r for r in self.steady_cycles() if not math.isnan(r.c_at_charge)]
        if not cycles:
            raise NotConvergedError("no charged conversion cycles in the steady window")
        c_max = sum(r.c_at_charge for r in cycles) / len(cycles)
        c_min = sum(r.c_at_transfer for r in cycles) / len(cycles)
        return c_max, c_min


def simulate(design: DeviceDesign, source: VibrationSource | None = None,
             options: SimOptions | None = None) -> SimTrace:
    """Run the transient from rest for the configured duration."""
    src = source if source is not None else design.source
    opts = (options if options is not None else SimOptions()).resolved(src)
    c = _coeffs(design)
    amp, omega = _drive(src)
    h = opts.time_step
    n_steps = max(1, round(opts.duration / h))
    stride = opts.sample_stride

    n_samp_cap = n_steps // stride + 3
    ev_cap = int(16 * opts.duration * src.frequency) + 4096
    cyc_cap = int(4 * opts.duration * src.frequency) + 256
    samples = np.empty((n_samp_cap, 6), dtype=np.float64)
    ev_time = np.empty(ev_cap, dtype=np.float64)
    ev_kind = np.empty(ev_cap, dtype=np.int8)
    ev_data = np.empty((ev_cap, 10), dtype=np.float64)
    cyc_data = np.empty((cyc_cap, 4), dtype=np.float64)

    n_s, n_e, n_c, err, t, z, zd, q, v, phase = _kernel.run_transient(
        n_steps, h, stride,
        c["m"], c["k"], c["b_coef"], c["cap_coef"], c["u_gap"], c["d_gap"],
        c["z_stop"], c["e_r"], c["v_in"], c["c_stor"], c["r_l"],
        amp, omega, opts.event_tolerance,
        0.0, 0.0, 0.0, 0.0, _kernel.PHASE_AWAITING_CMAX, 0.0,
        samples, ev_time, ev_kind, ev_data, cyc_data)

    if err == _kernel.ERR_DOUBLE_SWITCH:
        raise StepSizeError("both switch events inside one step: reduce time_step")
    if err == _kernel.ERR_NONFINITE:
        raise SimulationFault("non-finite state during integration")
    if err == _kernel.ERR_EVENT_LOOP:
        raise SimulationFault("event localization did not terminate within one step")
    if err == _kernel.ERR_BUFFER:
        raise SimulationFault("event buffer overflow: pathological event rate")

    events = tuple(
        Event(time=float(ev_time[i]), kind=_EVENT_NAMES[int(ev_kind[i])],
              z=float(ev_data[i, 0]), cap=float(ev_data[i, 1]),
              q_before=float(ev_data[i, 2]), q_after=float(ev_data[i, 3]),
              v_before=float(ev_data[i, 4]), v_after=float(ev_data[i, 5]),
              energy_in=float(ev_data[i, 6]), energy_loss=float(ev_data[i, 7]),
              speed_before=float(ev_data[i, 8]), speed_after=float(ev_data[i, 9]))
        for i in range(n_e))
    cycles = tuple(
        CycleRecord(index=i, time=float(cyc_data[i, 0]),
                    c_at_charge=float(cyc_data[i, 1]),
                    c_at_transfer=float(cyc_data[i, 2]),
                    energy_converted=float(cyc_data[i, 3]))
        for i in range(n_c))

    return SimTrace(
        times=samples[:n_s, 0].copy(), z=samples[:n_s, 1].copy(),
        z_dot=samples[:n_s, 2].copy(), q_v=samples[:n_s, 3].copy(),
        v_stor=samples[:n_s, 4].copy(), cap=samples[:n_s, 5].copy(),
        events=events, cycles=cycles, options=opts, design=design,
        final_state=SimState(t=t, z=z, z_dot=zd, q_v=q, v_stor=v,
                             phase=SwitchPhase(int(phase))))


def steady_state_voltage(trace: SimTrace) -> tuple[float, float]:
    """(saturation voltage, ripple) of the steady charge-discharge cycle.

    The saturation voltage is the mean pre-transfer minimum of the storage
    voltage over the post-transient window; ripple is the mean peak-to-valley
    drop within a cycle.  Raises NotConvergedError if the trace is too short
    or the last five cycles still drift by more than 1 %.
    """
    transfers = [e for e in trace.events if e.kind == "SW2_TRANSFER"]
    n = len(transfers)
    if n < 20:
        raise NotConvergedError(
            f"only {n} transfers in the trace; need >= 20 (10 post-transient)")
    window = transfers[n // 2:]
    minima = [e.v_before for e in window]
    v_sat = sum(minima) / len(minima)
    ripple = sum(window[i].v_after - window[i + 1].v_before
                 for i in range(len(window) - 1)) / max(1, len(window) - 1)
    last5 = minima[-5:]
    mean5 = sum(last5) / len(last5)
    if mean5 > 0 and (max(last5) - min(last5)) / mean5 > 0.01:
        raise NotConvergedError(
            f"pre-transfer minima still drift {100 * (max(last5) - min(last5)) / mean5:.2f}% "
            "over the last 5 cycles")
    return v_sat, ripple


@dataclass(frozen=True)
class CycleEnergyBalance:
    """Energy account of one steady cycle (between consecutive transfers).

    Balance: load energy + storage/variable capacitor energy change +
    switch commutation losses = mechanical work done against the
    electrostatic force + input source energy.
    """

    time: float
    e_load: float
    de_storage: float
    de_variable: float
    e_switch_loss: float
    w_mech: float
    e_source: float

    @property
    def residual(self) -> float:
        return (self.e_load + self.de_storage + self.de_variable
                + self.e_switch_loss) - (self.w_mech + self.e_source)

    @property
    def relative_residual(self) -> float:
        scale = max(abs(self.w_mech) + abs(self.e_source), 1e-30)
        return abs(self.residual) / scale


def energy_audit(trace: SimTrace) -> list[CycleEnergyBalance]:
    """Per-cycle energy balances from the event log (all closed forms)."""
    c_stor = trace.design.circuit.storage_capacitance
    sw = [e for e in trace.events if e.kind in ("SW1_CHARGE", "SW2_TRANSFER")]
    out: list[CycleEnergyBalance] = []
    # cycle = (SW2_k, ..., SW2_{k+1}]
    sw2_idx = [i for i, e in enumerate(sw) if e.kind == "SW2_TRANSFER"]
    for a, b in zip(sw2_idx, sw2_idx[1:]):
        first, last = sw[a], sw[b]
        inner = sw[a + 1:b]
        e_load = 0.5 * c_stor * (first.v_after ** 2 - last.v_before ** 2)
        de_storage = 0.5 * c_stor * (last.v_after ** 2 - first.v_after ** 2)
        de_variable = (last.q_after ** 2 / (2.0 * last.cap)
                       - first.q_after ** 2 / (2.0 * first.cap))
        e_source = sum(e.energy_in for e in inner)
        e_switch = sum(e.energy_loss for e in inner) + last.energy_loss
        w_mech = 0.0
        q = first.q_after
        c_prev = first.cap
        for e in [*inner, last]:
            w_mech += 0.5 * q * q * (1.0 / e.cap - 1.0 / c_prev)
            q = e.q_after
            c_prev = e.cap
        out.append(CycleEnergyBalance(
            time=last.time, e_load=e_load, de_storage=de_storage,
            de_variable=de_variable, e_switch_loss=e_switch,
            w_mech=w_mech, e_source=e_source))
    return out


@dataclass(frozen=True)
class MassSizing:
    """Resonance-matched mass search result."""

    candidates: tuple[tuple[float, float, float], ...]  # (mass, k, max |z|)
    selected_mass: float
    selected_spring: float

    COLUMNS = ("mass_kg", "spring_n_m", "max_displacement_m", "selected")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.COLUMNS)
            for m, k, zmax in self.candidates:
                writer.writerow([repr(m), repr(k), repr(zmax),
                                 "true" if m == self.selected_mass else "false"])

    def to_json_dict(self) -> dict:
        return {
            "candidates": [
                {"mass_kg": m, "spring_n_m": k, "max_displacement_m": zmax}
                for m, k, zmax in self.candidates],
            "selected_mass_kg": self.selected_mass,
            "selected_spring_n_m": self.selected_spring,
        }


def size_attached_mass(design: DeviceDesign, source: VibrationSource,
                       z_target: float, mass_range,
                       options: SimOptions | None = None) -> MassSizing:
    """Smallest attached mass whose resonance-matched design reaches z_target.

    Each candidate mass gets k = m (2 pi f)^2 (resonance at the source
    frequency) and a transient run; the achieved displacement is the maximum
    |z| over the second half of the run.
    """
    masses = sorted(mass_range)
    if not masses:
        raise ValueError("mass_range must be non-empty")
    if z_target < 0:
        raise ValueError("z_target must be >= 0")
    if z_target > design.geometry.z_stop:
        raise ValueError(
            f"z_target {z_target:.3e} exceeds the travel limit "
            f"{design.geometry.z_stop:.3e}")
    opts = options if options is not None else SimOptions(duration=1.0)
    omega = 2.0 * math.pi * source.frequency
    candidates = []
    for m in masses:
        k = m * omega * omega
        cand = replace(design, mechanics=replace(design.mechanics,
                                                 shuttle_mass=m, spring_constant=k))
        trace = simulate(cand, source, opts)
        half = len(trace.times) // 2
        z_max = float(np.max(np.abs(trace.z[half:])))
        candidates.append((m, k, z_max))
    for m, k, z_max in candidates:
        if z_max >= z_target:
            return MassSizing(candidates=tuple(candidates),
                              selected_mass=m, selected_spring=k)
    best = max(c[2] for c in candidates)
    raise NotConvergedError(
        f"no candidate mass reaches z_target {z_target:.3e} m "
        f"(best achieved {best:.3e} m)")
