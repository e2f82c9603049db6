import math
from dataclasses import replace

import numpy as np
import pytest

from esconv.dynamics import (Event, NotConvergedError, SimOptions, SimState,
                             SimTrace, StepSizeError, SwitchPhase, cycle_map,
                             damping_coefficient, detect_events, energy_audit,
                             mech_damping_force, simulate, size_attached_mass,
                             steady_state_voltage, step)
from esconv.model import VibrationSource, conversion_cycle_time
from esconv.static_design import v_sat_exact

CMAX, CMIN, CSTOR, RL, VIN, DT = 7e-9, 100e-12, 20e-9, 8e6, 3.3, 1.0 / 240.0


@pytest.fixture(scope="module")
def trace_1s(design):
    return simulate(design, options=SimOptions(duration=1.0))


@pytest.fixture(scope="module")
def undamped_design(design):
    # No squeeze film, low priming voltage: the shuttle reaches the stops
    # without latching electrostatically, charging at the full profile.
    return replace(design,
                   mechanics=replace(design.mechanics, damping_scale=0.0),
                   circuit=replace(design.circuit, input_voltage=0.1))


@pytest.fixture(scope="module")
def trace_undamped(undamped_design):
    return simulate(undamped_design, options=SimOptions(duration=2.0))


class TestDampingModel:
    def test_zero_velocity_gives_zero_force(self, design):
        for z in (0.0, 15e-6, -30e-6):
            assert mech_damping_force(z, 0.0, design) == 0.0

    def test_coefficient_even_in_z(self, design):
        assert damping_coefficient(15e-6, design) == pytest.approx(
            damping_coefficient(-15e-6, design), rel=1e-14)

    def test_rest_coefficient_regression(self, design):
        # 2 * mu * N * L_f * t^3 / d^3 evaluated at the design point
        assert damping_coefficient(0.0, design) == pytest.approx(
            3.1232746355685146e-3, rel=1e-12)

    def test_force_opposes_velocity(self, design):
        assert mech_damping_force(10e-6, 0.5, design) < 0
        assert mech_damping_force(10e-6, -0.5, design) > 0

    def test_wall_stiffens_near_stop(self, design):
        assert damping_coefficient(34e-6, design) > 100 * damping_coefficient(
            0.0, design)


class TestCycleMap:
    def test_fixed_point_equals_closed_form(self):
        v = 0.0
        for _ in range(10_000):
            v_next = cycle_map(v, CMAX, CMIN, CSTOR, RL, VIN, DT)
            if abs(v_next - v) <= 1e-16 * max(1.0, abs(v_next)):
                v = v_next
                break
            v = v_next
        assert v == pytest.approx(v_sat_exact(CMAX, CMIN, CSTOR, RL, VIN, DT),
                                  rel=1e-12)

    def test_zero_input_contracts_to_zero(self):
        v = 17.0
        for _ in range(2000):
            v = cycle_map(v, CMAX, CMIN, CSTOR, RL, 0.0, DT)
        assert v == pytest.approx(0.0, abs=1e-12)

    def test_no_discharge_limit(self):
        v_star = CMAX * VIN / CMIN
        assert cycle_map(v_star, CMAX, CMIN, CSTOR, RL, VIN, 0.0) == pytest.approx(
            v_star, rel=1e-12)


class TestStep:
    def test_pure_rc_decay(self, design):
        slow = VibrationSource(acceleration_amplitude=0.0, frequency=0.5)
        opts = SimOptions(time_step=1.6e-3, duration=1.0)
        state = SimState(v_stor=1.0)
        new = step(state, design, slow, opts)
        # tau = R_L C_stor = 0.16 s; one step decays by exp(-0.01)
        assert new.v_stor == pytest.approx(math.exp(-0.01), rel=1e-14)
        assert new.z == 0.0 and new.z_dot == 0.0 and new.q_v == 0.0

    def test_rest_without_drive_is_stationary(self, design):
        still = VibrationSource(acceleration_amplitude=0.0, frequency=120.0)
        opts = SimOptions(duration=1.0).resolved(still)
        state = SimState()
        for _ in range(50):
            state = step(state, design, still, opts)
        assert state.z == 0.0 and state.z_dot == 0.0
        assert state.phase == SwitchPhase.AWAITING_CMAX

    def test_matches_kernel_trace(self, design):
        source = design.source
        h = 1.0 / (120.0 * 1000.0)
        opts = SimOptions(time_step=h, duration=600 * h,
                          sample_stride=600).resolved(source)
        events: list[Event] = []
        state = SimState()
        for _ in range(600):
            state = step(state, design, source, opts, events)
        trace = simulate(design, source, opts)
        final = trace.final_state
        assert state.z == pytest.approx(final.z, rel=1e-9)
        assert state.z_dot == pytest.approx(final.z_dot, rel=1e-9)
        assert state.q_v == pytest.approx(final.q_v, rel=1e-9)
        assert state.v_stor == pytest.approx(final.v_stor, rel=1e-9)
        assert state.phase == final.phase
        assert [e.kind for e in events] == [e.kind for e in trace.events]
        for mine, theirs in zip(events, trace.events):
            assert mine.time == pytest.approx(theirs.time, abs=10 * opts.event_tolerance)


class TestResonanceOracle:
    def test_undamped_resonant_growth(self, design):
        # k/m tuned to the drive, no damping, no charge: z(t) follows
        # A/(2 w^2) (sin wt - wt cos wt); envelope grows as (A / 2w) t.
        f = 120.0
        omega = 2 * math.pi * f
        m = design.mechanics.shuttle_mass
        accel = 0.01
        osc = replace(
            design,
            geometry=replace(design.geometry, initial_gap=5e-3, min_gap=1e-6,
                             finger_count=1),
            mechanics=replace(design.mechanics, damping_scale=0.0,
                              spring_constant=m * omega * omega),
            circuit=replace(design.circuit, input_voltage=1e-30),
            source=VibrationSource(acceleration_amplitude=accel, frequency=f))
        duration = 10.0 / f
        trace = simulate(osc, options=SimOptions(duration=duration, sample_stride=50))
        envelope = accel / (2 * omega) * duration
        tail = trace.times >= 9.0 / f
        z_exact = accel / (2 * omega ** 2) * (
            np.sin(omega * trace.times[tail])
            - omega * trace.times[tail] * np.cos(omega * trace.times[tail]))
        err = np.max(np.abs(trace.z[tail] - z_exact))
        assert err < 0.01 * envelope

    def test_mechanical_energy_tracks_driven_oscillator(self, design):
        f, omega = 120.0, 2 * math.pi * 120.0
        m = design.mechanics.shuttle_mass
        k = m * omega * omega
        accel = 0.01
        osc = replace(
            design,
            geometry=replace(design.geometry, initial_gap=5e-3, min_gap=1e-6,
                             finger_count=1),
            mechanics=replace(design.mechanics, damping_scale=0.0,
                              spring_constant=k),
            circuit=replace(design.circuit, input_voltage=1e-30),
            source=VibrationSource(acceleration_amplitude=accel, frequency=f))
        trace = simulate(osc, options=SimOptions(duration=10.0 / f, sample_stride=50))
        energy = 0.5 * m * trace.z_dot ** 2 + 0.5 * k * trace.z ** 2
        t = trace.times
        z_ex = accel / (2 * omega ** 2) * (np.sin(omega * t) - omega * t * np.cos(omega * t))
        v_ex = accel / 2 * t * np.sin(omega * t)
        energy_ex = 0.5 * m * v_ex ** 2 + 0.5 * k * z_ex ** 2
        scale = np.max(energy_ex)
        assert np.max(np.abs(energy - energy_ex)) < 0.01 * scale


class TestSwitchingEvents:
    def test_two_conversion_cycles_per_period(self, trace_1s):
        sw2 = [e.time for e in trace_1s.events if e.kind == "SW2_TRANSFER"]
        steady = np.diff(sw2[len(sw2) // 2:])
        assert steady.mean() == pytest.approx(1.0 / 240.0, rel=0.05)

    def test_charge_conserved_at_every_transfer(self, trace_1s, design):
        c_stor = design.circuit.storage_capacitance
        for e in trace_1s.events:
            if e.kind == "SW2_TRANSFER":
                before = e.q_before + c_stor * e.v_before
                after = e.q_after + c_stor * e.v_after
                assert abs(after - before) <= 1e-12 * max(before, 1e-30)

    def test_switch_events_alternate(self, trace_1s):
        kinds = [e.kind for e in trace_1s.events if e.kind != "STOP_IMPACT"]
        for a, b in zip(kinds, kinds[1:]):
            assert a != b

    def test_event_times_strictly_increasing(self, trace_1s):
        times = [e.time for e in trace_1s.events]
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_charge_injected_only_at_sw1(self, trace_1s):
        for e in trace_1s.events:
            if e.kind == "SW1_CHARGE":
                assert e.energy_in == pytest.approx(
                    3.3 * (e.q_after - e.q_before), rel=1e-12)
            else:
                assert e.energy_in == 0.0

    def test_no_voltage_without_priming(self, design):
        dead = replace(design, circuit=replace(design.circuit, input_voltage=0.0))
        trace = simulate(dead, options=SimOptions(duration=0.2))
        assert np.max(np.abs(trace.v_stor)) == 0.0
        assert np.max(np.abs(trace.z)) > 1e-6  # mechanics still driven

    def test_double_switch_in_one_step_faults(self, design):
        # suspension so stiff that successive capacitance extrema land
        # inside a single integration step
        m = design.mechanics.shuttle_mass
        fast = replace(design, mechanics=replace(
            design.mechanics, spring_constant=m * (2 * math.pi * 1e6) ** 2))
        with pytest.raises(StepSizeError):
            simulate(fast, options=SimOptions(duration=0.01))


class TestStops:
    def test_travel_never_exceeds_stop(self, trace_undamped, undamped_design):
        z_stop = undamped_design.geometry.z_stop
        assert np.max(np.abs(trace_undamped.z)) <= z_stop + 1e-9

    def test_inelastic_impact_zeroes_velocity(self, trace_undamped):
        stops = [e for e in trace_undamped.events if e.kind == "STOP_IMPACT"]
        assert stops, "expected stop impacts in the undamped run"
        for e in stops:
            assert e.speed_after == 0.0
            assert abs(e.z) == pytest.approx(34.9e-6, rel=1e-9)

    def test_speed_never_increases_across_impact(self, trace_undamped):
        for e in trace_undamped.events:
            if e.kind == "STOP_IMPACT":
                assert abs(e.speed_after) <= abs(e.speed_before)

    def test_restitution_scales_rebound(self, undamped_design):
        bouncy = replace(undamped_design, mechanics=replace(
            undamped_design.mechanics, restitution=0.5))
        trace = simulate(bouncy, options=SimOptions(duration=0.5))
        stops = [e for e in trace.events if e.kind == "STOP_IMPACT"]
        assert stops
        for e in stops:
            assert abs(e.speed_after) == pytest.approx(0.5 * abs(e.speed_before),
                                                       rel=1e-12)

    def test_event_times_strictly_increasing_with_impacts(self, trace_undamped):
        # stop contact and the charge at capacitance maximum coincide
        # physically; the log still orders them (impact, then charge)
        times = [e.time for e in trace_undamped.events]
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_stop_contact_charges_at_full_profile(self, trace_undamped,
                                                  undamped_design):
        c_max, c_min = trace_undamped.achieved_capacitances()
        assert c_max == pytest.approx(7.02e-9, rel=0.01)
        assert c_min == pytest.approx(45.8e-12, rel=0.02)

    def test_undamped_voltage_matches_closed_form(self, trace_undamped):
        v_sat, _ = steady_state_voltage(trace_undamped)
        c_max, c_min = trace_undamped.achieved_capacitances()
        predicted = v_sat_exact(c_max, c_min, CSTOR, RL, 0.1, DT)
        assert v_sat == pytest.approx(predicted, rel=0.01)

    def test_electrostatic_latch_holds_at_stop(self, design):
        # Full priming voltage with no damping: the constant-charge force
        # q^2/(2 N eps0 A) exceeds the spring everywhere, so the shuttle
        # parks on a stop instead of cycling.
        latch = replace(design, mechanics=replace(design.mechanics,
                                                  damping_scale=0.0))
        trace = simulate(latch, options=SimOptions(duration=0.3))
        assert abs(trace.final_state.z) == pytest.approx(
            design.geometry.z_stop, rel=1e-9)


class TestSteadyState:
    def test_flagship_voltage_consistent_with_closed_form(self, trace_1s, design):
        v_sat, ripple = steady_state_voltage(trace_1s)
        c_max, c_min = trace_1s.achieved_capacitances()
        predicted = v_sat_exact(c_max, c_min, design.circuit.storage_capacitance,
                                design.circuit.load_resistance,
                                design.circuit.input_voltage,
                                conversion_cycle_time(design.source))
        assert abs(v_sat - predicted) / predicted < 0.15
        assert 0 < ripple < v_sat

    def test_too_short_trace_not_converged(self, design):
        trace = simulate(design, options=SimOptions(duration=0.05))
        with pytest.raises(NotConvergedError):
            steady_state_voltage(trace)

    def test_constant_synthetic_trace_has_zero_ripple(self, design):
        events = tuple(
            Event(time=0.01 * i, kind="SW2_TRANSFER", z=0.0, cap=CMIN,
                  q_before=0.0, q_after=0.0, v_before=5.0, v_after=5.0,
                  energy_in=0.0, energy_loss=0.0, speed_before=0.0,
                  speed_after=0.0)
            for i in range(1, 41))
        trace = SimTrace(times=np.zeros(0), z=np.zeros(0), z_dot=np.zeros(0),
                         q_v=np.zeros(0), v_stor=np.zeros(0), cap=np.zeros(0),
                         events=events, cycles=(), options=SimOptions(),
                         design=design, final_state=SimState())
        v_sat, ripple = steady_state_voltage(trace)
        assert v_sat == 5.0
        assert ripple == 0.0

    def test_convergence_under_step_halving(self, design):
        h = 1.0 / (120.0 * 5000.0)
        v1, _ = steady_state_voltage(simulate(
            design, options=SimOptions(duration=1.0, time_step=h)))
        v2, _ = steady_state_voltage(simulate(
            design, options=SimOptions(duration=1.0, time_step=h / 2)))
        assert abs(v2 - v1) / v1 < 0.005


class TestEnergyAudit:
    def test_per_cycle_balance_closes(self, trace_1s):
        balances = energy_audit(trace_1s)
        steady = balances[len(balances) // 2:]
        assert len(steady) >= 10
        for b in steady:
            assert b.relative_residual < 1e-9  # closed-form bookkeeping
            assert b.w_mech > 0
            assert b.e_load > 0
            assert b.e_switch_loss >= 0

    def test_balance_includes_commutation_losses(self, trace_1s):
        # the share at C_min burns most of the converted energy; omitting
        # the switch-loss term would break the balance badly
        steady = energy_audit(trace_1s)[-10:]
        for b in steady:
            assert b.e_switch_loss > b.e_load


class TestDeterminism:
    def test_identical_runs_bit_identical(self, design):
        a = simulate(design, options=SimOptions(duration=0.3))
        b = simulate(design, options=SimOptions(duration=0.3))
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.z, b.z)
        assert np.array_equal(a.v_stor, b.v_stor)
        assert a.events == b.events
        assert a.cycles == b.cycles


class TestDetectEvents:
    def test_reports_charging_at_extremum(self, design):
        source = design.source
        opts = SimOptions(time_step=1.0 / (120 * 1000), duration=1.0)
        state = SimState()
        prev = state
        found = None
        for _ in range(600):
            events: list[Event] = []
            new = step(state, design, source, opts, events)
            if any(e.kind == "SW1_CHARGE" for e in events):
                found = (state, new, events)
                break
            prev, state = state, new
        assert found is not None
        before, after, applied = found
        detected = detect_events(before, after, design)
        assert [e.kind for e in detected] == ["SW1_CHARGE"]
        assert before.t <= detected[0].time <= after.t
        assert detected[0].q_after == pytest.approx(applied[0].q_after, rel=1e-3)

    def test_stop_crossing_detection(self, design):
        z_stop = design.geometry.z_stop
        prev = SimState(t=0.0, z=z_stop - 1e-8, z_dot=0.05,
                        phase=SwitchPhase.CHARGED_CONSTANT_Q)
        nxt = SimState(t=1e-6, z=z_stop + 4e-8, z_dot=0.05,
                       phase=SwitchPhase.CHARGED_CONSTANT_Q)
        detected = detect_events(prev, nxt, design)
        kinds = [e.kind for e in detected]
        assert "STOP_IMPACT" in kinds
        ev = detected[kinds.index("STOP_IMPACT")]
        assert prev.t <= ev.time <= nxt.t
        assert ev.speed_after == -design.mechanics.restitution * nxt.z_dot

    def test_share_conserves_charge(self, design):
        c_stor = design.circuit.storage_capacitance
        prev = SimState(t=0.0, z=1e-6, z_dot=-0.01, q_v=1e-9, v_stor=2.0,
                        phase=SwitchPhase.CHARGED_CONSTANT_Q)
        nxt = SimState(t=1e-6, z=-1e-6, z_dot=-0.01, q_v=1e-9, v_stor=2.0,
                       phase=SwitchPhase.CHARGED_CONSTANT_Q)
        detected = detect_events(prev, nxt, design)
        assert [e.kind for e in detected] == ["SW2_TRANSFER"]
        e = detected[0]
        assert e.q_after + c_stor * e.v_after == pytest.approx(
            e.q_before + c_stor * e.v_before, rel=1e-12)


class TestSimOptions:
    def test_rejects_coarse_step(self, design):
        with pytest.raises(ValueError, match="steps"):
            SimOptions(time_step=1.0 / (120 * 100)).resolved(design.source)

    def test_accepts_floor_step(self, design):
        SimOptions(time_step=1.0 / (120 * 200)).resolved(design.source)

    def test_rejects_bad_duration(self, design):
        with pytest.raises(ValueError):
            SimOptions(duration=0.0).resolved(design.source)

    def test_rejects_bad_tolerance(self, design):
        with pytest.raises(ValueError):
            SimOptions(event_tolerance=0.0).resolved(design.source)


class TestMassSizing:
    def test_reference_search(self, design):
        masses = [2e-3, 4e-3, 7.2e-3, 10e-3, 15e-3]
        result = size_attached_mass(design, design.source, 34.0e-6, masses,
                                    SimOptions(duration=0.8))
        achieved = [z for _, _, z in result.candidates]
        assert all(b > a for a, b in zip(achieved, achieved[1:]))
        assert result.selected_mass == 4e-3
        omega = 2 * math.pi * design.source.frequency
        assert result.selected_spring == pytest.approx(4e-3 * omega * omega,
                                                       rel=1e-12)
        # smallest-mass contract: nothing below the selection reaches target
        for m, _, z in result.candidates:
            if m < result.selected_mass:
                assert z < 34.0e-6

    def test_zero_target_selects_smallest(self, design):
        result = size_attached_mass(design, design.source, 0.0,
                                    [5e-3, 2e-3, 9e-3], SimOptions(duration=0.3))
        assert result.selected_mass == 2e-3

    def test_target_beyond_travel_rejected(self, design):
        with pytest.raises(ValueError, match="travel limit"):
            size_attached_mass(design, design.source, 40e-6, [7.2e-3])

    def test_unreachable_target_not_converged(self, design):
        with pytest.raises(NotConvergedError, match="no candidate"):
            size_attached_mass(design, design.source, 34.85e-6, [7.2e-3],
                               SimOptions(duration=0.5))


class TestTraceSerialization:
    def test_csv_files(self, trace_1s, tmp_path):
        trace_csv = tmp_path / "trace.csv"
        events_csv = tmp_path / "events.csv"
        cycles_csv = tmp_path / "cycles.csv"
        trace_1s.write_csv(trace_csv)
        trace_1s.write_events_csv(events_csv)
        trace_1s.write_cycles_csv(cycles_csv)
        head = trace_csv.read_text().splitlines()
        assert head[0] == "t_s,z_m,z_dot_m_s,q_v_c,v_stor_v,c_v_f"
        assert len(head) == len(trace_1s.times) + 1
        assert events_csv.read_text().splitlines()[0].startswith("t_s,kind,")
        assert len(cycles_csv.read_text().splitlines()) == len(trace_1s.cycles) + 1
