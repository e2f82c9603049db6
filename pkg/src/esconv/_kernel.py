"""JIT-compiled fixed-step transient engine.

A seconds-long run needs millions of RK4 steps, far beyond what the
interpreter sustains, so the stepping loop lives here as a numba kernel.
The Python-level `dynamics.step` mirrors this algorithm exactly; a
regression test keeps the two in agreement.

State layout: shuttle displacement z and velocity zd integrate with
classical RK4; the variable-capacitor charge q is piecewise constant
between switch events; the storage voltage v decays exactly by
exp(-h / (R_L C_stor)) per (sub)step.  Events are localized inside a step
by bisection on their trigger function, the step is split there, and the
event transform is applied before integrating the remainder.
"""

import math

import numpy as np
from numba import njit

EV_SW1 = 1
EV_SW2 = 2
EV_STOP = 3

PHASE_AWAITING_CMAX = 0
PHASE_CHARGED_CONSTANT_Q = 1

ERR_OK = 0
ERR_NONFINITE = 1
ERR_DOUBLE_SWITCH = 2
ERR_BUFFER = 3
ERR_EVENT_LOOP = 4

# Stop impacts slower than this are resting-contact chatter: the clamp is
# still applied but the event is not logged.
STOP_LOG_MIN_SPEED = 1e-4  # m/s

# Columns of the event data array.
_EV_COLS = 10  # z, cap, q_before, q_after, v_before, v_after, e_in, e_loss, sp_before, sp_after


@njit(cache=True)
def _cap(z, cap_coef, u_gap, z_stop):
    if z > z_stop:
        z = z_stop
    elif z < -z_stop:
        z = -z_stop
    return cap_coef * (1.0 / (u_gap - z) + 1.0 / (u_gap + z))


@njit(cache=True)
def _dcap(z, cap_coef, u_gap, z_stop):
    if z > z_stop:
        z = z_stop
    elif z < -z_stop:
        z = -z_stop
    gm = u_gap - z
    gp = u_gap + z
    return cap_coef * (1.0 / (gm * gm) - 1.0 / (gp * gp))


@njit(cache=True)
def _damping(z, b_coef, d_gap, z_stop):
    if z > z_stop:
        z = z_stop
    elif z < -z_stop:
        z = -z_stop
    gm = d_gap - z
    gp = d_gap + z
    return b_coef * (1.0 / (gm * gm * gm) + 1.0 / (gp * gp * gp))


@njit(cache=True)
def _accel(t, z, zd, q, m, k, b_coef, cap_coef, u_gap, d_gap, z_stop, amp, omega):
    c = _cap(z, cap_coef, u_gap, z_stop)
    f_es = 0.5 * (q / c) * (q / c) * _dcap(z, cap_coef, u_gap, z_stop)
    b = _damping(z, b_coef, d_gap, z_stop)
    return (-k * z - b * zd + f_es + m * amp * math.sin(omega * t)) / m


@njit(cache=True)
def _rk4(t, z, zd, q, h, m, k, b_coef, cap_coef, u_gap, d_gap, z_stop, amp, omega):
    a1 = _accel(t, z, zd, q, m, k, b_coef, cap_coef, u_gap, d_gap, z_stop, amp, omega)
    z2 = z + 0.5 * h * zd
    v2 = zd + 0.5 * h * a1
    a2 = _accel(t + 0.5 * h, z2, v2, q, m, k, b_coef, cap_coef, u_gap, d_gap, z_stop, amp, omega)
    z3 = z + 0.5 * h * v2
    v3 = zd + 0.5 * h * a2
    a3 = _accel(t + 0.5 * h, z3, v3, q, m, k, b_coef, cap_coef, u_gap, d_gap, z_stop, amp, omega)
    z4 = z + h * v3
    v4 = zd + h * a3
    a4 = _accel(t + h, z4, v4, q, m, k, b_coef, cap_coef, u_gap, d_gap, z_stop, amp, omega)
    z_new = z + (h / 6.0) * (zd + 2.0 * v2 + 2.0 * v3 + v4)
    zd_new = zd + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return z_new, zd_new


@njit(cache=True)
def _dcdt(z, zd, cap_coef, u_gap, z_stop):
    # On (or beyond) the stop the capacitance is pinned at its maximum, so
    # its time derivative is zero regardless of the trial velocity.
    if abs(z) >= z_stop:
        return 0.0
    return _dcap(z, cap_coef, u_gap, z_stop) * zd


@njit(cache=True)
def run_transient(n_steps, h, stride,
                  m, k, b_coef, cap_coef, u_gap, d_gap, z_stop, e_r,
                  v_in, c_stor, r_l, amp, omega, event_tol,
                  z0, zd0, q0, v0, phase0, t_start,
                  samples, ev_time, ev_kind, ev_data, cyc_data):
    """Advance n_steps of size h from the given state.

    Returns (n_samples, n_events, n_cycles, err, t, z, zd, q, v, phase).
    Buffers: samples (cap, 6): t, z, zd, q, v, C; ev_data (cap, 10);
    cyc_data (cap, 4): t, C_at_charge, C_at_transfer, converted energy.
    """
    tau = r_l * c_stor
    z = z0
    zd = zd0
    q = q0
    v = v0
    phase = phase0

    i_s = 0
    i_e = 0
    i_c = 0
    err = ERR_OK

    c_charge_last = np.nan  # C at the most recent SW1
    q_charged = 0.0

    # initial sample
    if samples.shape[0] > 0:
        samples[0, 0] = t_start
        samples[0, 1] = z
        samples[0, 2] = zd
        samples[0, 3] = q
        samples[0, 4] = v
        samples[0, 5] = _cap(z, cap_coef, u_gap, z_stop)
        i_s = 1

    for i in range(n_steps):
        t_cur = t_start + i * h
        t_next = t_start + (i + 1) * h
        h_rem = t_next - t_cur
        sw1_seen = 0
        sw2_seen = 0
        stop_seen = 0
        guard = 0

        while h_rem > 0.0:
            guard += 1
            if guard > 64:
                err = ERR_EVENT_LOOP
                break

            # A previous event (e.g. charging localized at stop contact) may
            # have left the state marginally beyond the limit: clamp first.
            if abs(z) > z_stop:
                stop_seen += 1
                zd_before = zd
                z = z_stop if z > 0.0 else -z_stop
                zd = -e_r * zd_before
                if abs(zd_before) > STOP_LOG_MIN_SPEED:
                    if i_e >= ev_time.shape[0]:
                        err = ERR_BUFFER
                        break
                    ev_time[i_e] = t_cur
                    ev_kind[i_e] = EV_STOP
                    ev_data[i_e, 0] = z
                    ev_data[i_e, 1] = _cap(z, cap_coef, u_gap, z_stop)
                    ev_data[i_e, 2] = q
                    ev_data[i_e, 3] = q
                    ev_data[i_e, 4] = v
                    ev_data[i_e, 5] = v
                    ev_data[i_e, 6] = 0.0
                    ev_data[i_e, 7] = 0.5 * m * (zd_before * zd_before - zd * zd)
                    ev_data[i_e, 8] = zd_before
                    ev_data[i_e, 9] = zd
                    i_e += 1
                if stop_seen >= 3:
                    zd = 0.0
                    v *= math.exp(-h_rem / tau)
                    t_cur = t_next
                    h_rem = 0.0
                    break

            z1, zd1 = _rk4(t_cur, z, zd, q, h_rem,
                           m, k, b_coef, cap_coef, u_gap, d_gap, z_stop, amp, omega)

            trig_stop = abs(z1) > z_stop
            g0 = _dcdt(z, zd, cap_coef, u_gap, z_stop)
            g1 = _dcdt(z1, zd1, cap_coef, u_gap, z_stop)
            if phase == PHASE_AWAITING_CMAX:
                trig_sw = (g0 > 0.0 and g1 <= 0.0) or (g0 >= 0.0 and g1 < 0.0)
            else:
                trig_sw = (g0 < 0.0 and g1 >= 0.0) or (g0 <= 0.0 and g1 > 0.0)

            if not trig_stop and not trig_sw:
                z = z1
                zd = zd1
                v *= math.exp(-h_rem / tau)
                t_cur = t_next
                h_rem = 0.0
                break

            # Bisect the earliest trigger.  lo: condition not yet met,
            # hi: condition met; both events use "first h where trigger holds".
            h_stop = h_rem + 1.0
            h_sw = h_rem + 1.0
            if trig_stop:
                lo = 0.0
                hi = h_rem
                while hi - lo > event_tol:
                    mid = 0.5 * (lo + hi)
                    zm, zdm = _rk4(t_cur, z, zd, q, mid,
                                   m, k, b_coef, cap_coef, u_gap, d_gap, z_stop, amp, omega)
                    if abs(zm) > z_stop:
                        hi = mid
                    else:
                        lo = mid
                h_stop = hi
            if trig_sw:
                lo = 0.0
                hi = h_rem
                while hi - lo > event_tol:
                    mid = 0.5 * (lo + hi)
                    zm, zdm = _rk4(t_cur, z, zd, q, mid,
                                   m, k, b_coef, cap_coef, u_gap, d_gap, z_stop, amp, omega)
                    gm = _dcdt(zm, zdm, cap_coef, u_gap, z_stop)
                    if (phase == PHASE_AWAITING_CMAX and gm <= 0.0) or (
                            phase == PHASE_CHARGED_CONSTANT_Q and gm >= 0.0):
                        hi = mid
                    else:
                        lo = mid
                h_sw = hi

            # At stop contact both triggers localize to the same instant
            # (the contact IS the capacitance maximum); apply the stop first
            # so the charge event lands strictly later, at departure.
            if trig_stop and trig_sw:
                is_sw = h_sw < h_stop - event_tol
            else:
                is_sw = trig_sw
            h_star = h_sw if is_sw else h_stop

            ze, zde = _rk4(t_cur, z, zd, q, h_star,
                           m, k, b_coef, cap_coef, u_gap, d_gap, z_stop, amp, omega)
            v *= math.exp(-h_star / tau)
            t_cur += h_star
            h_rem -= h_star
            z = ze
            zd = zde

            if is_sw:
                c_ev = _cap(z, cap_coef, u_gap, z_stop)
                if phase == PHASE_AWAITING_CMAX:
                    # SW1: prime the comb from the input source.
                    sw1_seen += 1
                    q_old = q
                    q = c_ev * v_in
                    if i_e >= ev_time.shape[0]:
                        err = ERR_BUFFER
                        break
                    ev_time[i_e] = t_cur
                    ev_kind[i_e] = EV_SW1
                    ev_data[i_e, 0] = z
                    ev_data[i_e, 1] = c_ev
                    ev_data[i_e, 2] = q_old
                    ev_data[i_e, 3] = q
                    ev_data[i_e, 4] = v
                    ev_data[i_e, 5] = v
                    ev_data[i_e, 6] = v_in * (q - q_old)               # source energy in
                    ev_data[i_e, 7] = 0.5 * (q - q_old) ** 2 / c_ev    # commutation loss
                    ev_data[i_e, 8] = zd
                    ev_data[i_e, 9] = zd
                    i_e += 1
                    c_charge_last = c_ev
                    q_charged = q
                    phase = PHASE_CHARGED_CONSTANT_Q
                else:
                    # SW2: share the harvested charge into the storage node.
                    sw2_seen += 1
                    q_old = q
                    v_old = v
                    v_new = (q + c_stor * v) / (c_ev + c_stor)
                    q = c_ev * v_new
                    v = v_new
                    if i_e >= ev_time.shape[0]:
                        err = ERR_BUFFER
                        break
                    ev_time[i_e] = t_cur
                    ev_kind[i_e] = EV_SW2
                    ev_data[i_e, 0] = z
                    ev_data[i_e, 1] = c_ev
                    ev_data[i_e, 2] = q_old
                    ev_data[i_e, 3] = q
                    ev_data[i_e, 4] = v_old
                    ev_data[i_e, 5] = v_new
                    ev_data[i_e, 6] = 0.0
                    ev_data[i_e, 7] = 0.5 * (c_ev * c_stor / (c_ev + c_stor)) * (
                        q_old / c_ev - v_old) ** 2
                    ev_data[i_e, 8] = zd
                    ev_data[i_e, 9] = zd
                    i_e += 1
                    if i_c >= cyc_data.shape[0]:
                        err = ERR_BUFFER
                        break
                    cyc_data[i_c, 0] = t_cur
                    cyc_data[i_c, 1] = c_charge_last
                    cyc_data[i_c, 2] = c_ev
                    if not math.isnan(c_charge_last):
                        cyc_data[i_c, 3] = 0.5 * q_charged * q_charged * (
                            1.0 / c_ev - 1.0 / c_charge_last)
                    else:
                        cyc_data[i_c, 3] = 0.0
                    i_c += 1
                    phase = PHASE_AWAITING_CMAX
                if sw1_seen > 0 and sw2_seen > 0:
                    err = ERR_DOUBLE_SWITCH
                    break
            else:
                # Stop impact: clamp to the travel limit, restitute velocity.
                stop_seen += 1
                zd_before = zd
                z = z_stop if z > 0.0 else -z_stop
                zd = -e_r * zd_before
                if abs(zd_before) > STOP_LOG_MIN_SPEED:
                    if i_e >= ev_time.shape[0]:
                        err = ERR_BUFFER
                        break
                    ev_time[i_e] = t_cur
                    ev_kind[i_e] = EV_STOP
                    ev_data[i_e, 0] = z
                    ev_data[i_e, 1] = _cap(z, cap_coef, u_gap, z_stop)
                    ev_data[i_e, 2] = q
                    ev_data[i_e, 3] = q
                    ev_data[i_e, 4] = v
                    ev_data[i_e, 5] = v
                    ev_data[i_e, 6] = 0.0
                    ev_data[i_e, 7] = 0.5 * m * (zd_before * zd_before - zd * zd)
                    ev_data[i_e, 8] = zd_before
                    ev_data[i_e, 9] = zd
                    i_e += 1
                if stop_seen >= 3:
                    # Pressed against the stop: hold resting contact for the
                    # rest of the step instead of re-triggering every pass.
                    zd = 0.0
                    v *= math.exp(-h_rem / tau)
                    t_cur = t_next
                    h_rem = 0.0
                    break

        if err != ERR_OK:
            break
        if not (math.isfinite(z) and math.isfinite(zd) and math.isfinite(v)):
            err = ERR_NONFINITE
            break

        if (i + 1) % stride == 0 or i + 1 == n_steps:
            if i_s >= samples.shape[0]:
                err = ERR_BUFFER
                break
            samples[i_s, 0] = t_next
            samples[i_s, 1] = z
            samples[i_s, 2] = zd
            samples[i_s, 3] = q
            samples[i_s, 4] = v
            samples[i_s, 5] = _cap(z, cap_coef, u_gap, z_stop)
            i_s += 1

    t_final = t_start + n_steps * h
    return i_s, i_e, i_c, err, t_final, z, zd, q, v, phase
