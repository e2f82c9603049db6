import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from esconv.dynamics import damping_coefficient
from esconv.mechanical import (FrequencyResponse, damping_from_q,
                               frequency_response, linear_response,
                               quality_factor, spring_from_resonance)
from esconv.model import natural_frequency


def q_matched_design(design, q_target: float, m: float = 3.8e-5,
                     f_0: float = 800.0):
    """Design whose linearized damping realizes the requested Q."""
    k = spring_from_resonance(f_0, m)
    b_target = damping_from_q(m, f_0, q_target)
    base = replace(design, mechanics=replace(
        design.mechanics, shuttle_mass=m, spring_constant=k, damping_scale=1.0))
    scale = b_target / damping_coefficient(0.0, base)
    return replace(base, mechanics=replace(base.mechanics, damping_scale=scale))


class TestLinearResponse:
    def test_static_deflection_limit(self, design):
        m = design.mechanics.shuttle_mass
        k = design.mechanics.spring_constant
        amp = linear_response(design, 2.25, 1e-3)
        assert amp == pytest.approx(m * 2.25 / k, rel=1e-6)

    def test_linear_in_acceleration(self, design):
        assert linear_response(design, 4.5, 100.0) == pytest.approx(
            2 * linear_response(design, 2.25, 100.0), rel=1e-12)

    def test_resonance_amplitude_closed_form(self, design):
        # at f_0, |z| = Q A / w_0^2 (about 15 um for Q = 9.6 at 40 m/s^2)
        dq = q_matched_design(design, 9.6)
        f_0 = natural_frequency(dq.mechanics.spring_constant,
                                dq.mechanics.shuttle_mass)
        w0 = 2 * math.pi * f_0
        amp = linear_response(dq, 40.0, f_0)
        assert amp == pytest.approx(9.6 * 40.0 / w0 ** 2, rel=1e-9)
        assert amp == pytest.approx(15e-6, rel=0.05)

    def test_vectorized_over_frequency(self, design):
        freqs = np.array([50.0, 100.0, 200.0])
        amps = linear_response(design, 2.25, freqs)
        assert amps.shape == (3,)
        assert amps[0] == pytest.approx(linear_response(design, 2.25, 50.0))


class TestQualityFactor:
    def test_recovers_constructed_q(self, design):
        dq = q_matched_design(design, 9.6)
        resp = frequency_response(dq, 40.0, np.linspace(400, 1600, 4001))
        assert resp.q == pytest.approx(9.6, rel=0.02)

    def test_direct_extraction_from_grid(self, design):
        # quality_factor works on a bare sampled response, no metadata needed
        dq = q_matched_design(design, 9.6)
        freqs = np.linspace(400, 1600, 4001)
        resp = FrequencyResponse(frequencies=freqs,
                                 amplitudes=linear_response(dq, 40.0, freqs),
                                 f_0=float("nan"), delta_f=float("nan"),
                                 q=float("nan"))
        assert quality_factor(resp) == pytest.approx(9.6, rel=0.02)

    def test_peak_frequency_matches_damped_resonance(self, design):
        # displacement peak sits at f_0 sqrt(1 - 1/(2 Q^2))
        dq = q_matched_design(design, 9.6)
        f_0 = natural_frequency(dq.mechanics.spring_constant,
                                dq.mechanics.shuttle_mass)
        resp = frequency_response(dq, 40.0, np.linspace(400, 1600, 8001))
        expected_peak = f_0 * math.sqrt(1 - 1 / (2 * 9.6 ** 2))
        assert resp.f_0 == pytest.approx(expected_peak, rel=1e-3)
        assert abs(resp.f_0 - f_0) / f_0 < 0.003

    def test_grid_refinement_stability(self, design):
        dq = q_matched_design(design, 9.6)
        q1 = frequency_response(dq, 40.0, np.linspace(400, 1600, 2001)).q
        q2 = frequency_response(dq, 40.0, np.linspace(400, 1600, 4001)).q
        assert abs(q2 - q1) / q1 < 0.005

    def test_overdamped_response_has_no_crossings(self, design):
        dq = q_matched_design(design, 0.4)
        with pytest.raises(ValueError):
            frequency_response(dq, 40.0, np.linspace(600, 1000, 801))

    def test_boundary_peak_rejected(self, design):
        dq = q_matched_design(design, 9.6)
        with pytest.raises(ValueError, match="boundary"):
            frequency_response(dq, 40.0, np.linspace(850, 1600, 801))

    def test_self_consistency_loop(self, design):
        # damping_from_q -> response grid -> quality_factor round trip
        for q_in in (8.0, 9.6, 30.0):
            dq = q_matched_design(design, q_in)
            resp = frequency_response(
                dq, 40.0, np.linspace(800 / (1 + 4 / q_in), 800 * (1 + 4 / q_in), 6001))
            assert resp.q == pytest.approx(q_in, rel=0.02)

    def test_low_q_estimator_bias_is_order_inverse_q_squared(self, design):
        # the half-power reading of a displacement response is biased low by
        # O(1/Q^2); at Q = 5 that is ~2%, still within 5%
        dq = q_matched_design(design, 5.0)
        resp = frequency_response(dq, 40.0, np.linspace(400, 1600, 6001))
        assert resp.q == pytest.approx(5.0, rel=0.05)
        assert resp.q < 5.0


class TestSpringFromResonance:
    def test_fabricated_plate(self):
        assert spring_from_resonance(800.0, 3.8e-5) == pytest.approx(960.0, abs=5.0)

    def test_design_point(self):
        k = spring_from_resonance(123.0, 7.2e-3)
        assert k == pytest.approx(4.3e3, rel=0.01)

    def test_mass_scaling(self):
        assert spring_from_resonance(800.0, 4 * 3.8e-5) == pytest.approx(
            4 * spring_from_resonance(800.0, 3.8e-5), rel=1e-12)

    @given(k=st.floats(min_value=1e-2, max_value=1e8),
           m=st.floats(min_value=1e-8, max_value=1e2))
    def test_round_trip_with_natural_frequency(self, k, m):
        assert spring_from_resonance(natural_frequency(k, m), m) == pytest.approx(
            k, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            spring_from_resonance(0.0, 1.0)


class TestDampingFromQ:
    def test_measured_point(self):
        assert damping_from_q(3.8e-5, 800.0, 9.6) == pytest.approx(0.0199, rel=1e-2)

    def test_large_q_vanishes(self):
        assert damping_from_q(3.8e-5, 800.0, 1e9) < 1e-9

    def test_doubling_q_halves_damping(self):
        assert damping_from_q(1e-3, 500.0, 20.0) == pytest.approx(
            damping_from_q(1e-3, 500.0, 10.0) / 2, rel=1e-12)


class TestSerialization:
    def test_csv_and_json(self, design, tmp_path):
        dq = q_matched_design(design, 9.6)
        resp = frequency_response(dq, 40.0, np.linspace(400, 1600, 1001))
        csv_path = tmp_path / "resp.csv"
        json_path = tmp_path / "resp.json"
        resp.write_csv(csv_path)
        resp.write_json(json_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "frequency_hz,amplitude_m"
        assert len(lines) == 1002
        import json
        summary = json.loads(json_path.read_text())
        assert set(summary) == {"f_0_hz", "delta_f_hz", "q"}
