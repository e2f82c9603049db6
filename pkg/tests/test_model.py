import math
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from esconv.model import (VibrationSource, conversion_cycle_time,
                          natural_frequency, reference_design, validate_design)


class TestValidateDesign:
    def test_reference_design_is_valid(self, design):
        assert validate_design(design) == []

    def test_min_gap_equal_to_gap(self, design):
        bad = replace(design, geometry=replace(design.geometry,
                                               min_gap=design.geometry.initial_gap))
        violations = validate_design(bad)
        assert any("min_gap" in v.field for v in violations)

    def test_restitution_out_of_range(self, design):
        bad = replace(design, mechanics=replace(design.mechanics, restitution=1.5))
        violations = validate_design(bad)
        assert any("restitution" in v.field and "[0, 1]" in v.message
                   for v in violations)

    def test_negative_length(self, design):
        bad = replace(design, geometry=replace(design.geometry, finger_length=-1e-6))
        assert any(v.field == "geometry.finger_length" for v in validate_design(bad))

    def test_nonpositive_circuit_values(self, design):
        bad = replace(design, circuit=replace(design.circuit, load_resistance=0.0))
        assert any(v.field == "circuit.load_resistance" for v in validate_design(bad))

    def test_finger_count_beyond_edge_budget(self, design):
        bad = replace(design, geometry=replace(design.geometry, finger_count=500))
        violations = validate_design(bad)
        assert any("edge budget" in v.message for v in violations)

    def test_calibrated_count_one_cell_over_floor_is_allowed(self, design):
        # floor(33.9 mm / 90 um) = 376; the calibrated 377 stays legal
        assert design.geometry.finger_count == 377
        assert validate_design(design) == []

    def test_bad_spectrum_entries(self, design):
        bad = replace(design, source=VibrationSource(
            acceleration_amplitude=1.0, frequency=100.0,
            spectrum=((0.0, 1.0), (50.0, -2.0))))
        fields = [v.field for v in validate_design(bad)]
        assert "source.spectrum[0]" in fields
        assert "source.spectrum[1]" in fields

    def test_idempotent(self, design):
        bad = replace(design, mechanics=replace(design.mechanics, restitution=2.0))
        assert validate_design(bad) == validate_design(bad)


class TestConversionCycleTime:
    def test_120_hz(self):
        assert conversion_cycle_time(120.0) == pytest.approx(4.1667e-3, rel=1e-4)

    def test_half_hz(self):
        assert conversion_cycle_time(0.5) == 1.0

    def test_800_hz(self):
        assert conversion_cycle_time(800.0) == pytest.approx(6.25e-4, rel=1e-12)

    def test_accepts_source(self, design):
        assert conversion_cycle_time(design.source) == conversion_cycle_time(120.0)

    @pytest.mark.parametrize("f", [0.0, -5.0])
    def test_rejects_nonpositive_frequency(self, f):
        with pytest.raises(ValueError):
            conversion_cycle_time(f)

    @given(f=st.floats(min_value=1e-6, max_value=1e9))
    def test_identity_two_f_dt(self, f):
        assert conversion_cycle_time(f) * 2.0 * f == pytest.approx(1.0, rel=1e-12)


class TestNaturalFrequency:
    def test_fabricated_device_point(self):
        # 960 N/m suspension with the 0.038 g plate resonates near 800 Hz
        assert natural_frequency(960.0, 3.8e-5) == pytest.approx(800.0, rel=1e-3)

    def test_design_point(self):
        f = natural_frequency(4.3e3, 7.2e-3)
        assert abs(f - 123.0) < 1.0
        assert abs(f - 120.0) / 120.0 < 0.03  # close to the drive line

    def test_unit_identity(self):
        m = 0.123
        assert natural_frequency(m * (2 * math.pi) ** 2, m) == pytest.approx(1.0)

    @given(k=st.floats(min_value=1e-3, max_value=1e9),
           m=st.floats(min_value=1e-9, max_value=1e3),
           scale=st.floats(min_value=1e-3, max_value=1e3))
    def test_homogeneous_in_k_and_m(self, k, m, scale):
        assert natural_frequency(k * scale, m * scale) == pytest.approx(
            natural_frequency(k, m), rel=1e-9)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            natural_frequency(0.0, 1.0)
        with pytest.raises(ValueError):
            natural_frequency(1.0, -1.0)
