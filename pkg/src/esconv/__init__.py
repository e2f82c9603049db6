"""Design, analysis and transient simulation of electrostatic
vibration-to-electricity converters built around an in-plane gap-closing
comb capacitor."""

__version__ = "0.1.0"

from .capacitance import (CapacitanceProfile, GapStack, capacitance_gradient,
                          capacitance_profile, comb_capacitance,
                          electrostatic_force, gap_stack_capacitance)
from .dynamics import (Event, NotConvergedError, SimOptions, SimState,
                       SimTrace, SimulationFault, StepSizeError, SwitchPhase,
                       cycle_map, detect_events, energy_audit,
                       mech_damping_force, simulate, size_attached_mass,
                       steady_state_voltage, step)
from .mechanical import (FrequencyResponse, damping_from_q, frequency_response,
                         linear_response, quality_factor, spring_from_resonance)
from .model import (AIR_VISCOSITY, VACUUM_PERMITTIVITY, CircuitParams,
                    DeviceDesign, DeviceGeometry, MaterialProps,
                    MechanicalParams, VibrationSource, Violation,
                    conversion_cycle_time, natural_frequency, reference_design,
                    validate_design)
from .parasitics import ParasiticModel, degraded_output, estimate_cpar
from .static_design import (CyclePrediction, SweepCell, SweepTable,
                            cycle_prediction, finger_count_for_layout,
                            max_load_resistance, optimal_gap, p_out,
                            p_out_simplified, required_cmax, sweep_gap,
                            sweep_load_storage, v_sat_approx, v_sat_exact,
                            v_sat_simplified)
