"""Subsynchronous torsional interaction study toolkit.

Shaft modal analysis, UIF screening, EMT damping scans (complex torque
coefficients), SSDC tuning, blocking-filter design and SSO protection on a
turbine-generator / VSC-HVDC study case.
"""

from .engine import LinearStandin, Scenario, SimTrace, Tone, growth_rate, initialize, power_flow, run
from .errors import SSTIError
from .plant import (BlockingFilter, GridEquivalent, HvdcConverter, Line, MachineElec, SSDCParams, Transformer,
                    blocking_filter_response, design_blocking_filter)
from .protection import DetectionCurve, default_curve, evaluate_trip, oscillation_magnitude
from .scan import DampingCurve, ScanPlan, electrical_damping_curve, measure_tone, stability_verdict
from .scenario_io import Study, bundled, load, save
from .screening import UIFInputs, screen, short_circuit_power, uif
from .shaft import ShaftModel, build_state_matrices, modal_frequencies, modal_inertia_and_damping
from .tuner import leadlag_from_phase, tune_gain, tune_phase, tune_ssdc

__version__ = "0.1.0"

__all__ = [
    "BlockingFilter", "DampingCurve", "DetectionCurve", "GridEquivalent", "HvdcConverter", "Line", "LinearStandin",
    "MachineElec", "SSDCParams", "SSTIError", "ScanPlan", "Scenario", "ShaftModel", "SimTrace", "Study", "Tone",
    "Transformer", "UIFInputs", "blocking_filter_response", "build_state_matrices", "bundled", "default_curve",
    "design_blocking_filter", "electrical_damping_curve", "evaluate_trip", "growth_rate", "initialize",
    "leadlag_from_phase", "load", "measure_tone", "modal_frequencies", "modal_inertia_and_damping",
    "oscillation_magnitude", "power_flow", "run", "save", "screen", "short_circuit_power", "stability_verdict",
    "tune_gain", "tune_phase", "tune_ssdc", "uif",
]
