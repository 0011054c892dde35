"""Hamiltonians engineered from designed evolution operators.

The workflow: pick a moving frame, anchor some frame states and mix the rest
with a unitary block, read off ``H = i U' U^dag``, cancel couplings the
hardware cannot drive, then check the resulting pulses by simulation.
"""

__version__ = "0.1.0"

from .frames import MovingFrame, ScheduleParams, exponential_frame, rydberg_frame
from .propagator import (MixingBlock, NonUnitaryError, PropagatorDesign, ThreeLevelControls, build_U,
                         exponential_block, rotation_block, three_level_U)
from .engine import (EngineeredHamiltonian, StructureError, eliminate_13, extract_H, forbidden_coupling_report,
                     pulse_coefficients, rydberg_design, rydberg_H_theta, rydberg_omegas, transport_H)
from .pulses import (FitSpec, PulseSet, StirapParams, exact_pulses, fit_exact_pulses, fit_pulse, fitted_pulses,
                     paper_fitted_pulses, stirap_pulses)
from .dynamics import (IntegrationError, LindbladParams, SimResult, evolve_lindblad, evolve_lindblad_batch,
                       evolve_pure, evolve_pure_batch, fidelity)
from .sweeps import (Axis, DeviationSpec, SweepGrid, apply_deviation, decoherence_map, deviation_grid,
                     run_table, stirap_scan)
