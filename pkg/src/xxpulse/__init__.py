"""Power-optimal, drift-stabilised pulse synthesis for two-qubit XX gates on ion chains."""

from .analysis import (DriftScenario, PhaseTrajectory, ScanResult, alpha, chi, drift_scan,
                       infidelity, phase_trajectory, power_lower_bound, sk_compensation)
from .demod import DemodulatedPulse, demodulate, find_zeros, reconstruct, reconstruction_error
from .estimators import Demodulator, PulseSynthesizer
from .integrals import (ConstraintMatrix, CouplingMatrix, basis_mode_overlap,
                        build_constraint_matrix, coupling_derivative, coupling_double_integral,
                        moment_overlap)
from .model import (FourierPulse, GateSpec, IonChain, PulseBasis, StabilizationSpec, StepPulse,
                    five_ion_chain, generate_chain, load_chain, save_chain)
from .synthesis import (NullSpaceBasis, OptimizationResult, null_space, optimize_pulse,
                        project_chi_stabilized, synthesize, synthesize_step_pulse)

__version__ = "0.1.0"
