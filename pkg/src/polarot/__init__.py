"""Simulation and analysis of optical-rotation measurements with
polarization-entangled photon pairs: evolved Bell states, joint
observables, seeded coincidence Monte Carlo, rotation-angle extraction,
state tomography, CHSH tests and Fisher-information sensitivity."""

__version__ = "0.1.0"

from .channels import (NoiseSpec, RotationChannel, SolutionSpec, apply_local,
                       apply_noise, hwp_matrix, offset_correct, qwp_matrix,
                       rotation_unitary, solution_rotation)
from .config import ExperimentConfig, config_hash, load_config, loads_config
from .measure import (AnalyzerSetting, CoincidenceTable, JointObservables,
                      chsh_from_counts, chsh_s, estimate_observables,
                      exact_observables, exact_table, extract_thetas,
                      joint_expectation, outcome_probabilities, read_table,
                      rotation_from_observables, scan_theta_a,
                      separable_expectations, simulate_counts, write_table)
from .metrology import probe_state, qfi, variance_scaling
from .states import (BELL_KINDS, bell_ket, bell_state, concurrence,
                     cosine_similarity, fidelity, ket, load_state,
                     maximally_mixed, purity, save_state, separable_state,
                     validate_state, werner_state)
from .sweeps import (SweepResult, fit_line, read_xy_csv, run_molarity_sweep,
                     run_theta_sweep, write_sweep, zero_crossing)
from .tomography import (MleResult, linear_inversion, mle_reconstruct,
                         predicted_counts, read_tomo_counts,
                         reconstruction_report, bootstrap_sigmas,
                         tomography_settings, write_tomo_counts)
