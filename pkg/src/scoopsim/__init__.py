"""Measurement-driven transfer in a two-level tunneling system."""

__version__ = "0.1.0"

from .core import (DensityMatrixError, Well, WellSystem, ZurekInputs, analytic_rabi_py,
                   build_hamiltonian, check_density_matrix, epsilon_for_occupancy,
                   mean_y_occupancy, population, pure_state, zurek_decoherence_time)
from .dynamics import (CAPTURE, DEPHASING, EvolutionConfig, LindbladChannel, TraceDriftError,
                       evolve_lindblad, evolve_unitary)
from .measurement import (EnsembleState, MeasurementProtocol, projective_look, run_protocol,
                          sample_trajectories, scoop)
from .scenarios import (adaptive_mutation_run, alpha_decay_compare, fit_exponential_rate,
                        scoop_box_experiment, zeno_scan)
from .trace import KineticsTrace

__all__ = [
    "__version__",
    "DensityMatrixError", "Well", "WellSystem", "ZurekInputs", "analytic_rabi_py",
    "build_hamiltonian", "check_density_matrix", "epsilon_for_occupancy", "mean_y_occupancy",
    "population", "pure_state", "zurek_decoherence_time",
    "CAPTURE", "DEPHASING", "EvolutionConfig", "LindbladChannel", "TraceDriftError",
    "evolve_lindblad", "evolve_unitary",
    "EnsembleState", "MeasurementProtocol", "projective_look", "run_protocol",
    "sample_trajectories", "scoop",
    "adaptive_mutation_run", "alpha_decay_compare", "fit_exponential_rate",
    "scoop_box_experiment", "zeno_scan",
    "KineticsTrace",
]
