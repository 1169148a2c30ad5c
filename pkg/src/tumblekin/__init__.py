"""Equilibria and macroscopic coefficients of a run-and-tumble kinetic model with an internal state."""

__version__ = "0.1.0"

from .mesh import GridField, Mesh, build_mesh, prolong, row_averages, total_mass, velocity_average, y_integral
from .tumbling import TumblingModel
from .equilibrium import (NumericalFailure, SolverConfig, SolveReport, bump_field, convergence_metric,
                          evolve_step, normalize, solve_equilibrium, uniform_field, upwind_weight)
from .corrector import CorrectorSource, make_source, solve_corrector, source_diffusion, source_drift
from .coefficients import (CoefficientReport, coeffs_case2, coeffs_case3, compute_coefficients,
                           diffusion_D02, drift_c02_corrector, drift_c02_direct, drift_sweep, mean_velocity)
from .analysis import (ConvergenceRow, ExponentFit, check_flux_identity, check_symmetry, convergence_study,
                       fit_blowup_exponent, fit_decay_exponent, uniqueness_check, verify_suite)
from .config import ConfigError, RunConfig, parse_config
