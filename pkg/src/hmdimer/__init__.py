"""Floquet states and localization control of a driven nonlinear two-mode system."""

from .drive import (
    DriveParams,
    SymmetryReport,
    classify_symmetries,
    drive_antiderivative,
    drive_value,
)
from .dynamics import IntegrationError, RampSchedule, Trajectory, integrate
from .effective import (
    EffectiveParams,
    delta_bias,
    effective_params,
    effective_rhs,
    effective_stationary_states,
    f_bar,
    phi_correction,
)
from .floquet import (
    ConvergenceError,
    FloquetState,
    NumericalError,
    SpectrumBranch,
    SystemParams,
    compute_spectrum,
    continue_branch,
    discover_states,
    floquet_residual,
    fold_quasienergy,
    linear_state_pair,
    monodromy_quasienergies,
    normal_state_pair,
    population_imbalance,
    solve_floquet_state,
)

__version__ = "0.1.0"

__all__ = [
    "DriveParams",
    "SymmetryReport",
    "classify_symmetries",
    "drive_value",
    "drive_antiderivative",
    "EffectiveParams",
    "effective_params",
    "f_bar",
    "phi_correction",
    "delta_bias",
    "effective_rhs",
    "effective_stationary_states",
    "SystemParams",
    "FloquetState",
    "SpectrumBranch",
    "ConvergenceError",
    "NumericalError",
    "fold_quasienergy",
    "floquet_residual",
    "solve_floquet_state",
    "monodromy_quasienergies",
    "linear_state_pair",
    "discover_states",
    "normal_state_pair",
    "population_imbalance",
    "continue_branch",
    "compute_spectrum",
    "RampSchedule",
    "Trajectory",
    "IntegrationError",
    "integrate",
    "__version__",
]
