from .base_solver import (
    CONVERGED,
    LINE_SEARCH_FAILURE,
    MAX_ITERATIONS,
    STALLED,
    BaseSolver,
    FitResult,
    FunctionObjective,
    ModelObjective,
    Objective,
    SolverConfig,
    initial_guess,
)
from .nelder_mead import NelderMeadSolver
from .powell import PowellSolver
from .lbfgsb import LbfgsbSolver
from .solver_manager import FitOutcome, SolverManager, fit, fit_many, fitted_matrix

__all__ = [
    'CONVERGED',
    'LINE_SEARCH_FAILURE',
    'MAX_ITERATIONS',
    'STALLED',
    'BaseSolver',
    'FitResult',
    'FunctionObjective',
    'ModelObjective',
    'Objective',
    'SolverConfig',
    'initial_guess',
    'NelderMeadSolver',
    'PowellSolver',
    'LbfgsbSolver',
    'FitOutcome',
    'SolverManager',
    'fit',
    'fit_many',
    'fitted_matrix',
]
