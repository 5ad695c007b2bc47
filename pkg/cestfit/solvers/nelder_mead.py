import numpy as np
from scipy.optimize import minimize

from .base_solver import BaseSolver, SolverConfig, unit_bounds

SIMPLEX_STEP = 0.1


class NelderMeadSolver(BaseSolver):
    """Derivative-free simplex search (reflection 1, expansion 2, contraction 0.5, shrink 0.5)."""
    name = "nelder-mead"

    def _run(self, fun, jac, u0, cfg: SolverConfig):
        return minimize(
            fun,
            u0,
            method="Nelder-Mead",
            bounds=unit_bounds(len(u0)),
            options={
                "maxiter": cfg.max_iterations,
                "xatol": cfg.x_tol,
                "fatol": cfg.f_tol,
                "initial_simplex": initial_simplex(u0),
            },
        )


def initial_simplex(u0, step: float = SIMPLEX_STEP) -> np.ndarray:
    """u0 plus one vertex per axis, stepped inward when u0 sits near the upper face."""
    u0 = np.asarray(u0, dtype=float)
    simplex = np.repeat(u0[None, :], len(u0) + 1, axis=0)
    for j in range(len(u0)):
        simplex[j + 1, j] += step if u0[j] + step <= 1.0 else -step
    return simplex
