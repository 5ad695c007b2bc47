from scipy.optimize import minimize

from .base_solver import (
    CONVERGED,
    LINE_SEARCH_FAILURE,
    MAX_ITERATIONS,
    BaseSolver,
    SolverConfig,
    is_stationary,
    unit_bounds,
)


class LbfgsbSolver(BaseSolver):
    """
    Limited-memory quasi-Newton with projected gradients. The gradient is
    2 J^T r with J analytic when the model has one, finite differences
    otherwise.
    """
    name = "lbfgsb"
    uses_gradient = True

    def _run(self, fun, jac, u0, cfg: SolverConfig):
        return minimize(
            fun,
            u0,
            jac=jac,
            method="L-BFGS-B",
            bounds=unit_bounds(len(u0)),
            options={
                "maxiter": cfg.max_iterations,
                "maxcor": cfg.history_size,
                "ftol": cfg.f_tol,
                "gtol": cfg.g_tol,
            },
        )

    def _termination(self, res, fun, u, cfg):
        if res.success:
            return CONVERGED, True
        if "ABNORMAL" in str(res.message).upper():
            # the line search gives up at rounding level once the projected gradient is gone
            if is_stationary(u, res.jac, cfg.stationarity_tol):
                return CONVERGED, True
            return LINE_SEARCH_FAILURE, False
        return MAX_ITERATIONS, False
