import logging

import numpy as np
from scipy.optimize import minimize

from .base_solver import BaseSolver, SolverConfig, box_gradient, is_stationary, unit_bounds


class PowellSolver(BaseSolver):
    """
    Conjugate-direction search with bounded 1-D line minimizations.

    Bounded line searches shrink the direction set once coordinates reach a
    face of the box. When a pass ends away from a stationary point the search
    restarts there with the unit-box axes, until a restart no longer lowers
    the objective or cfg.restarts is used up.
    """
    name = "powell"

    def _search(self, fun, u0, cfg: SolverConfig):
        return minimize(
            fun,
            u0,
            method="Powell",
            bounds=unit_bounds(len(u0)),
            options={
                "maxiter": cfg.max_iterations,
                "xtol": cfg.x_tol,
                "ftol": cfg.f_tol,
                "direc": np.eye(len(u0)),
            },
        )

    def _run(self, fun, jac, u0, cfg: SolverConfig):
        res = self._search(fun, u0, cfg)
        iterations = int(res.nit)
        for attempt in range(cfg.restarts):
            if not res.success:
                break
            u = np.clip(res.x, -1.0, 1.0)
            if is_stationary(u, box_gradient(fun, u, cfg.fd_rel_step), cfg.stationarity_tol):
                break
            again = self._search(fun, u, cfg)
            iterations += int(again.nit)
            improved = again.fun < res.fun - cfg.f_tol * max(abs(res.fun), 1e-300)
            logging.debug(f"powell restart {attempt + 1}: {res.fun:.6e} -> {again.fun:.6e}")
            if again.fun <= res.fun:
                res = again
            if not improved or not again.success:
                break
        res.nit = iterations
        return res
