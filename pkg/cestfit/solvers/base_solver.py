import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, PositiveFloat
from scipy.optimize import OptimizeResult

from ..errors import LineSearchFailure, MaxIterations, SolverStalled
from ..models import ModelInputs, ModelSpec, ParamBounds, model_jacobian

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
LINE_SEARCH_FAILURE = "line_search_failure"
STALLED = "stalled"

# Distance from a face of the unit box below which a coordinate counts as on it.
FACE_EPS = 1e-9


class SolverConfig(BaseModel):
    """
    Solver settings. f_tol, g_tol and stationarity_tol apply to the objective
    divided by its value at the initial guess; x_tol is in unit-box units.
    """
    max_iterations: int = Field(default=2000, ge=1)
    f_tol: PositiveFloat = 1e-15
    x_tol: PositiveFloat = 1e-9
    g_tol: PositiveFloat = 1e-12
    stationarity_tol: PositiveFloat = 1e-4
    restarts: int = Field(default=10, ge=0)
    history_size: int = Field(default=10, ge=1)
    fd_rel_step: PositiveFloat = 1e-6
    gradient: Literal["auto", "analytic", "finite-difference"] = "auto"
    init: Literal["center", "random"] = "center"
    seed: int = 0


@dataclass
class FitResult:
    params: np.ndarray
    names: Sequence[str]
    objective_value: float
    iterations: int
    function_evals: int
    converged: bool
    termination: str
    message: str = ""
    init: Optional[np.ndarray] = None
    gradient_mode: Optional[str] = None
    elapsed_s: float = 0.0

    def raise_for_status(self):
        if self.termination == MAX_ITERATIONS:
            raise MaxIterations(self.message or "iteration limit reached")
        if self.termination == LINE_SEARCH_FAILURE:
            raise LineSearchFailure(self.message or "line search failed")
        if self.termination == STALLED:
            raise SolverStalled(self.message or "stopped away from a stationary point")

    def as_dict(self) -> Dict[str, object]:
        return {
            "params": {n: float(v) for n, v in zip(self.names, self.params)},
            "objective": float(self.objective_value),
            "iterations": int(self.iterations),
            "function_evals": int(self.function_evals),
            "converged": bool(self.converged),
            "termination": self.termination,
            "message": self.message,
            "gradient_mode": self.gradient_mode,
        }


class Objective(ABC):
    """Scalar function of a physical parameter vector, counting its evaluations."""

    def __init__(self):
        self.evaluations = 0
        self.gradient_mode: Optional[str] = None

    def __call__(self, p) -> float:
        self.evaluations += 1
        return self.value(np.asarray(p, dtype=float))

    @abstractmethod
    def value(self, p: np.ndarray) -> float:
        pass

    def gradient(self, p: np.ndarray) -> Optional[np.ndarray]:
        return None


class FunctionObjective(Objective):
    def __init__(self, fun: Callable, grad: Optional[Callable] = None):
        super().__init__()
        self.fun = fun
        self.grad = grad
        self.gradient_mode = "analytic" if grad is not None else None

    def value(self, p):
        return float(self.fun(p))

    def gradient(self, p):
        if self.grad is None:
            return None
        return np.asarray(self.grad(p), dtype=float)


class ModelObjective(Objective):
    """Sum over all curves and offsets of (model(p) - data)^2."""

    def __init__(self, spec: ModelSpec, inputs: ModelInputs, targets: np.ndarray,
                 gradient: str = "auto", rel_step: float = 1e-6):
        super().__init__()
        self.spec = spec
        self.inputs = inputs
        self.targets = np.asarray(targets, dtype=float)
        self.gradient_request = gradient
        self.rel_step = rel_step

    def residuals(self, p) -> np.ndarray:
        return np.asarray(self.spec.evaluate(np.asarray(p, dtype=float), self.inputs)) - self.targets

    def value(self, p):
        r = self.residuals(p)
        return float(np.sum(r * r))

    def gradient(self, p):
        jac = model_jacobian(self.spec, p, self.inputs, mode=self.gradient_request, rel_step=self.rel_step)
        self.gradient_mode = jac.mode
        return 2.0 * jac.matrix.T @ self.residuals(p).ravel()


class BaseSolver(ABC):
    """
    Box-constrained minimizer. Searches the unit box u in [-1, 1]^n with
    p = center + deviation * u and reports results in physical units.

    The search sees the objective divided by its value at the initial guess,
    so tolerances do not depend on the scale of the data.
    """
    name: str = ""
    uses_gradient = False

    def minimize(self, objective: Objective, bounds: ParamBounds, init=None,
                 cfg: Optional[SolverConfig] = None) -> FitResult:
        cfg = cfg or SolverConfig()
        if init is None:
            init = initial_guess(bounds, cfg)
        init = bounds.clip(init)
        u0 = np.clip(bounds.to_unit(init), -1.0, 1.0)
        scale = np.asarray(bounds.deviation, dtype=float)
        f_init = objective.value(init)
        f_scale = f_init if np.isfinite(f_init) and f_init > 0 else 1.0

        def fun(u):
            return objective(bounds.from_unit(u)) / f_scale

        jac = None
        if self.uses_gradient:
            def jac(u):
                g = objective.gradient(bounds.from_unit(u))
                if g is None:
                    return box_gradient(fun, u, cfg.fd_rel_step)
                return g * scale / f_scale

        started = time.perf_counter()
        res = self._run(fun, jac, u0, cfg)
        elapsed = time.perf_counter() - started

        u = np.clip(np.asarray(res.x, dtype=float).ravel(), -1.0, 1.0)
        termination, converged = self._termination(res, fun, u, cfg)
        params = bounds.clip(bounds.from_unit(u))
        value = objective.value(params)
        if f_init < value:
            logging.debug(f"{self.name}: result worse than the initial guess, keeping the initial guess")
            params, value = init, f_init

        result = FitResult(
            params=params,
            names=bounds.names,
            objective_value=value,
            iterations=int(getattr(res, "nit", 0) or 0),
            function_evals=objective.evaluations,
            converged=converged,
            termination=termination,
            message=str(getattr(res, "message", "")),
            init=init,
            gradient_mode=objective.gradient_mode if self.uses_gradient else None,
            elapsed_s=elapsed,
        )
        if not converged:
            logging.info(f"{self.name}: not converged ({termination}): {result.message}")
        return result

    def _termination(self, res: OptimizeResult, fun, u: np.ndarray, cfg: SolverConfig):
        """
        Derivative-free searches only report that they stopped moving; a stop
        counts as converged when the projected gradient there is small.
        """
        if not res.success:
            return MAX_ITERATIONS, False
        if is_stationary(u, box_gradient(fun, u, cfg.fd_rel_step), cfg.stationarity_tol):
            return CONVERGED, True
        return STALLED, False

    @abstractmethod
    def _run(self, fun, jac, u0: np.ndarray, cfg: SolverConfig) -> OptimizeResult:
        pass

    def get_name(self) -> str:
        return self.name


def unit_bounds(n: int) -> List[tuple]:
    return [(-1.0, 1.0)] * n


def initial_guess(bounds: ParamBounds, cfg: SolverConfig) -> np.ndarray:
    """Center of the box, or a seeded uniform draw inside it."""
    if cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        return bounds.from_unit(rng.uniform(-1.0, 1.0, len(bounds)))
    return np.array(bounds.center, dtype=float)


def projected_gradient(u, g) -> np.ndarray:
    """Gradient with the components that push out through an active face zeroed."""
    u = np.asarray(u, dtype=float)
    g = np.array(g, dtype=float)
    g[(u <= -1.0 + FACE_EPS) & (g > 0)] = 0.0
    g[(u >= 1.0 - FACE_EPS) & (g < 0)] = 0.0
    return g


def is_stationary(u, g, tol: float) -> bool:
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        return False
    return float(np.max(np.abs(projected_gradient(u, g)), initial=0.0)) <= tol


def box_gradient(fun, u, rel_step):
    """Finite-difference gradient that never steps outside the unit box."""
    u = np.asarray(u, dtype=float)
    h = rel_step * np.maximum(1.0, np.abs(u))
    g = np.empty_like(u)
    for j in range(len(u)):
        step = np.zeros_like(u)
        step[j] = h[j]
        if u[j] + h[j] > 1.0:
            g[j] = (fun(u) - fun(u - step)) / h[j]
        elif u[j] - h[j] < -1.0:
            g[j] = (fun(u + step) - fun(u)) / h[j]
        else:
            g[j] = (fun(u + step) - fun(u - step)) / (2.0 * h[j])
    return g

