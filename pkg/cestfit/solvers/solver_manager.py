import logging
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np

from ..errors import CestError, ConfigError
from ..models import ModelSpec
from ..spectra import SpectrumSet
from .base_solver import BaseSolver, FitResult, ModelObjective, SolverConfig, initial_guess
from .lbfgsb import LbfgsbSolver
from .nelder_mead import NelderMeadSolver
from .powell import PowellSolver


class SolverManager:
    """Registry of the iterative solvers, keyed by their CLI names."""

    def __init__(self):
        self.solvers: Dict[str, BaseSolver] = {}
        self._initialize_solvers()

    def _initialize_solvers(self):
        for solver in (NelderMeadSolver(), PowellSolver(), LbfgsbSolver()):
            self.solvers[solver.name] = solver

    def get_solver(self, name: str) -> BaseSolver:
        solver = self.solvers.get(name)
        if solver is None:
            raise ConfigError(f"unknown solver {name!r}; choose from {sorted(self.solvers)}")
        return solver

    def available(self) -> List[str]:
        return list(self.solvers)


def fit(spec: ModelSpec, data: SpectrumSet, solver: str = "lbfgsb",
        cfg: Optional[SolverConfig] = None) -> FitResult:
    """
    Fit one spectrum set. Starts at the box center (or a seeded random point)
    and returns the fitted vector in physical units, inside the box.
    Raises GridMismatch if the set does not carry what the model needs.
    """
    cfg = cfg or SolverConfig()
    inputs, targets = spec.prepare_targets(data)
    objective = ModelObjective(spec, inputs, targets, gradient=cfg.gradient, rel_step=cfg.fd_rel_step)
    return SolverManager().get_solver(solver).minimize(objective, spec.bounds, initial_guess(spec.bounds, cfg), cfg)


@dataclass
class FitOutcome:
    index: int
    label: Optional[Dict[str, float]]
    result: Optional[FitResult] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.result is not None


def _fit_task(args) -> FitOutcome:
    index, spec, sset, solver, cfg = args
    try:
        return FitOutcome(index, sset.label, result=fit(spec, sset, solver, cfg))
    except CestError as e:
        logging.warning(f"fit {index} failed: {type(e).__name__}: {e}")
        return FitOutcome(index, sset.label, error=f"{type(e).__name__}: {e}")


def fit_many(spec: ModelSpec, sets: Sequence[SpectrumSet], solver: str = "lbfgsb",
             cfg: Optional[SolverConfig] = None, jobs: int = 1,
             on_result: Optional[Callable[[FitOutcome], None]] = None) -> List[FitOutcome]:
    """
    Fit every set independently. With jobs > 1 the fits run in worker
    processes; outcomes always come back in input order. A fit that raises a
    CestError yields an outcome with the error instead of aborting the batch.
    """
    cfg = cfg or SolverConfig()
    SolverManager().get_solver(solver)
    tasks = [(i, spec, s, solver, cfg) for i, s in enumerate(sets)]
    outcomes: List[FitOutcome] = []
    for outcome in _iter_outcomes(tasks, jobs):
        outcomes.append(outcome)
        if on_result is not None:
            on_result(outcome)
    failed = sum(1 for o in outcomes if not o.ok)
    logging.info(f"{solver}: fitted {len(outcomes) - failed}/{len(outcomes)} sets")
    return outcomes


def _iter_outcomes(tasks, jobs: int) -> Iterator[FitOutcome]:
    if jobs <= 1 or len(tasks) <= 1:
        for task in tasks:
            yield _fit_task(task)
        return
    with Pool(processes=jobs) as pool:
        yield from pool.imap(_fit_task, tasks)


def fitted_matrix(outcomes: Sequence[FitOutcome], width: int) -> np.ndarray:
    """Stack fitted vectors; failed fits become rows of NaN."""
    rows = [o.result.params if o.ok else np.full(width, np.nan) for o in outcomes]
    return np.array(rows, dtype=float).reshape(len(rows), width)
