import logging
from typing import NamedTuple

import numpy as np

from .base_model import ModelInputs
from .model_spec import ModelSpec

ANALYTIC = "analytic"
FINITE_DIFFERENCE = "finite-difference"


class JacobianResult(NamedTuple):
    matrix: np.ndarray  # (C*T, P), rows ordered curve by curve
    mode: str


def finite_difference_step(x, rel_step: float = 1e-6) -> np.ndarray:
    return rel_step * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def model_jacobian(spec: ModelSpec, p_fit, inputs: ModelInputs, mode: str = "auto",
                   rel_step: float = 1e-6) -> JacobianResult:
    """
    Derivatives of the flattened model output with respect to the fitted
    parameters. mode "auto" uses the closed form when the model has one and
    central differences (h_j = rel_step * max(1, |x_j|)) otherwise.
    """
    p_fit = np.asarray(p_fit, dtype=float)
    if mode in ("auto", ANALYTIC):
        jac = spec.model.analytic_jacobian(spec.values(p_fit), inputs, spec.fitted_names)
        if jac is not None:
            return JacobianResult(jac.reshape(-1, len(p_fit)), ANALYTIC)
        if mode == ANALYTIC:
            raise ValueError(f"{spec.kind.value} model has no analytic Jacobian")

    steps = finite_difference_step(p_fit, rel_step)
    # all 2P perturbed vectors go through the model as one batch
    stepped = np.repeat(p_fit[None, :], 2 * len(p_fit), axis=0)
    for j, h in enumerate(steps):
        stepped[2 * j, j] += h
        stepped[2 * j + 1, j] -= h
    curves = spec.evaluate(stepped, inputs).reshape(len(stepped), -1)
    jac = (curves[0::2] - curves[1::2]) / (2.0 * steps[:, None])
    logging.debug(f"{spec.kind.value} Jacobian by central differences ({len(p_fit)} parameters)")
    return JacobianResult(jac.T, FINITE_DIFFERENCE)
