import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..errors import GridMismatch
from ..spectra import FieldContext, SpectrumSet, mtr
from .base_model import Columns, ModelInputs, PhysicalModel, batch_column
from .params import WATER_POOL, ModelKind
from .physics import GAMMA_FLOOR, lorentzian_kernel


class LorentzianModel(PhysicalModel):
    """
    Multi-pool Lorentzian fit of the MTR curve at a single saturation
    amplitude: one line per solute pool plus the direct water saturation line
    at 0 ppm.
    """
    kind = ModelKind.LORENTZIAN

    def __init__(self, pool_names: Sequence[str], ctx: FieldContext, b1: float = 1.2):
        super().__init__(pool_names, ctx)
        self.b1 = b1

    @property
    def lines(self):
        return [WATER_POOL, *self.pool_names]

    def _half_width_sq(self, gamma_sq):
        return gamma_sq * self.ctx.radps_per_ppm ** 2 / 4.0

    def evaluate(self, columns: Columns, inputs: ModelInputs):
        d_omega = inputs.d_omega[None, None, :]
        total = 0.0
        for pool in self.lines:
            total = total + lorentzian_kernel(
                batch_column(columns[f"{pool}.amplitude"]),
                self._half_width_sq(batch_column(columns[f"{pool}.gamma_sq"])),
                self.pool_offset(columns, pool),
                d_omega,
            )
        return total

    def prepare_targets(self, sset: SpectrumSet) -> Tuple[ModelInputs, np.ndarray]:
        try:
            spectrum = sset.by_b1(self.b1)
        except KeyError as e:
            raise GridMismatch(f"Lorentzian model is fitted at b1={self.b1} uT only; "
                               f"set has {sset.b1_values}") from e
        if len(sset.spectra) > 1:
            logging.debug(f"Lorentzian model: using the b1={self.b1} uT curve of {len(sset.spectra)}")
        inputs = ModelInputs.build(spectrum.offsets_ppm, (spectrum.b1,), self.ctx)
        return inputs, mtr(spectrum).values[None, :]

    def analytic_jacobian(self, values: Dict[str, float], inputs: ModelInputs,
                          names: Sequence[str]) -> Optional[np.ndarray]:
        scale = self.ctx.radps_per_ppm
        d_omega = np.asarray(inputs.d_omega, dtype=float)
        jac = np.zeros((1, len(d_omega), len(names)))
        for j, name in enumerate(names):
            pool, field = name.split(".", 1)
            a = values[f"{pool}.amplitude"]
            g = self._half_width_sq(values[f"{pool}.gamma_sq"]) + GAMMA_FLOOR
            delta = d_omega - values[f"{pool}.d_omega_ppm"] * scale
            denom = delta ** 2 + g
            if field == "amplitude":
                jac[0, :, j] = g / denom
            elif field == "gamma_sq":
                jac[0, :, j] = a * delta ** 2 / denom ** 2 * scale ** 2 / 4.0
            elif field == "d_omega_ppm":
                jac[0, :, j] = a * g * 2.0 * delta / denom ** 2 * scale
        return jac
