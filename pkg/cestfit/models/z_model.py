from typing import Tuple

import numpy as np

from ..spectra import SpectrumSet
from .base_model import BlochMcConnellModel, Columns, ModelInputs, batch_column
from .params import ModelKind
from .physics import z_kernel


class AnalyticalZModel(BlochMcConnellModel):
    """Steady-state Z-spectrum for continuous-wave saturation, fitted on every B1."""
    kind = ModelKind.ANALYTICAL_Z

    def evaluate(self, columns: Columns, inputs: ModelInputs):
        return z_kernel(
            batch_column(columns["r2a_over_r1a"]),
            self.rex_sum(columns, inputs),
            inputs.d_omega[None, None, :],
            inputs.omega1[None, :, None],
        )

    def prepare_targets(self, sset: SpectrumSet) -> Tuple[ModelInputs, np.ndarray]:
        inputs = ModelInputs.build(sset.offsets_ppm, sset.b1_values, self.ctx)
        return inputs, np.stack([s.z for s in sset.spectra])
