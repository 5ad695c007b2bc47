from typing import Tuple

import numpy as np

from ..errors import AsymmetricSupport, GridMismatch
from ..spectra import SpectrumSet, mtr_rex_lhs
from .base_model import BlochMcConnellModel, Columns, ModelInputs
from .params import ModelKind


class MtrRexModel(BlochMcConnellModel):
    """
    Sum of R_ex/R1a over pools, fitted against the spillover-corrected
    MTR_Rex curves on positive offsets. r2a_over_r1a does not enter.
    """
    kind = ModelKind.MTR_REX

    def evaluate(self, columns: Columns, inputs: ModelInputs):
        return self.rex_sum(columns, inputs)

    def prepare_targets(self, sset: SpectrumSet) -> Tuple[ModelInputs, np.ndarray]:
        try:
            curves = [mtr_rex_lhs(s, self.ctx) for s in sset.spectra]
        except AsymmetricSupport as e:
            raise GridMismatch(f"MTR_Rex needs mirrored negative offsets: {e}") from e
        if len(curves[0].offsets_ppm) == 0:
            raise GridMismatch("MTR_Rex needs positive offsets")
        inputs = ModelInputs.build(curves[0].offsets_ppm, sset.b1_values, self.ctx)
        return inputs, np.stack([c.values for c in curves])
