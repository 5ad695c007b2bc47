import logging
from typing import Dict, Optional, Sequence

from ..errors import ConfigError
from ..spectra import FieldContext, SpectrumSet
from .base_model import PhysicalModel
from .lorentzian_model import LorentzianModel
from .mtrrex_model import MtrRexModel
from .params import ModelKind
from .z_model import AnalyticalZModel


class ModelManager:
    """Builds the physical models for one pool layout and hands them out by kind."""

    def __init__(self, pool_names: Sequence[str], ctx: Optional[FieldContext] = None,
                 lorentzian_b1: float = 1.2):
        self.pool_names = list(pool_names)
        self.ctx = ctx or FieldContext()
        self.lorentzian_b1 = lorentzian_b1
        self.models: Dict[ModelKind, PhysicalModel] = {}
        self._initialize_models()

    def _initialize_models(self):
        self.models[ModelKind.LORENTZIAN] = LorentzianModel(self.pool_names, self.ctx, self.lorentzian_b1)
        self.models[ModelKind.ANALYTICAL_Z] = AnalyticalZModel(self.pool_names, self.ctx)
        self.models[ModelKind.MTR_REX] = MtrRexModel(self.pool_names, self.ctx)

    def get_model(self, kind) -> PhysicalModel:
        try:
            return self.models[ModelKind(kind)]
        except ValueError as e:
            raise ConfigError(f"unknown model {kind!r}; choose from {[k.value for k in ModelKind]}") from e

    def can_fit(self, kind, sset: SpectrumSet) -> bool:
        try:
            self.get_model(kind).prepare_targets(sset)
            return True
        except Exception as e:
            logging.debug(f"{kind} cannot fit this set: {e}")
            return False
