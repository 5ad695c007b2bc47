from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..spectra import FieldContext, SpectrumSet, b1_to_radps, ppm_to_radps
from .params import ModelKind, layout_names
from .physics import r_ex_kernel


@dataclass(frozen=True, eq=False)
class ModelInputs:
    """Fixed inputs of a model evaluation: the offset grid and one ω1 per curve."""
    offsets_ppm: np.ndarray
    b1_values: Tuple[float, ...]
    d_omega: object   # rad/s, shape (T,)
    omega1: object    # rad/s, shape (C,)

    @classmethod
    def build(cls, offsets_ppm, b1_values: Sequence[float], ctx: FieldContext) -> "ModelInputs":
        offsets_ppm = np.asarray(offsets_ppm, dtype=float)
        b1_values = tuple(float(b) for b in b1_values)
        omega1 = np.array([b1_to_radps(b, ctx) for b in b1_values])
        return cls(offsets_ppm, b1_values, ppm_to_radps(offsets_ppm, ctx), omega1)

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.b1_values), len(self.offsets_ppm)

    def map(self, fn: Callable) -> "ModelInputs":
        """Same inputs with the rad/s arrays converted, e.g. to torch tensors."""
        return ModelInputs(self.offsets_ppm, self.b1_values, fn(self.d_omega), fn(self.omega1))


Columns = Dict[str, object]


def batch_column(value):
    """Scalars broadcast as they are; per-sample vectors get (N, 1, 1) shape."""
    if np.ndim(value) == 0:
        return value
    return value[:, None, None]


class PhysicalModel(ABC):
    """
    A forward model mapping named parameter columns onto curves of shape
    (N, C, T): N samples, C saturation amplitudes, T offsets.
    """
    kind: ModelKind

    def __init__(self, pool_names: Sequence[str], ctx: FieldContext):
        self.pool_names = list(pool_names)
        self.ctx = ctx

    def parameter_names(self) -> List[str]:
        return layout_names(self.kind, self.pool_names)

    def pool_offset(self, columns: Columns, pool: str):
        return batch_column(columns[f"{pool}.d_omega_ppm"]) * self.ctx.radps_per_ppm

    @abstractmethod
    def evaluate(self, columns: Columns, inputs: ModelInputs):
        pass

    @abstractmethod
    def prepare_targets(self, sset: SpectrumSet) -> Tuple[ModelInputs, np.ndarray]:
        """Grid and target curves (C, T) this model is fitted against."""
        pass

    def analytic_jacobian(self, values: Dict[str, float], inputs: ModelInputs,
                          names: Sequence[str]) -> Optional[np.ndarray]:
        """(C, T, len(names)) derivatives, or None if the model has no closed form."""
        return None

    def get_name(self) -> str:
        return self.kind.value


class BlochMcConnellModel(PhysicalModel):
    """Shared R_ex sum of the analytical Z and MTR_Rex models."""

    def rex_sum(self, columns: Columns, inputs: ModelInputs):
        d_omega = inputs.d_omega[None, None, :]
        omega1 = inputs.omega1[None, :, None]
        total = 0.0
        for pool in self.pool_names:
            total = total + r_ex_kernel(
                batch_column(columns[f"{pool}.f_over_r1a"]),
                batch_column(columns[f"{pool}.k"]),
                batch_column(columns[f"{pool}.r2"]),
                self.pool_offset(columns, pool),
                d_omega,
                omega1,
            )
        return total
