from .params import (
    WATER_POOL,
    LorentzianParams,
    LorentzianPool,
    ModelKind,
    ParamBounds,
    PoolParams,
    ZModelParams,
    flatten_params,
    layout_names,
    unflatten_params,
)
from .physics import (
    area_under_curve,
    gamma_sq_over4,
    lorentzian_forward,
    mtr_rex_forward,
    r_ex,
    z_forward,
)
from .base_model import ModelInputs, PhysicalModel
from .lorentzian_model import LorentzianModel
from .z_model import AnalyticalZModel
from .mtrrex_model import MtrRexModel
from .model_manager import ModelManager
from .model_spec import ModelSpec, ParameterSlot
from .jacobian import JacobianResult, model_jacobian

__all__ = [
    'WATER_POOL',
    'LorentzianParams',
    'LorentzianPool',
    'ModelKind',
    'ParamBounds',
    'PoolParams',
    'ZModelParams',
    'flatten_params',
    'layout_names',
    'unflatten_params',
    'area_under_curve',
    'gamma_sq_over4',
    'lorentzian_forward',
    'mtr_rex_forward',
    'r_ex',
    'z_forward',
    'ModelInputs',
    'PhysicalModel',
    'LorentzianModel',
    'AnalyticalZModel',
    'MtrRexModel',
    'ModelManager',
    'ModelSpec',
    'ParameterSlot',
    'JacobianResult',
    'model_jacobian',
]
