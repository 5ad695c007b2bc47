from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import InvalidInput, LengthMismatch
from ..spectra import FieldContext

# Direct water saturation line of the Lorentzian model; always centered at 0 ppm.
WATER_POOL = "water"


class ModelKind(str, Enum):
    LORENTZIAN = "lorentzian"
    ANALYTICAL_Z = "z"
    MTR_REX = "mtrrex"


@dataclass(frozen=True)
class PoolParams:
    """Exchanging solute pool of the Bloch-McConnell steady-state models."""
    name: str
    f_over_r1a: float
    k: float
    r2: float
    d_omega_ppm: float

    def __post_init__(self):
        if self.f_over_r1a < 0:
            raise InvalidInput(f"{self.name}: f_over_r1a must be >= 0")
        if not (self.k > 0):
            raise InvalidInput(f"{self.name}: exchange rate k must be > 0")
        if self.r2 < 0:
            raise InvalidInput(f"{self.name}: r2 must be >= 0")


@dataclass(frozen=True)
class ZModelParams:
    r2a_over_r1a: float
    pools: Tuple[PoolParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "pools", tuple(self.pools))
        if self.r2a_over_r1a < 0:
            raise InvalidInput("r2a_over_r1a must be >= 0")
        if not self.pools:
            raise InvalidInput("at least one pool is required")
        offsets = [p.d_omega_ppm for p in self.pools]
        if len(set(offsets)) != len(offsets):
            raise InvalidInput(f"pool offsets must be distinct, got {offsets}")


@dataclass(frozen=True)
class LorentzianPool:
    """
    One Lorentzian line. gamma_sq is the squared full width Γ² in ppm²; the
    model works with Γ²/4 converted to (rad/s)².
    """
    name: str
    amplitude: float
    gamma_sq: float
    d_omega_ppm: float

    def __post_init__(self):
        if not (0.0 <= self.amplitude <= 1.0):
            raise InvalidInput(f"{self.name}: amplitude must lie in [0, 1]")
        if self.gamma_sq < 0:
            raise InvalidInput(f"{self.name}: gamma_sq must be >= 0")

    def gamma_sq_over4(self, ctx: FieldContext) -> float:
        """Γ²/4 in (rad/s)²."""
        return self.gamma_sq * ctx.radps_per_ppm ** 2 / 4.0


@dataclass(frozen=True)
class LorentzianParams:
    """Solute lines plus, optionally, the direct water saturation line."""
    pools: Tuple[LorentzianPool, ...]
    water: Optional[LorentzianPool] = None

    def __post_init__(self):
        object.__setattr__(self, "pools", tuple(self.pools))
        if not self.pools:
            raise InvalidInput("at least one pool is required")
        if any(p.name == WATER_POOL for p in self.pools):
            raise InvalidInput(f"{WATER_POOL!r} is reserved for the water line")

    def lines(self) -> Tuple[LorentzianPool, ...]:
        return self.pools if self.water is None else (self.water, *self.pools)


ModelParams = Union[ZModelParams, LorentzianParams]

BM_POOL_FIELDS = ("f_over_r1a", "k", "r2", "d_omega_ppm")
LORENTZIAN_POOL_FIELDS = ("amplitude", "gamma_sq", "d_omega_ppm")


def layout_names(kind: ModelKind, pool_names: Sequence[str]) -> List[str]:
    """
    Flattened parameter names, in vector order, for a model and its pools.
    The Lorentzian layout starts with the water line.
    """
    kind = ModelKind(kind)
    if kind == ModelKind.LORENTZIAN:
        lines = [WATER_POOL, *pool_names]
        return [f"{line}.{field}" for line in lines for field in LORENTZIAN_POOL_FIELDS]
    names = ["r2a_over_r1a"]
    names += [f"{pool}.{field}" for pool in pool_names for field in BM_POOL_FIELDS]
    return names


def flatten_params(params: ModelParams) -> np.ndarray:
    if isinstance(params, LorentzianParams):
        if params.water is None:
            raise InvalidInput("the Lorentzian layout needs a water line")
        values = [getattr(p, f) for p in params.lines() for f in LORENTZIAN_POOL_FIELDS]
    else:
        values = [params.r2a_over_r1a]
        values += [getattr(p, f) for p in params.pools for f in BM_POOL_FIELDS]
    return np.array(values, dtype=float)


def unflatten_params(kind: ModelKind, vector, pool_names: Sequence[str]) -> ModelParams:
    kind = ModelKind(kind)
    values = [float(v) for v in np.asarray(vector, dtype=float).ravel()]
    expected = len(layout_names(kind, pool_names))
    if len(values) != expected:
        raise LengthMismatch(f"{kind.value} with {len(pool_names)} pools needs {expected} values, got {len(values)}")

    if kind == ModelKind.LORENTZIAN:
        width = len(LORENTZIAN_POOL_FIELDS)
        lines = [LorentzianPool(name, *values[i * width:(i + 1) * width])
                 for i, name in enumerate([WATER_POOL, *pool_names])]
        return LorentzianParams(tuple(lines[1:]), water=lines[0])

    width = len(BM_POOL_FIELDS)
    rest = values[1:]
    pools = [PoolParams(name, *rest[i * width:(i + 1) * width]) for i, name in enumerate(pool_names)]
    return ZModelParams(values[0], tuple(pools))


@dataclass(frozen=True, eq=False)
class ParamBounds:
    """Box [center - deviation, center + deviation] over the fitted parameters."""
    center: np.ndarray
    deviation: np.ndarray
    names: Tuple[str, ...]

    def __post_init__(self):
        center = np.array(self.center, dtype=float)
        deviation = np.array(self.deviation, dtype=float)
        names = tuple(self.names)
        if not (len(center) == len(deviation) == len(names)):
            raise LengthMismatch(f"bounds lengths differ: {len(center)}, {len(deviation)}, {len(names)}")
        if np.any(deviation < 0) or not np.all(np.isfinite(center)) or not np.all(np.isfinite(deviation)):
            raise InvalidInput("deviations must be finite and >= 0")
        center.setflags(write=False)
        deviation.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "deviation", deviation)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_limits(cls, lower, upper, names=None) -> "ParamBounds":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if names is None:
            names = [f"x{i}" for i in range(len(lower))]
        return cls((lower + upper) / 2.0, (upper - lower) / 2.0, tuple(names))

    def __len__(self) -> int:
        return len(self.names)

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.deviation

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.deviation

    def contains(self, p, slack: float = 1e-12) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lower - slack) and np.all(p <= self.upper + slack))

    def clip(self, p) -> np.ndarray:
        return np.clip(np.asarray(p, dtype=float), self.lower, self.upper)

    def to_unit(self, p) -> np.ndarray:
        """Physical vector -> unit box coordinates (0 where the deviation is 0)."""
        p = np.asarray(p, dtype=float)
        safe = np.where(self.deviation > 0, self.deviation, 1.0)
        return np.where(self.deviation > 0, (p - self.center) / safe, 0.0)

    def from_unit(self, u) -> np.ndarray:
        return self.center + self.deviation * np.asarray(u, dtype=float)
