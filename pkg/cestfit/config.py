"""
Configuration documents and presets.

Every document is a pydantic model that loads from JSON or YAML (picked by
file suffix) and dumps back without loss.
"""
import json
import logging
import os
from pathlib import Path
from typing import List, Optional, Type, TypeVar

import yaml
from pydantic import BaseModel, Field, PositiveFloat, ValidationError, model_validator

from .errors import ConfigError
from .models.params import WATER_POOL, ModelKind, layout_names
from .spectra import GAMMA_BAR_1H, FieldContext

DEFAULT_SEED = int(os.getenv("CESTFIT_SEED", "1234"))

# Nominal chemistry of the two solutes in the mixed phantoms. Offsets are
# known chemistry; exchange and relaxation rates are artifact choices.
SOLUTE_DEFAULTS = {
    "glucose": {"d_omega_ppm": 1.2, "k": 2000.0, "r2": 30.0},
    "lactate": {"d_omega_ppm": 0.4, "k": 800.0, "r2": 30.0},
}

GAMMA_PRESETS = {
    "standard": (0.0, 1.0),
    "narrow": (0.3, 0.6),
}

# Water line box (amplitude, Γ² in ppm²); the solute Γ² presets do not apply to it.
WATER_AMPLITUDE = (0.0, 1.0)
WATER_GAMMA_SQ = (0.0, 2.0)

T = TypeVar("T", bound=BaseModel)


class FieldConfig(BaseModel):
    b0: PositiveFloat = 9.4
    gamma_bar: PositiveFloat = GAMMA_BAR_1H

    def context(self) -> FieldContext:
        return FieldContext(self.b0, self.gamma_bar)


class ParameterEntry(BaseModel):
    name: str
    center: float
    deviation: float = Field(default=0.0, ge=0.0)
    fixed: bool = False

    @property
    def lower(self) -> float:
        return self.center if self.fixed else self.center - self.deviation

    @property
    def upper(self) -> float:
        return self.center if self.fixed else self.center + self.deviation


class ModelConfig(BaseModel):
    kind: ModelKind
    pools: List[str] = Field(min_length=1)
    parameters: List[ParameterEntry]
    field: FieldConfig = Field(default_factory=FieldConfig)
    lorentzian_b1: PositiveFloat = 1.2

    @model_validator(mode="after")
    def _check_layout(self):
        if len(set(self.pools)) != len(self.pools):
            raise ValueError(f"pool names must be unique: {self.pools}")
        if WATER_POOL in self.pools:
            raise ValueError(f"{WATER_POOL!r} is reserved for the Lorentzian water line")
        expected = layout_names(self.kind, self.pools)
        given = [p.name for p in self.parameters]
        if len(set(given)) != len(given):
            raise ValueError("duplicate parameter names")
        if set(given) != set(expected):
            missing = sorted(set(expected) - set(given))
            extra = sorted(set(given) - set(expected))
            raise ValueError(f"parameters do not match the {self.kind.value} layout; "
                             f"missing {missing}, unexpected {extra}")
        by_name = {p.name: p for p in self.parameters}
        self.parameters = [by_name[n] for n in expected]

        if not any(not p.fixed for p in self.parameters):
            raise ValueError("at least one parameter must be fitted")
        for p in self.parameters:
            if not p.fixed and p.deviation <= 0:
                raise ValueError(f"{p.name}: fitted parameters need a positive deviation")
            self._check_physical(p)
        return self

    @staticmethod
    def _check_physical(p: ParameterEntry):
        field = p.name.split(".")[-1]
        if field == "k" and p.lower <= 0:
            raise ValueError(f"{p.name}: exchange rate box must exclude k <= 0")
        if field in ("f_over_r1a", "r2", "r2a_over_r1a", "gamma_sq") and p.lower < 0:
            raise ValueError(f"{p.name}: box must exclude negative values")
        if field == "amplitude" and (p.lower < 0 or p.upper > 1):
            raise ValueError(f"{p.name}: amplitude box must lie within [0, 1]")

    def entry(self, name: str) -> ParameterEntry:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)

    def fitted_names(self) -> List[str]:
        return [p.name for p in self.parameters if not p.fixed]


def default_model_config(kind, gamma_preset: str = "standard",
                         pools: Optional[List[str]] = None,
                         field: Optional[FieldConfig] = None) -> ModelConfig:
    """
    Bounds preset for one model. Lorentzian solute widths use the Γ² range
    named by gamma_preset ("standard" = [0, 1], "narrow" = [0.3, 0.6] ppm²);
    the water line at 0 ppm has its own box. Pool offsets and pool R2 are
    fixed at their nominal values.
    """
    kind = ModelKind(kind)
    pools = list(pools or SOLUTE_DEFAULTS.keys())
    if gamma_preset not in GAMMA_PRESETS:
        raise ConfigError(f"unknown gamma preset {gamma_preset!r}; choose from {sorted(GAMMA_PRESETS)}")
    unknown = [p for p in pools if p not in SOLUTE_DEFAULTS]
    if unknown:
        raise ConfigError(f"no default chemistry for pools {unknown}; pass a bounds file")

    params: List[ParameterEntry] = []
    if kind == ModelKind.LORENTZIAN:
        lo, hi = GAMMA_PRESETS[gamma_preset]
        params += _line_entries(WATER_POOL, WATER_AMPLITUDE, WATER_GAMMA_SQ, 0.0)
        for pool in pools:
            params += _line_entries(pool, (0.0, 1.0), (lo, hi), SOLUTE_DEFAULTS[pool]["d_omega_ppm"])
    else:
        params.append(ParameterEntry(name="r2a_over_r1a", center=5.0, deviation=4.5,
                                     fixed=kind == ModelKind.MTR_REX))
        f_centers = {"glucose": 2e-3, "lactate": 1e-3}
        k_boxes = {"glucose": (500.0, 5000.0), "lactate": (100.0, 2000.0)}
        for pool in pools:
            chem = SOLUTE_DEFAULTS[pool]
            k_lo, k_hi = k_boxes[pool]
            params.append(ParameterEntry(name=f"{pool}.f_over_r1a", center=f_centers[pool],
                                         deviation=f_centers[pool]))
            params.append(ParameterEntry(name=f"{pool}.k", center=(k_lo + k_hi) / 2, deviation=(k_hi - k_lo) / 2))
            params.append(ParameterEntry(name=f"{pool}.r2", center=chem["r2"], fixed=True))
            params.append(ParameterEntry(name=f"{pool}.d_omega_ppm", center=chem["d_omega_ppm"], fixed=True))
    return ModelConfig(kind=kind, pools=pools, parameters=params, field=field or FieldConfig())


def _line_entries(name, amplitude, gamma_sq, d_omega_ppm) -> List[ParameterEntry]:
    return [
        ParameterEntry(name=f"{name}.amplitude", center=sum(amplitude) / 2, deviation=(amplitude[1] - amplitude[0]) / 2),
        ParameterEntry(name=f"{name}.gamma_sq", center=sum(gamma_sq) / 2, deviation=(gamma_sq[1] - gamma_sq[0]) / 2),
        ParameterEntry(name=f"{name}.d_omega_ppm", center=d_omega_ppm, fixed=True),
    ]


def load_document(path, model_cls: Type[T]) -> T:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() in (".yaml", ".yml"):
            raw = yaml.safe_load(text)
        else:
            raw = json.loads(text)
        return model_cls.model_validate(raw or {})
    except (ValidationError, json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"invalid {model_cls.__name__} in {path}: {e}") from e


def dump_document(doc: BaseModel, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = doc.model_dump(mode="json")
    if path.suffix.lower() in (".yaml", ".yml"):
        path.write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")
    else:
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    logging.debug(f"Wrote {type(doc).__name__} to {path}")
    return path
