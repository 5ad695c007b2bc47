"""
Synthetic phantom datasets.

Each phantom mixes the configured solutes at one combination of the
concentration grid; its spectra come from the analytical Z model with
f/R1a = scale * concentration, plus seeded Gaussian noise per phantom.
"""
import hashlib
import itertools
import json
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, PositiveFloat, field_validator, model_validator

from .config import DEFAULT_SEED, SOLUTE_DEFAULTS, FieldConfig
from .errors import ShiftTooLarge
from .models import PoolParams, ZModelParams, z_forward
from .spectra import Spectrum, SpectrumSet, b1_to_radps

Z_FLOOR = 1e-6
Z_CEILING = 1.05


class SoluteTemplate(BaseModel):
    name: str
    d_omega_ppm: float
    k: PositiveFloat
    r2: float = Field(ge=0.0)
    scale: PositiveFloat  # f/R1a per mM


class OffsetGrid(BaseModel):
    start: float = -5.0
    stop: float = 5.0
    count: int = Field(default=129, ge=3)

    @model_validator(mode="after")
    def _check(self):
        if not self.stop > self.start:
            raise ValueError("offset grid needs stop > start")
        return self

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


def _default_solutes() -> List[SoluteTemplate]:
    scales = {"glucose": 5e-5, "lactate": 2e-5}
    return [SoluteTemplate(name=name, scale=scales[name], **chem) for name, chem in SOLUTE_DEFAULTS.items()]


class PhantomSpec(BaseModel):
    solutes: List[SoluteTemplate] = Field(default_factory=_default_solutes, min_length=1)
    concentrations: List[PositiveFloat] = Field(default_factory=lambda: [5.0, 15.0, 30.0], min_length=1)
    r2a_over_r1a: float = Field(default=4.0, ge=0.0)
    b1: List[PositiveFloat] = Field(default_factory=lambda: [1.2, 1.6, 2.0, 2.4], min_length=1)
    offsets: OffsetGrid = Field(default_factory=OffsetGrid)
    sigma: float = Field(default=0.005, ge=0.0)
    replicates: int = Field(default=50, ge=1)
    seed: int = DEFAULT_SEED
    field: FieldConfig = Field(default_factory=FieldConfig)

    @field_validator("b1")
    @classmethod
    def _distinct_b1(cls, v):
        if len(set(v)) != len(v):
            raise ValueError(f"b1 values must be distinct: {v}")
        return v

    @property
    def pool_names(self) -> List[str]:
        return [s.name for s in self.solutes]

    def phantom_concentrations(self) -> List[Dict[str, float]]:
        """Every combination of the concentration grid across solutes."""
        return [dict(zip(self.pool_names, combo))
                for combo in itertools.product(self.concentrations, repeat=len(self.solutes))]

    def true_params(self, concentrations: Dict[str, float]) -> ZModelParams:
        pools = tuple(
            PoolParams(s.name, s.scale * concentrations[s.name], s.k, s.r2, s.d_omega_ppm)
            for s in self.solutes
        )
        return ZModelParams(self.r2a_over_r1a, pools)


@dataclass
class PhantomRecord:
    index: int
    concentrations: Dict[str, float]
    seed: int
    params: Dict[str, float]


@dataclass
class SyntheticDataset:
    spec: PhantomSpec
    sets: List[SpectrumSet]
    phantoms: List[PhantomRecord]
    phantom_index: np.ndarray  # phantom of every set
    shifts_ppm: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.sets)

    def labels(self) -> List[Dict[str, float]]:
        return [dict(s.label) for s in self.sets]

    def manifest(self) -> Dict[str, object]:
        phantoms = [
            {"index": p.index, "concentrations": p.concentrations, "seed": p.seed, "params": p.params}
            for p in self.phantoms
        ]
        digest = hashlib.sha256(json.dumps(phantoms, sort_keys=True).encode("utf-8")).hexdigest()
        return {
            "spec": self.spec.model_dump(mode="json"),
            "phantoms": phantoms,
            "sets": [{"phantom": int(i), "label": s.label} for i, s in zip(self.phantom_index, self.sets)],
            "set_count": len(self.sets),
            "b0_shifts_ppm": None if self.shifts_ppm is None else [float(x) for x in self.shifts_ppm],
            "hash": digest,
        }


def _render(spec: PhantomSpec, shifts_ppm: Optional[np.ndarray] = None) -> SyntheticDataset:
    offsets = spec.offsets.values()
    ctx = spec.field.context()
    omega1 = {b1: b1_to_radps(b1, ctx) for b1 in spec.b1}
    sets, records, owners = [], [], []
    for index, concentrations in enumerate(spec.phantom_concentrations()):
        params = spec.true_params(concentrations)
        seed = spec.seed + index
        rng = np.random.default_rng(seed)
        records.append(PhantomRecord(
            index=index,
            concentrations=dict(concentrations),
            seed=seed,
            params={f"{p.name}.f_over_r1a": p.f_over_r1a for p in params.pools},
        ))
        clean = {b1: z_forward(params, offsets, omega1[b1], ctx) for b1 in spec.b1}
        for _ in range(spec.replicates):
            shift = 0.0 if shifts_ppm is None else float(shifts_ppm[len(sets)])
            spectra = []
            for b1 in spec.b1:
                z = clean[b1] if shift == 0.0 else z_forward(params, offsets - shift, omega1[b1], ctx)
                if spec.sigma > 0:
                    z = np.clip(z + rng.normal(0.0, spec.sigma, len(offsets)), Z_FLOOR, Z_CEILING)
                spectra.append(Spectrum(offsets, z, b1))
            sets.append(SpectrumSet(tuple(spectra), label=concentrations))
            owners.append(index)
    return SyntheticDataset(spec, sets, records, np.array(owners, dtype=int), shifts_ppm)


def generate(spec: PhantomSpec) -> SyntheticDataset:
    """Labeled spectrum sets for every phantom and replicate, deterministic per seed."""
    dataset = _render(spec)
    logging.info(f"Generated {len(dataset.phantoms)} phantoms x {spec.replicates} replicates "
                 f"({len(dataset)} sets, {len(spec.b1)} B1 curves each)")
    return dataset


def inject_b0_shift(dataset: SyntheticDataset, shift_ppm: float, seed: Optional[int] = None,
                    jitter_ppm: float = 0.0) -> SyntheticDataset:
    """
    Re-evaluate every spectrum of the dataset at offsets - shift, so the water
    minimum moves to +shift. With jitter_ppm > 0 each set gets its own shift
    drawn around shift_ppm. Noise draws are the same as in the unshifted data.
    """
    spec = dataset.spec
    half_span = (spec.offsets.stop - spec.offsets.start) / 2.0
    shifts = np.full(len(dataset), float(shift_ppm))
    if jitter_ppm > 0:
        rng = np.random.default_rng(spec.seed if seed is None else seed)
        shifts = shifts + rng.normal(0.0, jitter_ppm, len(shifts))
    if np.any(np.abs(shifts) >= half_span):
        raise ShiftTooLarge(f"B0 shift up to {np.abs(shifts).max():.3f} ppm reaches the grid half-span {half_span} ppm")
    if not np.any(shifts):
        return dataset
    logging.info(f"Injecting B0 shift {shift_ppm:+.3f} ppm (jitter {jitter_ppm} ppm) into {len(dataset)} sets")
    return _render(spec, shifts)


def stack_targets(sets: Sequence[SpectrumSet], model) -> np.ndarray:
    """Model targets of every set, stacked to (N, C, T)."""
    return np.stack([model.prepare_targets(s)[1] for s in sets])
