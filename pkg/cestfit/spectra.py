"""
Z-spectrum data model, unit conversions, preprocessing and the model-free
CEST metrics (MTR, MTR_asym, MTR_Rex and the MTR_Rex left-hand side).

Frequencies are carried in ppm on the data types and converted to rad/s
with a FieldContext wherever they meet ω1.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    AsymmetricSupport,
    EdgeMinimum,
    ExtrapolationNeeded,
    InvalidInput,
    MissingReference,
    NonPositiveAmplitude,
    NonPositiveReference,
    ZeroSignal,
)

GAMMA_BAR_1H = 42.577e6  # Hz/T
GRID_MATCH_PPM = 1e-9
ZERO_SIGNAL = 1e-9
DENSE_FACTOR = 100


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FieldContext:
    b0: float = 9.4
    gamma_bar: float = GAMMA_BAR_1H

    def __post_init__(self):
        if not (self.b0 > 0):
            raise InvalidInput(f"b0 must be positive, got {self.b0}")
        if not (self.gamma_bar > 0):
            raise InvalidInput(f"gamma_bar must be positive, got {self.gamma_bar}")

    @property
    def radps_per_ppm(self) -> float:
        return 2.0 * math.pi * self.gamma_bar * self.b0 * 1e-6


@dataclass(frozen=True, eq=False)
class Spectrum:
    offsets_ppm: np.ndarray
    z: np.ndarray
    b1: float

    def __post_init__(self):
        offsets = _frozen_array(self.offsets_ppm)
        z = _frozen_array(self.z)
        if offsets.ndim != 1 or z.ndim != 1:
            raise InvalidInput("offsets and z must be one-dimensional")
        if len(offsets) != len(z):
            raise InvalidInput(f"{len(offsets)} offsets but {len(z)} z values")
        if len(offsets) < 3:
            raise InvalidInput("a spectrum needs at least 3 samples")
        if np.any(np.diff(offsets) <= 0):
            raise InvalidInput("offsets must be strictly increasing")
        if not (self.b1 > 0):
            raise InvalidInput(f"b1 must be positive, got {self.b1}")
        object.__setattr__(self, "offsets_ppm", offsets)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "b1", float(self.b1))

    def __len__(self) -> int:
        return len(self.offsets_ppm)

    def with_z(self, z) -> "Spectrum":
        return Spectrum(self.offsets_ppm, z, self.b1)


@dataclass(frozen=True, eq=False)
class SpectrumSet:
    """Spectra of one sample acquired at several saturation amplitudes."""
    spectra: Tuple[Spectrum, ...]
    label: Optional[Dict[str, float]] = None

    def __post_init__(self):
        spectra = tuple(self.spectra)
        if not spectra:
            raise InvalidInput("a spectrum set needs at least one spectrum")
        grid = spectra[0].offsets_ppm
        for s in spectra[1:]:
            if len(s.offsets_ppm) != len(grid) or np.any(s.offsets_ppm != grid):
                raise InvalidInput("all spectra in a set must share one offset grid")
        b1s = [s.b1 for s in spectra]
        if len(set(b1s)) != len(b1s):
            raise InvalidInput(f"duplicate b1 values in set: {b1s}")
        object.__setattr__(self, "spectra", spectra)
        if self.label is not None:
            object.__setattr__(self, "label", {str(k): float(v) for k, v in self.label.items()})

    @property
    def offsets_ppm(self) -> np.ndarray:
        return self.spectra[0].offsets_ppm

    @property
    def b1_values(self) -> Tuple[float, ...]:
        return tuple(s.b1 for s in self.spectra)

    def by_b1(self, b1: float, tol: float = 1e-9) -> Spectrum:
        for s in self.spectra:
            if abs(s.b1 - b1) <= tol:
                return s
        raise KeyError(f"no spectrum at b1={b1} (have {self.b1_values})")

    def unlabeled(self) -> "SpectrumSet":
        return SpectrumSet(self.spectra, None)


class MetricKind(str, Enum):
    MTR = "MTR"
    MTR_ASYM = "MTR_asym"
    MTR_REX = "MTR_Rex"
    MTR_REX_LHS = "MTR_Rex_LHS"


@dataclass(frozen=True, eq=False)
class MetricCurve:
    offsets_ppm: np.ndarray
    values: np.ndarray
    kind: MetricKind

    def __post_init__(self):
        offsets = _frozen_array(self.offsets_ppm)
        values = _frozen_array(self.values)
        if len(offsets) != len(values):
            raise InvalidInput(f"{len(offsets)} offsets but {len(values)} values")
        if self.kind == MetricKind.MTR_REX_LHS and np.any(offsets <= 0):
            raise InvalidInput("MTR_Rex_LHS curves are defined on positive offsets only")
        object.__setattr__(self, "offsets_ppm", offsets)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", MetricKind(self.kind))


def ppm_to_radps(offset_ppm, ctx: FieldContext):
    return 2.0 * math.pi * ctx.gamma_bar * ctx.b0 * np.asarray(offset_ppm, dtype=float) * 1e-6


def b1_to_radps(b1_microtesla: float, ctx: FieldContext) -> float:
    if not (b1_microtesla > 0):
        raise NonPositiveAmplitude(f"b1 must be positive, got {b1_microtesla} uT")
    return 2.0 * math.pi * ctx.gamma_bar * b1_microtesla * 1e-6


def normalize(raw_signal: Sequence[Tuple[float, float]], ref_offset: float = 5.0,
              b1: float = 1.2) -> Spectrum:
    """
    Divide a raw saturation curve by the measured signal at ref_offset.

    Args:
        raw_signal: (offset ppm, intensity) pairs, in any order
        ref_offset: offset of the reference sample; must be on the grid
        b1: saturation amplitude of the acquisition (uT)
    """
    pairs = np.asarray(raw_signal, dtype=float).reshape(-1, 2)
    order = np.argsort(pairs[:, 0], kind="stable")
    offsets, intensity = pairs[order, 0], pairs[order, 1]

    hits = np.flatnonzero(np.abs(offsets - ref_offset) < GRID_MATCH_PPM)
    if len(hits) == 0:
        raise MissingReference(f"reference offset {ref_offset} ppm is not on the grid")
    reference = intensity[hits[0]]
    if not (reference > 0):
        raise NonPositiveReference(f"reference intensity at {ref_offset} ppm is {reference}")

    return Spectrum(offsets, intensity / reference, b1)


def _natural_spline(s: Spectrum) -> CubicSpline:
    return CubicSpline(s.offsets_ppm, s.z, bc_type="natural")


@dataclass(frozen=True)
class B0Correction:
    spectrum: Spectrum
    shift_ppm: float
    clamped: Tuple[int, ...] = ()  # indices that took the nearest in-range value


def b0_correct(s: Spectrum, search_window_ppm: float = 1.0,
               strict: bool = False) -> Tuple[Spectrum, float]:
    """Re-center a spectrum so the water minimum sits at 0 ppm; see b0_correct_report."""
    report = b0_correct_report(s, search_window_ppm, strict)
    return report.spectrum, report.shift_ppm


def b0_correct_report(s: Spectrum, search_window_ppm: float = 1.0,
                      strict: bool = False) -> B0Correction:
    """
    Re-center a spectrum so the water minimum sits at 0 ppm.

    The minimum is searched on a natural cubic spline, sampled at 100x the
    native grid density within +/- search_window_ppm of the discrete argmin.
    Samples whose shifted position falls outside the measured range take the
    nearest in-range spline value (or raise ExtrapolationNeeded if strict).

    Returns:
        B0Correction with the corrected spectrum, the estimated shift in ppm
        and the indices of clamped samples
    """
    offsets = s.offsets_ppm
    span = offsets[-1] - offsets[0]
    if not (search_window_ppm > 0) or search_window_ppm > span / 2:
        raise InvalidInput(f"search window {search_window_ppm} ppm must lie in (0, {span / 2}]")

    idx = int(np.argmin(s.z))
    if idx == 0 or idx == len(offsets) - 1:
        raise EdgeMinimum(f"minimum at grid edge ({offsets[idx]} ppm); water offset not bracketed")

    spline = _natural_spline(s)
    lo = max(offsets[idx] - search_window_ppm, offsets[0])
    hi = min(offsets[idx] + search_window_ppm, offsets[-1])
    density = DENSE_FACTOR * (len(offsets) - 1) / span
    num = int(math.ceil((hi - lo) * density)) | 1
    dense = np.linspace(lo, hi, num)
    shift = float(dense[np.argmin(spline(dense))])

    query = offsets + shift
    outside = (query < offsets[0]) | (query > offsets[-1])
    if np.any(outside):
        if strict:
            raise ExtrapolationNeeded(
                f"shift {shift:+.4f} ppm needs values outside the sampled range at "
                f"{int(outside.sum())} offsets")
        logging.warning(f"B0 shift {shift:+.4f} ppm: clamped {int(outside.sum())} boundary samples "
                        f"at indices {np.flatnonzero(outside).tolist()}")
        query = np.clip(query, offsets[0], offsets[-1])

    logging.debug(f"B0 correction: shift {shift:+.5f} ppm (b1={s.b1} uT)")
    clamped = tuple(int(i) for i in np.flatnonzero(outside))
    return B0Correction(s.with_z(spline(query)), shift, clamped)


def mtr(s: Spectrum) -> MetricCurve:
    return MetricCurve(s.offsets_ppm, 1.0 - s.z, MetricKind.MTR)


def _mirror_pairs(s: Spectrum) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Positive offsets, Z there, and Z at the mirrored negative offsets."""
    offsets = s.offsets_ppm
    positive = offsets > 0
    pos_offsets = offsets[positive]
    z_pos = s.z[positive]
    targets = -pos_offsets

    if np.any(targets < offsets[0] - GRID_MATCH_PPM):
        missing = pos_offsets[targets < offsets[0] - GRID_MATCH_PPM]
        raise AsymmetricSupport(f"no negative support for offsets {missing.tolist()} ppm")

    z_neg = np.empty_like(z_pos)
    spline = None
    for i, target in enumerate(targets):
        hit = np.flatnonzero(np.abs(offsets - target) < GRID_MATCH_PPM)
        if len(hit):
            z_neg[i] = s.z[hit[0]]
        else:
            if spline is None:
                spline = _natural_spline(s)
            z_neg[i] = spline(max(target, offsets[0]))
    return pos_offsets, z_pos, z_neg


def mtr_asym(s: Spectrum) -> MetricCurve:
    offsets, z_pos, z_neg = _mirror_pairs(s)
    return MetricCurve(offsets, z_neg - z_pos, MetricKind.MTR_ASYM)


def mtr_rex(s: Spectrum) -> MetricCurve:
    offsets, z_pos, z_neg = _mirror_pairs(s)
    if np.any(z_pos <= ZERO_SIGNAL) or np.any(z_neg <= ZERO_SIGNAL):
        raise ZeroSignal("Z at or below 1e-9 where MTR_Rex needs its inverse")
    return MetricCurve(offsets, 1.0 / z_pos - 1.0 / z_neg, MetricKind.MTR_REX)


def spillover_factor(offsets_ppm, b1: float, ctx: FieldContext) -> np.ndarray:
    dw = ppm_to_radps(offsets_ppm, ctx)
    w1 = b1_to_radps(b1, ctx)
    return dw ** 2 / (dw ** 2 + w1 ** 2)


def mtr_rex_lhs(s: Spectrum, ctx: FieldContext) -> MetricCurve:
    rex = mtr_rex(s)
    values = rex.values * spillover_factor(rex.offsets_ppm, s.b1, ctx)
    return MetricCurve(rex.offsets_ppm, values, MetricKind.MTR_REX_LHS)
