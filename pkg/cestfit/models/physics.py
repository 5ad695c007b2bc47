"""
Steady-state CEST model equations.

The *_kernel functions use arithmetic operators only, so they broadcast over
numpy arrays and torch tensors alike; the network loss differentiates
through the same code the solvers evaluate. All frequencies in the kernels
are angular (rad/s).
"""
import math
from typing import Optional

import numpy as np

from ..errors import IndexOutOfRange
from ..spectra import FieldContext, ppm_to_radps
from .params import LorentzianParams, PoolParams, ZModelParams

# Added to Γ²/4 so a zero-width line evaluated exactly on its offset stays finite.
GAMMA_FLOOR = 1e-12


def gamma_sq_over4_kernel(k, r2, omega1):
    return (r2 + k) / k * omega1 ** 2 + (r2 + k) ** 2


def r_ex_kernel(f_over_r1a, k, r2, pool_offset, d_omega, omega1):
    """R_ex/R1a of one pool; pool_offset, d_omega and omega1 in rad/s."""
    g = gamma_sq_over4_kernel(k, r2, omega1)
    lineshape = f_over_r1a * omega1 ** 2 / (g + (d_omega - pool_offset) ** 2)
    return lineshape * (r2 + k * (pool_offset ** 2 + r2 * (r2 + k)) / (omega1 ** 2 + d_omega ** 2))


def z_kernel(r2a_over_r1a, rex_sum, d_omega, omega1):
    dw2 = d_omega ** 2
    return dw2 / (dw2 + r2a_over_r1a * omega1 ** 2 + (omega1 ** 2 + dw2) * rex_sum)


def lorentzian_kernel(amplitude, gamma_sq_over4, pool_offset, d_omega):
    g = gamma_sq_over4 + GAMMA_FLOOR
    return amplitude * (g / ((d_omega - pool_offset) ** 2 + g))


def gamma_sq_over4(pool: PoolParams, omega1: float) -> float:
    return gamma_sq_over4_kernel(pool.k, pool.r2, omega1)


def r_ex(pool: PoolParams, d_omega, omega1: float, ctx: FieldContext) -> np.ndarray:
    d_omega = np.asarray(d_omega, dtype=float)
    return r_ex_kernel(pool.f_over_r1a, pool.k, pool.r2, float(ppm_to_radps(pool.d_omega_ppm, ctx)),
                       d_omega, omega1)


def _rex_sum(pools, d_omega, omega1, ctx):
    total = np.zeros_like(d_omega)
    for pool in pools:
        total = total + r_ex(pool, d_omega, omega1, ctx)
    return total


def z_forward(p: ZModelParams, offsets_ppm, omega1: float, ctx: FieldContext) -> np.ndarray:
    dw = ppm_to_radps(offsets_ppm, ctx)
    return z_kernel(p.r2a_over_r1a, _rex_sum(p.pools, dw, omega1, ctx), dw, omega1)


def mtr_rex_forward(p: ZModelParams, offsets_ppm, omega1: float, ctx: FieldContext) -> np.ndarray:
    """Sum of R_ex/R1a over pools; r2a_over_r1a does not enter."""
    return _rex_sum(p.pools, ppm_to_radps(offsets_ppm, ctx), omega1, ctx)


def lorentzian_forward(p: LorentzianParams, offsets_ppm, ctx: FieldContext) -> np.ndarray:
    """MTR as the sum of the solute lines and, if present, the water line."""
    dw = ppm_to_radps(offsets_ppm, ctx)
    total = np.zeros_like(dw)
    for pool in p.lines():
        total = total + lorentzian_kernel(pool.amplitude, pool.gamma_sq_over4(ctx),
                                          float(ppm_to_radps(pool.d_omega_ppm, ctx)), dw)
    return total


def area_under_curve(p: LorentzianParams, index: int, ctx: Optional[FieldContext] = None) -> float:
    """
    Integral of solute line `index` over the offset axis in rad/s:
    a·π·sqrt(Γ²/4). The water line is not indexed. ctx defaults to 9.4 T.
    """
    if not (0 <= index < len(p.pools)):
        raise IndexOutOfRange(f"pool index {index} out of range for {len(p.pools)} pools")
    pool = p.pools[index]
    return pool.amplitude * math.pi * math.sqrt(pool.gamma_sq_over4(ctx or FieldContext()))
