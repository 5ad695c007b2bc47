import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.integrate import quad

from cestfit.config import ModelConfig, default_model_config
from cestfit.errors import ConfigError, GridMismatch, IndexOutOfRange, InvalidInput, LengthMismatch
from cestfit.models import (
    WATER_POOL,
    LorentzianParams,
    LorentzianPool,
    ModelKind,
    ModelManager,
    ModelSpec,
    ParamBounds,
    PoolParams,
    ZModelParams,
    area_under_curve,
    flatten_params,
    gamma_sq_over4,
    layout_names,
    lorentzian_forward,
    model_jacobian,
    mtr_rex_forward,
    r_ex,
    unflatten_params,
    z_forward,
)
from cestfit.spectra import FieldContext, Spectrum, SpectrumSet, b1_to_radps, mtr_rex_lhs, ppm_to_radps

CTX = FieldContext()
GRID = np.linspace(-5.0, 5.0, 129)
GLUCOSE = PoolParams("glucose", 1.5e-3, 2000.0, 30.0, 1.2)
LACTATE = PoolParams("lactate", 6e-4, 800.0, 30.0, 0.4)
TWO_POOLS = ZModelParams(4.0, (GLUCOSE, LACTATE))


def oracle_rex(pool, offset_ppm, b1):
    """Exchange term written out per offset with the math module."""
    rad = 2 * math.pi * CTX.gamma_bar * CTX.b0 * 1e-6
    dw = offset_ppm * rad
    delta = pool.d_omega_ppm * rad
    w1 = 2 * math.pi * CTX.gamma_bar * b1 * 1e-6
    half_width_sq = (pool.r2 + pool.k) / pool.k * w1 * w1 + (pool.r2 + pool.k) ** 2
    line = pool.f_over_r1a * w1 * w1 / (half_width_sq + (dw - delta) ** 2)
    return line * (pool.r2 + pool.k * (delta * delta + pool.r2 * (pool.r2 + pool.k)) / (w1 * w1 + dw * dw))


def oracle_z(params, offset_ppm, b1):
    rad = 2 * math.pi * CTX.gamma_bar * CTX.b0 * 1e-6
    dw2 = (offset_ppm * rad) ** 2
    w1sq = (2 * math.pi * CTX.gamma_bar * b1 * 1e-6) ** 2
    rex = sum(oracle_rex(p, offset_ppm, b1) for p in params.pools)
    return dw2 / (dw2 + params.r2a_over_r1a * w1sq + (w1sq + dw2) * rex)


def oracle_lorentzian(params, offset_ppm):
    rad = 2 * math.pi * CTX.gamma_bar * CTX.b0 * 1e-6
    total = 0.0
    for line in params.lines():
        quarter = line.gamma_sq * rad * rad / 4
        total += line.amplitude * quarter / (((offset_ppm - line.d_omega_ppm) * rad) ** 2 + quarter)
    return total


def random_z_params(rng):
    pools = (
        PoolParams("glucose", rng.uniform(0, 4e-3), rng.uniform(500, 5000), 30.0, 1.2),
        PoolParams("lactate", rng.uniform(0, 2e-3), rng.uniform(100, 2000), 30.0, 0.4),
    )
    return ZModelParams(rng.uniform(0.5, 9.5), pools)


# ---------- closed-form pieces ----------

@pytest.mark.parametrize("r2, k, omega1, expected", [
    (0.0, 100.0, 300.0, 100000.0),
    (50.0, 50.0, 0.0, 10000.0),
    (30.0, 500.0, 321.06, 530.0 / 500.0 * 321.06 ** 2 + 530.0 ** 2),
])
def test_gamma_sq_over4(r2, k, omega1, expected):
    pool = PoolParams("p", 1e-3, k, r2, 1.0)
    assert gamma_sq_over4(pool, omega1) == pytest.approx(expected, rel=1e-14)


def test_r_ex_matches_oracle():
    pool = PoolParams("p", 1e-3, 1000.0, 66.0, 1.2)
    w1 = b1_to_radps(1.6, CTX)
    values = r_ex(pool, ppm_to_radps(GRID, CTX), w1, CTX)
    expected = [oracle_rex(pool, x, 1.6) for x in GRID]
    np.testing.assert_allclose(values, expected, rtol=1e-12)


def test_r_ex_vanishes_without_solute():
    pool = PoolParams("p", 0.0, 1000.0, 66.0, 1.2)
    assert np.all(r_ex(pool, ppm_to_radps(GRID, CTX), 300.0, CTX) == 0.0)


def test_r_ex_peak_value_without_r2():
    pool = PoolParams("p", 1e-3, 1000.0, 0.0, 1.2)
    w1 = b1_to_radps(1.2, CTX)
    delta = float(ppm_to_radps(1.2, CTX))
    expected = 1e-3 * w1 ** 2 / gamma_sq_over4(pool, w1) * (1000.0 * delta ** 2 / (w1 ** 2 + delta ** 2))
    assert r_ex(pool, np.array([delta]), w1, CTX)[0] == pytest.approx(expected, rel=1e-12)


# ---------- analytical Z ----------

@pytest.mark.parametrize("b1", [1.2, 1.6, 2.0, 2.4])
def test_z_forward_matches_oracle(b1):
    z = z_forward(TWO_POOLS, GRID, b1_to_radps(b1, CTX), CTX)
    expected = [oracle_z(TWO_POOLS, x, b1) for x in GRID]
    np.testing.assert_allclose(z, expected, rtol=1e-12, atol=0)


def random_lorentzian_params(rng):
    return LorentzianParams(
        (LorentzianPool("glucose", rng.uniform(0, 1), rng.uniform(0.01, 1), 1.2),
         LorentzianPool("lactate", rng.uniform(0, 1), rng.uniform(0.01, 1), 0.4)),
        water=LorentzianPool(WATER_POOL, rng.uniform(0, 1), rng.uniform(0.01, 2), 0.0),
    )


def test_z_forward_matches_oracle_on_random_parameters():
    rng = np.random.default_rng(11)
    offsets = GRID[::8]
    for _ in range(1000):
        params = random_z_params(rng)
        b1 = rng.uniform(0.5, 3.0)
        z = z_forward(params, offsets, b1_to_radps(b1, CTX), CTX)
        np.testing.assert_allclose(z, [oracle_z(params, x, b1) for x in offsets], rtol=1e-12, atol=0)
        assert np.all((z >= 0.0) & (z <= 1.0))


def test_mtr_rex_forward_matches_oracle_on_random_parameters():
    rng = np.random.default_rng(12)
    offsets = GRID[GRID > 0][::4]
    for _ in range(1000):
        params = random_z_params(rng)
        b1 = rng.uniform(0.5, 3.0)
        values = mtr_rex_forward(params, offsets, b1_to_radps(b1, CTX), CTX)
        expected = [sum(oracle_rex(p, x, b1) for p in params.pools) for x in offsets]
        np.testing.assert_allclose(values, expected, rtol=1e-12, atol=0)


def test_lorentzian_forward_matches_oracle_on_random_parameters():
    rng = np.random.default_rng(13)
    offsets = GRID[::8]
    for _ in range(1000):
        params = random_lorentzian_params(rng)
        values = lorentzian_forward(params, offsets, CTX)
        np.testing.assert_allclose(values, [oracle_lorentzian(params, x) for x in offsets], rtol=1e-12, atol=0)


def test_z_forward_is_zero_on_water():
    z = z_forward(TWO_POOLS, GRID, b1_to_radps(1.2, CTX), CTX)
    assert z[64] == 0.0


def test_z_forward_tends_to_one_far_out():
    empty = ZModelParams(4.0, (PoolParams("glucose", 0.0, 2000.0, 30.0, 1.2),))
    z = z_forward(empty, np.array([1e4]), b1_to_radps(1.2, CTX), CTX)
    assert z[0] == pytest.approx(1.0, abs=1e-9)


def test_z_forward_decreases_with_solute():
    rng = np.random.default_rng(5)
    w1 = b1_to_radps(1.6, CTX)
    for _ in range(20):
        params = random_z_params(rng)
        base = z_forward(params, GRID, w1, CTX)
        for i, pool in enumerate(params.pools):
            more = list(params.pools)
            more[i] = PoolParams(pool.name, pool.f_over_r1a + 1e-4, pool.k, pool.r2, pool.d_omega_ppm)
            assert np.all(z_forward(ZModelParams(params.r2a_over_r1a, tuple(more)), GRID, w1, CTX) <= base + 1e-15)


def test_z_model_params_reject_duplicate_offsets():
    with pytest.raises(InvalidInput):
        ZModelParams(4.0, (GLUCOSE, PoolParams("other", 1e-3, 100.0, 10.0, 1.2)))


# ---------- MTR_Rex ----------

def test_mtr_rex_forward_is_sum_of_pools():
    offsets = GRID[GRID > 0]
    w1 = b1_to_radps(2.0, CTX)
    dw = ppm_to_radps(offsets, CTX)
    single = mtr_rex_forward(ZModelParams(4.0, (GLUCOSE,)), offsets, w1, CTX)
    np.testing.assert_allclose(single, r_ex(GLUCOSE, dw, w1, CTX), rtol=1e-15)
    both = mtr_rex_forward(TWO_POOLS, offsets, w1, CTX)
    np.testing.assert_allclose(both, r_ex(GLUCOSE, dw, w1, CTX) + r_ex(LACTATE, dw, w1, CTX), rtol=1e-14)


def test_mtr_rex_forward_ignores_r2a():
    offsets = GRID[GRID > 0]
    w1 = b1_to_radps(2.0, CTX)
    other = ZModelParams(9.0, TWO_POOLS.pools)
    np.testing.assert_array_equal(mtr_rex_forward(TWO_POOLS, offsets, w1, CTX),
                                  mtr_rex_forward(other, offsets, w1, CTX))


def test_metric_from_z_forward_is_exchange_difference():
    # 1/Z(+) - 1/Z(-) scaled by the spillover factor leaves R_ex(+) - R_ex(-)
    w1 = b1_to_radps(1.2, CTX)
    z = z_forward(TWO_POOLS, GRID, w1, CTX)
    lhs = mtr_rex_lhs(Spectrum(GRID, z, 1.2), CTX)
    positive = lhs.offsets_ppm
    expected = mtr_rex_forward(TWO_POOLS, positive, w1, CTX) - mtr_rex_forward(TWO_POOLS, -positive, w1, CTX)
    np.testing.assert_allclose(lhs.values, expected, rtol=1e-8, atol=1e-14)


# ---------- Lorentzian ----------

def test_lorentzian_peak_equals_amplitude():
    p = LorentzianParams((LorentzianPool("glucose", 0.3, 0.5, 1.0),))
    assert lorentzian_forward(p, np.array([1.0]), CTX)[0] == 0.3


def test_lorentzian_tail_vanishes():
    p = LorentzianParams((LorentzianPool("glucose", 0.3, 0.5, 1.0),))
    assert lorentzian_forward(p, np.array([1000.0]), CTX)[0] < 1e-6


def test_lorentzian_pools_add():
    a = LorentzianPool("a", 0.3, 0.4, 1.0)
    b = LorentzianPool("b", 0.1, 0.8, -1.0)
    both = lorentzian_forward(LorentzianParams((a, b)), GRID, CTX)
    separate = lorentzian_forward(LorentzianParams((a,)), GRID, CTX) + lorentzian_forward(LorentzianParams((b,)), GRID, CTX)
    np.testing.assert_allclose(both, separate, rtol=1e-15)


def test_lorentzian_water_line_sits_at_zero():
    glucose = LorentzianPool("glucose", 0.0, 0.5, 1.2)
    p = LorentzianParams((glucose,), water=LorentzianPool(WATER_POOL, 0.7, 0.3, 0.0))
    assert lorentzian_forward(p, np.array([0.0]), CTX)[0] == 0.7
    assert p.lines()[0].name == WATER_POOL
    np.testing.assert_array_equal(lorentzian_forward(LorentzianParams((glucose,)), GRID, CTX), np.zeros_like(GRID))


def test_lorentzian_pools_reject_water_name():
    with pytest.raises(InvalidInput):
        LorentzianParams((LorentzianPool(WATER_POOL, 0.3, 0.5, 0.0),))


def test_flatten_needs_water_line():
    with pytest.raises(InvalidInput):
        flatten_params(LorentzianParams((LorentzianPool("glucose", 0.3, 0.5, 1.2),)))


def test_area_under_curve_closed_form():
    zero = LorentzianParams((LorentzianPool("a", 0.0, 0.5, 1.0),))
    assert area_under_curve(zero, 0) == 0.0
    # Γ²/4 = 1 (rad/s)²
    unit = LorentzianParams((LorentzianPool("a", 1.0, 4.0 / CTX.radps_per_ppm ** 2, 1.0),))
    assert area_under_curve(unit, 0, CTX) == pytest.approx(math.pi, rel=1e-12)


def test_area_under_curve_is_in_radps():
    p = LorentzianParams((LorentzianPool("a", 0.2, 0.36, 1.2), LorentzianPool("b", 0.1, 0.5, 0.4)))
    expected = 0.2 * math.pi * math.sqrt(0.36 / 4.0) * CTX.radps_per_ppm
    assert area_under_curve(p, 0, CTX) == pytest.approx(expected, rel=1e-12)
    assert area_under_curve(p, 0) == pytest.approx(expected, rel=1e-12)
    seven_tesla = FieldContext(b0=7.0)
    assert area_under_curve(p, 0, seven_tesla) == pytest.approx(expected * 7.0 / CTX.b0, rel=1e-12)


def test_area_under_curve_matches_quadrature():
    p = LorentzianParams((LorentzianPool("a", 0.2, 0.36, 1.2), LorentzianPool("b", 0.1, 0.5, 0.4)),
                         water=LorentzianPool(WATER_POOL, 0.9, 0.3, 0.0))
    half_width = math.sqrt(0.36 / 4.0)
    single = LorentzianParams((p.pools[0],))
    lo, hi = 1.2 - 2000 * half_width, 1.2 + 2000 * half_width
    numeric, _ = quad(lambda x: lorentzian_forward(single, np.array([x]), CTX)[0], lo, hi, points=[1.2], limit=500)
    assert area_under_curve(p, 0, CTX) == pytest.approx(numeric * CTX.radps_per_ppm, rel=1e-3)


def test_area_under_curve_index_out_of_range():
    p = LorentzianParams((LorentzianPool("a", 0.2, 0.36, 1.2),))
    with pytest.raises(IndexOutOfRange):
        area_under_curve(p, 1)


# ---------- parameter layout ----------

@pytest.mark.parametrize("params", [
    TWO_POOLS,
    LorentzianParams((LorentzianPool("glucose", 0.3, 0.5, 1.2), LorentzianPool("lactate", 0.1, 0.4, 0.4)),
                     water=LorentzianPool(WATER_POOL, 0.8, 0.3, 0.0)),
])
def test_flatten_unflatten_is_exact(params):
    kind = ModelKind.LORENTZIAN if isinstance(params, LorentzianParams) else ModelKind.ANALYTICAL_Z
    vector = flatten_params(params)
    assert len(vector) == len(layout_names(kind, ["glucose", "lactate"]))
    assert unflatten_params(kind, vector, ["glucose", "lactate"]) == params


def test_unflatten_length_mismatch():
    with pytest.raises(LengthMismatch):
        unflatten_params(ModelKind.MTR_REX, np.zeros(3), ["glucose", "lactate"])


def test_param_bounds_unit_mapping():
    bounds = ParamBounds.from_limits([0.0, 100.0], [1.0, 2000.0], ["a", "k"])
    np.testing.assert_allclose(bounds.center, [0.5, 1050.0])
    np.testing.assert_allclose(bounds.from_unit([-1.0, 1.0]), [0.0, 2000.0])
    np.testing.assert_allclose(bounds.to_unit([0.75, 100.0]), [0.5, -1.0])
    assert bounds.contains([1.0, 2000.0])
    assert not bounds.contains([1.1, 500.0])
    np.testing.assert_allclose(bounds.clip([2.0, -5.0]), [1.0, 100.0])


def test_param_bounds_reject_negative_deviation():
    with pytest.raises(InvalidInput):
        ParamBounds([0.0], [-1.0], ("a",))


# ---------- model specs ----------

@pytest.mark.parametrize("kind, fitted", [
    ("z", ["r2a_over_r1a", "glucose.f_over_r1a", "glucose.k", "lactate.f_over_r1a", "lactate.k"]),
    ("mtrrex", ["glucose.f_over_r1a", "glucose.k", "lactate.f_over_r1a", "lactate.k"]),
    ("lorentzian", ["water.amplitude", "water.gamma_sq", "glucose.amplitude", "glucose.gamma_sq",
                    "lactate.amplitude", "lactate.gamma_sq"]),
])
def test_default_specs_fit_expected_parameters(kind, fitted):
    spec = ModelSpec.from_config(default_model_config(kind))
    assert list(spec.fitted_names) == fitted
    assert spec.to_config() == default_model_config(kind)


def test_model_config_reserves_water_pool_name():
    document = default_model_config("lorentzian").model_dump(mode="json")
    document["pools"] = ["water", "lactate"]
    with pytest.raises(ValidationError):
        ModelConfig(**document)


def test_narrow_gamma_preset_bounds():
    spec = ModelSpec.from_config(default_model_config("lorentzian", "narrow"))
    j = spec.fitted_names.index("glucose.gamma_sq")
    assert spec.bounds.lower[j] == pytest.approx(0.3)
    assert spec.bounds.upper[j] == pytest.approx(0.6)


def test_spec_evaluate_matches_forward_model():
    spec = ModelSpec.from_config(default_model_config("z"))
    sset = SpectrumSet(tuple(Spectrum(GRID, np.ones_like(GRID), b1) for b1 in (1.2, 2.4)))
    inputs, targets = spec.prepare_targets(sset)
    assert targets.shape == (2, 129)
    p = np.array([4.0, 1.5e-3, 2000.0, 6e-4, 800.0])
    curves = spec.evaluate(p, inputs)
    assert curves.shape == (2, 129)
    np.testing.assert_allclose(curves[1], z_forward(TWO_POOLS, GRID, b1_to_radps(2.4, CTX), CTX), rtol=1e-12)
    batch = spec.evaluate(np.stack([p, p]), inputs)
    assert batch.shape == (2, 2, 129)
    assert spec.unflatten(p) == TWO_POOLS


def test_lorentzian_targets_need_configured_b1():
    spec = ModelSpec.from_config(default_model_config("lorentzian"))
    sset = SpectrumSet((Spectrum(GRID, np.ones_like(GRID), 2.0),))
    with pytest.raises(GridMismatch):
        spec.prepare_targets(sset)


def test_mtrrex_targets_need_negative_offsets():
    spec = ModelSpec.from_config(default_model_config("mtrrex"))
    offsets = np.linspace(0.5, 5.0, 10)
    sset = SpectrumSet((Spectrum(offsets, np.full(10, 0.9), 1.2),))
    with pytest.raises(GridMismatch):
        spec.prepare_targets(sset)


def test_model_manager_rejects_unknown_kind():
    manager = ModelManager(["glucose"])
    with pytest.raises(ConfigError):
        manager.get_model("bloch")
    assert manager.get_model("z").get_name() == "z"


# ---------- Jacobians ----------

def _lorentzian_setup():
    spec = ModelSpec.from_config(default_model_config("lorentzian"))
    sset = SpectrumSet((Spectrum(GRID, np.ones_like(GRID), 1.2),))
    inputs, _ = spec.prepare_targets(sset)
    return spec, inputs


def test_lorentzian_analytic_jacobian_matches_finite_differences():
    spec, inputs = _lorentzian_setup()
    rng = np.random.default_rng(2)
    for _ in range(10):
        p = spec.bounds.from_unit(rng.uniform(-0.9, 0.9, len(spec.bounds)))
        analytic = model_jacobian(spec, p, inputs)
        numeric = model_jacobian(spec, p, inputs, mode="finite-difference")
        assert analytic.mode == "analytic"
        assert numeric.mode == "finite-difference"
        np.testing.assert_allclose(analytic.matrix, numeric.matrix, rtol=1e-5, atol=1e-8)


def test_lorentzian_amplitude_derivative_is_one_at_peak():
    spec, _ = _lorentzian_setup()
    inputs = spec.model.prepare_targets(SpectrumSet((Spectrum([1.0, 1.2, 1.4], [1.0, 1.0, 1.0], 1.2),)))[0]
    p = np.array([0.9, 0.3, 0.3, 0.5, 0.1, 0.4])
    jac = model_jacobian(spec, p, inputs).matrix
    assert jac[1, spec.fitted_names.index("glucose.amplitude")] == pytest.approx(1.0, rel=1e-12)


def test_z_jacobian_is_finite_difference_and_non_positive_in_f():
    spec = ModelSpec.from_config(default_model_config("z"))
    sset = SpectrumSet(tuple(Spectrum(GRID, np.ones_like(GRID), b1) for b1 in (1.2, 2.0)))
    inputs, _ = spec.prepare_targets(sset)
    rng = np.random.default_rng(9)
    for _ in range(5):
        p = spec.bounds.from_unit(rng.uniform(-0.9, 0.9, len(spec.bounds)))
        result = model_jacobian(spec, p, inputs)
        assert result.mode == "finite-difference"
        assert result.matrix.shape == (2 * 129, 5)
        for name in ("glucose.f_over_r1a", "lactate.f_over_r1a"):
            assert np.all(result.matrix[:, spec.fitted_names.index(name)] <= 1e-10)
