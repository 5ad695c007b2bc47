import numpy as np
import pytest
from pydantic import ValidationError

from cestfit.config import default_model_config
from cestfit.errors import ShiftTooLarge
from cestfit.models import ModelSpec, z_forward
from cestfit.spectra import b0_correct, b1_to_radps
from cestfit.synth import Z_CEILING, Z_FLOOR, OffsetGrid, PhantomSpec, generate, inject_b0_shift, stack_targets


def small_spec(**kw):
    kw.setdefault("concentrations", [5.0, 30.0])
    kw.setdefault("replicates", 3)
    return PhantomSpec(**kw)


def test_default_counts():
    dataset = generate(PhantomSpec())
    assert len(dataset.phantoms) == 9
    assert len(dataset) == 9 * 50
    assert all(len(s.spectra) == 4 for s in dataset.sets)
    assert dataset.sets[0].b1_values == (1.2, 1.6, 2.0, 2.4)
    assert len(dataset.sets[0].offsets_ppm) == 129


def test_phantoms_cover_concentration_grid():
    dataset = generate(small_spec())
    combos = {(p.concentrations["glucose"], p.concentrations["lactate"]) for p in dataset.phantoms}
    assert combos == {(5.0, 5.0), (5.0, 30.0), (30.0, 5.0), (30.0, 30.0)}
    assert dataset.phantoms[1].params["lactate.f_over_r1a"] == pytest.approx(30.0 * 2e-5)


def test_noiseless_spectra_equal_forward_model():
    spec = small_spec(concentrations=[15.0], replicates=1, sigma=0.0)
    dataset = generate(spec)
    ctx = spec.field.context()
    params = spec.true_params(dataset.labels()[0])
    for s in dataset.sets[0].spectra:
        np.testing.assert_array_equal(s.z, z_forward(params, spec.offsets.values(), b1_to_radps(s.b1, ctx), ctx))


def test_labels_follow_phantoms():
    dataset = generate(small_spec())
    for owner, label in zip(dataset.phantom_index, dataset.labels()):
        assert label == dataset.phantoms[owner].concentrations
    assert dataset.phantom_index.tolist() == [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]


def test_same_seed_same_data():
    a, b = generate(small_spec(seed=9)), generate(small_spec(seed=9))
    for sa, sb in zip(a.sets, b.sets):
        for x, y in zip(sa.spectra, sb.spectra):
            np.testing.assert_array_equal(x.z, y.z)
    assert a.manifest()["hash"] == b.manifest()["hash"]


def test_different_seed_different_noise():
    a, b = generate(small_spec(seed=1)), generate(small_spec(seed=2))
    assert not np.array_equal(a.sets[0].spectra[0].z, b.sets[0].spectra[0].z)
    assert a.manifest()["hash"] != b.manifest()["hash"]


def test_manifest():
    dataset = generate(small_spec())
    manifest = dataset.manifest()
    assert manifest["set_count"] == 12
    assert len(manifest["phantoms"]) == 4
    assert [entry["phantom"] for entry in manifest["sets"]] == dataset.phantom_index.tolist()
    assert manifest["b0_shifts_ppm"] is None
    assert PhantomSpec.model_validate(manifest["spec"]) == dataset.spec


def test_noise_is_unbiased_gaussian():
    spec = small_spec(concentrations=[5.0], replicates=100, b1=[2.4])
    clean = z_forward(spec.true_params({"glucose": 5.0, "lactate": 5.0}), spec.offsets.values(),
                      b1_to_radps(2.4, spec.field.context()), spec.field.context())
    away = clean > 0.1
    residuals = np.concatenate([s.spectra[0].z[away] - clean[away] for s in generate(spec).sets])
    assert abs(residuals.mean()) < 5 * spec.sigma / np.sqrt(len(residuals))
    assert residuals.std() == pytest.approx(spec.sigma, rel=0.05)


def test_noise_is_clamped():
    dataset = generate(small_spec(sigma=0.5))
    z = np.concatenate([s.z for sset in dataset.sets for s in sset.spectra])
    assert z.min() >= Z_FLOOR
    assert z.max() <= Z_CEILING


def test_b1_values_must_be_distinct():
    with pytest.raises(ValidationError):
        PhantomSpec(b1=[1.2, 1.2])


def test_offset_grid_order():
    with pytest.raises(ValidationError):
        OffsetGrid(start=5.0, stop=-5.0)


# ---------- B0 shift ----------

def test_zero_shift_returns_dataset_unchanged():
    dataset = generate(small_spec())
    assert inject_b0_shift(dataset, 0.0) is dataset


def test_shift_is_recovered_by_b0_correction():
    dataset = inject_b0_shift(generate(small_spec(sigma=0.0, replicates=1)), 0.2)
    assert dataset.manifest()["b0_shifts_ppm"] == [0.2] * 4
    for sset in dataset.sets:
        s = sset.by_b1(1.2)
        assert s.offsets_ppm[np.argmin(s.z)] == pytest.approx(0.2, abs=0.08)
        _, shift = b0_correct(s)
        assert shift == pytest.approx(0.2, abs=0.02)


def test_shift_is_recovered_on_noisy_spectra():
    dataset = inject_b0_shift(generate(small_spec(concentrations=[5.0, 15.0, 30.0], sigma=0.005)), 0.2)
    spectra = [s for sset in dataset.sets for s in sset.spectra][:100]
    assert len(spectra) == 100
    shifts = np.array([b0_correct(s)[1] for s in spectra])
    assert shifts.mean() == pytest.approx(0.2, abs=0.02)
    assert np.mean(np.abs(shifts - 0.2) <= 0.02) >= 0.9


def test_shift_keeps_noise_draws():
    base = generate(small_spec(replicates=1))
    shifted = inject_b0_shift(base, 0.1)
    clean_base = generate(small_spec(replicates=1, sigma=0.0))
    clean_shifted = inject_b0_shift(clean_base, 0.1)
    noise = base.sets[0].spectra[1].z - clean_base.sets[0].spectra[1].z
    noise_shifted = shifted.sets[0].spectra[1].z - clean_shifted.sets[0].spectra[1].z
    away = clean_shifted.sets[0].spectra[1].z > 0.1
    np.testing.assert_allclose(noise_shifted[away], noise[away], atol=1e-12)


def test_jittered_shifts_are_seeded():
    dataset = generate(small_spec())
    a = inject_b0_shift(dataset, 0.1, seed=3, jitter_ppm=0.05).shifts_ppm
    b = inject_b0_shift(dataset, 0.1, seed=3, jitter_ppm=0.05).shifts_ppm
    np.testing.assert_array_equal(a, b)
    assert len(np.unique(a)) == len(dataset)


@pytest.mark.parametrize("shift", [5.0, -5.5])
def test_shift_must_stay_inside_grid(shift):
    with pytest.raises(ShiftTooLarge):
        inject_b0_shift(generate(small_spec()), shift)


def test_stack_targets():
    dataset = generate(small_spec())
    spec = ModelSpec.from_config(default_model_config("z"))
    targets = stack_targets(dataset.sets, spec.model)
    assert targets.shape == (12, 4, 129)
    np.testing.assert_array_equal(targets[5, 2], dataset.sets[5].spectra[2].z)
