import numpy as np
import pytest

from larvest.errors import BelowThreshold, InvariantViolation
from larvest.synth import (DEFAULT_TEMPERATURES, bundled_weather, default_family, design_times,
                           synth_dataset, synth_truth_curve, synthetic_weather)


def test_rate_scales_with_degree_excess():
    fam = default_family(rate_coeff=0.05)
    assert float(fam.rate(fam.base_temp_c + 10.0, 0.0)) == pytest.approx(0.5)


def test_doubling_excess_halves_timing(family):
    T0 = family.base_temp_c
    assert family.t_max(T0 + 16) == pytest.approx(family.t_max(T0 + 8) / 2)
    assert family.t_pup(T0 + 16) == pytest.approx(family.t_pup(T0 + 8) / 2)
    with pytest.raises(BelowThreshold):
        family.t_pup(T0)


def test_default_landmarks(family):
    # linear phase gains 0.75 * 14 mm at 0.01 mm per degree-hour
    assert family.dd_linear_end == pytest.approx(1050.0)
    assert family.dd_max == pytest.approx(1750.0)
    # half-width overshoot loses 0.875 mm; remaining 2.325 mm at 0.005 mm/degree-hour
    assert family.dd_pupation == pytest.approx(1750 + 350 + 465)
    assert family.t_pup(10.0) == pytest.approx(2565 / 8)


def test_closed_form_values(family):
    D = np.array([0.0, 500.0, 1050.0, 1400.0, 1750.0, 2100.0, 2565.0, 5000.0])
    expected = [2.0, 7.0, 12.5, 12.5 + 3.5 - 0.01 * 350 ** 2 / 1400, 16.0, 16.0 - 0.875,
                12.8, 12.8]
    assert np.allclose(family.length_dd(D), expected, atol=1e-12)


def test_rate_is_derivative_of_length(family):
    D = np.linspace(1.0, family.dd_pupation - 1.0, 997)
    h = 1e-4
    fd = (family.length_dd(D + h) - family.length_dd(D - h)) / (2 * h)
    assert np.max(np.abs(fd - family.rate_dd(D))) < 1e-7


def test_truth_curve(family):
    c = synth_truth_curve(family, 14.0)
    assert c.t_pup == pytest.approx(family.t_pup(14.0))
    i = int(np.argmax(c.values))
    assert abs(c.grid[i] - family.t_max(14.0)) <= c.grid[1]


def test_invalid_family():
    with pytest.raises(InvariantViolation):
        default_family(shrink_frac=0.99)
    with pytest.raises(InvariantViolation):
        default_family(rate_coeff=0.0)


def test_noise_free_dataset_is_truth():
    fam = default_family(noise_sd_mm=0.0)
    ds = synth_dataset(fam, replicates=2)
    assert list(ds.temperatures) == list(DEFAULT_TEMPERATURES)
    for b in ds.batches:
        truth = fam.length(b.temperature_c, np.array(b.times))
        assert np.allclose([r[0] for r in b.lengths], truth, atol=1e-12)
        assert len(b.times) == 21


def test_determinism_and_extension(family):
    a = synth_dataset(family, seed=5, replicates=3)
    assert a == synth_dataset(family, seed=5, replicates=3)
    assert a != synth_dataset(family, seed=6, replicates=3)
    big = synth_dataset(family, seed=5, replicates=6, temps=(6.0,))
    small = synth_dataset(family, seed=5, replicates=3, temps=(6.0,))
    for rb, rs in zip(big.batches[0].lengths, small.batches[0].lengths):
        assert set(rs) <= set(rb)


def test_law_of_large_numbers(family):
    n = 10_000
    ds = synth_dataset(family, temps=(12.0, 24.0), times_per_temp=5, replicates=n, seed=9)
    for b in ds.batches:
        truth = family.length(b.temperature_c, np.array(b.times))
        for mu, reps in zip(truth, b.lengths):
            y = np.array(reps)
            assert abs(y.mean() - mu) < 3 * family.noise_sd_mm / np.sqrt(n)
            assert y.std(ddof=1) == pytest.approx(family.noise_sd_mm, rel=0.05)


def test_design_times(family):
    t = design_times(family, 10.0, 5)
    assert t[0] == 0.0 and t[-1] == pytest.approx(family.t_pup(10.0))


def test_bundled_weather_matches_generator():
    assert bundled_weather() == synthetic_weather()
    w = bundled_weather()
    assert w.span == (-400.0, 0.0)
