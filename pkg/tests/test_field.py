import math
import warnings

import numpy as np
import pytest

from conftest import make_field
from larvest.errors import EmptyWindow
from larvest.field import (GrowthField, default_temperature_bandwidth, nw_weights,
                           smooth_across_temperature)

U = np.linspace(0.0, 1.0, 201)


def hump(height):
    return 2.0 + height * np.sin(np.pi * U) + 0.5 * (1 - U)


def test_nw_oracle_three_constants():
    temps = [10.0, 15.0, 20.0]
    k = [math.exp(-0.5 * ((t - 12.0) / 5.0) ** 2) for t in temps]
    oracle = sum(kk * c for kk, c in zip(k, (0.0, 1.0, 2.0))) / sum(k)
    got = smooth_across_temperature(temps, [[0.0], [1.0], [2.0]], 12.0, "gaussian", 5.0)
    assert got[0] == pytest.approx(oracle, abs=1e-14)


def test_symmetric_weights_at_midpoint():
    assert np.allclose(nw_weights([10.0, 20.0], 15.0, "gaussian", 3.0), 0.5, atol=1e-15)


def test_default_bandwidth():
    assert default_temperature_bandwidth([6, 9, 15, 18]) == 12.0


def test_blend_stays_within_pointwise_range():
    shapes = [hump(h) for h in (6, 9, 14, 11)]
    f = make_field([8, 12, 16, 20], shapes, [0.02, 0.03, 0.045, 0.06], [1e-4] * 4)
    st = f.states(np.linspace(8, 20, 37))
    lo, hi = np.min(shapes, axis=0), np.max(shapes, axis=0)
    assert np.all(st.shapes >= lo - 1e-12) and np.all(st.shapes <= hi + 1e-12)


def test_compact_kernel_reproduces_experimental_temperatures():
    shapes = [hump(h) for h in (6, 9, 14)]
    a = [0.02, 0.03, 0.045]
    b = [1e-4, 2e-4, 3e-4]
    f = make_field([10, 15, 20], shapes, a, b, kernel="epanechnikov", h=4.0)
    st = f.states([10.0, 15.0, 20.0])
    assert np.array_equal(st.shapes, np.array(shapes))
    assert np.allclose(st.a, a, rtol=0, atol=0) and np.allclose(st.b, b, rtol=0, atol=0)


def test_pointwise_warp_blend_equals_coefficient_blend():
    a = np.array([0.02, 0.03, 0.045])
    b = np.array([1e-4, 2e-4, 3e-4])
    f = make_field([10, 15, 20], [hump(h) for h in (6, 9, 14)], a, b)
    st = f.states([13.3])
    w = nw_weights([10, 15, 20], 13.3, "gaussian", 5.0)[0]
    t = np.linspace(0, float(st.t_pup[0]), 50)
    pointwise = sum(wk * (ak * t + bk * t * t) for wk, ak, bk in zip(w, a, b))
    assert np.allclose(pointwise, st.a[0] * t + st.b[0] * t * t, atol=1e-14)
    # the blended pupation time is where the blended warp reaches 1
    tp = float(st.t_pup[0])
    assert st.a[0] * tp + st.b[0] * tp * tp == pytest.approx(1.0, abs=1e-13)


def test_cold_extension_and_freezing():
    f = make_field([10, 15, 20], [hump(h) for h in (6, 9, 14)], [0.02, 0.03, 0.045],
                   [1e-4, 2e-4, 3e-4], dev_threshold_c=2.0)
    st = f.states([10.0, 6.0, 2.0, -3.0])
    i10, i6, i2, im3 = st.row_index
    r = (6.0 - 2.0) / (10.0 - 2.0)
    assert st.t_pup[i6] == pytest.approx(st.t_pup[i10] / r, rel=1e-12)
    assert np.array_equal(st.shapes[i6], st.shapes[i10])
    assert [st.frozen[i] for i in (i10, i6, i2, im3)] == [0, 0, 1, 1]
    flat = f.growth_at_temperature(-3.0)
    assert np.all(flat.values == flat.values[0]) and np.all(flat.derivs == 0.0)
    assert flat.values[0] == pytest.approx(st.shapes[i10][0])


def test_json_round_trip(field):
    text = field.to_json()
    again = GrowthField.from_json(text)
    assert again.to_json() == text
    a, b = field.states([7.3, 14.2]), again.states([7.3, 14.2])
    assert np.array_equal(a.shapes, b.shapes) and np.array_equal(a.t_pup, b.t_pup)


def test_empty_window_names_temperature():
    f = make_field([10, 20], [hump(6), hump(9)], [0.02, 0.03], [1e-4, 2e-4],
                   kernel="epanechnikov", h=2.0)
    with pytest.raises(EmptyWindow, match="T=15"):
        f.states([15.0])


def test_warns_above_hottest_temperature(field):
    with pytest.warns(RuntimeWarning, match="extrapolating"):
        field.states([45.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        field.states([20.0])


def test_fitted_field_is_coherent(field, family):
    temps = np.linspace(field.temp_range[0], field.temp_range[1], 60)
    st = field.states(temps)
    # warps increase all the way to pupation
    assert np.all(st.a > 0) and np.all(st.a + 2 * st.b * st.t_pup > 0)
    # warmer means faster development
    assert np.all(np.diff(st.t_pup) < 0)
    # every blended shape has an interior maximum and ends below it
    assert np.all((st.peak > 0) & (st.peak < st.shapes.shape[1] - 1))
    assert np.all(st.shapes[:, -1] < st.shapes.max(axis=1))


def test_growth_at_temperature_is_cached_and_consistent(field):
    c1 = field.growth_at_temperature(16.5)
    assert field.growth_at_temperature(16.5) is c1
    st = field.states([16.5])
    assert c1.t_pup == pytest.approx(float(st.t_pup[0]))
    assert c1.values[0] == pytest.approx(st.shapes[0][0])
    assert c1.values[-1] == pytest.approx(st.shapes[0][-1])


def test_two_temperature_midpoint_matches_direct_formula():
    # cubic-or-lower shapes are reproduced exactly by the cubic interpolant
    u = np.linspace(0.0, 1.0, 2001)
    s1, d1 = 2 + 20 * u - 16 * u ** 2, 20 - 32 * u
    s2, d2 = 2 + 30 * u - 24 * u ** 2, 30 - 48 * u
    a, b = np.array([0.02, 0.04]), np.array([1e-4, 3e-4])
    f = GrowthField(temperatures=np.array([10.0, 20.0]), shapes=np.array([s1, s2]),
                    shape_derivs=np.array([d1, d2]), warp_a=a, warp_b=b,
                    warp_t_pup=2 / (a + np.sqrt(a * a + 4 * b)), warp_t_max=np.array([20.0, 10.0]),
                    alpha=0.6, h_shape=5.0, h_warp=5.0, h_shape_deriv=5.0, h_warp_deriv=5.0)
    curve = f.growth_at_temperature(15.0)
    am, bm = a.mean(), b.mean()
    w = am * curve.grid + bm * curve.grid ** 2
    expected = 2 + 25 * w - 20 * w ** 2
    expected_deriv = (25 - 40 * w) * (am + 2 * bm * curve.grid)
    assert am * curve.t_pup + bm * curve.t_pup ** 2 == pytest.approx(1.0, abs=1e-13)
    assert np.max(np.abs(curve.values - expected)) < 1e-10
    assert np.max(np.abs(curve.derivs - expected_deriv)) < 1e-6
