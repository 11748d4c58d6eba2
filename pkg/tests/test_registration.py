import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from larvest.errors import BoundaryMaximum, MonotonicityViolation, OutOfRange
from larvest.registration import (SHAPE_GRID_POINTS, WarpingQuadratic, alpha_bounds,
                                  compute_shape, default_alpha, find_landmarks, fit_warping,
                                  invert_warping, register_curves)
from larvest.smoothing import ConstantTempCurve, fit_batch


def make_curve(f, df, t_pup, n=512, T=20.0):
    grid = np.linspace(0, t_pup, n)
    return ConstantTempCurve(temperature_c=T, grid=grid, values=f(grid), derivs=df(grid),
                             t_pup=t_pup)


def test_landmarks_of_parabola():
    curve = make_curve(lambda t: 10 - (t - 3) ** 2, lambda t: -2 * (t - 3), 6.0, n=200)
    t_max, t_pup = find_landmarks(curve)
    assert t_pup == 6.0
    step = curve.grid[1]
    i = int(np.argmax(curve.values))
    assert abs(curve.grid[i] - 3) <= step
    assert abs(t_max - 3) < 1e-6


def test_landmark_on_grid_point_with_symmetric_neighbours():
    curve = make_curve(lambda t: 5 - np.abs(t - 2.0), lambda t: -np.sign(t - 2), 4.0, n=201)
    assert find_landmarks(curve)[0] == pytest.approx(2.0, abs=1e-12)


def test_monotone_curve_has_no_landmark():
    curve = make_curve(lambda t: 1 + t, lambda t: np.ones_like(t), 5.0, T=7.5)
    with pytest.raises(BoundaryMaximum) as info:
        find_landmarks(curve)
    assert info.value.temperature_c == 7.5


def test_fit_warping_linear_case():
    w = fit_warping(2.0, 4.0, 0.5)
    assert w.a == pytest.approx(0.25, abs=1e-15) and w.b == pytest.approx(0.0, abs=1e-15)


def test_fit_warping_worked_example():
    w = fit_warping(2.0, 4.0, 0.4)
    assert w.a == pytest.approx(0.15, abs=1e-14)
    assert w.b == pytest.approx(0.025, abs=1e-14)
    assert float(w(3.0)) == pytest.approx(0.675, abs=1e-14)


def test_fit_warping_monotonicity_violation():
    with pytest.raises(MonotonicityViolation, match="w'"):
        fit_warping(1.0, 4.0, 0.5)
    w = WarpingQuadratic(a=(0.5 * 16 - 1) / 12, b=(1 - 0.5 * 4) / 12, t_pup=4, alpha=0.5, t_max=1)
    assert float(w.deriv(4.0)) == pytest.approx(-1 / 12)


def test_invert_warping_examples():
    assert invert_warping(fit_warping(2.0, 4.0, 0.5), 0.5) == pytest.approx(2.0)
    w = fit_warping(2.0, 4.0, 0.4)
    assert invert_warping(w, 0.675) == pytest.approx(3.0, abs=1e-12)
    assert invert_warping(w, 1.0) == 4.0
    with pytest.raises(OutOfRange):
        invert_warping(w, 1.2)


@settings(max_examples=50, deadline=None)
@given(t_max=st.floats(1.0, 9.0), frac=st.floats(0.05, 0.95), seed=st.integers(0, 1000))
def test_warp_invariants(t_max, frac, seed):
    t_pup = 10.0
    lo, hi = alpha_bounds(t_max, t_pup)
    alpha = lo + frac * (hi - lo)
    w = fit_warping(t_max, t_pup, alpha)
    assert float(w(0.0)) == 0.0
    assert abs(float(w(t_max)) - alpha) <= 1e-10
    assert abs(float(w(t_pup)) - 1.0) <= 1e-12
    ts = np.linspace(0, t_pup, 1000)
    assert np.all(w.deriv(ts) > 0)
    u = np.random.default_rng(seed).uniform(0, 1, 1000)
    assert np.max(np.abs(w(invert_warping(w, u)) - u)) < 1e-10
    assert np.max(np.abs(invert_warping(w, w(ts)) - ts)) < 1e-10 * t_pup


def hump(t):
    return t * (5.0 - t)


def hump_deriv(t):
    return 5.0 - 2.0 * t


def test_compute_shape_linear_warp():
    curve = make_curve(hump, hump_deriv, 4.0, n=4001)
    shape = compute_shape(curve, fit_warping(2.0, 4.0, 0.5))
    u = shape.grid
    assert np.allclose(shape.values, hump(4 * u), atol=1e-6)
    assert np.allclose(shape.derivs, 4 * hump_deriv(4 * u), atol=1e-6)


def test_compute_shape_of_linear_curve():
    curve = make_curve(lambda t: t, lambda t: np.ones_like(t), 4.0)
    shape = compute_shape(curve, fit_warping(2.0, 4.0, 0.5))
    assert np.allclose(shape.values, 4 * shape.grid, atol=1e-12)
    assert np.allclose(shape.derivs, 4.0, atol=1e-12)


def test_compute_shape_worked_example_square():
    # L(t) = t^2 with w(t) = 0.15 t + 0.025 t^2: w(3) = 0.675, w'(3) = 0.3
    curve = make_curve(lambda t: t * t, lambda t: 2 * t, 4.0, n=4001)
    shape = compute_shape(curve, fit_warping(2.0, 4.0, 0.4))
    assert float(shape.value_at(0.675)) == pytest.approx(9.0, abs=1e-9)
    assert float(shape.deriv_at(0.675)) == pytest.approx(20.0, abs=1e-9)
    assert float(shape.sampled().value_at(0.675)) == pytest.approx(9.0, abs=1e-6)
    assert float(shape.sampled().deriv_at(0.675)) == pytest.approx(20.0, abs=1e-3)


def test_compute_shape_identity_warp():
    curve = make_curve(lambda t: np.sin(3 * t) + 2, lambda t: 3 * np.cos(3 * t), 1.0)
    w = WarpingQuadratic(a=1.0, b=0.0, t_pup=1.0, alpha=0.5, t_max=0.5)
    shape = compute_shape(curve, w, 512)
    assert np.allclose(shape.values, curve.values, atol=1e-12)
    assert np.allclose(shape.derivs, curve.derivs, atol=1e-12)


def test_compute_shape_worked_quadratic():
    curve = make_curve(hump, hump_deriv, 4.0, n=4001)
    w = fit_warping(2.0, 4.0, 0.4)
    shape = compute_shape(curve, w)
    # w(3) = 0.675 and w'(3) = 0.15 + 2 * 0.025 * 3 = 0.3
    assert float(shape.value_at(0.675)) == pytest.approx(hump(3.0), abs=1e-6)
    assert float(shape.deriv_at(0.675)) == pytest.approx(hump_deriv(3.0) / 0.3, abs=1e-3)


def test_default_alpha_is_mean_ratio_when_admissible():
    landmarks = [(40.0, 100.0), (20.0, 50.0), (45.0, 100.0)]
    assert default_alpha(landmarks) == pytest.approx(np.mean([0.4, 0.4, 0.45]))


def test_default_alpha_is_clamped():
    # ratios 0.2 and 0.6: bounds (0.36, 0.36) .. (0.36, 0.84) -> common (0.36, 0.36): empty
    with pytest.raises(MonotonicityViolation):
        default_alpha([(20.0, 100.0), (60.0, 100.0)])
    a = default_alpha([(30.0, 100.0), (60.0, 100.0)])
    lo, hi = 0.36, 0.51
    assert lo < a < hi


def test_registration_of_synthetic_batches(dataset):
    curves = [fit_batch(b) for b in dataset.batches]
    regs = register_curves(curves)
    alpha = regs[0].warp.alpha
    for r in regs:
        assert r.shape.values.size == SHAPE_GRID_POINTS
        # composition identity on the curve grid
        u = r.warp(r.curve.grid)
        assert np.max(np.abs(r.shape.value_at(u) - r.curve.values)) < 1e-10
        # the grid samples alone carry a small resampling error
        assert np.max(np.abs(r.shape.sampled().value_at(u) - r.curve.values)) < 1e-4
        # landmark lands on the common level
        peak_u = r.shape.grid[int(np.argmax(r.shape.values))]
        assert abs(peak_u - alpha) <= r.shape.grid[1]
        assert r.shape.values[-1] < r.shape.values.max()
