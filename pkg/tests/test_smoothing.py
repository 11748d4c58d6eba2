import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from larvest.data import TemperatureBatch
from larvest.errors import DegenerateDesign, InvariantViolation, SingularSystem
from larvest.smoothing import (SmootherConfig, batch_summaries, default_bandwidth,
                               kernel_weights, local_linear, local_linear_fit)


def wls_oracle(times, ybar, weights, t, h, kernel):
    """Per-point weighted least squares by a direct solve of the normal equations."""
    w = weights * kernel_weights((times - t) / h, kernel)
    X = np.column_stack([np.ones_like(times), times - t])
    A = X.T @ (w[:, None] * X)
    rhs = X.T @ (w * ybar)
    return np.linalg.solve(A, rhs)


def test_batch_summaries_example():
    batch = TemperatureBatch(20.0, (0.0, 24.0), ((2.0, 4.0), (5.0, 5.0, 6.0, 4.0)))
    times, ybar, w = batch_summaries(batch)
    assert list(times) == [0.0, 24.0]
    assert list(ybar) == [3.0, 5.0]
    assert list(w) == [1.0, 2.0]


def test_batch_summaries_single_time():
    batch = TemperatureBatch(20.0, (0.0,), ((2.0, 4.0, 3.0),))
    _, ybar, w = batch_summaries(batch)
    assert list(ybar) == [3.0] and list(w) == [3.0]


def test_default_bandwidth_is_twice_median_gap():
    assert default_bandwidth([0, 1, 2, 4, 8]) == 3.0


def test_constant_reproduction():
    t = np.linspace(0, 10, 30)
    curve = local_linear_fit((t, np.full(30, 5.0), np.ones(30)))
    assert np.allclose(curve.values, 5.0, atol=1e-12)
    assert np.allclose(curve.derivs, 0.0, atol=1e-12)
    assert curve.grid.size == 512 and curve.t_pup == 10.0


@pytest.mark.parametrize("kernel", ["epanechnikov", "gaussian"])
def test_affine_reproduction(kernel):
    t = np.linspace(0, 10, 25)
    w = np.random.default_rng(1).uniform(0.5, 3, 25)
    curve = local_linear_fit((t, 2 * t + 1, w), SmootherConfig(bandwidth_h_L=1.3, kernel=kernel))
    assert np.max(np.abs(curve.values - (2 * curve.grid + 1))) < 1e-10
    assert np.max(np.abs(curve.derivs - 2)) < 1e-10


def test_quadratic_matches_wls_oracle():
    t = np.linspace(0, 1, 200)
    y = t * t
    w = np.ones_like(t)
    ev = np.linspace(0, 1, 101)
    values, derivs = local_linear(t, y, w, ev, 0.2, "epanechnikov")
    oracle = np.array([wls_oracle(t, y, w, x, 0.2, "epanechnikov") for x in ev])
    assert np.max(np.abs(values - oracle[:, 0])) < 1e-12
    assert np.max(np.abs(derivs - oracle[:, 1])) < 1e-10
    # value bias is h^2 mu_2 f''/2 = 0.008 in the interior; the slope of a
    # quadratic is recovered almost exactly once the window is symmetric
    assert np.max(np.abs(values - ev ** 2)) < 0.01
    inner = (ev >= 0.2) & (ev <= 0.8)
    assert np.max(np.abs(derivs[inner] - 2 * ev[inner])) < 1e-3


@settings(max_examples=40, deadline=None)
@given(c=st.floats(-5, 5), d=st.floats(-5, 5), seed=st.integers(0, 2 ** 16))
def test_linearity_in_responses(c, d, seed):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0, 10, 20))
    t[0] = 0.0
    y = rng.normal(5, 2, 20)
    w = rng.uniform(0.2, 2, 20)
    ev = np.linspace(0, t[-1], 50)
    v0, d0 = local_linear(t, y, w, ev, 3.0, "gaussian")
    v1, d1 = local_linear(t, c * y + d, w, ev, 3.0, "gaussian")
    scale = 1 + abs(c) * np.max(np.abs(v0)) + abs(d)
    assert np.max(np.abs(v1 - (c * v0 + d))) < 1e-10 * scale
    assert np.max(np.abs(d1 - c * d0)) < 1e-10 * scale


def test_reflection_symmetry():
    rng = np.random.default_rng(4)
    t = np.sort(rng.uniform(0, 10, 30))
    y = np.sin(t) + rng.normal(0, 0.1, 30)
    w = rng.uniform(0.5, 2, 30)
    ev = np.linspace(t[0], t[-1], 64)
    mid = 0.5 * (t[0] + t[-1])
    v, d = local_linear(t, y, w, ev, 1.5, "epanechnikov")
    vr, dr = local_linear(2 * mid - t[::-1], y[::-1], w[::-1], 2 * mid - ev[::-1], 1.5,
                          "epanechnikov")
    assert np.allclose(vr[::-1], v, atol=1e-10)
    assert np.allclose(dr[::-1], -d, atol=1e-10)


def test_degenerate_window_reports_location():
    t = np.array([0.0, 1.0, 10.0])
    with pytest.raises(DegenerateDesign, match="increase h_L"):
        local_linear(t, t, np.ones(3), np.array([5.0]), 1.0, "epanechnikov")


def test_singular_design():
    t = np.array([0.0, 1e-9, 5.0])
    with pytest.raises(SingularSystem):
        local_linear(t, t, np.ones(3), np.array([0.5]), 0.6, "epanechnikov")


def test_config_validation():
    with pytest.raises(InvariantViolation):
        SmootherConfig(bandwidth_h_L=0)
    with pytest.raises(ValueError):
        SmootherConfig(kernel="box")


def test_sup_error_shrinks_with_sample_size():
    """Uniform error decreases as the design densifies (h ~ n^(-1/5))."""
    def truth(t):
        return 3 + 2 * np.sin(2 * np.pi * t)

    ev = np.linspace(0, 1, 256)
    means = []
    for n in (50, 100, 200, 400):
        t = np.linspace(0, 1, n)
        h = 0.3 * (n / 50) ** -0.2
        errs = []
        for seed in range(20):
            y = truth(t) + np.random.default_rng(seed).normal(0, 0.3, n)
            v, _ = local_linear(t, y, np.ones(n), ev, h, "epanechnikov")
            errs.append(np.max(np.abs(v - truth(ev))))
        means.append(np.mean(errs))
    assert all(b <= a for a, b in zip(means, means[1:])), means
