"""Weighted local linear regression of replicate means against time.

At every evaluation point ``t`` the fit solves

    min_{a,b} sum_j w_j K((t_j - t)/h) (ybar_j - a - b (t_j - t))^2

with ``w_j = N_j / n`` (replicate count over number of time points). The
intercept ``a`` estimates the growth curve and the slope ``b`` its derivative.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .data import TemperatureBatch
from .errors import DegenerateDesign, InvariantViolation, SingularSystem

KERNELS = ("epanechnikov", "gaussian")

# relative determinant below which the local 2x2 system is treated as singular
_DET_RTOL = 1e-12


def kernel_weights(x: np.ndarray, kernel: str) -> np.ndarray:
    """Evaluate a kernel on standardized distances ``x``."""
    if kernel == "epanechnikov":
        return np.where(np.abs(x) < 1.0, 0.75 * (1.0 - x * x), 0.0)
    if kernel == "gaussian":
        return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")


@dataclass(frozen=True)
class SmootherConfig:
    bandwidth_h_L: float | None = None
    kernel: str = "epanechnikov"
    grid_points: int = 512

    def __post_init__(self):
        if self.bandwidth_h_L is not None and not self.bandwidth_h_L > 0:
            raise InvariantViolation("bandwidth must be positive")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.grid_points < 10:
            raise InvariantViolation("at least 10 grid points are required")


@dataclass(frozen=True, eq=False)
class ConstantTempCurve:
    """Growth curve (mm) and its derivative (mm/h) on a uniform grid over [0, t_pup].

    Values between grid points are read off a cubic spline of the samples;
    derivatives are linearly interpolated.
    """

    temperature_c: float
    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    t_pup: float
    bandwidth_h_L: float = float("nan")

    def __post_init__(self):
        for name in ("grid", "values", "derivs"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.grid.size < 10:
            raise InvariantViolation("curve grid needs at least 10 points")
        if not (self.grid.shape == self.values.shape == self.derivs.shape):
            raise InvariantViolation("grid, values and derivs differ in shape")
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.derivs))):
            raise InvariantViolation(f"non-finite curve estimate at T={self.temperature_c}")

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.grid, self.values)

    def value_at(self, t):
        return self._spline(np.clip(t, self.grid[0], self.grid[-1]))

    def deriv_at(self, t):
        return np.interp(t, self.grid, self.derivs)

    @property
    def max_value(self) -> float:
        return float(self.values.max())


def batch_summaries(batch: TemperatureBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-time replicate means and smoother weights ``N_j / n``.

    Returns ``(times, ybar, weights)``.
    """
    counts = batch.counts
    ybar = np.array([np.mean(r) for r in batch.lengths])
    weights = counts / len(batch.times)
    return np.array(batch.times, dtype=float), ybar, weights


def default_bandwidth(times: np.ndarray) -> float:
    """Twice the median spacing of the design times."""
    return 2.0 * float(np.median(np.diff(np.asarray(times, dtype=float))))


def local_linear(times, ybar, weights, eval_points, bandwidth, kernel="epanechnikov"):
    """Local linear value and slope estimates at ``eval_points``.

    Returns ``(values, derivs)``. The 2x2 normal equations are solved in
    closed form from kernel-weighted moments, centred on the weighted mean
    design point for numerical stability.
    """
    times = np.asarray(times, dtype=float)
    ybar = np.asarray(ybar, dtype=float)
    weights = np.asarray(weights, dtype=float)
    ev = np.asarray(eval_points, dtype=float)

    d = (times[None, :] - ev[:, None]) / bandwidth          # (m, n)
    W = weights[None, :] * kernel_weights(d, kernel)
    support = np.count_nonzero(W > 0, axis=1)
    if np.any(support < 2):
        bad = ev[np.argmax(support < 2)]
        raise DegenerateDesign(
            f"fewer than 2 design points in the window at t={bad:.6g} h; increase h_L "
            f"(currently {bandwidth:.6g} h)")

    s0 = W.sum(axis=1)
    dbar = (W * d).sum(axis=1) / s0
    ymean = (W * ybar[None, :]).sum(axis=1) / s0
    dc = d - dbar[:, None]
    sxx = (W * dc * dc).sum(axis=1)
    s2 = (W * d * d).sum(axis=1)
    if np.any(sxx <= _DET_RTOL * s2):
        bad = ev[np.argmax(sxx <= _DET_RTOL * s2)]
        raise SingularSystem(f"collinear local design at t={bad:.6g} h")
    sxy = (W * dc * (ybar[None, :] - ymean[:, None])).sum(axis=1)
    slope = sxy / sxx
    values = ymean - slope * dbar
    return values, slope / bandwidth


def local_linear_fit(summaries, config: SmootherConfig | None = None, eval_grid=None,
                     temperature_c: float = float("nan")) -> ConstantTempCurve:
    """Fit the constant-temperature growth curve from ``batch_summaries`` output.

    The default evaluation grid has ``config.grid_points`` points spanning the
    design, i.e. ``[0, t_pup]`` with ``t_pup`` the last observation time.
    """
    config = config or SmootherConfig()
    times, ybar, weights = (np.asarray(a, dtype=float) for a in summaries)
    if times.size < 2:
        raise DegenerateDesign("at least 2 observation times are required")
    h = config.bandwidth_h_L if config.bandwidth_h_L is not None else default_bandwidth(times)
    if eval_grid is None:
        eval_grid = np.linspace(times[0], times[-1], config.grid_points)
    values, derivs = local_linear(times, ybar, weights, eval_grid, h, config.kernel)
    return ConstantTempCurve(
        temperature_c=temperature_c,
        grid=eval_grid,
        values=values,
        derivs=derivs,
        t_pup=float(eval_grid[-1]),
        bandwidth_h_L=h,
    )


def fit_batch(batch: TemperatureBatch, config: SmootherConfig | None = None) -> ConstantTempCurve:
    return local_linear_fit(batch_summaries(batch), config, temperature_c=batch.temperature_c)
