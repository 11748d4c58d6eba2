"""Landmark registration of constant-temperature growth curves.

Each curve ``L`` on ``[0, t_pup]`` is split as ``L = S o w`` where ``w`` is the
strictly increasing quadratic with ``w(0) = 0``, ``w(t_max) = alpha`` and
``w(t_pup) = 1``, and ``S`` is the growth shape on standardized time ``[0, 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BoundaryMaximum, InvariantViolation, MonotonicityViolation, OutOfRange
from .smoothing import ConstantTempCurve

SHAPE_GRID_POINTS = 2048


@dataclass(frozen=True)
class WarpingQuadratic:
    """``w(t) = a t + b t^2`` on ``[0, t_pup]``."""

    a: float
    b: float
    t_pup: float
    alpha: float
    t_max: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.a * t + self.b * t * t

    def deriv(self, t):
        return self.a + 2.0 * self.b * np.asarray(t, dtype=float)

    def inverse(self, u):
        return invert_warping(self, u)


def find_landmarks(curve: ConstantTempCurve) -> tuple[float, float]:
    """Time of maximum length and pupation time.

    The maximum is that of the curve's cubic interpolant (the same
    interpolant :meth:`ConstantTempCurve.value_at` uses), taken over its
    stationary points and the grid points, so that the registered shape
    peaks exactly at the landmark level.
    """
    v = curve.values
    i = int(np.argmax(v))
    if i == 0 or i == v.size - 1:
        where = "start" if i == 0 else "end"
        raise BoundaryMaximum(
            f"growth curve at T={curve.temperature_c} C peaks at the {where} of its range; "
            "cannot register a curve without an interior maximum",
            temperature_c=curve.temperature_c)
    spline = CubicSpline(curve.grid, v)
    roots = spline.derivative().roots(extrapolate=False)
    cands = np.concatenate([[curve.grid[i]], roots[(roots > curve.grid[0]) & (roots < curve.t_pup)]])
    t_max = float(cands[int(np.argmax(spline(cands)))])
    return t_max, float(curve.t_pup)


def alpha_bounds(t_max: float, t_pup: float) -> tuple[float, float]:
    """Open interval of landmark levels giving a strictly increasing warp."""
    r = t_max / t_pup
    return r * r, 2.0 * r - r * r


def fit_warping(t_max: float, t_pup: float, alpha: float) -> WarpingQuadratic:
    """Quadratic through (0, 0), (t_max, alpha), (t_pup, 1)."""
    if not (0.0 < t_max < t_pup):
        raise InvariantViolation(f"need 0 < t_max < t_pup, got t_max={t_max}, t_pup={t_pup}")
    if not (0.0 < alpha < 1.0):
        raise InvariantViolation(f"alpha must lie in (0, 1), got {alpha}")
    # a tm + b tm^2 = alpha ; a tp + b tp^2 = 1
    det = t_max * t_pup * t_pup - t_pup * t_max * t_max
    a = (alpha * t_pup * t_pup - t_max * t_max) / det
    b = (t_max - alpha * t_pup) / det
    w = WarpingQuadratic(a=a, b=b, t_pup=t_pup, alpha=alpha, t_max=t_max)
    d0, d1 = float(w.deriv(0.0)), float(w.deriv(t_pup))
    if not (d0 > 0.0 and d1 > 0.0):
        raise MonotonicityViolation(
            f"quadratic warp through t_max={t_max}, t_pup={t_pup}, alpha={alpha} is not "
            f"increasing: w'(0)={d0:.6g}, w'(t_pup)={d1:.6g}")
    return w


_U_TOL = 1e-12


def invert_warping(w: WarpingQuadratic, u):
    """Closed-form inverse on the increasing branch."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < -_U_TOL) or np.any(u_arr > 1.0 + _U_TOL):
        raise OutOfRange("standardized time must lie in [0, 1]")
    # values produced by w itself may overshoot the ends by a rounding error
    u_arr = np.clip(u_arr, 0.0, 1.0)
    # 2u / (a + sqrt(a^2 + 4bu)) avoids cancellation and covers b = 0
    t = 2.0 * u_arr / (w.a + np.sqrt(w.a * w.a + 4.0 * w.b * u_arr))
    t = np.where(u_arr == 1.0, w.t_pup, t)
    return float(t) if t.ndim == 0 else t


@dataclass(frozen=True, eq=False)
class GrowthShape:
    """Registered shape ``S`` and its derivative on a uniform grid over [0, 1].

    The grid samples are what the growth field blends. When the shape was
    computed from a curve and warp (``source``), :meth:`value_at` and
    :meth:`deriv_at` evaluate the composition ``L(w^-1(u))`` directly instead
    of interpolating the samples, so ``S(w(t))`` reproduces the curve exactly.
    """

    temperature_c: float
    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    source: tuple | None = None

    def __post_init__(self):
        for name in ("grid", "values", "derivs"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.derivs))):
            raise InvariantViolation(f"non-finite shape at T={self.temperature_c}")

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.grid, self.values)

    def value_at(self, u):
        if self.source is not None:
            curve, w = self.source
            return curve.value_at(invert_warping(w, u))
        return self._spline(np.clip(u, 0.0, 1.0))

    def deriv_at(self, u):
        if self.source is not None:
            curve, w = self.source
            t = invert_warping(w, u)
            return curve.deriv_at(t) / w.deriv(t)
        return np.interp(u, self.grid, self.derivs)

    def sampled(self) -> "GrowthShape":
        """The same shape represented by its grid samples only."""
        return GrowthShape(self.temperature_c, self.grid, self.values, self.derivs)


def compute_shape(curve: ConstantTempCurve, w: WarpingQuadratic,
                  shape_grid_points: int = SHAPE_GRID_POINTS) -> GrowthShape:
    """``S(u) = L(w^-1(u))`` and ``S'(u) = L'(w^-1(u)) / w'(w^-1(u))``."""
    if not np.isclose(curve.t_pup, w.t_pup, rtol=1e-12, atol=0.0):
        raise InvariantViolation("curve and warp disagree on the pupation time")
    u = np.linspace(0.0, 1.0, shape_grid_points)
    t = invert_warping(w, u)
    values = curve.value_at(t)
    derivs = curve.deriv_at(t) / w.deriv(t)
    return GrowthShape(temperature_c=curve.temperature_c, grid=u, values=values, derivs=derivs,
                       source=(curve, w))


def default_alpha(landmarks: list[tuple[float, float]], margin: float = 0.05) -> float:
    """Mean of ``t_max / t_pup`` clamped into the range where every warp is increasing.

    ``margin`` keeps the level a fraction of the admissible width away from
    the open ends of the range.
    """
    ratios = [tm / tp for tm, tp in landmarks]
    bounds = [alpha_bounds(tm, tp) for tm, tp in landmarks]
    lo = max(b[0] for b in bounds)
    hi = min(b[1] for b in bounds)
    if not lo < hi:
        raise MonotonicityViolation(
            "no common landmark level gives increasing warps for every temperature "
            f"(lower bound {lo:.4g} >= upper bound {hi:.4g})")
    pad = margin * (hi - lo)
    return float(np.clip(np.mean(ratios), lo + pad, hi - pad))


@dataclass(frozen=True, eq=False)
class Registration:
    curve: ConstantTempCurve
    warp: WarpingQuadratic
    shape: GrowthShape


def register_curves(curves: list[ConstantTempCurve], alpha: float | None = None,
                    shape_grid_points: int = SHAPE_GRID_POINTS) -> list[Registration]:
    """Register every curve on a common landmark level."""
    landmarks = [find_landmarks(c) for c in curves]
    if alpha is None:
        alpha = default_alpha(landmarks)
    out = []
    for curve, (tm, tp) in zip(curves, landmarks):
        w = fit_warping(tm, tp, alpha)
        out.append(Registration(curve, w, compute_shape(curve, w, shape_grid_points)))
    return out
