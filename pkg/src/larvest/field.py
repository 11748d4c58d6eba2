"""Growth curves at arbitrary temperature.

Registered shapes and warps from the experimental temperatures are blended
with Nadaraya-Watson weights ``K((T_k - T)/h)`` to give ``S_T`` and ``w_T``;
the growth curve is then ``L_T = S_T o w_T`` with derivative
``L'_T = (S'_T o w_T) w'_T``.

Warps are blended pointwise, which for quadratics through the origin is the
same as blending the coefficients ``(a, b)``; the blended pupation time is
where the blended warp reaches 1.

Below the coldest experimental temperature ``T_1`` the field keeps the shape
at ``T_1`` and slows development linearly to a standstill at the lower
developmental threshold; at or below the threshold growth stops.
"""
from __future__ import annotations

import json
import threading
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.interpolate import CubicSpline

from .data import ExperimentalDataset
from .errors import BoundaryMaximum, EmptyWindow, InvariantViolation, NonMonotoneBlend
from .registration import SHAPE_GRID_POINTS, register_curves
from .smoothing import ConstantTempCurve, SmootherConfig, fit_batch, kernel_weights

FIELD_FORMAT = "larvest.growth_field"
FIELD_VERSION = 1
CURVE_GRID_POINTS = 512


def default_temperature_bandwidth(temperatures) -> float:
    """Twice the largest gap between consecutive experimental temperatures."""
    return 2.0 * float(np.max(np.diff(np.sort(np.asarray(temperatures, dtype=float)))))


def nw_weights(temperatures, T, kernel: str, h: float) -> np.ndarray:
    """Normalized Nadaraya-Watson weights; rows follow ``np.atleast_1d(T)``."""
    temps = np.asarray(temperatures, dtype=float)
    T = np.atleast_1d(np.asarray(T, dtype=float))
    raw = kernel_weights((temps[None, :] - T[:, None]) / h, kernel)
    total = raw.sum(axis=1)
    if np.any(total <= 0.0):
        bad = float(T[np.argmax(total <= 0.0)])
        nearest = float(temps[np.argmin(np.abs(temps - bad))])
        raise EmptyWindow(
            f"no experimental temperature within the {kernel} window (h={h}) of T={bad}; "
            f"nearest is {nearest}")
    return raw / total[:, None]


def smooth_across_temperature(temperatures, functions, T, kernel: str = "gaussian",
                              h: float = 1.0) -> np.ndarray:
    """Kernel-weighted average of functions sampled on one shared grid."""
    functions = np.asarray(functions, dtype=float)
    w = nw_weights(temperatures, T, kernel, h)[0]
    return w @ functions


@dataclass(frozen=True, eq=False)
class FieldStates:
    """Field quantities at a batch of temperatures.

    Rows of ``shapes`` (and the per-row arrays) are indexed through
    ``row_index``, which maps each requested temperature to its row so repeated
    temperatures share one evaluation.
    """

    temperatures: np.ndarray
    row_index: np.ndarray
    shapes: np.ndarray
    a: np.ndarray
    b: np.ndarray
    t_pup: np.ndarray
    peak: np.ndarray
    frozen: np.ndarray
    shape_derivs: np.ndarray | None = None
    a_deriv: np.ndarray | None = None
    b_deriv: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class GrowthField:
    """Registered experimental curves plus the smoothing policy across temperature."""

    temperatures: np.ndarray
    shapes: np.ndarray
    shape_derivs: np.ndarray
    warp_a: np.ndarray
    warp_b: np.ndarray
    warp_t_pup: np.ndarray
    warp_t_max: np.ndarray
    alpha: float
    h_shape: float
    h_warp: float
    h_shape_deriv: float
    h_warp_deriv: float
    kernel: str = "gaussian"
    dev_threshold_c: float = 1.0
    diagnostics: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        for name in ("temperatures", "shapes", "shape_derivs", "warp_a", "warp_b",
                     "warp_t_pup", "warp_t_max"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        K = self.temperatures.size
        if K < 2:
            raise InvariantViolation("a growth field needs at least 2 experimental temperatures")
        if np.any(np.diff(self.temperatures) <= 0):
            raise InvariantViolation("field temperatures must be strictly increasing")
        if self.shapes.shape[0] != K or self.shape_derivs.shape != self.shapes.shape:
            raise InvariantViolation("shape arrays do not match the temperature list")
        if min(self.h_shape, self.h_warp, self.h_shape_deriv, self.h_warp_deriv) <= 0:
            raise InvariantViolation("bandwidths must be positive")
        if not self.dev_threshold_c < self.temperatures[0]:
            raise InvariantViolation("developmental threshold must lie below the coldest temperature")
        object.__setattr__(self, "_cache", {})
        object.__setattr__(self, "_lock", threading.Lock())

    # -- basic accessors -------------------------------------------------

    @property
    def shape_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.shapes.shape[1])

    @property
    def temp_range(self) -> tuple[float, float]:
        return float(self.temperatures[0]), float(self.temperatures[-1])

    @property
    def bandwidths(self) -> dict:
        return {"shape": self.h_shape, "warp": self.h_warp,
                "shape_deriv": self.h_shape_deriv, "warp_deriv": self.h_warp_deriv}

    def weights(self, T, h: float) -> np.ndarray:
        return nw_weights(self.temperatures, T, self.kernel, h)

    # -- vectorized evaluation -------------------------------------------

    def states(self, temps, with_derivs: bool = False) -> FieldStates:
        temps = np.atleast_1d(np.asarray(temps, dtype=float))
        uniq, inv = np.unique(temps, return_inverse=True)
        T1, TK = self.temp_range
        if np.any(uniq > TK):
            warnings.warn(f"extrapolating the growth field above {TK} C (up to {uniq.max():.3g} C)",
                          RuntimeWarning, stacklevel=2)
        thr = self.dev_threshold_c
        frozen = uniq <= thr
        t_eff = np.maximum(uniq, T1)
        scale = np.where(uniq < T1, (uniq - thr) / (T1 - thr), 1.0)
        scale = np.where(frozen, 1.0, scale)

        shapes = self.weights(t_eff, self.h_shape) @ self.shapes
        ww = self.weights(t_eff, self.h_warp)
        a = (ww @ self.warp_a) * scale
        b = (ww @ self.warp_b) * scale * scale
        disc = a * a + 4.0 * b
        if np.any(a <= 0.0) or np.any(disc <= 0.0):
            bad = float(uniq[np.argmax((a <= 0.0) | (disc <= 0.0))])
            raise NonMonotoneBlend(f"blended warp at T={bad} C is not increasing up to 1")
        t_pup = 2.0 / (a + np.sqrt(disc))
        extra = {}
        if with_derivs:
            extra["shape_derivs"] = self.weights(t_eff, self.h_shape_deriv) @ self.shape_derivs
            wd = self.weights(t_eff, self.h_warp_deriv)
            extra["a_deriv"] = (wd @ self.warp_a) * scale
            extra["b_deriv"] = (wd @ self.warp_b) * scale * scale
        return FieldStates(
            temperatures=uniq, row_index=inv.astype(np.int64), shapes=shapes, a=a, b=b,
            t_pup=t_pup, peak=np.argmax(shapes, axis=1).astype(np.int64),
            frozen=frozen.astype(np.uint8), **extra)

    # -- single-temperature curves ---------------------------------------

    def growth_at_temperature(self, T: float, grid_points: int = CURVE_GRID_POINTS,
                              cache: bool = True) -> ConstantTempCurve:
        """Constant-temperature growth curve ``L_T`` and derivative ``L'_T``.

        At or below the developmental threshold the curve is flat at the
        hatchling length.
        """
        key = (float(T), grid_points)
        if cache:
            with self._lock:
                hit = self._cache.get(key)
            if hit is not None:
                return hit
        st = self.states([T], with_derivs=True)
        row = st.shapes[0]
        t_pup = float(st.t_pup[0])
        grid = np.linspace(0.0, t_pup, grid_points)
        if st.frozen[0]:
            values = np.full(grid_points, row[0])
            derivs = np.zeros(grid_points)
        else:
            a, b = float(st.a[0]), float(st.b[0])
            u = np.clip(a * grid + b * grid * grid, 0.0, 1.0)
            u[-1] = 1.0
            values = CubicSpline(self.shape_grid, row)(u)
            w_prime = st.a_deriv[0] + 2.0 * st.b_deriv[0] * grid
            derivs = np.interp(u, self.shape_grid, st.shape_derivs[0]) * w_prime
        curve = ConstantTempCurve(temperature_c=float(T), grid=grid, values=values,
                                  derivs=derivs, t_pup=t_pup)
        if cache:
            with self._lock:
                self._cache[key] = curve
        return curve

    def hatch_length(self, T: float) -> float:
        st = self.states([T])
        return float(st.shapes[0, 0])

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FIELD_FORMAT,
            "version": FIELD_VERSION,
            "kernel": self.kernel,
            "bandwidths": self.bandwidths,
            "dev_threshold_c": self.dev_threshold_c,
            "alpha": self.alpha,
            "temperatures": self.temperatures.tolist(),
            "warps": [
                {"a": a, "b": b, "t_max": tm, "t_pup": tp}
                for a, b, tm, tp in zip(self.warp_a.tolist(), self.warp_b.tolist(),
                                        self.warp_t_max.tolist(), self.warp_t_pup.tolist())
            ],
            "shapes": self.shapes.tolist(),
            "shape_derivs": self.shape_derivs.tolist(),
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "GrowthField":
        if doc.get("format") != FIELD_FORMAT:
            raise InvariantViolation("not a growth-field document")
        if doc.get("version") != FIELD_VERSION:
            raise InvariantViolation(f"unsupported growth-field version {doc.get('version')!r}")
        bw = doc["bandwidths"]
        warps = doc["warps"]
        return cls(
            temperatures=np.array(doc["temperatures"], dtype=float),
            shapes=np.array(doc["shapes"], dtype=float),
            shape_derivs=np.array(doc["shape_derivs"], dtype=float),
            warp_a=np.array([w["a"] for w in warps]),
            warp_b=np.array([w["b"] for w in warps]),
            warp_t_pup=np.array([w["t_pup"] for w in warps]),
            warp_t_max=np.array([w["t_max"] for w in warps]),
            alpha=doc["alpha"],
            h_shape=bw["shape"], h_warp=bw["warp"],
            h_shape_deriv=bw["shape_deriv"], h_warp_deriv=bw["warp_deriv"],
            kernel=doc["kernel"],
            dev_threshold_c=doc["dev_threshold_c"],
            diagnostics=doc.get("diagnostics", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "GrowthField":
        return cls.from_dict(json.loads(text))


def field_from_registrations(registrations, h=None, kernel="gaussian", dev_threshold_c=1.0,
                             h_shape=None, h_warp=None, h_shape_deriv=None, h_warp_deriv=None,
                             diagnostics=None) -> GrowthField:
    temps = np.array([r.curve.temperature_c for r in registrations])
    if h is None:
        h = default_temperature_bandwidth(temps)
    return GrowthField(
        temperatures=temps,
        shapes=np.array([r.shape.values for r in registrations]),
        shape_derivs=np.array([r.shape.derivs for r in registrations]),
        warp_a=np.array([r.warp.a for r in registrations]),
        warp_b=np.array([r.warp.b for r in registrations]),
        warp_t_pup=np.array([r.warp.t_pup for r in registrations]),
        warp_t_max=np.array([r.warp.t_max for r in registrations]),
        alpha=float(registrations[0].warp.alpha),
        h_shape=h_shape or h, h_warp=h_warp or h,
        h_shape_deriv=h_shape_deriv or h, h_warp_deriv=h_warp_deriv or h,
        kernel=kernel,
        dev_threshold_c=dev_threshold_c,
        diagnostics=diagnostics or {},
    )


def fit_growth_field(dataset: ExperimentalDataset, smoother: SmootherConfig | None = None,
                     alpha: float | None = None, h: float | None = None,
                     kernel: str = "gaussian", dev_threshold_c: float = 1.0,
                     shape_grid_points: int = SHAPE_GRID_POINTS,
                     skip_boundary_maximum: bool = False) -> GrowthField:
    """Smooth every batch, register the curves and assemble the field.

    A batch whose curve has no interior maximum raises
    :class:`BoundaryMaximum` unless ``skip_boundary_maximum`` is set, in which
    case it is dropped with a warning.
    """
    curves, skipped = [], []
    for batch in dataset.batches:
        curve = fit_batch(batch, smoother)
        if skip_boundary_maximum:
            i = int(np.argmax(curve.values))
            if i == 0 or i == curve.values.size - 1:
                warnings.warn(f"dropping T={batch.temperature_c} C: growth curve has no interior "
                              "maximum", RuntimeWarning, stacklevel=2)
                skipped.append(batch.temperature_c)
                continue
        curves.append(curve)
    if len(curves) < 2:
        raise BoundaryMaximum("fewer than 2 temperatures left to build a field")
    regs = register_curves(curves, alpha=alpha, shape_grid_points=shape_grid_points)
    temps = [c.temperature_c for c in curves]
    h_used = h if h is not None else default_temperature_bandwidth(temps)
    diagnostics = {
        "landmarks": [{"temperature_c": r.curve.temperature_c, "t_max": r.warp.t_max,
                       "t_pup": r.warp.t_pup, "bandwidth_h_L": r.curve.bandwidth_h_L}
                      for r in regs],
        "skipped_temperatures": skipped,
    }
    return field_from_registrations(regs, h=h_used, kernel=kernel,
                                    dev_threshold_c=dev_threshold_c, diagnostics=diagnostics)
