"""Expected growth under a varying temperature profile.

Starting from the hatchling length at ``t_h`` the length is advanced by
forward Euler steps

    L(t_{l+1}) = L(t_l) + (t_{l+1} - t_l) * L'_T(u),   u = L_T^{-1}(L(t_l)),

where ``T = T(t_l)`` and the inverse is taken on the increasing (feeding) or
decreasing (post-feeding) branch of the constant-temperature curve ``L_T``.
The larva switches to post-feeding once its length reaches the peak of the
current curve and pupates once it shrinks to the curve's end value.

The heavy loop lives in :mod:`larvest.kernels` (compiled, with a pure-Python
fallback). The curve ``L_T = S_T o w_T`` is never materialized on a time
grid: inverting ``L_T`` at length ``y`` is the same as inverting the shape
``S_T`` at ``y`` to get ``u`` and mapping back through the warp, and the
growth rate is ``dS/du * w'_T``, with ``w'_T = sqrt(a^2 + 4 b u)`` at the
time where ``w_T`` reaches ``u``.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import TemperatureProfile
from .errors import BadTimeOrder, BranchOutOfRange, InvariantViolation, ProfileCoverageGap
from .field import GrowthField
from .smoothing import ConstantTempCurve

RATE_MODES = {"shape": 0, "smoothed": 1}


class Phase(enum.IntEnum):
    FEEDING = 0
    POSTFEEDING = 1
    PUPATED = 2

    @property
    def label(self) -> str:
        return self.name.lower()


# ---------------------------------------------------------------------------
# Inversion of a constant-temperature curve
# ---------------------------------------------------------------------------

def branch_limits(curve: ConstantTempCurve, phase) -> tuple[float, float]:
    """Length range covered by the feeding or post-feeding branch of ``curve``."""
    v = curve.values
    p = int(np.argmax(v))
    if Phase(phase) == Phase.FEEDING:
        return float(v[0]), float(v[p])
    return float(v[p:].min()), float(v[p])


def invert_length(curve: ConstantTempCurve, length: float, phase) -> float:
    """Time on ``curve`` at which it attains ``length`` on the requested branch.

    The feeding branch runs from the start of the curve to its maximum, the
    post-feeding branch from the maximum to the end. The curve is treated as
    piecewise linear between grid points.
    """
    phase = Phase(phase)
    if phase == Phase.PUPATED:
        raise InvariantViolation("a pupated larva has no position on the growth curve")
    lo_len, hi_len = branch_limits(curve, phase)
    if not (lo_len <= length <= hi_len):
        raise BranchOutOfRange(
            f"length {length} mm outside the {phase.label} branch [{lo_len}, {hi_len}] mm "
            f"of the curve at T={curve.temperature_c} C", lower=lo_len, upper=hi_len)
    v, t = curve.values, curve.grid
    p = int(np.argmax(v))
    if phase == Phase.FEEDING:
        lo, hi = 0, p
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if v[mid] <= length:
                lo = mid
            else:
                hi = mid
    else:
        lo, hi = p, v.size - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if v[mid] >= length:
                lo = mid
            else:
                hi = mid
    if hi == lo:  # degenerate branch of a single point
        return float(t[lo])
    dv = v[hi] - v[lo]
    frac = 0.0 if dv == 0.0 else (length - v[lo]) / dv
    return float(t[lo] + min(max(frac, 0.0), 1.0) * (t[hi] - t[lo]))


# ---------------------------------------------------------------------------
# Time lattices
# ---------------------------------------------------------------------------

def time_lattice(t_start: float, t_end: float, dt: float) -> np.ndarray:
    """Grid ``t_start, ..., t_end`` anchored at ``t_end`` with spacing ``dt``.

    Points are ``t_end - k dt``; when the span is not a whole number of steps
    the first step is the short one. Anchoring at the end means trajectories
    that start at different lattice points visit identical times, which the
    hatching-time search relies on.
    """
    if not dt > 0:
        raise InvariantViolation(f"time step must be positive, got {dt}")
    if not t_start < t_end:
        raise BadTimeOrder(f"start time {t_start} must precede end time {t_end}")
    ratio = (t_end - t_start) / dt
    n = int(round(ratio))
    if abs(ratio - n) > 1e-9 * max(1.0, ratio):
        n = int(math.ceil(ratio))
    grid = t_end - dt * np.arange(n, -1, -1, dtype=float)
    grid[0] = t_start
    grid[-1] = t_end
    return grid


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VaryingTempCurve:
    """Euler trajectory; lengths after pupation are NaN."""

    grid: np.ndarray
    lengths: np.ndarray
    phase: np.ndarray
    hatch_length: float

    @property
    def last_index(self) -> int:
        return int(np.flatnonzero(np.isfinite(self.lengths))[-1])

    @property
    def final_length(self) -> float:
        return float(self.lengths[self.last_index])

    @property
    def final_phase(self) -> Phase:
        return Phase(int(self.phase[self.last_index]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time_h,length_mm,phase\n")
        for i in range(self.last_index + 1):
            buf.write(f"{float(self.grid[i])!r},{float(self.lengths[i])!r},"
                      f"{Phase(int(self.phase[i])).label}\n")
        return buf.getvalue()


def kernel_inputs(field: GrowthField, temps, rate: str = "shape"):
    """Field states at ``temps`` packed as arguments for the Euler kernel.

    Returns ``(args, rows)`` where ``args`` is the tuple of leading kernel
    arguments and ``rows`` maps every entry of ``temps`` to its state row.
    """
    if rate not in RATE_MODES:
        raise ValueError(f"unknown rate mode {rate!r}; choose from {sorted(RATE_MODES)}")
    mode = RATE_MODES[rate]
    st = field.states(temps, with_derivs=mode == 1)
    shapes = np.ascontiguousarray(st.shapes)
    if mode == 1:
        dshapes = np.ascontiguousarray(st.shape_derivs)
        ad, bd = np.ascontiguousarray(st.a_deriv), np.ascontiguousarray(st.b_deriv)
    else:
        dshapes, ad, bd = shapes, st.a, st.b
    args = (shapes, np.ascontiguousarray(st.a), np.ascontiguousarray(st.b),
            np.ascontiguousarray(st.peak, dtype=np.int64),
            np.ascontiguousarray(st.frozen, dtype=np.uint8), dshapes, ad, bd, mode)
    return args, np.ascontiguousarray(st.row_index, dtype=np.int64)


def _profile_temperatures(profile: TemperatureProfile, grid: np.ndarray) -> np.ndarray:
    if not profile.covers(float(grid[0]), float(grid[-1])):
        lo, hi = profile.span
        raise ProfileCoverageGap(
            f"temperature profile spans [{lo}, {hi}] h but the reconstruction needs "
            f"[{grid[0]}, {grid[-1]}] h")
    return np.asarray(profile.temperature_at(grid), dtype=float)


def reconstruct_growth(field: GrowthField, profile: TemperatureProfile, t_h: float,
                       t_star: float, dt: float = 1.0, rate: str = "shape",
                       backend: str | None = None) -> VaryingTempCurve:
    """Euler reconstruction of the expected length from hatching ``t_h`` to ``t_star``.

    Parameters
    ----------
    field : GrowthField
        Growth curves at arbitrary temperature.
    profile : TemperatureProfile
        Must cover ``[t_h, t_star]``.
    dt : float
        Euler step in hours.
    rate : {"shape", "smoothed"}
        ``"shape"`` differentiates the blended shape itself (the default);
        ``"smoothed"`` uses the separately smoothed shape and warp
        derivatives, falling back to the shape slope where their sign
        contradicts the phase.
    backend : {"cython", "python"}, optional
        Force a kernel implementation.
    """
    grid = time_lattice(t_h, t_star, dt)
    temps = _profile_temperatures(profile, grid)
    args, rows = kernel_inputs(field, temps, rate)
    impl = kernels.get_backend(backend)
    lengths, phase, _ = impl.trajectory(*args, rows, np.diff(grid))
    return VaryingTempCurve(grid=grid, lengths=lengths, phase=phase,
                            hatch_length=float(args[0][rows[0], 0]))
