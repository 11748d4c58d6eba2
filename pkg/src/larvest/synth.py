"""Synthetic growth family with known truth, and data generators.

Development is driven by degree-hours ``D = (T - T0) t``. In degree-hours
every curve is the same:

* linear rise from ``hatch_len`` with slope ``rate_coeff`` (mm per
  degree-hour) until ``(1 - f) A`` of the amplitude ``A = max_len - hatch_len``
  has been gained (``f = saturation_frac``);
* quadratic saturation over ``D_s = 2 f A / c`` into ``max_len`` (the slope
  falls linearly from ``c`` to 0);
* the same parabola continued for ``D_s / 2`` past the peak, where the slope
  reaches ``-c / 2``;
* linear decline with slope ``-c / 2`` down to ``shrink_frac * max_len``,
  reached at pupation.

Hotter curves are therefore time-compressed copies of colder ones
(timing ``∝ 1 / (T - T0)``), and the growth rate at constant length is
proportional to ``T - T0``.

Random draws use numpy's counter-based Philox generator. The stream for
temperature index ``k`` and time index ``j`` is keyed by
``SeedSequence(seed, spawn_key=(k, j))``; replicate ``l`` is the ``l``-th
standard normal of that stream, so a design with more replicates extends
(rather than reshuffles) a design with fewer.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .data import ExperimentalDataset, TemperatureBatch, TemperatureProfile
from .errors import BelowThreshold, InvariantViolation
from .smoothing import ConstantTempCurve

DEFAULT_TEMPERATURES = tuple(float(t) for t in range(6, 31, 3))
# smallest length the generator will emit; noise can otherwise push the
# hatchling length below zero for very noisy designs
MIN_LENGTH_MM = 0.01


@dataclass(frozen=True)
class SynthFamily:
    rate_coeff: float = 0.01
    base_temp_c: float = 2.0
    max_len_mm: float = 16.0
    hatch_len_mm: float = 2.0
    shrink_frac: float = 0.8
    noise_sd_mm: float = 0.2
    saturation_frac: float = 0.25

    def __post_init__(self):
        if not self.rate_coeff > 0:
            raise InvariantViolation("rate_coeff must be positive")
        if not (0 < self.hatch_len_mm < self.shrink_frac * self.max_len_mm < self.max_len_mm):
            raise InvariantViolation("need 0 < hatch_len < shrink_frac * max_len < max_len")
        if not (0 < self.saturation_frac < 1):
            raise InvariantViolation("saturation_frac must lie in (0, 1)")
        if not self.noise_sd_mm >= 0:
            raise InvariantViolation("noise_sd_mm must be non-negative")
        if not self._decline > self._overshoot:
            raise InvariantViolation(
                "pupation length must lie below the end of the post-peak parabola; "
                "lower shrink_frac or saturation_frac")

    # -- degree-hour landmarks -------------------------------------------

    @property
    def amplitude(self) -> float:
        return self.max_len_mm - self.hatch_len_mm

    @property
    def _sat_width(self) -> float:
        return 2.0 * self.saturation_frac * self.amplitude / self.rate_coeff

    @property
    def _overshoot(self) -> float:
        # length lost on the parabola between the peak and slope -c/2
        return self.saturation_frac * self.amplitude / 4.0

    @property
    def _decline(self) -> float:
        return self.max_len_mm * (1.0 - self.shrink_frac)

    @property
    def dd_linear_end(self) -> float:
        return (1.0 - self.saturation_frac) * self.amplitude / self.rate_coeff

    @property
    def dd_max(self) -> float:
        return self.dd_linear_end + self._sat_width

    @property
    def dd_pupation(self) -> float:
        return (self.dd_max + 0.5 * self._sat_width
                + 2.0 * (self._decline - self._overshoot) / self.rate_coeff)

    def t_max(self, T: float) -> float:
        return self.dd_max / self._excess(T)

    def t_pup(self, T: float) -> float:
        return self.dd_pupation / self._excess(T)

    def _excess(self, T: float) -> float:
        if not T > self.base_temp_c:
            raise BelowThreshold(f"T={T} C is not above the base temperature {self.base_temp_c} C")
        return T - self.base_temp_c

    # -- curve in degree-hours -------------------------------------------

    def length_dd(self, D):
        """Length (mm) after ``D`` degree-hours; constant outside ``[0, D_pup]``."""
        D = np.clip(np.asarray(D, dtype=float), 0.0, self.dd_pupation)
        c, d1, ds = self.rate_coeff, self.dd_linear_end, self._sat_width
        x = D - d1
        rise = self.hatch_len_mm + c * np.minimum(D, d1)
        quad_end = self.dd_max + 0.5 * ds
        xq = np.minimum(x, quad_end - d1)
        para = c * xq - c * xq * xq / (2.0 * ds)
        tail = -0.5 * c * np.maximum(D - quad_end, 0.0)
        return np.where(D <= d1, rise, rise + para + tail)

    def rate_dd(self, D):
        """Derivative of :meth:`length_dd` in mm per degree-hour."""
        D = np.asarray(D, dtype=float)
        c, d1, ds = self.rate_coeff, self.dd_linear_end, self._sat_width
        quad_end = self.dd_max + 0.5 * ds
        out = np.where(D <= d1, c, c * (1.0 - (D - d1) / ds))
        return np.where(D > quad_end, -0.5 * c, out)

    def length(self, T: float, t):
        return self.length_dd(self._excess(T) * np.asarray(t, dtype=float))

    def rate(self, T: float, t):
        e = self._excess(T)
        return e * self.rate_dd(e * np.asarray(t, dtype=float))


def default_family(**overrides) -> SynthFamily:
    return SynthFamily(**overrides)


def synth_truth_curve(family: SynthFamily, T: float, grid_points: int = 512) -> ConstantTempCurve:
    """Exact growth curve at constant temperature ``T`` on ``[0, t_pup]``."""
    t_pup = family.t_pup(T)
    grid = np.linspace(0.0, t_pup, grid_points)
    return ConstantTempCurve(temperature_c=float(T), grid=grid, values=family.length(T, grid),
                             derivs=family.rate(T, grid), t_pup=t_pup)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def design_times(family: SynthFamily, T: float, n_times: int) -> np.ndarray:
    """``n_times`` equispaced observation times from hatching to pupation."""
    if n_times < 2:
        raise InvariantViolation("at least two observation times are needed")
    return np.linspace(0.0, family.t_pup(T), n_times)


def synth_dataset(family: SynthFamily, temps=DEFAULT_TEMPERATURES, times_per_temp: int = 21,
                  replicates: int = 5, seed: int = 0) -> ExperimentalDataset:
    """Noisy replicate lengths around the truth at each design point.

    Parameters
    ----------
    temps : sequence of float
        Experimental temperatures (sorted on output).
    times_per_temp : int
        Number of equispaced observation times on ``[0, t_pup(T)]``.
    replicates : int
        Larvae measured per time point.
    seed : int
        64-bit seed; see the module docstring for the stream layout.
    """
    if replicates < 1:
        raise InvariantViolation("replicates must be >= 1")
    batches = []
    for k, T in enumerate(temps):
        times = design_times(family, T, times_per_temp)
        truth = family.length(T, times)
        rows = []
        for j, mu in enumerate(truth):
            eps = _stream(seed, k, j).standard_normal(replicates)
            y = np.maximum(mu + family.noise_sd_mm * eps, MIN_LENGTH_MM)
            rows.append(tuple(y.tolist()))
        batches.append(TemperatureBatch(temperature_c=float(T), times=tuple(times.tolist()),
                                        lengths=tuple(rows)))
    batches.sort(key=lambda b: b.temperature_c)
    return ExperimentalDataset(tuple(batches))


# ---------------------------------------------------------------------------
# Synthetic weather
# ---------------------------------------------------------------------------

WEATHER_SEED = 20240611


def synthetic_weather(hours: int = 400, mean_c: float = 14.0, amplitude_c: float = 5.0,
                      ar_coeff: float = 0.9, ar_sd_c: float = 0.5,
                      seed: int = WEATHER_SEED) -> TemperatureProfile:
    """Hourly profile on ``[-hours, 0]``: daily cycle plus AR(1) weather noise.

    The daily minimum falls at 05:00 and the maximum at 17:00 if ``t = 0`` is
    taken as midnight.
    """
    t = np.arange(-hours, 1, dtype=float)
    rng = _stream(seed, 0)
    eps = rng.standard_normal(t.size)
    ar = np.empty(t.size)
    ar[0] = eps[0] * ar_sd_c / math.sqrt(1.0 - ar_coeff * ar_coeff)
    for i in range(1, t.size):
        ar[i] = ar_coeff * ar[i - 1] + ar_sd_c * eps[i]
    diurnal = -amplitude_c * np.cos(2.0 * np.pi * (t - 5.0) / 24.0)
    temps = np.round(mean_c + diurnal + ar, 2)
    return TemperatureProfile(times=t, temps=temps)


def bundled_weather() -> TemperatureProfile:
    """The synthetic weather series shipped with the package."""
    from importlib.resources import files

    from .data import parse_temperature_csv

    text = files("larvest").joinpath("data/synthetic_weather.csv").read_text()
    return parse_temperature_csv(io.StringIO(text))
