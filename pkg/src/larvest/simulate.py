"""Robustness studies for the hatching-time estimator.

Three studies, each repeated over many replicates of ``n_lengths`` scene
lengths generated from the field's own expected trajectory plus Gaussian
measurement error:

``const-temp-noise``
    Constant 10 C on an hourly grid over ``[-200, 0]``, hatching at -100 h;
    the estimator sees the hourly temperatures with i.i.d. N(0, sigma_T^2)
    errors added.
``station``
    250 (station, scene) temperature pairs per replicate, bivariate normal
    with mean 15 C, variance 0.5 and correlation rho. The first 62 pairs
    calibrate an ordinary least-squares prediction of scene from station
    temperature; the remaining 188 form the hourly scene profile on
    ``[-187, 0]``. Lengths follow the true scene profile, the estimator sees
    the predicted one.
``varying-temp-noise``
    As ``const-temp-noise`` on the bundled synthetic weather series.

Replicate ``r`` draws from a Philox stream keyed by
``SeedSequence(seed, spawn_key=(study_code, r))``: first the ``n_lengths``
length errors, then the temperature innovations. The same standard normals
are reused for every parameter value (common random numbers), so cells
differ only through the parameter, and results do not depend on the number
of worker threads.
"""
from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .data import CaseObservation, Stage, TemperatureProfile
from .dynamics import reconstruct_growth
from .errors import InvariantViolation, LarvestError
from .field import GrowthField, fit_growth_field
from .inference import estimate
from .synth import bundled_weather, default_family, synth_dataset

STUDIES = ("const-temp-noise", "station", "varying-temp-noise")
_STUDY_CODE = {name: i + 1 for i, name in enumerate(STUDIES)}
N_PAIRS = 250
N_CALIBRATION = N_PAIRS // 4  # a quarter of the pairs calibrate the station, rounded down
STATION_MEAN_C = 15.0
STATION_VAR = 0.5
DEFAULT_FIELD_SEED = 2024


@dataclass(frozen=True)
class StudyConfig:
    """Settings for one study.

    ``params`` are the temperature-error sds (noise studies) or the
    station-scene correlations (``station``). ``t_h`` and ``t_a`` default
    per study; ``length_sd`` is the measurement error of scene lengths (mm).
    """

    study: str
    params: tuple[float, ...] = (0.1, 0.25, 0.75, 1.0)
    replicates: int = 1000
    n_lengths: int = 20
    seed: int = 0
    length_sd: float = 0.05
    t_h: float | None = None
    t_a: float | None = None
    dt: float = 1.0
    step: float = 1.0
    constant_temp_c: float = 10.0

    def __post_init__(self):
        if self.study not in STUDIES:
            raise InvariantViolation(f"unknown study {self.study!r}; choose from {STUDIES}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.replicates < 1 or self.n_lengths < 1:
            raise InvariantViolation("replicates and n_lengths must be >= 1")
        if not self.params:
            raise InvariantViolation("at least one parameter value is required")
        if self.study == "station":
            if any(not -1.0 < p <= 1.0 for p in self.params):
                raise InvariantViolation("correlations must lie in (-1, 1]")
        elif any(p < 0.0 for p in self.params):
            raise InvariantViolation("temperature error sds must be >= 0")
        if self.length_sd < 0.0:
            raise InvariantViolation("length_sd must be >= 0")

    @property
    def param_name(self) -> str:
        return "rho_T" if self.study == "station" else "sigma_T"

    @property
    def planted_t_h(self) -> float:
        if self.t_h is not None:
            return self.t_h
        return {"const-temp-noise": -100.0, "station": -70.0, "varying-temp-noise": -80.0}[self.study]

    @property
    def window_start(self) -> float:
        if self.t_a is not None:
            return self.t_a
        return {"const-temp-noise": -200.0, "station": -float(N_PAIRS - N_CALIBRATION - 1),
                "varying-temp-noise": -400.0}[self.study]


@dataclass
class CellResult:
    param: float
    estimates: np.ndarray  # NaN where estimation failed
    errors: list = dc_field(default_factory=list)

    @property
    def failures(self) -> int:
        return int(np.count_nonzero(np.isnan(self.estimates)))

    def summary(self) -> dict:
        ok = self.estimates[~np.isnan(self.estimates)]
        return {
            "param": self.param,
            "n": int(ok.size),
            "failures": self.failures,
            "mean": float(ok.mean()) if ok.size else None,
            "sd": float(ok.std(ddof=1)) if ok.size > 1 else None,
        }


@dataclass
class StudyResult:
    config: StudyConfig
    cells: list

    def summary(self) -> dict:
        c = self.config
        return {
            "study": c.study,
            "param_name": c.param_name,
            "planted_t_h": c.planted_t_h,
            "replicates": c.replicates,
            "n_lengths": c.n_lengths,
            "length_sd": c.length_sd,
            "seed": c.seed,
            "cells": [cell.summary() for cell in self.cells],
        }

    def cell(self, param: float) -> CellResult:
        for cell in self.cells:
            if cell.param == param:
                return cell
        raise KeyError(param)


def default_thread_count() -> int:
    env = os.environ.get("LARVEST_THREADS")
    if env:
        return max(1, int(env))
    return 1


def default_simulation_field(seed: int = DEFAULT_FIELD_SEED) -> GrowthField:
    """Field fitted to a synthetic experiment from the default family."""
    return fit_growth_field(synth_dataset(default_family(), seed=seed))


def _stream(config: StudyConfig, replicate: int) -> np.random.Generator:
    ss = np.random.SeedSequence(config.seed, spawn_key=(_STUDY_CODE[config.study], replicate))
    return np.random.Generator(np.random.Philox(ss))


def ols_fit(x, y) -> tuple[float, float]:
    """Intercept and slope of the least-squares line of ``y`` on ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise InvariantViolation("calibration temperatures are all equal")
    slope = float(np.sum((x - xm) * (y - ym))) / sxx
    return ym - slope * xm, slope


class _Runner:
    def __init__(self, config: StudyConfig, field: GrowthField, profile: TemperatureProfile | None):
        self.config = config
        self.field = field
        c = config
        t_a = c.window_start
        if c.study == "station":
            self.times = np.arange(t_a, 0.0 + 0.5 * c.dt, 1.0)
            if self.times.size != N_PAIRS - N_CALIBRATION:
                raise InvariantViolation(
                    f"the station study needs a {N_PAIRS - N_CALIBRATION}-hour window")
            self.base_profile = None
            self.truth_length = None
        else:
            if c.study == "const-temp-noise":
                profile = TemperatureProfile.constant(c.constant_temp_c, t_a, 0.0)
            elif profile is None:
                profile = bundled_weather()
            self.times = np.arange(t_a, 0.0 + 0.5, 1.0)
            self.base_profile = profile
            self.base_temps = np.asarray(profile.temperature_at(self.times), dtype=float)
            self.truth_length = self._true_length(profile)

    def _true_length(self, profile: TemperatureProfile) -> float:
        c = self.config
        return reconstruct_growth(self.field, profile, c.planted_t_h, 0.0, c.dt).final_length

    def _estimate(self, lengths, temps) -> float:
        c = self.config
        obs = CaseObservation(tuple(lengths), t_star_h=0.0, t_a_h=c.window_start,
                              stage=Stage.UNKNOWN)
        prof = TemperatureProfile(self.times, temps)
        return estimate(self.field, prof, obs, step=c.step, dt=c.dt).t_hat_h

    def replicate(self, r: int) -> list:
        """Estimates for every parameter value of one replicate (NaN or error on failure)."""
        c = self.config
        rng = _stream(c, r)
        z_len = rng.standard_normal(c.n_lengths)
        out = []
        if c.study == "station":
            z1 = rng.standard_normal(N_PAIRS)
            z2 = rng.standard_normal(N_PAIRS)
            s = math.sqrt(STATION_VAR)
            station = STATION_MEAN_C + s * z1
            for rho in c.params:
                try:
                    scene = STATION_MEAN_C + s * (rho * z1 + math.sqrt(max(1.0 - rho * rho, 0.0)) * z2)
                    a, b = ols_fit(station[:N_CALIBRATION], scene[:N_CALIBRATION])
                    true_prof = TemperatureProfile(self.times, scene[N_CALIBRATION:])
                    L = self._true_length(true_prof)
                    predicted = a + b * station[N_CALIBRATION:]
                    out.append(self._estimate(L + c.length_sd * z_len, predicted))
                except LarvestError as exc:
                    out.append(exc)
        else:
            z_temp = rng.standard_normal(self.times.size)
            lengths = self.truth_length + c.length_sd * z_len
            for sigma in c.params:
                try:
                    out.append(self._estimate(lengths, self.base_temps + sigma * z_temp))
                except LarvestError as exc:
                    out.append(exc)
        return out


def run_study(config: StudyConfig, field: GrowthField | None = None,
              profile: TemperatureProfile | None = None, threads: int | None = None
              ) -> StudyResult:
    """Run every replicate of ``config``; failures are recorded, not raised."""
    field = field if field is not None else default_simulation_field()
    runner = _Runner(config, field, profile)
    threads = default_thread_count() if threads is None else max(1, int(threads))
    reps = range(config.replicates)
    if threads == 1:
        rows = [runner.replicate(r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(runner.replicate, reps))
    cells = []
    for k, p in enumerate(config.params):
        vals = [row[k] for row in rows]
        est = np.array([v if isinstance(v, float) else math.nan for v in vals])
        errs = [(r, f"{type(v).__name__}: {v}") for r, v in enumerate(vals)
                if not isinstance(v, float)]
        cells.append(CellResult(param=p, estimates=est, errors=errs))
    return StudyResult(config=config, cells=cells)


def run_const_temp_noise(config: StudyConfig, field: GrowthField | None = None,
                         threads: int | None = None) -> StudyResult:
    if config.study != "const-temp-noise":
        raise InvariantViolation("config is not a constant-temperature study")
    return run_study(config, field, threads=threads)


def run_station_correlation(config: StudyConfig, field: GrowthField | None = None,
                            threads: int | None = None) -> StudyResult:
    if config.study != "station":
        raise InvariantViolation("config is not a station-correlation study")
    return run_study(config, field, threads=threads)


def run_varying_temp_noise(config: StudyConfig, field: GrowthField | None = None,
                           profile: TemperatureProfile | None = None,
                           threads: int | None = None) -> StudyResult:
    if config.study != "varying-temp-noise":
        raise InvariantViolation("config is not a varying-temperature study")
    return run_study(config, field, profile=profile, threads=threads)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def estimates_csv(result: StudyResult) -> str:
    buf = io.StringIO()
    buf.write("study,param,replicate,t_hat\n")
    for cell in result.cells:
        for r, t in enumerate(cell.estimates.tolist()):
            buf.write(f"{result.config.study},{cell.param!r},{r},{'' if math.isnan(t) else repr(t)}\n")
    return buf.getvalue()


def histogram_rows(result: StudyResult, bin_width: float | None = None) -> list:
    """``(param, bin_lo, bin_hi, count)`` rows; bins are centred on the candidate grid."""
    width = bin_width or result.config.step
    rows = []
    for cell in result.cells:
        ok = cell.estimates[~np.isnan(cell.estimates)]
        if ok.size == 0:
            continue
        lo = math.floor(ok.min() / width) * width - 0.5 * width
        n_bins = int(math.ceil((ok.max() - lo) / width + 0.5))
        edges = lo + width * np.arange(n_bins + 1)
        counts, _ = np.histogram(ok, bins=edges)
        rows += [(cell.param, float(edges[i]), float(edges[i + 1]), int(counts[i]))
                 for i in range(n_bins)]
    return rows


def histogram_csv(result: StudyResult, bin_width: float | None = None) -> str:
    buf = io.StringIO()
    buf.write("study,param,bin_lo,bin_hi,count\n")
    for p, lo, hi, n in histogram_rows(result, bin_width):
        buf.write(f"{result.config.study},{p!r},{lo!r},{hi!r},{n}\n")
    return buf.getvalue()


def summary_json(result: StudyResult) -> str:
    return json.dumps(result.summary(), indent=2, sort_keys=True) + "\n"
