"""Domain types and CSV ingestion for experimental data, temperature series
and scene observations.

Conventions: lengths in millimetres, temperatures in degrees Celsius, times in
hours. Experimental times count hours after hatching (first time is 0). Scene
times use a relative clock with the collection time at 0 and the past negative.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .errors import (
    BadTimeOrder,
    DuplicateHeaderMismatch,
    EmptyDataset,
    InvariantViolation,
    MalformedRow,
    NonMonotoneTime,
    ProfileCoverageGap,
    TooFewSamples,
)

EXPERIMENT_HEADER = ("temperature_c", "time_h", "length_mm")
PROFILE_HEADER = ("time_h", "temp_c")
LENGTHS_HEADER = ("length_mm",)


class Stage(str, enum.Enum):
    """Developmental stage reported for the larvae collected at the scene."""

    FEEDING = "feeding"
    POSTFEEDING = "postfeeding"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, text: str) -> "Stage":
        key = text.strip().lower().replace("-", "").replace("_", "")
        for stage in cls:
            if stage.value == key:
                return stage
        raise ValueError(f"unknown stage {text!r}; expected feeding, postfeeding or unknown")


# ---------------------------------------------------------------------------
# Experimental data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TemperatureBatch:
    """All measurements taken at one constant temperature.

    ``lengths[j]`` holds the replicate lengths measured at ``times[j]``,
    stored in ascending order (replicates are exchangeable, so this is the
    canonical form).
    """

    temperature_c: float
    times: tuple[float, ...]
    lengths: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "lengths",
                           tuple(tuple(sorted(float(y) for y in reps)) for reps in self.lengths))
        if len(self.times) != len(self.lengths):
            raise InvariantViolation("times and lengths differ in size")
        if not self.times:
            raise InvariantViolation(f"batch at {self.temperature_c} C has no observations")
        if self.times[0] != 0.0:
            raise InvariantViolation(
                f"batch at {self.temperature_c} C starts at t={self.times[0]} h; "
                "the first observation must be at hatching (t=0)")
        for t0, t1 in zip(self.times, self.times[1:]):
            if not t1 > t0:
                raise InvariantViolation(
                    f"batch at {self.temperature_c} C: times not strictly increasing ({t0}, {t1})")
        for t, reps in zip(self.times, self.lengths):
            if not reps:
                raise InvariantViolation(f"no replicate at T={self.temperature_c}, t={t}")
            if any(not (y > 0.0) for y in reps):
                raise InvariantViolation(f"non-positive length at T={self.temperature_c}, t={t}")

    @property
    def counts(self) -> np.ndarray:
        return np.array([len(r) for r in self.lengths], dtype=int)

    @property
    def t_pup(self) -> float:
        return self.times[-1]


@dataclass(frozen=True)
class ExperimentalDataset:
    batches: tuple[TemperatureBatch, ...]

    def __post_init__(self):
        if not self.batches:
            raise EmptyDataset("dataset has no temperature batches")
        temps = [b.temperature_c for b in self.batches]
        for a, b in zip(temps, temps[1:]):
            if not b > a:
                raise InvariantViolation("batch temperatures must be strictly increasing")

    @property
    def temperatures(self) -> np.ndarray:
        return np.array([b.temperature_c for b in self.batches])

    def __len__(self):
        return len(self.batches)


def _read_rows(stream: TextIO | str, header: tuple[str, ...]) -> list[tuple[int, list[float]]]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    got_header = None
    rows = []
    for lineno, raw in enumerate(reader, start=1):
        if not raw or all(not c.strip() for c in raw):
            continue
        if got_header is None:
            got_header = tuple(c.strip() for c in raw)
            if got_header != header:
                raise DuplicateHeaderMismatch(
                    f"expected header {','.join(header)!r}, got {','.join(got_header)!r}")
            continue
        if len(raw) != len(header):
            raise MalformedRow(f"line {lineno}: expected {len(header)} fields, got {len(raw)}")
        try:
            values = [float(c) for c in raw]
        except ValueError:
            raise MalformedRow(f"line {lineno}: non-numeric field in {raw!r}") from None
        if not all(math.isfinite(v) for v in values):
            raise MalformedRow(f"line {lineno}: non-finite value in {raw!r}")
        rows.append((lineno, values))
    if got_header is None:
        raise DuplicateHeaderMismatch("missing header row")
    return rows


def parse_experimental_csv(stream: TextIO | str) -> ExperimentalDataset:
    """Read ``temperature_c,time_h,length_mm`` rows (one larva per row).

    Rows are grouped by temperature and time; the result does not depend on
    row order.
    """
    rows = _read_rows(stream, EXPERIMENT_HEADER)
    if not rows:
        raise EmptyDataset("no data rows")
    groups: dict[float, dict[float, list[float]]] = defaultdict(lambda: defaultdict(list))
    for lineno, (temp, time, length) in rows:
        if time < 0:
            raise InvariantViolation(f"line {lineno}: negative time after hatching")
        groups[temp][time].append(length)
    batches = []
    for temp in sorted(groups):
        by_time = groups[temp]
        times = tuple(sorted(by_time))
        batches.append(TemperatureBatch(
            temperature_c=temp,
            times=times,
            lengths=tuple(tuple(by_time[t]) for t in times),
        ))
    return ExperimentalDataset(tuple(batches))


def format_experimental_csv(dataset: ExperimentalDataset) -> str:
    out = io.StringIO()
    out.write(",".join(EXPERIMENT_HEADER) + "\n")
    for batch in dataset.batches:
        for t, reps in zip(batch.times, batch.lengths):
            for y in reps:
                out.write(f"{batch.temperature_c!r},{t!r},{y!r}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Temperature profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TemperatureProfile:
    """Temperature series on the scene clock, linearly interpolated between samples."""

    times: np.ndarray
    temps: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        temps = np.array(self.temps, dtype=float)
        if times.ndim != 1 or times.shape != temps.shape:
            raise InvariantViolation("times and temperatures must be 1-d and of equal length")
        if times.size < 2:
            raise TooFewSamples(f"profile needs at least 2 samples, got {times.size}")
        if np.any(np.diff(times) <= 0):
            raise NonMonotoneTime("profile times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(temps))):
            raise InvariantViolation("non-finite profile value")
        times.flags.writeable = False
        temps.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "temps", temps)

    @classmethod
    def constant(cls, temp_c: float, start: float, end: float) -> "TemperatureProfile":
        return cls(np.array([start, end]), np.array([temp_c, temp_c]))

    @property
    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def covers(self, lo: float, hi: float) -> bool:
        return self.times[0] <= lo and hi <= self.times[-1]

    def temperature_at(self, t) -> np.ndarray | float:
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.times[0]) or np.any(t_arr > self.times[-1]):
            raise ProfileCoverageGap(
                f"temperature requested outside profile span [{self.times[0]}, {self.times[-1]}]")
        out = np.interp(t_arr, self.times, self.temps)
        return float(out) if out.ndim == 0 else out

    def __eq__(self, other):
        if not isinstance(other, TemperatureProfile):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.temps, other.temps)

    __hash__ = None


def parse_temperature_csv(stream: TextIO | str) -> TemperatureProfile:
    """Read a ``time_h,temp_c`` series; rows must already be in time order."""
    rows = _read_rows(stream, PROFILE_HEADER)
    if len(rows) < 2:
        raise TooFewSamples(f"profile needs at least 2 samples, got {len(rows)}")
    times = [r[1][0] for r in rows]
    for (l0, _), (l1, _), t0, t1 in zip(rows, rows[1:], times, times[1:]):
        if not t1 > t0:
            raise NonMonotoneTime(f"line {l1}: time {t1} does not follow {t0}")
    return TemperatureProfile(np.array(times), np.array([r[1][1] for r in rows]))


def format_temperature_csv(profile: TemperatureProfile) -> str:
    lines = [",".join(PROFILE_HEADER)]
    lines += [f"{t!r},{T!r}" for t, T in zip(profile.times.tolist(), profile.temps.tolist())]
    return "\n".join(lines) + "\n"


def parse_lengths_csv(stream: TextIO | str) -> tuple[float, ...]:
    rows = _read_rows(stream, LENGTHS_HEADER)
    if not rows:
        raise EmptyDataset("no lengths")
    return tuple(r[1][0] for r in rows)


# ---------------------------------------------------------------------------
# Scene observations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CaseObservation:
    """Larval lengths collected at the scene at clock time ``t_star_h``.

    ``t_a_h`` is the earliest admissible hatching time (e.g. last sighting).
    """

    lengths_mm: tuple[float, ...]
    t_star_h: float = 0.0
    t_a_h: float = -200.0
    stage: Stage = Stage.UNKNOWN
    species_id: str = "species"

    def __post_init__(self):
        lengths = tuple(float(y) for y in self.lengths_mm)
        object.__setattr__(self, "lengths_mm", lengths)
        if not isinstance(self.stage, Stage):
            object.__setattr__(self, "stage", Stage.parse(str(self.stage)))
        if not lengths:
            raise InvariantViolation("at least one observed length is required")
        if any(not (y > 0 and math.isfinite(y)) for y in lengths):
            raise InvariantViolation("observed lengths must be positive and finite")
        if not self.t_a_h < self.t_star_h:
            raise BadTimeOrder(
                f"earliest hatching time t_a={self.t_a_h} must precede collection t*={self.t_star_h}")

    @property
    def n_obs(self) -> int:
        return len(self.lengths_mm)

    @property
    def mean_length(self) -> float:
        return float(np.mean(self.lengths_mm))


def validate_case(obs: CaseObservation, profile: TemperatureProfile):
    """Check that ``profile`` spans the whole admissible window of ``obs``."""
    if not obs.t_a_h < obs.t_star_h:
        raise BadTimeOrder(f"t_a={obs.t_a_h} is not before t*={obs.t_star_h}")
    if not profile.covers(obs.t_a_h, obs.t_star_h):
        lo, hi = profile.span
        raise ProfileCoverageGap(
            f"profile spans [{lo}, {hi}] h but the case needs [{obs.t_a_h}, {obs.t_star_h}] h")
    return obs, profile


# ---------------------------------------------------------------------------
# Estimation result
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HatchingEstimate:
    """Point estimate plus the profiles it was read from.

    ``candidates``/``sse``/``admissible`` cover the whole candidate grid;
    ``loglik`` is aligned with ``candidates`` and NaN where inadmissible or
    when the plug-in variance is unavailable.
    """

    t_hat_h: float
    candidates: np.ndarray
    sse: np.ndarray
    admissible: np.ndarray
    terminal_length: np.ndarray
    terminal_phase: np.ndarray
    sigma2_hat: float
    n_obs: int
    loglik: np.ndarray | None = None
    ci: tuple[float, float] | None = None
    ci_at_boundary: tuple[bool, bool] | None = None
    alpha: float | None = None
    posterior: np.ndarray | None = None
    map_h: float | None = None
    prior: str | None = None
    species_sigma2: tuple[float, ...] | None = None
    extra: dict = field(default_factory=dict)

    @property
    def pmi_h(self) -> float:
        """Lower bound on time since death, ``t* - t_hat`` (t* taken as the last candidate)."""
        return float(self.candidates[-1] - self.t_hat_h)

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else [None if not math.isfinite(v) else v
                                           for v in np.asarray(x, dtype=float).tolist()]

        return {
            "t_hat_h": self.t_hat_h,
            "sigma2_hat": self.sigma2_hat if math.isfinite(self.sigma2_hat) else None,
            "n_obs": self.n_obs,
            "ci": None if self.ci is None else list(self.ci),
            "ci_at_boundary": None if self.ci_at_boundary is None else list(self.ci_at_boundary),
            "alpha": self.alpha,
            "map_h": self.map_h,
            "prior": self.prior,
            "species_sigma2": None if self.species_sigma2 is None else list(self.species_sigma2),
            "criterion": {
                "candidate_t": arr(self.candidates),
                "sse": arr(self.sse),
                "admissible": [bool(a) for a in self.admissible],
                "terminal_length": arr(self.terminal_length),
                "terminal_phase": [int(p) for p in self.terminal_phase],
            },
            "loglik": arr(self.loglik),
            "posterior": arr(self.posterior),
            **self.extra,
        }
