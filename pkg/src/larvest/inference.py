"""Hatching-time estimation from scene lengths.

For every candidate hatching time ``t`` on a grid over ``[t_a, t*]`` the
expected length at collection ``L(t* - t)`` is reconstructed and compared
with the observed lengths through

    sse(t) = sum_i (L(t* - t) - Y_i)^2.

The estimate is the admissible minimizer of ``sse``. Under Gaussian errors
the profile log-likelihood with plug-in variance gives a likelihood-ratio
confidence interval and, combined with a prior, a grid posterior.

The accumulated-degree-hours (ADH) rule is provided as a baseline.
"""
from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import NamedTuple

import numpy as np

from . import kernels
from .data import CaseObservation, HatchingEstimate, Stage, TemperatureProfile, validate_case
from .dynamics import Phase, _profile_temperatures, kernel_inputs
from .errors import (InsufficientSpan, InvariantViolation, NoAdmissibleCandidate,
                     VarianceUndefined, ZeroPosteriorMass)
from .field import GrowthField

_GRID_TOL = 1e-9


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PriorSpec:
    """Prior on the hatching time (hours on the scene clock).

    ``kind`` is ``"uniform"`` (``p1`` = lower, ``p2`` = upper end),
    ``"gaussian"`` (mean, sd) or ``"exponential"`` (offset, mean): the
    exponential density starts at ``offset`` and decays towards later times,
    ``pi(t) = exp(-(t - offset) / mean) / mean`` for ``t >= offset``.
    """

    kind: str
    p1: float
    p2: float

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian", "exponential"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind == "uniform" and not self.p1 < self.p2:
            raise ValueError("uniform prior needs lower < upper")
        if self.kind in ("gaussian", "exponential") and not self.p2 > 0:
            raise ValueError(f"{self.kind} prior needs a positive scale")

    def logpdf(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "uniform":
            inside = (t >= self.p1) & (t <= self.p2)
            return np.where(inside, -math.log(self.p2 - self.p1), -np.inf)
        if self.kind == "gaussian":
            z = (t - self.p1) / self.p2
            return -0.5 * z * z - math.log(self.p2 * math.sqrt(2.0 * math.pi))
        x = t - self.p1
        return np.where(x >= 0.0, -x / self.p2 - math.log(self.p2), -np.inf)

    def __str__(self) -> str:
        return f"{self.kind}:{self.p1!r}:{self.p2!r}"


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_PRIOR_RE = re.compile(rf"^\s*(uniform|gaussian|exponential)\s*:\s*({_NUM})\s*:\s*({_NUM})\s*$")


def parse_prior(text: str) -> PriorSpec:
    """Parse ``uniform:lo:hi``, ``gaussian:mean:sd`` or ``exponential:offset:mean``."""
    m = _PRIOR_RE.match(text.lower())
    if m is None:
        raise ValueError(f"cannot parse prior {text!r}; expected e.g. uniform:-371:-12, "
                         "gaussian:-100:24 or exponential:-371:150")
    return PriorSpec(m.group(1), float(m.group(2)), float(m.group(3)))


# ---------------------------------------------------------------------------
# Criterion profile
# ---------------------------------------------------------------------------

def candidate_grid(t_a: float, t_star: float, step: float = 1.0) -> np.ndarray:
    """Candidates ``t* - m step`` inside ``[t_a, t*]``, ascending."""
    if not step > 0:
        raise InvariantViolation(f"candidate step must be positive, got {step}")
    m = int(math.floor((t_star - t_a) / step + _GRID_TOL))
    grid = t_star - step * np.arange(m, -1, -1, dtype=float)
    grid[0] = max(grid[0], t_a)
    return grid


@dataclass(frozen=True, eq=False)
class CriterionProfile:
    """Per-candidate reconstruction results for one species."""

    candidates: np.ndarray
    sse: np.ndarray
    admissible: np.ndarray
    terminal_length: np.ndarray
    terminal_phase: np.ndarray
    lengths_mm: np.ndarray
    stage: Stage
    t_star_h: float

    @property
    def n_obs(self) -> int:
        return int(self.lengths_mm.size)

    def phase_summary(self) -> str:
        labels = [Phase(int(p)).label for p in self.terminal_phase]
        counts = {lab: labels.count(lab) for lab in dict.fromkeys(labels)}
        return ", ".join(f"{n} {lab}" for lab, n in counts.items())


def admissible_mask(stage: Stage, phase: np.ndarray, pupated_early: np.ndarray) -> np.ndarray:
    """Which terminal phases are compatible with the observed stage.

    A trajectory that pupated strictly before collection leaves nothing to
    measure and is never admissible; one that pupates exactly at collection
    counts as post-feeding.
    """
    phase = np.asarray(phase)
    feeding = phase == Phase.FEEDING
    post = (phase == Phase.POSTFEEDING) | ((phase == Phase.PUPATED) & ~pupated_early)
    if stage == Stage.FEEDING:
        return feeding
    if stage == Stage.POSTFEEDING:
        return post
    return feeding | post


def _terminals(impl, args, rows, starts, steps, threads: int):
    if threads <= 1 or starts.size < 2 * threads:
        return impl.terminals(*args, rows, starts, steps)
    chunks = np.array_split(starts, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda s: impl.terminals(*args, rows, s, steps), chunks))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def criterion_profile(field: GrowthField, profile: TemperatureProfile, obs: CaseObservation,
                      candidates=None, dt: float = 1.0, step: float = 1.0, rate: str = "shape",
                      backend: str | None = None, threads: int = 1) -> CriterionProfile:
    """Evaluate the least-squares criterion on a grid of candidate hatching times.

    Parameters
    ----------
    candidates : array-like, optional
        Candidate hatching times in ``[t_a, t*]``; each must sit a whole
        number of Euler steps ``dt`` before ``t*``. Defaults to
        ``candidate_grid(t_a, t*, step)``.
    dt : float
        Euler step (hours).
    threads : int
        Worker threads for the trajectory loop; results do not depend on it.
    """
    validate_case(obs, profile)
    t_star = obs.t_star_h
    if candidates is None:
        candidates = candidate_grid(obs.t_a_h, t_star, step)
    cand = np.asarray(candidates, dtype=float)
    if cand.ndim != 1 or cand.size == 0:
        raise InvariantViolation("candidate grid must be a non-empty 1-d array")
    if np.any(np.diff(cand) <= 0):
        raise InvariantViolation("candidate grid must be strictly increasing")
    if cand[0] < obs.t_a_h - _GRID_TOL or cand[-1] > t_star + _GRID_TOL:
        raise InvariantViolation(
            f"candidates must lie in [t_a, t*] = [{obs.t_a_h}, {t_star}]")
    back = (t_star - cand) / dt
    offsets = np.rint(back).astype(np.int64)
    if np.any(np.abs(back - offsets) > _GRID_TOL * np.maximum(1.0, back)):
        raise InvariantViolation(f"every candidate must lie a whole number of steps dt={dt} "
                                 "before t*")
    n = int(offsets[0])
    lattice = t_star - dt * np.arange(n, -1, -1, dtype=float)
    lattice[0] = cand[0]
    temps = _profile_temperatures(profile, lattice)
    args, rows = kernel_inputs(field, temps, rate)
    starts = np.ascontiguousarray(n - offsets, dtype=np.int64)
    impl = kernels.get_backend(backend)
    term_len, term_phase, stop = _terminals(impl, args, rows, starts,
                                            np.ascontiguousarray(np.diff(lattice)),
                                            max(1, int(threads)))
    y = np.asarray(obs.lengths_mm, dtype=float)
    resid = term_len[:, None] - y[None, :]
    sse = np.sum(resid * resid, axis=1)
    pupated_early = (term_phase == Phase.PUPATED) & (stop < n)
    adm = admissible_mask(obs.stage, term_phase, pupated_early)
    return CriterionProfile(candidates=cand, sse=sse, admissible=adm,
                            terminal_length=term_len, terminal_phase=term_phase,
                            lengths_mm=y, stage=obs.stage, t_star_h=t_star)


# ---------------------------------------------------------------------------
# Point estimate, likelihood, interval, posterior
# ---------------------------------------------------------------------------

def sample_variance(lengths) -> float:
    """Plug-in error variance: sample variance with ``n - 1`` denominator (NaN for n = 1)."""
    y = np.asarray(lengths, dtype=float)
    return float(np.var(y, ddof=1)) if y.size > 1 else float("nan")


def gaussian_loglik(sse, n: int, sigma2: float) -> np.ndarray:
    """``-n/2 log(2 pi sigma2) - sse / (2 sigma2)``."""
    return -0.5 * n * math.log(2.0 * math.pi * sigma2) - np.asarray(sse) / (2.0 * sigma2)


def chi2_quantile_1df(level: float) -> float:
    """Quantile of the chi-square distribution with one degree of freedom."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    z = NormalDist().inv_cdf(0.5 + 0.5 * level)
    return z * z


def _first_argmin(values, mask) -> int:
    masked = np.where(mask, values, np.inf)
    return int(np.argmin(masked))  # argmin returns the first (earliest) of ties


def _require_admissible(admissible, detail: str):
    if not np.any(admissible):
        raise NoAdmissibleCandidate(
            f"no candidate hatching time is compatible with the observed stage "
            f"({detail})")


class LikelihoodInterval(NamedTuple):
    lo: float
    hi: float
    at_lower_boundary: bool
    at_upper_boundary: bool


def likelihood_ci(candidates, loglik, admissible, t_hat: float, alpha: float = 0.05
                  ) -> LikelihoodInterval:
    """Hull of ``{t : l(t) > l(t_hat) - chi2_{1-alpha}(1) / 2}`` over admissible candidates.

    The flags report whether the interval reaches the first or last
    admissible candidate, in which case the true region may extend beyond
    the searched window.
    """
    cand = np.asarray(candidates, dtype=float)
    ll = np.asarray(loglik, dtype=float)
    adm = np.asarray(admissible, dtype=bool)
    i_hat = int(np.flatnonzero(cand == t_hat)[0])
    cut = ll[i_hat] - 0.5 * chi2_quantile_1df(1.0 - alpha)
    inside = adm & (ll > cut)
    inside[i_hat] = True
    members = cand[inside]
    adm_t = cand[adm]
    lo, hi = float(members.min()), float(members.max())
    return LikelihoodInterval(lo, hi, bool(lo == adm_t.min()), bool(hi == adm_t.max()))


def grid_posterior(candidates, loglik, admissible, prior: PriorSpec):
    """Posterior density on the candidate grid and its mode.

    Density is proportional to ``exp(l(t)) pi(t)`` on admissible candidates
    and zero elsewhere, normalized so that ``sum(density) * step = 1``.
    Returns ``(density, map_t)``; ties in the mode go to the earliest time.
    """
    cand = np.asarray(candidates, dtype=float)
    adm = np.asarray(admissible, dtype=bool)
    with np.errstate(invalid="ignore"):
        logp = np.where(adm, np.asarray(loglik, dtype=float) + prior.logpdf(cand), -np.inf)
    top = np.max(logp)
    if not np.isfinite(top):
        raise ZeroPosteriorMass(f"prior {prior} puts no mass on the admissible candidates")
    w = np.exp(logp - top)
    step = float(cand[1] - cand[0]) if cand.size > 1 else 1.0
    density = w / (w.sum() * step)
    return density, float(cand[int(np.argmax(w))])


def estimate_hatching(crit: CriterionProfile, alpha: float | None = None,
                      prior: PriorSpec | None = None) -> HatchingEstimate:
    """Admissible least-squares estimate with log-likelihood, and optionally CI / posterior.

    Parameters
    ----------
    alpha : float, optional
        Request the ``1 - alpha`` likelihood-ratio interval.
    prior : PriorSpec, optional
        Request the grid posterior.

    Raises
    ------
    NoAdmissibleCandidate
    VarianceUndefined
        If an interval or posterior is requested but the sample variance is
        unavailable (one observation) or zero.
    """
    _require_admissible(crit.admissible, crit.phase_summary())
    i = _first_argmin(crit.sse, crit.admissible)
    t_hat = float(crit.candidates[i])
    n = crit.n_obs
    s2 = sample_variance(crit.lengths_mm)
    usable = math.isfinite(s2) and s2 > 0.0
    if (alpha is not None or prior is not None) and not usable:
        raise VarianceUndefined(
            f"the plug-in variance is {'undefined' if n == 1 else 'zero'} for n_obs={n}; "
            "intervals and posteriors need at least two distinct lengths")
    loglik = None
    if usable:
        loglik = np.where(crit.admissible, gaussian_loglik(crit.sse, n, s2), np.nan)
    return _finish(crit.candidates, crit.sse, crit.admissible, crit.terminal_length,
                   crit.terminal_phase, t_hat, s2, n, loglik, alpha, prior)


def _finish(cand, sse, adm, term_len, term_phase, t_hat, s2, n, loglik, alpha, prior,
            species_sigma2=None, extra=None) -> HatchingEstimate:
    ci = boundary = None
    if alpha is not None:
        iv = likelihood_ci(cand, loglik, adm, t_hat, alpha)
        ci, boundary = (iv.lo, iv.hi), (iv.at_lower_boundary, iv.at_upper_boundary)
    post = map_h = None
    if prior is not None:
        post, map_h = grid_posterior(cand, loglik, adm, prior)
    return HatchingEstimate(
        t_hat_h=t_hat, candidates=cand, sse=sse, admissible=adm, terminal_length=term_len,
        terminal_phase=term_phase, sigma2_hat=s2, n_obs=n, loglik=loglik, ci=ci,
        ci_at_boundary=boundary, alpha=alpha, posterior=post, map_h=map_h,
        prior=None if prior is None else str(prior), species_sigma2=species_sigma2,
        extra=extra or {})


def estimate(field: GrowthField, profile: TemperatureProfile, obs: CaseObservation,
             step: float = 1.0, dt: float = 1.0, alpha: float | None = None,
             prior: PriorSpec | None = None, rate: str = "shape", threads: int = 1,
             backend: str | None = None) -> HatchingEstimate:
    """Criterion profile plus estimate in one call."""
    crit = criterion_profile(field, profile, obs, dt=dt, step=step, rate=rate,
                             threads=threads, backend=backend)
    return estimate_hatching(crit, alpha=alpha, prior=prior)


# ---------------------------------------------------------------------------
# Several species
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpeciesCase:
    field: GrowthField
    obs: CaseObservation


def estimate_multispecies(cases, profile: TemperatureProfile, step: float = 1.0,
                          dt: float = 1.0, alpha: float | None = None,
                          prior: PriorSpec | None = None, rate: str = "shape",
                          threads: int = 1) -> HatchingEstimate:
    """Pooled estimate over species sharing one scene and temperature profile.

    Each species contributes ``n_j sse_j(t) / sigma2_j``; a candidate is
    admissible only if it is admissible for every species. The reported
    log-likelihood is the sum of the per-species Gaussian log-likelihoods,
    and ``sse`` holds the pooled criterion.
    """
    cases = list(cases)
    if not cases:
        raise InvariantViolation("at least one species is required")
    t_star = cases[0].obs.t_star_h
    if any(c.obs.t_star_h != t_star for c in cases):
        raise InvariantViolation("all species must share the collection time t*")
    t_a = max(c.obs.t_a_h for c in cases)
    cand = candidate_grid(t_a, t_star, step)
    crits = [criterion_profile(c.field, profile, c.obs, candidates=cand, dt=dt, rate=rate,
                               threads=threads) for c in cases]
    s2 = [sample_variance(c.lengths_mm) for c in crits]
    for c, v in zip(cases, s2):
        if not (math.isfinite(v) and v > 0.0):
            raise VarianceUndefined(
                f"species {c.obs.species_id!r}: the pooled criterion weights by 1/sigma^2, "
                "which needs at least two distinct lengths")
    adm = np.logical_and.reduce([c.admissible for c in crits])
    _require_admissible(adm, "; ".join(f"{cs.obs.species_id}: {c.phase_summary()}"
                                             for cs, c in zip(cases, crits)))
    pooled = sum(c.n_obs * c.sse / v for c, v in zip(crits, s2))
    i = _first_argmin(pooled, adm)
    loglik = sum(gaussian_loglik(c.sse, c.n_obs, v) for c, v in zip(crits, s2))
    loglik = np.where(adm, loglik, np.nan)
    n = sum(c.n_obs for c in crits)
    extra = {"species": [
        {"species_id": cs.obs.species_id, "n_obs": c.n_obs, "sigma2_hat": v,
         "sse": c.sse.tolist(), "terminal_length": c.terminal_length.tolist(),
         "terminal_phase": c.terminal_phase.tolist()}
        for cs, c, v in zip(cases, crits, s2)]}
    # top-level terminal arrays describe the first species; all are in ``extra``
    return _finish(cand, pooled, adm, crits[0].terminal_length,
                   crits[0].terminal_phase, float(cand[i]),
                   float("nan"), n, loglik, alpha, prior, species_sigma2=tuple(s2), extra=extra)


# ---------------------------------------------------------------------------
# Accumulated degree hours
# ---------------------------------------------------------------------------

def _positive_area(t0, T0, t1, T1):
    """Integral of ``max(T, 0)`` over a segment with linear ``T``."""
    if T0 >= 0.0 and T1 >= 0.0:
        return 0.5 * (T0 + T1) * (t1 - t0)
    if T0 <= 0.0 and T1 <= 0.0:
        return 0.0
    tc = t0 + (t1 - t0) * T0 / (T0 - T1)  # zero crossing
    if T0 > 0.0:
        return 0.5 * T0 * (tc - t0)
    return 0.5 * T1 * (t1 - tc)


def _solve_in_segment(t0, T0, t1, T1, need):
    """Latest ``t`` in ``[t0, t1]`` with ``int_t^{t1} max(T, 0) = need``."""
    if T0 < 0.0 or T1 < 0.0:
        tc = t0 + (t1 - t0) * T0 / (T0 - T1)
        if T1 < 0.0:  # positive part is [t0, tc]; nothing accrues after tc
            return _solve_in_segment(t0, T0, tc, 0.0, need)
        t0, T0 = tc, 0.0
    # integrate backwards from t1: T(s) = T1 - g (t1 - s), g = slope
    g = (T1 - T0) / (t1 - t0)
    # need = T1 x - g x^2 / 2, x = t1 - t
    if abs(g) * (t1 - t0) <= 1e-12 * max(abs(T1), 1e-300):
        x = need / T1
    else:
        disc = max(T1 * T1 - 2.0 * g * need, 0.0)
        x = 2.0 * need / (T1 + math.sqrt(disc))
    return t1 - min(max(x, 0.0), t1 - t0)


def adh_baseline(profile: TemperatureProfile, adh_required: float, t_star: float = 0.0) -> float:
    """Latest time from which ``adh_required`` degree-hours accrue by ``t_star``.

    Temperatures below 0 C contribute nothing. The profile is integrated
    backwards from ``t_star`` exactly for its piecewise-linear interpolant
    (i.e. the trapezoidal rule with segments split at zero crossings).
    """
    if not adh_required > 0:
        raise InvariantViolation("required degree-hours must be positive")
    T_end = profile.temperature_at(t_star)
    times = profile.times
    earlier = np.flatnonzero(times < t_star)
    acc = 0.0
    t1, T1 = t_star, float(T_end)
    for i in earlier[::-1]:
        t0, T0 = float(times[i]), float(profile.temps[i])
        area = _positive_area(t0, T0, t1, T1)
        if acc + area >= adh_required:
            return _solve_in_segment(t0, T0, t1, T1, adh_required - acc)
        acc += area
        t1, T1 = t0, T0
    raise InsufficientSpan(
        f"the profile accumulates only {acc:.6g} degree-hours before t*={t_star}, "
        f"short of the required {adh_required:.6g}")


def adh_interval(profile: TemperatureProfile, adh_low: float, adh_high: float,
                 t_star: float = 0.0) -> tuple[float, float]:
    """Window of start times for a degree-hour requirement known to lie in
    ``[adh_low, adh_high]``; returns ``(earliest, latest)``."""
    if not adh_low <= adh_high:
        raise InvariantViolation("adh_low must not exceed adh_high")
    return adh_baseline(profile, adh_high, t_star), adh_baseline(profile, adh_low, t_star)
