"""Command-line interface: ``larvest fit | estimate | simulate | synth``.

Exit codes: 0 success, 2 unreadable or invalid input, 3 field fitting
failed, 4 no admissible hatching time, 5 variance undefined for a
requested interval or posterior, 1 any other library error.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path

from . import __version__
from .data import (CaseObservation, Stage, format_experimental_csv, parse_experimental_csv,
                   parse_lengths_csv, parse_temperature_csv)
from .dynamics import RATE_MODES, reconstruct_growth
from .errors import (BadTimeOrder, FitError, LarvestError, NoAdmissibleCandidate, ParseError,
                     ProfileCoverageGap, VarianceUndefined)
from .field import GrowthField, fit_growth_field
from .inference import criterion_profile, estimate_hatching, parse_prior
from .simulate import (STUDIES, StudyConfig, default_thread_count, estimates_csv,
                       histogram_csv, run_study, summary_json)
from .smoothing import KERNELS, SmootherConfig
from .synth import DEFAULT_TEMPERATURES, default_family, synth_dataset

EXIT_OK, EXIT_ERROR, EXIT_INPUT, EXIT_FIT, EXIT_NO_ADMISSIBLE, EXIT_VARIANCE = 0, 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_INPUT) from None


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text, encoding="utf-8")
    return path


def _threads(args) -> int:
    """``--threads`` if given, else ``LARVEST_THREADS``, else 1."""
    return args.threads if args.threads is not None else default_thread_count()


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    text = _read_text(args.data)
    try:
        dataset = parse_experimental_csv(io.StringIO(text))
    except ParseError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    smoother = SmootherConfig(bandwidth_h_L=args.h_L, kernel=args.smoother_kernel,
                              grid_points=args.grid_points)
    try:
        field = fit_growth_field(dataset, smoother=smoother, alpha=args.alpha, h=args.h_temp,
                                 kernel=args.field_kernel, dev_threshold_c=args.dev_threshold,
                                 skip_boundary_maximum=args.skip_boundary_maximum)
    except (FitError, ParseError) as exc:
        raise CliError(str(exc), EXIT_FIT) from None
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    Path(args.output).write_text(field.to_json(), encoding="utf-8")
    print(f"alpha = {field.alpha!r}")
    for name, h in field.bandwidths.items():
        print(f"h_{name} = {h!r} C")
    print("temperature_c,t_max_h,t_pup_h,h_L_h")
    for lm in field.diagnostics["landmarks"]:
        print(f"{lm['temperature_c']!r},{lm['t_max']!r},{lm['t_pup']!r},{lm['bandwidth_h_L']!r}")
    for T in field.diagnostics.get("skipped_temperatures", []):
        print(f"skipped T={T!r} C (no interior maximum)")
    print(f"wrote {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def _load_field(path: str) -> GrowthField:
    try:
        return GrowthField.from_json(_read_text(path))
    except (ValueError, KeyError, ParseError) as exc:
        raise CliError(f"{path} is not a valid growth-field document: {exc}", EXIT_INPUT) from None


def cmd_estimate(args) -> int:
    field = _load_field(args.field)
    try:
        profile = parse_temperature_csv(io.StringIO(_read_text(args.temps)))
        if args.lengths is not None:
            lengths = tuple(args.lengths)
        else:
            lengths = parse_lengths_csv(io.StringIO(_read_text(args.lengths_csv)))
        obs = CaseObservation(lengths, t_star_h=args.t_star, t_a_h=args.t_a,
                              stage=Stage.parse(args.stage), species_id=args.species)
        prior = parse_prior(args.prior) if args.prior else None
    except (ParseError, BadTimeOrder, ValueError) as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    try:
        crit = criterion_profile(field, profile, obs, dt=args.dt, step=args.step, rate=args.rate,
                                 threads=_threads(args))
        est = estimate_hatching(crit, alpha=args.alpha_level, prior=prior)
    except (ProfileCoverageGap, ParseError) as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    except NoAdmissibleCandidate as exc:
        raise CliError(str(exc), EXIT_NO_ADMISSIBLE) from None
    except VarianceUndefined as exc:
        raise CliError(str(exc), EXIT_VARIANCE) from None
    except FitError as exc:
        raise CliError(str(exc), EXIT_FIT) from None

    out = Path(args.out)
    report = est.to_dict()
    report.update({"t_star_h": obs.t_star_h, "t_a_h": obs.t_a_h, "stage": obs.stage.value,
                   "species_id": obs.species_id, "dt_h": args.dt, "step_h": args.step,
                   "rate": args.rate, "pmi_h": est.pmi_h})
    _write(out, "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    rows = ["candidate_t,sse,admissible"]
    rows += [f"{t!r},{s!r},{int(a)}" for t, s, a in
             zip(est.candidates.tolist(), est.sse.tolist(), est.admissible.tolist())]
    _write(out, "criterion.csv", "\n".join(rows) + "\n")
    if est.posterior is not None:
        rows = ["t,posterior_density"]
        rows += [f"{t!r},{d!r}" for t, d in zip(est.candidates.tolist(), est.posterior.tolist())]
        _write(out, "posterior.csv", "\n".join(rows) + "\n")
    if est.t_hat_h < obs.t_star_h:
        traj = reconstruct_growth(field, profile, est.t_hat_h, obs.t_star_h, args.dt, args.rate)
        _write(out, "trajectory.csv", traj.to_csv())

    print(f"t_hat_h = {est.t_hat_h!r}")
    print(f"pmi_h = {est.pmi_h!r}")
    if est.ci is not None:
        flag = " (touches the search window)" if any(est.ci_at_boundary) else ""
        print(f"ci_{1 - args.alpha_level:g} = [{est.ci[0]!r}, {est.ci[1]!r}]{flag}")
    if est.map_h is not None:
        print(f"map_h = {est.map_h!r}")
    print(f"wrote {out}/report.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / synth
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.study == "station":
        params = args.rho if args.rho is not None else [0.9, 0.7]
    else:
        params = args.sigma if args.sigma is not None else [0.1, 0.25, 0.75, 1.0]
    try:
        config = StudyConfig(study=args.study, params=tuple(params), replicates=args.reps,
                             n_lengths=args.n_lengths, seed=args.seed, length_sd=args.length_sd,
                             t_h=args.t_h)
        field = _load_field(args.field) if args.field else None
        profile = parse_temperature_csv(io.StringIO(_read_text(args.profile))) if args.profile else None
    except ParseError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    result = run_study(config, field, profile=profile, threads=_threads(args))
    out = Path(args.out)
    _write(out, "estimates.csv", estimates_csv(result))
    _write(out, "summary.json", summary_json(result))
    _write(out, "histogram.csv", histogram_csv(result))
    for cell in result.summary()["cells"]:
        print(f"{config.param_name}={cell['param']!r}: mean={cell['mean']!r} sd={cell['sd']!r} "
              f"failures={cell['failures']}")
    print(f"wrote {out}/summary.json")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        family = default_family(noise_sd_mm=args.noise_sd)
        ds = synth_dataset(family, temps=args.temps, times_per_temp=args.times,
                           replicates=args.replicates, seed=args.seed)
    except LarvestError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    text = format_experimental_csv(ds)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(text, encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="larvest", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $LARVEST_THREADS or 1); output does not depend on it")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a growth field from constant-temperature data")
    f.add_argument("data", help="CSV with header temperature_c,time_h,length_mm")
    f.add_argument("-o", "--output", default="field.json")
    f.add_argument("--h-temp", type=float, default=None,
                   help="temperature bandwidth in C (default: twice the largest temperature gap)")
    f.add_argument("--h-L", type=float, default=None,
                   help="time bandwidth in hours (default: twice the median sampling gap)")
    f.add_argument("--smoother-kernel", choices=KERNELS, default="epanechnikov")
    f.add_argument("--field-kernel", choices=KERNELS, default="gaussian")
    f.add_argument("--grid-points", type=int, default=512)
    f.add_argument("--alpha", type=float, default=None, help="landmark level in (0, 1)")
    f.add_argument("--dev-threshold", type=float, default=1.0,
                   help="temperature (C) at or below which growth stops")
    f.add_argument("--skip-boundary-maximum", action="store_true",
                   help="drop temperatures whose curve never peaks instead of failing")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("estimate", help="estimate the hatching time for a scene")
    e.add_argument("--field", required=True, help="growth-field JSON written by `fit`")
    e.add_argument("--temps", required=True, help="CSV with header time_h,temp_c")
    g = e.add_mutually_exclusive_group(required=True)
    g.add_argument("--lengths", type=_float_list, help="comma-separated lengths in mm")
    g.add_argument("--lengths-csv", help="CSV with header length_mm")
    e.add_argument("--t-star", type=float, default=0.0, help="collection time (h)")
    e.add_argument("--t-a", type=float, required=True, help="earliest admissible hatching time (h)")
    e.add_argument("--stage", default="unknown", choices=[s.value for s in Stage])
    e.add_argument("--species", default="species")
    e.add_argument("--prior", default=None,
                   help="uniform:lo:hi, gaussian:mean:sd or exponential:offset:mean")
    e.add_argument("--alpha-level", type=float, default=None,
                   help="request the 1-alpha likelihood-ratio interval (e.g. 0.05)")
    e.add_argument("--dt", type=float, default=1.0, help="Euler step (h)")
    e.add_argument("--step", type=float, default=1.0, help="candidate spacing (h)")
    e.add_argument("--rate", choices=sorted(RATE_MODES), default="shape")
    e.add_argument("--out", default="estimate_out")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="run a robustness study")
    s.add_argument("--study", choices=STUDIES, required=True)
    s.add_argument("--sigma", type=_float_list, default=None,
                   help="temperature error sds (noise studies)")
    s.add_argument("--rho", type=_float_list, default=None,
                   help="station-scene correlations (station study)")
    s.add_argument("--reps", type=int, default=1000)
    s.add_argument("--n-lengths", type=int, default=20)
    s.add_argument("--length-sd", type=float, default=0.05, help="length measurement error (mm)")
    s.add_argument("--t-h", type=float, default=None, help="planted hatching time (h)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--field", default=None, help="growth-field JSON (default: built-in synthetic fit)")
    s.add_argument("--profile", default=None,
                   help="temperature CSV for varying-temp-noise (default: bundled weather)")
    s.add_argument("--out", default="simulate_out")
    s.set_defaults(func=cmd_simulate)

    y = sub.add_parser("synth", help="write a synthetic constant-temperature dataset")
    y.add_argument("-o", "--output", default="-")
    y.add_argument("--temps", type=_float_list, default=list(DEFAULT_TEMPERATURES))
    y.add_argument("--times", type=int, default=21, help="observation times per temperature")
    y.add_argument("--replicates", type=int, default=5)
    y.add_argument("--noise-sd", type=float, default=0.2)
    y.add_argument("--seed", type=int, default=0)
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"larvest {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except LarvestError as exc:
        print(f"larvest {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
