"""Compare the compiled and pure-Python Euler kernels.

Times one full criterion profile (every candidate hatching time integrated to
the collection time) and one long single trajectory with each backend, checks
that both give bit-identical output, and prints the speed-up.

Usage::

    python3 benchmarks/bench_kernels.py [--repeats 3] [--window 371]
"""
import argparse
import time

import numpy as np

from larvest import kernels
from larvest.data import CaseObservation
from larvest.dynamics import reconstruct_growth
from larvest.inference import criterion_profile
from larvest.simulate import default_simulation_field
from larvest.synth import bundled_weather


def best_of(fn, repeats):
    times, out = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--window", type=float, default=371.0,
                   help="hours between the earliest candidate and collection")
    args = p.parse_args(argv)

    if kernels.BACKEND != "cython":
        raise SystemExit("the compiled extension is not available; build it with "
                         "`pip install -e . --no-build-isolation`")
    field = default_simulation_field()
    profile = bundled_weather()
    window = min(args.window, -profile.span[0])
    obs = CaseObservation((6.0, 6.4, 7.1), t_a_h=-window)

    cases = {
        "criterion profile": lambda b: criterion_profile(field, profile, obs, backend=b),
        "trajectory dt=0.01": lambda b: reconstruct_growth(field, profile, -window, 0.0,
                                                           dt=0.01, backend=b),
    }
    print(f"{'case':<22}{'cython (s)':>12}{'python (s)':>12}{'speed-up':>10}  identical")
    for name, run in cases.items():
        tc, rc = best_of(lambda: run("cython"), args.repeats)
        tp, rp = best_of(lambda: run("python"), args.repeats)
        if name.startswith("criterion"):
            same = np.array_equal(rc.terminal_length, rp.terminal_length)
        else:
            same = np.array_equal(rc.lengths, rp.lengths, equal_nan=True)
        print(f"{name:<22}{tc:>12.4f}{tp:>12.4f}{tp / tc:>9.1f}x  {same}")


if __name__ == "__main__":
    main()
