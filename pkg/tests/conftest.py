import numpy as np
import pytest

from larvest.field import fit_growth_field
from larvest.synth import default_family, synth_dataset

_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance-criterion outcome for the end-of-run summary."""

    def record(cid: str, passed, detail: str):
        """``passed`` is True/False, or None for a criterion that is not checked."""
        _CRITERIA.append((cid, None if passed is None else bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for cid, passed, detail in sorted(_CRITERIA, key=lambda c: int(c[0][1:])):
        status = "EXCLUDED" if passed is None else ("PASS" if passed else "FAIL")
        terminalreporter.write_line(f"{cid} {status}  {detail}")


@pytest.fixture(scope="session")
def family():
    return default_family()


@pytest.fixture(scope="session")
def dataset(family):
    return synth_dataset(family, seed=11)


@pytest.fixture(scope="session")
def field(dataset):
    return fit_growth_field(dataset)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_field(temps, shapes, a, b, kernel="gaussian", h=5.0, dev_threshold_c=1.0):
    """Growth field assembled directly from per-temperature shapes and warp coefficients."""
    from larvest.field import GrowthField

    temps = np.asarray(temps, dtype=float)
    shapes = np.asarray(shapes, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    u = np.linspace(0.0, 1.0, shapes.shape[1])
    derivs = np.gradient(shapes, u, axis=1)
    t_pup = 2.0 / (a + np.sqrt(a * a + 4 * b))
    return GrowthField(temperatures=temps, shapes=shapes, shape_derivs=derivs, warp_a=a,
                       warp_b=b, warp_t_pup=t_pup, warp_t_max=0.5 * t_pup, alpha=0.5,
                       h_shape=h, h_warp=h, h_shape_deriv=h, h_warp_deriv=h, kernel=kernel,
                       dev_threshold_c=dev_threshold_c)


def tent_field():
    """Identical tent shapes and linear warps ``w = a t``.

    While feeding the rate is ``10 a(T)`` mm/h regardless of length, with
    ``a = 0.002, 0.004, 0.006`` at 10, 20 and 30 C; the peak is at ``u = 0.5``.
    """
    u = np.linspace(0.0, 1.0, 2001)
    tent = np.where(u <= 0.5, 2.0 + 10.0 * u, 7.0 - 6.0 * (u - 0.5))
    return make_field([10.0, 20.0, 30.0], [tent] * 3, [0.002, 0.004, 0.006], [0.0] * 3,
                      kernel="epanechnikov", h=3.0)
