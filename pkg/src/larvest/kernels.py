"""Backend selection for the Euler integration kernel.

The compiled extension is used when it was built and imports cleanly;
otherwise the pure-Python twin is used. Setting ``LARVEST_PURE_PYTHON=1``
forces the fallback. Both expose ``trajectory`` and ``terminals`` with the
same signatures and return bit-identical results.
"""
import os

from . import _dyncore_py

BACKEND = "python"
_impl = _dyncore_py

if os.environ.get("LARVEST_PURE_PYTHON") != "1":
    try:
        from . import _dyncore as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ("cython", "python" or None for the default)."""
    if name is None:
        return _impl
    if name == "python":
        return _dyncore_py
    if name == "cython":
        from . import _dyncore
        return _dyncore
    raise ValueError(f"unknown backend {name!r}")


trajectory = _impl.trajectory
terminals = _impl.terminals
