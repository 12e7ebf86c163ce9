"""Kernel backend selection.

The per-pixel compositing kernels exist twice: a numba @njit build and a
vectorized pure-numpy build. ``GHAIR_BACKEND`` picks one:

  auto   use numba when importable, else numpy (default)
  numba  require numba, fail loudly if missing
  numpy  force the pure-numpy path

Both builds implement the same contributor semantics, so results agree to
floating-point noise; the benchmark in benchmarks/ compares them.
"""

import os

_VALID = ("auto", "numba", "numpy")


def backend_name() -> str:
    """Resolve the active kernel backend from the environment."""
    raw = os.environ.get("GHAIR_BACKEND", "auto").strip().lower()
    if raw not in _VALID:
        raise ValueError(f"GHAIR_BACKEND must be one of {_VALID}, got {raw!r}")
    if raw == "numpy":
        return "numpy"
    if raw == "numba":
        import numba  # noqa: F401  (raise ImportError if unavailable)

        return "numba"
    try:
        import numba  # noqa: F401

        return "numba"
    except ImportError:
        return "numpy"


def get_kernels():
    """Return the kernel module for the active backend."""
    if backend_name() == "numba":
        from ghair.raster import kernels_numba

        return kernels_numba
    from ghair.raster import kernels_numpy

    return kernels_numpy
