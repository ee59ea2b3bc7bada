"""Kernel backend selection.

Two interchangeable modules implement the hot dense kernels:

    _kernels_numba   @njit loops, compiled on first use (cached on disk)
    _kernels_numpy   einsum / vectorized fallback, no compilation

The active backend is chosen once at import time from the environment
variable ``DECFSC_BACKEND``:

    auto  (default) numba when importable, else numpy
    numba           require the compiled kernels, fail if numba is missing
    numpy           force the pure-numpy path

``kernels`` is the selected module; ``get_kernels`` fetches either one by
name for side-by-side comparisons (tests, benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import os

from . import _kernels_numpy

_VALID = ("auto", "numba", "numpy")

requested = os.environ.get("DECFSC_BACKEND", "auto").strip().lower()
if requested not in _VALID:
    raise RuntimeError(
        f"DECFSC_BACKEND={requested!r} not understood; "
        f"pick one of {', '.join(_VALID)}")

numba_import_error: Exception | None = None
if requested in ("auto", "numba"):
    try:
        from . import _kernels_numba
        kernels = _kernels_numba
        name = "numba"
    except ImportError as exc:      # pragma: no cover - depends on env
        numba_import_error = exc
        if requested == "numba":
            raise ImportError(
                "DECFSC_BACKEND=numba but the numba kernels failed to "
                f"import: {exc}") from exc
        kernels = _kernels_numpy
        name = "numpy"
else:
    kernels = _kernels_numpy
    name = "numpy"

using_numba = name == "numba"


def get_kernels(backend_name: str):
    """Fetch a kernel module by name ("numba" or "numpy")."""
    if backend_name == "numpy":
        return _kernels_numpy
    if backend_name == "numba":
        from . import _kernels_numba
        return _kernels_numba
    raise ValueError(f"unknown backend {backend_name!r}")
