"""Kernel backend selection: compiled extension when importable, numpy otherwise."""

from __future__ import annotations

from . import _build_py
from .errors import InputError

try:
    from . import _build_core
except ImportError:
    _build_core = None

HAVE_COMPILED = _build_core is not None
DEFAULT_BACKEND = "compiled" if HAVE_COMPILED else "python"
BACKENDS = ("compiled", "python")


def resolve_backend(backend: str | None) -> str:
    """Normalize a backend request; None and "auto" pick the best available."""
    if backend is None or backend == "auto":
        return DEFAULT_BACKEND
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise InputError("compiled kernel is not available in this install")
        return "compiled"
    if backend == "python":
        return "python"
    raise InputError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def run_build(cov, active, use_corr, n_levels, exhaustive, stop_below,
              backend: str | None = None):
    """Dispatch the merge loop to the requested kernel."""
    if resolve_backend(backend) == "compiled":
        return _build_core.run_build(cov, active, use_corr, n_levels,
                                     exhaustive, stop_below)
    return _build_py.run_build(cov, active, use_corr, n_levels,
                               exhaustive, stop_below)
