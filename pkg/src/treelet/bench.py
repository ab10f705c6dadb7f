"""Wall-clock comparison of the naive and incremental merge loops."""

from __future__ import annotations

import time

import numpy as np

from . import _backend
from .build import build_tree, build_tree_naive
from .similarity import compute_state


def _median_seconds(fn, repeats: int) -> float:
    times = []
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def time_builds(p_values, n: int = 64, seed: int = 0, repeats: int = 3,
                measure: str = "correlation", backends=("auto",)) -> list[dict]:
    """Time full-level builds of both searches on seeded Gaussian data.

    The covariance is computed once per (backend, p) and its cost reported
    separately (the shared one-off m term); the timed section is the merge
    loop itself, which is where the O(Lp^2) vs O(Lp) split lives. The same
    data is used for every backend and both searches at a given p.
    """
    rows = []
    for backend in backends:
        resolved = _backend.resolve_backend(backend)
        for p in p_values:
            rng = np.random.default_rng([seed, int(p)])
            x = rng.standard_normal((n, int(p)))
            state = compute_state(x, measure)
            naive_s = _median_seconds(
                lambda: build_tree_naive(state, backend=resolved), repeats)
            incr_s = _median_seconds(
                lambda: build_tree(state, backend=resolved), repeats)
            rows.append({
                "backend": resolved,
                "p": int(p),
                "n": int(n),
                "covariance_seconds": state.compute_seconds,
                "naive_seconds": naive_s,
                "incremental_seconds": incr_s,
                "naive_over_incremental": naive_s / max(incr_s, 1e-12),
            })
    return rows
