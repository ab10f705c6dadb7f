"""Greedy construction of the rotation hierarchy.

Each level rotates the most similar active pair, keeps the higher-variance
coordinate as the running sum and retires the other as a detail coordinate
that never merges again. The naive and incremental builders share the same
rotation and covariance-update code and differ only in how the best pair is
found (full rescan vs cached per-row maxima), so they produce identical
rotation sequences by construction.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import _backend, _build_py
from .data import DataMatrix, as_data_matrix
from .errors import InputError
from .similarity import SimilarityState, _check_measure, compute_state


@dataclass(frozen=True)
class RotationRecord:
    """One merge: a 2x2 rotation of coordinates (alpha, beta) at a level.

    alpha < beta are coordinate slots in the original indexing; sum_index is
    whichever of the two kept the larger post-rotation variance (ties go to
    the lower index) and detail_index is the other, retired from all later
    levels. |theta| <= pi/4.
    """

    level: int
    alpha: int
    beta: int
    theta: float
    sum_index: int
    detail_index: int


@dataclass
class TreeletTree:
    """A sequence of rotation records over p variables, levels 1..L.

    root_active is the set of coordinates still active after the last level
    (one scaling coordinate per unfinished branch). similarities[k] is the
    signed similarity of the pair merged at level k+1; a value of exactly 0
    means the merge was forced by the tie rule rather than by structure.
    """

    p: int
    measure: str
    rotations: tuple[RotationRecord, ...]
    root_active: frozenset[int]
    similarities: np.ndarray
    names: tuple[str, ...] | None = None
    n_obs: int | None = None
    input_hash: str | None = None
    stop_below: float | None = None

    @property
    def n_levels(self) -> int:
        return len(self.rotations)

    def detail_order(self) -> list[int]:
        """Detail coordinates in retirement order (level 1 first)."""
        return [r.detail_index for r in self.rotations]

    def active_at(self, level: int) -> list[int]:
        """Coordinates still active after the given level (0 = none applied)."""
        if not 0 <= level <= self.n_levels:
            raise InputError(f"level {level} out of range 0..{self.n_levels}")
        retired = {r.detail_index for r in self.rotations[:level]}
        return [j for j in range(self.p) if j not in retired]


def pair_rotation(c_aa: float, c_bb: float, c_ab: float) -> tuple[float, int]:
    """Rotation angle and sum slot for one 2x2 covariance block.

    Returns (theta, sum_slot) with |theta| <= pi/4; sum_slot is 0 if the
    first coordinate carries the larger post-rotation variance, 1 otherwise
    (ties break to slot 0). Rotating by theta zeroes the off-diagonal entry.
    """
    for name, v in (("c_aa", c_aa), ("c_bb", c_bb), ("c_ab", c_ab)):
        if not np.isfinite(v):
            raise InputError(f"{name} is not finite: {v!r}")
    if c_aa < 0 or c_bb < 0:
        raise InputError(f"variances must be nonnegative, got ({c_aa!r}, {c_bb!r})")
    theta = _build_py.rotation_angle(c_aa, c_bb, c_ab)
    va, vb = _build_py.post_variances(c_aa, c_bb, c_ab, theta)
    return theta, 1 if vb > va else 0


def _hash_array(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def _resolve_level(level, n_active: int) -> int:
    full = n_active - 1
    if level == "full" or level is None:
        return full
    try:
        lvl = int(level)
    except (TypeError, ValueError):
        raise InputError(f"level must be an integer or 'full', got {level!r}")
    if not 1 <= lvl <= full:
        raise InputError(f"level {lvl} out of range 1..{full} for {n_active} active variables")
    return lvl


def _build(source, measure, level, stop_below, backend, exhaustive) -> TreeletTree:
    names = None
    n_obs = None
    if isinstance(source, SimilarityState):
        if measure is not None and measure != source.measure:
            raise InputError(
                f"measure {measure!r} conflicts with the state's {source.measure!r}"
            )
        measure = source.measure
        cov = source.cov.copy()
        active = source.active.astype(np.uint8).copy()
        input_hash = _hash_array(source.cov)
    else:
        dm = as_data_matrix(source)
        measure = _check_measure(measure or "correlation")
        state = compute_state(dm, measure)
        cov = state.cov
        active = state.active
        names = dm.names
        n_obs = dm.n
        input_hash = _hash_array(dm.values)

    n_active = int(active.sum())
    if n_active < 2:
        raise InputError(
            f"tree construction needs at least 2 active variables, found {n_active}"
        )
    n_levels = _resolve_level(level, n_active)
    if stop_below is not None and not np.isfinite(stop_below):
        raise InputError(f"stop_below must be finite, got {stop_below!r}")
    threshold = -1.0 if stop_below is None else float(stop_below)

    alphas, betas, thetas, sum_is_beta, sims = _backend.run_build(
        cov, active, measure == "correlation", n_levels, exhaustive, threshold,
        backend=backend,
    )

    rotations = tuple(
        RotationRecord(
            level=k + 1,
            alpha=int(alphas[k]),
            beta=int(betas[k]),
            theta=float(thetas[k]),
            sum_index=int(betas[k]) if sum_is_beta[k] else int(alphas[k]),
            detail_index=int(alphas[k]) if sum_is_beta[k] else int(betas[k]),
        )
        for k in range(len(alphas))
    )
    return TreeletTree(
        p=cov.shape[0],
        measure=measure,
        rotations=rotations,
        root_active=frozenset(int(i) for i in np.flatnonzero(active)),
        similarities=np.asarray(sims, dtype=np.float64),
        names=names,
        n_obs=n_obs,
        input_hash=input_hash,
        stop_below=stop_below,
    )


def build_tree(source, measure: str | None = None, level="full", *,
               stop_below: float | None = None, backend: str | None = None) -> TreeletTree:
    """Build a treelet hierarchy with the cached-search (incremental) merge loop.

    Parameters
    ----------
    source : DataMatrix, array_like, or SimilarityState
        Observations (rows) over variables (columns), or a precomputed state
        such as an exact population covariance.
    measure : {"correlation", "covariance"}, optional
        Pair-selection measure. Defaults to "correlation" for data input and
        to the state's own measure for state input.
    level : int or "full"
        Number of merges to perform, 1..p-1.
    stop_below : float, optional
        Stop before any merge whose best |similarity| falls below this value.
        Disabled by default.
    backend : {"auto", "compiled", "python"}, optional
        Kernel choice; "auto" (default) prefers the compiled extension.
    """
    return _build(source, measure, level, stop_below, backend, exhaustive=False)


def build_tree_naive(source, measure: str | None = None, level="full", *,
                     stop_below: float | None = None, backend: str | None = None) -> TreeletTree:
    """build_tree with an exhaustive pair rescan at every level.

    Same rotation sequence as build_tree (the cached search is a pure
    optimization); O(p^2) per level, kept as the reference implementation and
    for timing comparisons.
    """
    return _build(source, measure, level, stop_below, backend, exhaustive=True)
