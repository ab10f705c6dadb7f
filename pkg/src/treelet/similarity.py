"""Covariance state and pairwise similarity between variables.

The state always stores a covariance matrix; the correlation measure is
derived from it entry by entry when pairs are compared. Merging rotates two
rows/columns in place, so a long merge sequence never recomputes the matrix
from data (that is the O(p) per-level update the builder relies on).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _build_py
from .data import DataMatrix, as_data_matrix
from .errors import InputError

MEASURES = ("covariance", "correlation")

# Relative tolerance for checking that a supplied rotation diagonalizes its block.
_DIAG_RTOL = 1e-10


def _check_measure(measure: str) -> str:
    if measure not in MEASURES:
        raise InputError(f"unknown measure {measure!r}; expected one of {MEASURES}")
    return measure


@dataclass
class SimilarityState:
    """Covariance matrix plus the bookkeeping the merge loop needs.

    cov is kept exactly symmetric: the upper triangle is authoritative and
    every update writes both triangles from one computed value. active marks
    the variables still eligible for merging; means are the column means that
    were removed before the covariance was accumulated (zero when the state
    was constructed directly from a population matrix). compute_seconds
    records the up-front cost of forming the matrix, the one-off m term on
    top of the per-level work.
    """

    cov: np.ndarray
    measure: str
    active: np.ndarray
    means: np.ndarray
    compute_seconds: float = 0.0

    @property
    def p(self) -> int:
        return self.cov.shape[0]

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def copy(self) -> "SimilarityState":
        return SimilarityState(self.cov.copy(), self.measure, self.active.copy(),
                               self.means.copy(), self.compute_seconds)


def state_from_covariance(cov, measure: str = "covariance") -> SimilarityState:
    """Wrap an explicit covariance matrix (e.g. a population one) as a state."""
    _check_measure(measure)
    arr = np.ascontiguousarray(np.asarray(cov, dtype=np.float64))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InputError(f"covariance must be square, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise InputError("need at least 2 variables")
    if not np.isfinite(arr).all():
        raise InputError("covariance contains non-finite entries")
    if not np.array_equal(arr, arr.T):
        gap = float(np.abs(arr - arr.T).max())
        scale = max(1.0, float(np.abs(arr).max()))
        if gap > 1e-12 * scale:
            raise InputError(f"covariance is not symmetric (max asymmetry {gap:.3e})")
        arr = np.triu(arr) + np.triu(arr, 1).T
    if (np.diagonal(arr) < 0).any():
        j = int(np.flatnonzero(np.diagonal(arr) < 0)[0])
        raise InputError(f"negative variance at index {j}")
    p = arr.shape[0]
    return SimilarityState(arr, measure, np.ones(p, dtype=np.uint8), np.zeros(p))


def compute_state(data, measure: str = "correlation") -> SimilarityState:
    """Centered covariance of a data matrix, with 1/n normalization.

    cov[i, j] = (1/n) sum_k (X[k, i] - mean_i) (X[k, j] - mean_j). The measure
    only chooses how pairs are compared later; the stored matrix is always the
    covariance.
    """
    _check_measure(measure)
    dm = as_data_matrix(data)
    t0 = time.perf_counter()
    means = dm.values.mean(axis=0)
    xc = dm.values - means
    cov = xc.T @ xc / dm.n
    # One triangle is authoritative; mirror it so symmetry is exact.
    cov = np.triu(cov) + np.triu(cov, 1).T
    cov = np.ascontiguousarray(cov)
    elapsed = time.perf_counter() - t0
    return SimilarityState(cov, measure, np.ones(dm.p, dtype=np.uint8), means, elapsed)


def _check_pair(state: SimilarityState, i: int, j: int) -> None:
    p = state.p
    if not (0 <= i < p and 0 <= j < p):
        raise InputError(f"index pair ({i}, {j}) out of range for p={p}")
    if i == j:
        raise InputError(f"similarity needs two distinct indices, got ({i}, {j})")
    if not (state.active[i] and state.active[j]):
        dead = i if not state.active[i] else j
        raise InputError(f"index {dead} has been retired and is no longer active")


def similarity(state: SimilarityState, i: int, j: int) -> float:
    """Signed similarity between active variables i and j under state.measure.

    Correlation is clamped to [-1, 1]; a zero-variance variable has
    correlation 0 with everything.
    """
    _check_pair(state, i, j)
    c = float(state.cov[i, j])
    if state.measure == "covariance":
        return c
    vi = float(state.cov[i, i])
    vj = float(state.cov[j, j])
    if vi <= 0.0 or vj <= 0.0:
        return 0.0
    r = c / np.sqrt(vi * vj)
    if r > 1.0:
        r = 1.0
    elif r < -1.0:
        r = -1.0
    return float(r)


def max_similar_pair(state: SimilarityState) -> tuple[int, int]:
    """The active pair (i, j), i < j, maximizing |similarity|.

    Ties resolve to the lexicographically smallest pair, so the result is a
    deterministic reduction no matter how the scan is scheduled.
    """
    if state.n_active < 2:
        raise InputError(
            f"pair search needs at least 2 active variables, found {state.n_active}"
        )
    i, j, _ = _build_py._exhaustive_best(state.cov, state.active,
                                         state.measure == "correlation")
    return i, j


def merge_update(state: SimilarityState, rot) -> SimilarityState:
    """Apply one recorded rotation to the state, in place, and return it.

    The rotation's angle must diagonalize the current 2x2 block of its two
    indices (checked to a 1e-10 relative residual); the detail index is then
    retired. Rows and columns of the two rotated indices are the only entries
    touched, at O(p) cost.
    """
    a, b = int(rot.alpha), int(rot.beta)
    _check_pair(state, a, b)
    theta = float(rot.theta)
    if not np.isfinite(theta) or abs(theta) > _build_py.PI_4 + 1e-12:
        raise InputError(f"rotation angle {theta!r} outside [-pi/4, pi/4]")
    if {int(rot.sum_index), int(rot.detail_index)} != {a, b}:
        raise InputError(
            f"sum/detail indices ({rot.sum_index}, {rot.detail_index}) "
            f"must be the rotated pair ({a}, {b})"
        )
    caa = float(state.cov[a, a])
    cbb = float(state.cov[b, b])
    cab = float(state.cov[a, b])
    resid = _build_py.rotation_residual(caa, cbb, cab, theta)
    tol = _DIAG_RTOL * max(1.0, abs(caa) + abs(cbb))
    if abs(resid) > tol:
        raise InputError(
            f"angle {theta!r} does not diagonalize the ({a}, {b}) block "
            f"(residual {resid:.3e})"
        )
    _build_py.apply_rotation(state.cov, a, b, theta)
    va = float(state.cov[a, a])
    vb = float(state.cov[b, b])
    v_sum = vb if int(rot.sum_index) == b else va
    v_det = va if int(rot.sum_index) == b else vb
    if v_sum < v_det:
        raise InputError(
            f"sum index {rot.sum_index} has smaller post-rotation variance "
            f"({v_sum:.6g} < {v_det:.6g})"
        )
    state.active[int(rot.detail_index)] = 0
    return state
