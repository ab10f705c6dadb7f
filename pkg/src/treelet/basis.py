"""Orthonormal bases materialized from a rotation hierarchy.

At level l the basis has p - l scaling columns (one per still-active
coordinate) and l detail columns, one frozen at each level. Columns live in
the original coordinate slots; a detail column never changes after the level
that retired it, which is what makes the detail sets of successive levels
nested. Signs follow one convention everywhere: the entry of largest
magnitude in each column is made positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .build import TreeletTree
from .data import as_data_matrix
from .errors import InputError


@dataclass
class TreeletBasis:
    """Basis at one level: loadings[:, j] is the function living in slot j."""

    level: int
    loadings: np.ndarray
    kinds: tuple[str, ...]
    origin_levels: np.ndarray
    signs: np.ndarray

    @property
    def p(self) -> int:
        return self.loadings.shape[0]

    @property
    def scaling_indices(self) -> np.ndarray:
        """Slots of the scaling columns, ascending."""
        return np.flatnonzero(np.asarray(self.kinds) == "scaling")

    @property
    def detail_indices(self) -> np.ndarray:
        """Slots of the detail columns, in retirement order (level 1 first)."""
        slots = np.flatnonzero(np.asarray(self.kinds) == "detail")
        return slots[np.argsort(self.origin_levels[slots], kind="stable")]


@dataclass
class Coefficients:
    """Expansion x = sum s_i phi_i + sum d_j psi_j, aligned with the basis.

    s follows scaling_indices (ascending slot), d follows detail_indices
    (retirement order).
    """

    s: np.ndarray
    d: np.ndarray


@dataclass
class FeatureSet:
    """Top-k basis columns by coefficient variance, rank order."""

    level: int
    k: int
    indices: np.ndarray
    kinds: tuple[str, ...]
    origin_levels: np.ndarray
    variances: np.ndarray
    loadings: np.ndarray
    coefficients: np.ndarray


def _resolve_basis_level(tree: TreeletTree, level) -> int:
    if level == "full" or level is None:
        lvl = tree.n_levels
    else:
        try:
            lvl = int(level)
        except (TypeError, ValueError):
            raise InputError(f"level must be an integer or 'full', got {level!r}")
    if not 1 <= lvl <= tree.n_levels:
        raise InputError(
            f"level {lvl} out of range 1..{tree.n_levels} for this tree"
        )
    return lvl


def basis_at_level(tree: TreeletTree, level) -> TreeletBasis:
    """Materialize the dense orthonormal basis after `level` rotations.

    Costs O(p^2 + level * p): identity start, two columns updated per
    rotation, then the sign convention applied to every column.
    """
    lvl = _resolve_basis_level(tree, level)
    p = tree.p
    loadings = np.eye(p)
    for rot in tree.rotations[:lvl]:
        c = math.cos(rot.theta)
        s = math.sin(rot.theta)
        a, b = rot.alpha, rot.beta
        ca = loadings[:, a].copy()
        cb = loadings[:, b].copy()
        loadings[:, a] = c * ca + s * cb
        loadings[:, b] = c * cb - s * ca
    signs = np.ones(p)
    for j in range(p):
        col = loadings[:, j]
        m = int(np.argmax(np.abs(col)))
        if col[m] < 0.0:
            signs[j] = -1.0
    loadings *= signs

    kinds = ["scaling"] * p
    origin = np.zeros(p, dtype=np.int64)
    for rot in tree.rotations[:lvl]:
        kinds[rot.detail_index] = "detail"
        origin[rot.detail_index] = rot.level
    return TreeletBasis(lvl, loadings, tuple(kinds), origin, signs)


def transform_rows(tree: TreeletTree, rows, level, basis: TreeletBasis | None = None) -> np.ndarray:
    """Coefficients (slot order) for each row, by replaying the rotations.

    Never multiplies by the dense basis: each rotation touches two columns of
    the row block, O(n * level) total, then the sign convention is applied.
    Pass a materialized basis to reuse its signs; it must be at the same level.
    """
    lvl = _resolve_basis_level(tree, level)
    z = np.array(rows, dtype=np.float64, copy=True)
    if z.ndim != 2 or z.shape[1] != tree.p:
        raise InputError(f"rows must be 2-d with {tree.p} columns, got shape {z.shape}")
    for rot in tree.rotations[:lvl]:
        c = math.cos(rot.theta)
        s = math.sin(rot.theta)
        a, b = rot.alpha, rot.beta
        za = z[:, a].copy()
        zb = z[:, b].copy()
        z[:, a] = c * za + s * zb
        z[:, b] = c * zb - s * za
    if basis is None:
        basis = basis_at_level(tree, lvl)
    elif basis.level != lvl:
        raise InputError(f"basis level {basis.level} does not match requested level {lvl}")
    z *= basis.signs
    return z


def _check_vector(x, p: int, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (p,):
        raise InputError(f"{what} must have shape ({p},), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise InputError(f"{what} contains non-finite values")
    return arr


def forward(basis: TreeletBasis, x) -> Coefficients:
    """Analysis: project one observation onto the basis."""
    arr = _check_vector(x, basis.p, "x")
    z = basis.loadings.T @ arr
    return Coefficients(s=z[basis.scaling_indices], d=z[basis.detail_indices])


def inverse(basis: TreeletBasis, coeffs: Coefficients) -> np.ndarray:
    """Synthesis: rebuild the observation from its coefficients."""
    sc = basis.scaling_indices
    de = basis.detail_indices
    s = np.asarray(coeffs.s, dtype=np.float64)
    d = np.asarray(coeffs.d, dtype=np.float64)
    if s.shape != (len(sc),):
        raise InputError(f"expected {len(sc)} scaling coefficients, got shape {s.shape}")
    if d.shape != (len(de),):
        raise InputError(f"expected {len(de)} detail coefficients, got shape {d.shape}")
    z = np.zeros(basis.p)
    z[sc] = s
    z[de] = d
    return basis.loadings @ z


def top_k_features(tree: TreeletTree, data, level, k: int) -> FeatureSet:
    """The k basis columns with the largest coefficient variance over data.

    Variance uses the same 1/n normalization as the covariance engine, so
    with k = p the selected variances sum to the total data variance. Ties
    rank the smaller column slot first.
    """
    dm = as_data_matrix(data)
    if dm.p != tree.p:
        raise InputError(f"data has {dm.p} variables, tree expects {tree.p}")
    if not 1 <= k <= tree.p:
        raise InputError(f"k {k} out of range 1..{tree.p}")
    lvl = _resolve_basis_level(tree, level)
    basis = basis_at_level(tree, lvl)
    z = transform_rows(tree, dm.values, lvl, basis)
    variances = z.var(axis=0)
    order = np.argsort(-variances, kind="stable")
    top = order[:k]
    return FeatureSet(
        level=lvl,
        k=k,
        indices=top,
        kinds=tuple(basis.kinds[j] for j in top),
        origin_levels=basis.origin_levels[top],
        variances=variances[top],
        loadings=basis.loadings[:, top],
        coefficients=z[:, top],
    )
