"""Reference kernels for the greedy merge loop, in pure numpy.

This module is the single source of the numeric formulas: the compiled kernel
in _build_core.pyx mirrors these expression trees operation for operation (and
is built with FP contraction off), so both backends produce bit-identical
rotation sequences. Keep any change here in lockstep with the .pyx file.

All searches resolve ties lexicographically: the winning pair is the one with
the smallest first index, then the smallest second index. Scans therefore run
in ascending index order with strict > comparisons, and vectorized argmax
calls rely on numpy's first-occurrence semantics.
"""

from __future__ import annotations

import math

import numpy as np

PI_4 = math.pi / 4.0
PI_2 = math.pi / 2.0


def rotation_angle(caa: float, cbb: float, cab: float) -> float:
    """Jacobi angle diagonalizing [[caa, cab], [cab, cbb]], folded to |theta| <= pi/4."""
    theta = 0.5 * math.atan2(2.0 * cab, caa - cbb)
    if theta > PI_4:
        theta = theta - PI_2
    elif theta < -PI_4:
        theta = theta + PI_2
    return theta


def post_variances(caa: float, cbb: float, cab: float, theta: float) -> tuple[float, float]:
    """Diagonal entries of the 2x2 block after rotating by theta."""
    c = math.cos(theta)
    s = math.sin(theta)
    va = c * c * caa + 2.0 * c * s * cab + s * s * cbb
    vb = s * s * caa - 2.0 * c * s * cab + c * c * cbb
    return va, vb


def rotation_residual(caa: float, cbb: float, cab: float, theta: float) -> float:
    """Off-diagonal entry of the 2x2 block after rotating by theta."""
    c = math.cos(theta)
    s = math.sin(theta)
    return cab * (c * c - s * s) - c * s * (caa - cbb)


def apply_rotation(cov: np.ndarray, a: int, b: int, theta: float) -> None:
    """Rotate rows/columns a and b of cov in place.

    New coordinates are x_a' = c x_a + s x_b and x_b' = c x_b - s x_a; every
    row (retired ones included, so a rebuild from explicitly rotated data
    matches entrywise) gets its a and b entries rotated, the 2x2 block is
    written from the closed forms, and the (a, b) entry is set to exactly 0.
    """
    c = math.cos(theta)
    s = math.sin(theta)
    caa = cov[a, a]
    cbb = cov[b, b]
    cab = cov[a, b]
    ra = cov[:, a].copy()
    rb = cov[:, b].copy()
    na = c * ra + s * rb
    nb = c * rb - s * ra
    cov[:, a] = na
    cov[a, :] = na
    cov[:, b] = nb
    cov[b, :] = nb
    cov[a, a] = c * c * caa + 2.0 * c * s * cab + s * s * cbb
    cov[b, b] = s * s * caa - 2.0 * c * s * cab + c * c * cbb
    cov[a, b] = 0.0
    cov[b, a] = 0.0


def abs_sim_full(cov: np.ndarray, active: np.ndarray, use_corr: bool) -> tuple[np.ndarray, np.ndarray]:
    """|similarity| over the active submatrix; diagonal set to -1.

    Returns (sim, act) where sim is len(act) x len(act) and act lists the
    active indices ascending. Correlation is |c_ij| / sqrt(c_ii c_jj), clamped
    to 1; any nonpositive variance zeroes its row and column.
    """
    act = np.flatnonzero(active)
    sub = cov[np.ix_(act, act)]
    if use_corr:
        d = np.diagonal(sub).copy()
        with np.errstate(divide="ignore", invalid="ignore"):
            sim = np.abs(sub) / np.sqrt(np.outer(d, d))
        sim = np.minimum(sim, 1.0)
        bad = d <= 0.0
        sim[bad, :] = 0.0
        sim[:, bad] = 0.0
    else:
        sim = np.abs(sub)
    np.fill_diagonal(sim, -1.0)
    return sim, act


def row_abs_sims(cov: np.ndarray, i: int, js: np.ndarray, use_corr: bool) -> np.ndarray:
    """|similarity| between variable i and each index in js."""
    c = cov[i, js]
    if not use_corr:
        return np.abs(c)
    vi = cov[i, i]
    vj = cov[js, js]
    if vi <= 0.0:
        return np.zeros(len(js))
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.abs(c) / np.sqrt(vi * vj)
    vals = np.minimum(vals, 1.0)
    vals[vj <= 0.0] = 0.0
    return vals


def _row_scan(cov, active, i, use_corr):
    js = np.flatnonzero(active)
    js = js[js != i]
    vals = row_abs_sims(cov, i, js, use_corr)
    k = int(np.argmax(vals))
    return float(vals[k]), int(js[k])


def _init_cache(cov, active, use_corr, row_val, row_j):
    sim, act = abs_sim_full(cov, active, use_corr)
    row_val[act] = sim.max(axis=1)
    row_j[act] = act[np.argmax(sim, axis=1)]


def _exhaustive_best(cov, active, use_corr):
    sim, act = abs_sim_full(cov, active, use_corr)
    flat = int(np.argmax(sim))
    i_loc, j_loc = divmod(flat, len(act))
    return int(act[i_loc]), int(act[j_loc]), float(sim[i_loc, j_loc])


def _repair_cache(cov, active, use_corr, row_val, row_j, a, b, su, de):
    row_val[de] = -1.0
    row_j[de] = -1
    act = np.flatnonzero(active)
    others = act[act != su]
    stale = (row_j[others] == a) | (row_j[others] == b)
    for i in others[stale]:
        row_val[i], row_j[i] = _row_scan(cov, active, i, use_corr)
    row_val[su], row_j[su] = _row_scan(cov, active, su, use_corr)
    fresh = others[~stale]
    if len(fresh):
        vals = row_abs_sims(cov, su, fresh, use_corr)
        take = (vals > row_val[fresh]) | ((vals == row_val[fresh]) & (su < row_j[fresh]))
        idx = fresh[take]
        row_val[idx] = vals[take]
        row_j[idx] = su


def run_build(cov, active, use_corr, n_levels, exhaustive, stop_below):
    """Run n_levels greedy merges, mutating cov and active in place.

    cov : (p, p) float64, C-contiguous; rotated in place level by level.
    active : (p,) uint8; the detail index of each merge is zeroed.
    use_corr : similarity is clamped |correlation| rather than |covariance|.
    exhaustive : rescan all active pairs each level instead of using the
        cached per-row maxima (the O(Lp^2) vs O(Lp) + repairs split; the
        cache degrades to a full rescan only when every cached argmax points
        at the merged pair, e.g. on exchangeable data).
    stop_below : stop before any merge whose best |similarity| is strictly
        below this value; pass -1.0 to disable.

    Returns (alphas, betas, thetas, sum_is_beta, sims) arrays trimmed to the
    number of merges performed. sims holds the signed similarity of each
    merged pair.
    """
    p = cov.shape[0]
    alphas = np.zeros(n_levels, dtype=np.int64)
    betas = np.zeros(n_levels, dtype=np.int64)
    thetas = np.zeros(n_levels)
    sum_is_beta = np.zeros(n_levels, dtype=np.uint8)
    sims = np.zeros(n_levels)

    row_val = np.full(p, -1.0)
    row_j = np.full(p, -1, dtype=np.int64)
    if not exhaustive:
        _init_cache(cov, active, use_corr, row_val, row_j)

    count = 0
    for k in range(n_levels):
        if exhaustive:
            a, b, best = _exhaustive_best(cov, active, use_corr)
        else:
            act = np.flatnonzero(active)
            i0 = int(act[np.argmax(row_val[act])])
            a, b, best = i0, int(row_j[i0]), float(row_val[i0])
            if b < a:
                a, b = b, a
        if best < stop_below:
            break
        cab = cov[a, b]
        theta = rotation_angle(cov[a, a], cov[b, b], cab)
        apply_rotation(cov, a, b, theta)
        beta_is_sum = cov[b, b] > cov[a, a]
        de = a if beta_is_sum else b
        active[de] = 0
        alphas[k] = a
        betas[k] = b
        thetas[k] = theta
        sum_is_beta[k] = beta_is_sum
        sims[k] = -best if cab < 0.0 else best
        count = k + 1
        if not exhaustive and count < n_levels:
            su = b if beta_is_sum else a
            _repair_cache(cov, active, use_corr, row_val, row_j, a, b, su, de)

    return (alphas[:count], betas[:count], thetas[:count],
            sum_is_beta[:count], sims[:count])
