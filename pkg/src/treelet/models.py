"""Block-structured covariance models and tree-recovery benchmarks."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .build import TreeletTree, build_tree
from .data import DataMatrix
from .errors import InputError
from .similarity import SimilarityState, state_from_covariance

# Relative cutoff below which population eigenvalues are treated as exact zeros,
# so singular blocks (within_corr = 1) sample exactly proportional columns.
_EIG_CUT = 1e-12


@dataclass(frozen=True)
class BlockModelSpec:
    """Population with constant correlation inside each block of variables.

    partition must cover 0..p-1 exactly once. The observation distribution is
    N(0, Sigma + noise_sd^2 I) with Sigma[i, j] = r_ij sqrt(v_i v_j), where
    r_ij is within_corr inside a block, across_corr across blocks, 1 on the
    diagonal. Construction fails if that matrix is not positive semidefinite.
    """

    p: int
    partition: tuple[tuple[int, ...], ...]
    within_corr: float
    across_corr: float = 0.0
    variances: tuple[float, ...] | None = None
    noise_sd: float = 0.0
    seed: object = None

    def __post_init__(self):
        if self.p < 2:
            raise InputError(f"need p >= 2, got {self.p}")
        part = tuple(tuple(int(i) for i in g) for g in self.partition)
        flat = sorted(i for g in part for i in g)
        if flat != list(range(self.p)):
            raise InputError("partition must cover 0..p-1 exactly once")
        if any(len(g) == 0 for g in part):
            raise InputError("partition contains an empty block")
        object.__setattr__(self, "partition", part)
        for name in ("within_corr", "across_corr"):
            v = getattr(self, name)
            if not np.isfinite(v) or not -1.0 <= v <= 1.0:
                raise InputError(f"{name} must be in [-1, 1], got {v!r}")
        if self.variances is None:
            object.__setattr__(self, "variances", (1.0,) * self.p)
        else:
            var = tuple(float(v) for v in self.variances)
            if len(var) != self.p:
                raise InputError(f"got {len(var)} variances for p={self.p}")
            if any(not np.isfinite(v) or v <= 0 for v in var):
                raise InputError("variances must be finite and positive")
            object.__setattr__(self, "variances", var)
        if not np.isfinite(self.noise_sd) or self.noise_sd < 0:
            raise InputError(f"noise_sd must be >= 0, got {self.noise_sd!r}")
        # PSD check at construction so a bad spec fails fast, not at sampling.
        w = np.linalg.eigvalsh(self.signal_covariance())
        if w[0] < -1e-10 * max(1.0, w[-1]):
            raise InputError(
                f"spec is not positive semidefinite (min eigenvalue {w[0]:.3e})"
            )

    def block_of(self) -> np.ndarray:
        out = np.empty(self.p, dtype=np.int64)
        for b, grp in enumerate(self.partition):
            for i in grp:
                out[i] = b
        return out

    def signal_covariance(self) -> np.ndarray:
        """Sigma without the observation noise term."""
        r = np.full((self.p, self.p), self.across_corr)
        for grp in self.partition:
            idx = np.array(grp)
            r[np.ix_(idx, idx)] = self.within_corr
        np.fill_diagonal(r, 1.0)
        sd = np.sqrt(np.asarray(self.variances))
        return r * np.outer(sd, sd)


def population_covariance(spec: BlockModelSpec, measure: str = "covariance") -> SimilarityState:
    """Exact covariance of the observation distribution, as a similarity state.

    Includes the noise_sd^2 diagonal term; with noise_sd = 0 this is the
    noise-free signal covariance exactly.
    """
    cov = spec.signal_covariance()
    if spec.noise_sd > 0:
        cov = cov + spec.noise_sd ** 2 * np.eye(spec.p)
    return state_from_covariance(cov, measure)


def sample(spec: BlockModelSpec, n: int) -> DataMatrix:
    """Draw n observations; same seed, same matrix, byte for byte.

    Uses numpy's default PCG64 generator seeded from spec.seed. The signal
    factor comes from an eigendecomposition with near-zero eigenvalues
    clipped, so a singular spec (within_corr = 1) yields exactly proportional
    columns when noise_sd = 0. Noise draws happen only when noise_sd > 0, so
    a noiseless spec consumes the same stream regardless of noise_sd's float
    representation.
    """
    if n < 2:
        raise InputError(f"need n >= 2 observations, got {n}")
    rng = np.random.default_rng(spec.seed)
    w, v = np.linalg.eigh(spec.signal_covariance())
    w = np.where(w < _EIG_CUT * max(w[-1], 1.0), 0.0, w)
    factor = v * np.sqrt(w)
    x = rng.standard_normal((n, spec.p)) @ factor.T
    if spec.noise_sd > 0:
        x = x + spec.noise_sd * rng.standard_normal((n, spec.p))
    return DataMatrix(x)


def recovery_score(tree: TreeletTree, partition: Sequence[Sequence[int]]) -> float:
    """How faithfully the merge order respects a true block partition.

    Replays the merges. A merge is structure-respecting when both groups sit
    inside the same true block, or both are unions of completed blocks
    (completed blocks may merge with each other while another block is still
    assembling: each block still forms a connected subtree). Returns 1.0 when
    every merge respects the structure; otherwise the fraction of
    within-block merges among the first p - #blocks merges, the number a
    perfect tree needs to complete all blocks.
    """
    part = [tuple(int(i) for i in g) for g in partition]
    flat = sorted(i for g in part for i in g)
    if flat != list(range(tree.p)):
        raise InputError("partition must cover 0..p-1 exactly once")
    block_of = {}
    size = {}
    for b, grp in enumerate(part):
        size[b] = len(grp)
        for i in grp:
            block_of[i] = b

    # Group state per active slot: ("partial", block, count) while a block is
    # assembling, ("whole",) once a group is a union of completed blocks.
    state = {}
    for i in range(tree.p):
        b = block_of[i]
        state[i] = ("whole",) if size[b] == 1 else ("partial", b, 1)

    needed = tree.p - len(part)
    within = 0
    clean = True
    for pos, rot in enumerate(tree.rotations):
        ga = state.pop(rot.alpha)
        gb = state.pop(rot.beta)
        if ga[0] == "partial" and gb[0] == "partial" and ga[1] == gb[1] >= 0:
            b = ga[1]
            cnt = ga[2] + gb[2]
            merged = ("whole",) if cnt == size[b] else ("partial", b, cnt)
            if pos < needed:
                within += 1
        elif ga[0] == "whole" and gb[0] == "whole":
            merged = ("whole",)
        else:
            # Mixed group: poisoned with block id -1 so it can never pass as
            # a clean partial block again.
            merged = ("partial", -1, 0)
            clean = False
        state[rot.sum_index] = merged

    if clean:
        return 1.0
    if needed <= 0:
        return 1.0
    return within / needed


@dataclass(frozen=True)
class RecoveryResult:
    """Recovered fraction over seeded trials at one (p, n) grid point."""

    p: int
    n: int
    trials: int
    recovered_fraction: float


@dataclass(frozen=True)
class MinSampleResult:
    """Output grid of min_sample_experiment.

    rows holds every (p, n) point evaluated during the search; n_star maps
    each p to the smallest n whose recovered fraction reached the target, or
    None when the cap was hit (censored).
    """

    target: float
    trials: int
    rows: tuple[RecoveryResult, ...]
    n_star: dict


def _equal_blocks(p: int, n_blocks: int) -> tuple[tuple[int, ...], ...]:
    if not 1 <= n_blocks <= p:
        raise InputError(f"need 1 <= n_blocks <= p, got {n_blocks} for p={p}")
    bounds = np.linspace(0, p, n_blocks + 1).astype(int)
    return tuple(tuple(range(bounds[b], bounds[b + 1])) for b in range(n_blocks))


def min_sample_experiment(p_values: Sequence[int], template: dict, *,
                          target: float = 0.9, trials: int = 50, seed: int = 0,
                          n_cap: int = 4096, measure: str = "correlation") -> MinSampleResult:
    """Smallest sample size at which trees recover the block structure.

    template supplies n_blocks, within_corr and optionally across_corr,
    noise_sd; each p gets n_blocks equal blocks. A (p, n) point runs `trials`
    independent draws, each with its own generator derived from
    (seed, p, n, trial), so results do not depend on evaluation order. The
    search doubles n until the recovered fraction reaches the target, then
    bisects; evaluations are cached and all of them are reported.
    """
    if not 0 < target <= 1:
        raise InputError(f"target must be in (0, 1], got {target!r}")
    if trials < 1:
        raise InputError(f"trials must be >= 1, got {trials}")
    allowed = {"n_blocks", "within_corr", "across_corr", "noise_sd"}
    unknown = sorted(set(template) - allowed)
    if unknown:
        raise InputError(f"unknown template field(s) {unknown}")
    missing = sorted({"n_blocks", "within_corr"} - set(template))
    if missing:
        raise InputError(f"template is missing {missing}")
    n_blocks = int(template["n_blocks"])
    within = float(template["within_corr"])
    across = float(template.get("across_corr", 0.0))
    noise = float(template.get("noise_sd", 0.0))

    rows: list[RecoveryResult] = []
    n_star: dict = {}
    for p in p_values:
        part = _equal_blocks(int(p), n_blocks)
        base = BlockModelSpec(p=int(p), partition=part, within_corr=within,
                              across_corr=across, noise_sd=noise)
        cache: dict[int, float] = {}

        def fraction(n: int) -> float:
            if n not in cache:
                hits = 0
                for t in range(trials):
                    spec = replace(base, seed=[seed, int(p), int(n), t])
                    tree = build_tree(sample(spec, n), measure)
                    if recovery_score(tree, part) == 1.0:
                        hits += 1
                cache[n] = hits / trials
                rows.append(RecoveryResult(int(p), int(n), trials, cache[n]))
            return cache[n]

        lo = None  # largest n seen below target
        hi = None  # smallest n seen at or above target
        n = 2
        while True:
            if fraction(n) >= target:
                hi = n
                break
            lo = n
            if n >= n_cap:
                break
            n = min(2 * n if n > 2 else 4, n_cap)
        if hi is None:
            n_star[int(p)] = None
            continue
        if lo is not None:
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if fraction(mid) >= target:
                    hi = mid
                else:
                    lo = mid
        n_star[int(p)] = hi
    return MinSampleResult(target, trials, tuple(rows), n_star)


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(xs, dtype=float)),
                            np.log(np.asarray(ys, dtype=float)), 1)[0])
