"""Feature-selection pipelines built on the hierarchy.

Both entry points keep tree construction and feature ranking strictly on
labeled training rows; held-out or unlabeled rows only ever pass through an
already-fitted transform. Tests pin that down by replacing held-out rows with
garbage and checking the trees byte for byte.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .basis import basis_at_level, transform_rows
from .build import TreeletTree, build_tree
from .data import as_data_matrix
from .errors import InputError
from .similarity import _check_measure

TASKS = ("classification", "regression")


@dataclass(frozen=True)
class PipelineConfig:
    """Grid and protocol for cv_select.

    level_grid and k_grid are the candidate (tree level, feature count)
    values; folds rows are assigned by a seeded shuffle so reruns agree.
    """

    level_grid: tuple[int, ...]
    k_grid: tuple[int, ...]
    measure: str = "correlation"
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        _check_measure(self.measure)
        for name in ("level_grid", "k_grid"):
            grid = tuple(int(v) for v in getattr(self, name))
            if not grid or any(v < 1 for v in grid):
                raise InputError(f"{name} must be non-empty positive integers")
            object.__setattr__(self, name, grid)
        if self.folds < 2:
            raise InputError(f"need at least 2 folds, got {self.folds}")


@dataclass
class CvSelection:
    """Winning grid point with the full mean-score table."""

    level: int
    k: int
    score: float
    task: str
    scores: dict
    skipped_folds: tuple[int, ...]


def _ridge_score(f_tr, y_tr, f_te, y_te) -> float:
    """R^2 of least squares with a small trace-scaled ridge."""
    mu_f = f_tr.mean(axis=0)
    mu_y = y_tr.mean()
    a = f_tr - mu_f
    g = a.T @ a
    tr = float(np.trace(g))
    lam = 1e-8 * (tr / g.shape[0]) if tr > 0 else 1e-8
    beta = np.linalg.solve(g + lam * np.eye(g.shape[0]), a.T @ (y_tr - mu_y))
    pred = (f_te - mu_f) @ beta + mu_y
    ss_res = float(((y_te - pred) ** 2).sum())
    ss_tot = float(((y_te - y_te.mean()) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def _centroid_score(f_tr, y_tr, f_te, y_te) -> float:
    """Accuracy of nearest class centroid; distance ties keep class order."""
    classes = np.unique(y_tr)
    cents = np.stack([f_tr[y_tr == c].mean(axis=0) for c in classes])
    d2 = ((f_te[:, None, :] - cents[None, :, :]) ** 2).sum(axis=2)
    pred = classes[np.argmin(d2, axis=1)]
    return float((pred == y_te).mean())


def cv_select(data, y, config: PipelineConfig, task: str = "auto") -> CvSelection:
    """Pick (level, k) by k-fold cross-validation.

    Each fold builds its own tree from the training rows only, ranks columns
    by training-fold coefficient variance, fits a nearest-centroid classifier
    or ridge least squares, and scores the held-out rows (accuracy or R^2).
    The winner has the best mean score; ties prefer smaller k, then smaller
    level. Degenerate folds (single training class, constant y) are skipped
    with a warning; if every fold is degenerate the call fails.
    """
    dm = as_data_matrix(data)
    y_arr = np.asarray(y)
    if y_arr.shape != (dm.n,):
        raise InputError(f"y must have shape ({dm.n},), got {y_arr.shape}")
    if task == "auto":
        task = "regression" if y_arr.dtype.kind == "f" else "classification"
    if task not in TASKS:
        raise InputError(f"unknown task {task!r}; expected one of {TASKS} or 'auto'")
    if task == "regression":
        y_arr = y_arr.astype(np.float64)
        if not np.isfinite(y_arr).all():
            raise InputError("y contains non-finite values")

    levels = sorted(set(config.level_grid))
    ks = sorted(set(config.k_grid))
    if levels[-1] > dm.p - 1:
        raise InputError(f"level {levels[-1]} out of range 1..{dm.p - 1}")
    if ks[-1] > dm.p:
        raise InputError(f"k {ks[-1]} out of range 1..{dm.p}")
    if config.folds > dm.n:
        raise InputError(f"{config.folds} folds need at least {config.folds} rows, got {dm.n}")

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(dm.n)
    fold_rows = np.array_split(perm, config.folds)

    per_point: dict[tuple[int, int], list[float]] = {(l, k): [] for l in levels for k in ks}
    skipped: list[int] = []
    for f, test_idx in enumerate(fold_rows):
        mask = np.ones(dm.n, dtype=bool)
        mask[test_idx] = False
        train_idx = np.flatnonzero(mask)
        if len(train_idx) < 2:
            raise InputError(f"fold {f} leaves fewer than 2 training rows")
        x_tr = dm.values[train_idx]
        y_tr = y_arr[train_idx]
        x_te = dm.values[np.sort(test_idx)]
        y_te = y_arr[np.sort(test_idx)]
        if np.unique(y_tr).size < 2:
            warnings.warn(f"fold {f} skipped: training labels are constant")
            skipped.append(f)
            continue
        if task == "regression" and np.unique(y_te).size < 2:
            warnings.warn(f"fold {f} skipped: held-out y is constant, R^2 undefined")
            skipped.append(f)
            continue

        tree = build_tree(x_tr, config.measure, level=levels[-1])
        for lvl in levels:
            z_tr = transform_rows(tree, x_tr, lvl)
            z_te = transform_rows(tree, x_te, lvl)
            order = np.argsort(-z_tr.var(axis=0), kind="stable")
            for k in ks:
                idx = order[:k]
                if task == "regression":
                    score = _ridge_score(z_tr[:, idx], y_tr, z_te[:, idx], y_te)
                else:
                    score = _centroid_score(z_tr[:, idx], y_tr, z_te[:, idx], y_te)
                per_point[(lvl, k)].append(score)

    if len(skipped) == config.folds:
        raise InputError("every fold was degenerate; nothing to cross-validate")

    means = {pt: float(np.mean(v)) for pt, v in per_point.items()}
    best_pt = None
    best = -np.inf
    for lvl, k in sorted(means, key=lambda pt: (pt[1], pt[0])):
        if means[(lvl, k)] > best:
            best = means[(lvl, k)]
            best_pt = (lvl, k)
    return CvSelection(level=best_pt[0], k=best_pt[1], score=best, task=task,
                       scores=means, skipped_folds=tuple(skipped))


def two_branch_cut(tree: TreeletTree) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Undo the last merge of a full-level tree: the two main branches.

    Returns the leaf sets of the final rotation's two children, each sorted;
    with p = 2 the branches are the two singletons.
    """
    if tree.p < 2 or tree.n_levels != tree.p - 1:
        raise InputError(
            f"two-branch cut needs a full-level tree "
            f"({tree.p - 1} rotations for p={tree.p}, found {tree.n_levels})"
        )
    members = {i: [i] for i in range(tree.p)}
    for rot in tree.rotations[:-1]:
        grp = members.pop(rot.alpha) + members.pop(rot.beta)
        members[rot.sum_index] = grp
    last = tree.rotations[-1]
    return tuple(sorted(members[last.alpha])), tuple(sorted(members[last.beta]))


@dataclass
class TwoWayResult:
    """Branch partition of all samples plus the vote-derived labeling."""

    branch_assignment: np.ndarray
    class_of_branch: tuple
    predicted: np.ndarray
    test_error: float | None
    flags: tuple[str, ...]
    variable_tree: TreeletTree
    sample_tree: TreeletTree
    feature_indices: np.ndarray


def two_way_classify(x_labeled, y_labeled, x_all, k: int, *,
                     measure: str = "correlation", y_heldout=None) -> TwoWayResult:
    """Split all samples into two branches and label each by majority vote.

    The variable tree and the feature ranking come from the labeled rows
    only. All samples (x_all must start with the labeled rows, in order) are
    projected onto the k largest-variance basis columns; under the
    correlation measure the profiles are standardized per feature. A second
    full-level tree over the transposed profiles is cut at its last merge
    into two branches; each branch takes the majority label of its labeled
    members (a tied vote takes the first class in sorted order and is
    flagged; a branch with no labeled members takes the complement of the
    other branch's label and is flagged). If labels for the held-out rows
    are supplied, test_error is the misclassified fraction on those rows.
    """
    _check_measure(measure)
    dm_lab = as_data_matrix(x_labeled)
    dm_all = as_data_matrix(x_all)
    y_lab = np.asarray(y_labeled)
    n_lab = dm_lab.n
    if y_lab.shape != (n_lab,):
        raise InputError(f"y_labeled must have shape ({n_lab},), got {y_lab.shape}")
    classes = np.unique(y_lab)
    if classes.size != 2:
        raise InputError(f"need exactly 2 classes, got {classes.size}")
    if dm_all.p != dm_lab.p:
        raise InputError(f"x_all has {dm_all.p} variables, labeled data has {dm_lab.p}")
    if dm_all.n < n_lab:
        raise InputError("x_all has fewer rows than the labeled set")
    if not np.array_equal(dm_all.values[:n_lab], dm_lab.values):
        raise InputError("x_all must start with the labeled rows, in order")
    if not 2 <= k <= dm_lab.p:
        raise InputError(
            f"k must be in 2..{dm_lab.p}: the sample tree needs at least "
            f"two features as observations, got k={k}"
        )

    variable_tree = build_tree(dm_lab, measure, level="full")
    vbasis = basis_at_level(variable_tree, "full")
    z_lab = transform_rows(variable_tree, dm_lab.values, "full", vbasis)
    order = np.argsort(-z_lab.var(axis=0), kind="stable")
    feat = order[:k]
    profiles = transform_rows(variable_tree, dm_all.values, "full", vbasis)[:, feat]

    flags: list[str] = []
    if measure == "correlation":
        mu = profiles.mean(axis=0)
        sd = profiles.std(axis=0)
        dead = sd <= 0.0
        if dead.any():
            flags.append("constant-feature")
        sd = np.where(dead, 1.0, sd)
        profiles = (profiles - mu) / sd
        profiles[:, dead] = 0.0

    sample_tree = build_tree(profiles.T, measure, level="full")
    br_a, br_b = two_branch_cut(sample_tree)
    assign = np.zeros(dm_all.n, dtype=np.int64)
    assign[list(br_b)] = 1

    labeled_branch = assign[:n_lab]
    class_of: list = [None, None]
    for b in (0, 1):
        members_y = y_lab[labeled_branch == b]
        if members_y.size == 0:
            flags.append("empty-branch")
            continue
        n0 = int((members_y == classes[0]).sum())
        n1 = members_y.size - n0
        if n0 == n1:
            flags.append("branch-tie")
            class_of[b] = classes[0]
        else:
            class_of[b] = classes[0] if n0 > n1 else classes[1]
    for b in (0, 1):
        if class_of[b] is None:
            other = class_of[1 - b]
            class_of[b] = classes[0] if other == classes[1] else classes[1]
    if class_of[0] == class_of[1]:
        flags.append("single-class-labeling")

    predicted = np.array([class_of[b] for b in assign])
    test_error = None
    if y_heldout is not None:
        yh = np.asarray(y_heldout)
        if yh.shape != (dm_all.n - n_lab,):
            raise InputError(
                f"y_heldout must have shape ({dm_all.n - n_lab},), got {yh.shape}"
            )
        if yh.size == 0:
            raise InputError("y_heldout given but x_all has no held-out rows")
        test_error = float((predicted[n_lab:] != yh).mean())

    return TwoWayResult(
        branch_assignment=assign,
        class_of_branch=(class_of[0], class_of[1]),
        predicted=predicted,
        test_error=test_error,
        flags=tuple(dict.fromkeys(flags)),
        variable_tree=variable_tree,
        sample_tree=sample_tree,
        feature_indices=feat,
    )
