"""Command-line interface.

Exit codes: 0 success, 1 input error (bad flags, malformed files, contract
violations), 2 internal failure. Commands that draw randomness (synth,
bench-recovery, bench-timing) require an explicit --seed; nothing reads
hidden configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

import numpy as np

from ._backend import BACKENDS, DEFAULT_BACKEND
from .basis import basis_at_level, top_k_features, transform_rows
from .bench import time_builds
from .build import build_tree, build_tree_naive
from .data import DataMatrix
from .errors import InputError, InvariantError, TreeletError
from .io import read_csv, read_tree, write_csv, write_json, write_tree
from .models import BlockModelSpec, loglog_slope, min_sample_experiment, sample
from .pipelines import PipelineConfig, cv_select, two_way_classify
from .similarity import MEASURES


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _int_list(text: str, flag: str) -> list[int]:
    try:
        vals = [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise InputError(f"{flag} expects comma-separated integers, got {text!r}")
    if not vals:
        raise InputError(f"{flag} expects at least one integer")
    return vals


def _parse_level(text):
    if text == "full":
        return "full"
    try:
        return int(text)
    except ValueError:
        raise InputError(f"--level expects an integer or 'full', got {text!r}")


def _read_label_column(path: str) -> list[str]:
    """Single-column CSV with a header; returns the raw label strings."""
    import csv as _csv

    try:
        with open(path, newline="") as fh:
            rows = list(_csv.reader(fh))
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}")
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one label")
    if any(len(r) != 1 for r in rows):
        raise InputError(f"{path}: labels must be a single-column CSV")
    return [r[0].strip() for r in rows[1:]]


def _labels_for_task(raw: list[str], task: str):
    """Resolve label strings into an array and a concrete task."""
    as_float = None
    try:
        as_float = np.array([float(v) for v in raw])
    except ValueError:
        pass
    if task == "auto":
        task = "regression" if as_float is not None else "classification"
    if task == "regression":
        if as_float is None:
            bad = next(v for v in raw if not _is_float(v))
            raise InputError(f"regression labels must be numeric, got {bad!r}")
        return as_float, task
    return np.array(raw), task


def _is_float(v: str) -> bool:
    try:
        float(v)
        return True
    except ValueError:
        return False


def build_parser() -> _Parser:
    p = _Parser(prog="treelet",
                description="Multiresolution bases from greedy pairwise rotations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="build a rotation hierarchy from a CSV")
    b.add_argument("--input", required=True, help="observations CSV with a header row")
    b.add_argument("--out", required=True, help="output tree JSON")
    b.add_argument("--measure", choices=MEASURES, default="correlation")
    b.add_argument("--level", default="full", help="number of merges, or 'full'")
    b.add_argument("--naive", action="store_true",
                   help="exhaustive pair rescan each level (same tree, slower)")
    b.add_argument("--backend", choices=("auto",) + BACKENDS, default="auto")
    b.add_argument("--stop-below", type=float, default=None,
                   help="stop before a merge whose best |similarity| is below this")

    t = sub.add_parser("transform", help="project observations onto a tree's basis")
    t.add_argument("--tree", required=True)
    t.add_argument("--input", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--level", default="full")
    t.add_argument("--inverse", action="store_true",
                   help="input holds coefficients; reconstruct observations")

    f = sub.add_parser("features", help="top-k basis columns by coefficient variance")
    f.add_argument("--tree", required=True)
    f.add_argument("--input", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--level", default="full")
    f.add_argument("--k", required=True, type=int)

    s = sub.add_parser("synth", help="sample observations from a block model spec")
    s.add_argument("--spec", required=True, help="block model JSON")
    s.add_argument("--n", required=True, type=int)
    s.add_argument("--seed", required=True, type=int)
    s.add_argument("--out", required=True)

    br = sub.add_parser("bench-recovery",
                        help="smallest n recovering block structure, per p")
    br.add_argument("--p", required=True, help="comma-separated p values")
    br.add_argument("--target", type=float, default=0.9)
    br.add_argument("--trials", type=int, default=50)
    br.add_argument("--blocks", type=int, default=4)
    br.add_argument("--within-corr", type=float, default=0.9)
    br.add_argument("--across-corr", type=float, default=0.0)
    br.add_argument("--noise-sd", type=float, default=0.25)
    br.add_argument("--measure", choices=MEASURES, default="correlation")
    br.add_argument("--n-cap", type=int, default=4096)
    br.add_argument("--seed", required=True, type=int)
    br.add_argument("--out", required=True)

    bt = sub.add_parser("bench-timing", help="naive vs incremental wall clock")
    bt.add_argument("--p", required=True, help="comma-separated p values")
    bt.add_argument("--n", type=int, default=64)
    bt.add_argument("--repeats", type=int, default=3)
    bt.add_argument("--measure", choices=MEASURES, default="correlation")
    bt.add_argument("--backends", default="auto",
                    help="comma-separated kernel backends to compare")
    bt.add_argument("--seed", required=True, type=int)
    bt.add_argument("--out", required=True)

    cv = sub.add_parser("cv", help="cross-validated (level, k) selection")
    cv.add_argument("--input", required=True)
    cv.add_argument("--labels", required=True, help="single-column CSV with header")
    cv.add_argument("--task", choices=("auto", "classification", "regression"),
                    default="auto")
    cv.add_argument("--measure", choices=MEASURES, default="correlation")
    cv.add_argument("--levels", required=True, help="comma-separated level grid")
    cv.add_argument("--ks", required=True, help="comma-separated k grid")
    cv.add_argument("--folds", type=int, default=5)
    cv.add_argument("--seed", type=int, default=0)
    cv.add_argument("--out", required=True)

    tw = sub.add_parser("two-way", help="two-branch semi-supervised labeling")
    tw.add_argument("--labeled", required=True, help="labeled observations CSV")
    tw.add_argument("--labels", required=True, help="labels for the labeled rows")
    tw.add_argument("--all", dest="all_rows", required=True,
                    help="all observations CSV, labeled rows first")
    tw.add_argument("--k", required=True, type=int)
    tw.add_argument("--measure", choices=MEASURES, default="correlation")
    tw.add_argument("--heldout-labels", default=None,
                    help="labels for the held-out rows, to score test error")
    tw.add_argument("--out", required=True)
    return p


def _cmd_build(args) -> int:
    dm = read_csv(args.input)
    builder = build_tree_naive if args.naive else build_tree
    tree = builder(dm, args.measure, _parse_level(args.level),
                   stop_below=args.stop_below, backend=args.backend)
    write_tree(args.out, tree)
    print(f"wrote {args.out}: p={tree.p} levels={tree.n_levels} measure={tree.measure}")
    return 0


def _cmd_transform(args) -> int:
    tree = read_tree(args.tree)
    dm = read_csv(args.input)
    lvl = _parse_level(args.level)
    basis = basis_at_level(tree, lvl)
    coeff_names = tuple(
        ("phi_" if kind == "scaling" else "psi_") + str(j)
        for j, kind in enumerate(basis.kinds)
    )
    if not args.inverse:
        z = transform_rows(tree, dm.values, basis.level, basis)
        write_csv(args.out, DataMatrix(z, coeff_names))
        print(f"wrote {args.out}: {dm.n} rows of {tree.p} coefficients at level {basis.level}")
    else:
        if dm.names != coeff_names:
            raise InputError(
                f"{args.input}: coefficient header does not match this tree at "
                f"level {basis.level} (expected columns {coeff_names[0]}..{coeff_names[-1]})"
            )
        x = dm.values @ basis.loadings.T
        names = tree.names if tree.names is not None else None
        write_csv(args.out, DataMatrix(x, names))
        print(f"wrote {args.out}: {dm.n} reconstructed rows")
    return 0


def _cmd_features(args) -> int:
    tree = read_tree(args.tree)
    dm = read_csv(args.input)
    fs = top_k_features(tree, dm, _parse_level(args.level), args.k)
    doc = {
        "run_config": {"tree": args.tree, "input": args.input,
                       "level": fs.level, "k": fs.k},
        "level": fs.level,
        "k": fs.k,
        "features": [
            {
                "rank": i,
                "column": int(fs.indices[i]),
                "kind": fs.kinds[i],
                "origin_level": int(fs.origin_levels[i]),
                "variance": float(fs.variances[i]),
                "loadings": [float(v) for v in fs.loadings[:, i]],
            }
            for i in range(fs.k)
        ],
    }
    write_json(args.out, doc)
    print(f"wrote {args.out}: top {fs.k} columns at level {fs.level}")
    return 0


_SPEC_KEYS = ("p", "partition", "within_corr", "across_corr", "variances", "noise_sd")


def _load_spec(path: str, seed: int) -> BlockModelSpec:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON: {e}")
    if not isinstance(doc, dict):
        raise InputError(f"{path}: spec must be a JSON object")
    unknown = sorted(set(doc) - set(_SPEC_KEYS))
    if unknown:
        hint = " (randomness comes from --seed)" if "seed" in unknown else ""
        raise InputError(f"{path}: unknown field(s) {unknown}{hint}")
    missing = sorted({"p", "partition", "within_corr"} - set(doc))
    if missing:
        raise InputError(f"{path}: missing field(s) {missing}")
    return BlockModelSpec(
        p=doc["p"],
        partition=doc["partition"],
        within_corr=doc["within_corr"],
        across_corr=doc.get("across_corr", 0.0),
        variances=doc.get("variances"),
        noise_sd=doc.get("noise_sd", 0.0),
        seed=seed,
    )


def _cmd_synth(args) -> int:
    spec = _load_spec(args.spec, args.seed)
    dm = sample(spec, args.n)
    write_csv(args.out, dm)
    print(f"wrote {args.out}: {dm.n} x {dm.p} samples (seed {args.seed})")
    return 0


def _cmd_bench_recovery(args) -> int:
    p_values = _int_list(args.p, "--p")
    template = {"n_blocks": args.blocks, "within_corr": args.within_corr,
                "across_corr": args.across_corr, "noise_sd": args.noise_sd}
    res = min_sample_experiment(p_values, template, target=args.target,
                                trials=args.trials, seed=args.seed,
                                n_cap=args.n_cap, measure=args.measure)
    solved = [(p, n) for p, n in sorted(res.n_star.items()) if n is not None]
    slope = loglog_slope([p for p, _ in solved], [n for _, n in solved]) \
        if len(solved) >= 2 else None
    doc = {
        "run_config": {"p": p_values, "target": args.target, "trials": args.trials,
                       "blocks": args.blocks, "within_corr": args.within_corr,
                       "across_corr": args.across_corr, "noise_sd": args.noise_sd,
                       "measure": args.measure, "n_cap": args.n_cap,
                       "seed": args.seed},
        "rows": [{"p": r.p, "n": r.n, "trials": r.trials,
                  "recovered_fraction": r.recovered_fraction} for r in res.rows],
        "n_star": {str(p): n for p, n in sorted(res.n_star.items())},
        "loglog_slope": slope,
    }
    write_json(args.out, doc)
    for p, n in sorted(res.n_star.items()):
        print(f"p={p:>5}  n*={'censored' if n is None else n}")
    if slope is not None:
        print(f"log-log slope of n* against p: {slope:.3f}")
    return 0


def _cmd_bench_timing(args) -> int:
    backends = tuple(tok.strip() for tok in args.backends.split(",") if tok.strip())
    rows = time_builds(_int_list(args.p, "--p"), n=args.n, seed=args.seed,
                       repeats=args.repeats, measure=args.measure,
                       backends=backends or ("auto",))
    doc = {
        "run_config": {"p": _int_list(args.p, "--p"), "n": args.n,
                       "repeats": args.repeats, "measure": args.measure,
                       "backends": list(backends), "seed": args.seed},
        "rows": rows,
    }
    write_json(args.out, doc)
    print(f"{'backend':>9} {'p':>6} {'covariance':>11} {'naive':>10} "
          f"{'incremental':>12} {'ratio':>8}")
    for r in rows:
        print(f"{r['backend']:>9} {r['p']:>6} {r['covariance_seconds']:>11.4f} "
              f"{r['naive_seconds']:>10.4f} {r['incremental_seconds']:>12.4f} "
              f"{r['naive_over_incremental']:>8.1f}")
    return 0


def _cmd_cv(args) -> int:
    dm = read_csv(args.input)
    y, task = _labels_for_task(_read_label_column(args.labels), args.task)
    config = PipelineConfig(level_grid=tuple(_int_list(args.levels, "--levels")),
                            k_grid=tuple(_int_list(args.ks, "--ks")),
                            measure=args.measure, folds=args.folds, seed=args.seed)
    sel = cv_select(dm, y, config, task=task)
    doc = {
        "run_config": {"input": args.input, "labels": args.labels,
                       "task": sel.task, "measure": args.measure,
                       "levels": list(config.level_grid), "ks": list(config.k_grid),
                       "folds": args.folds, "seed": args.seed},
        "task": sel.task,
        "best_level": sel.level,
        "best_k": sel.k,
        "cv_score": sel.score,
        "grid": [{"level": l, "k": k, "score": sel.scores[(l, k)]}
                 for l, k in sorted(sel.scores)],
        "skipped_folds": list(sel.skipped_folds),
    }
    write_json(args.out, doc)
    print(f"best level={sel.level} k={sel.k} {sel.task} score={sel.score:.4f}")
    return 0


def _cmd_two_way(args) -> int:
    dm_lab = read_csv(args.labeled)
    dm_all = read_csv(args.all_rows)
    y = np.array(_read_label_column(args.labels))
    yh = None
    if args.heldout_labels is not None:
        yh = np.array(_read_label_column(args.heldout_labels))
    res = two_way_classify(dm_lab, y, dm_all, args.k,
                           measure=args.measure, y_heldout=yh)
    sizes = [int((res.branch_assignment == b).sum()) for b in (0, 1)]
    doc = {
        "run_config": {"labeled": args.labeled, "labels": args.labels,
                       "all": args.all_rows, "k": args.k, "measure": args.measure},
        "class_of_branch": [str(c) for c in res.class_of_branch],
        "branch_sizes": sizes,
        "branch_assignment": [int(b) for b in res.branch_assignment],
        "predicted": [str(c) for c in res.predicted],
        "test_error": res.test_error,
        "flags": list(res.flags),
    }
    write_json(args.out, doc)
    err = "n/a" if res.test_error is None else f"{res.test_error:.4f}"
    print(f"branches {sizes[0]}/{sizes[1]} labeled "
          f"{res.class_of_branch[0]}/{res.class_of_branch[1]} test_error={err}")
    return 0


_DISPATCH = {
    "build": _cmd_build,
    "transform": _cmd_transform,
    "features": _cmd_features,
    "synth": _cmd_synth,
    "bench-recovery": _cmd_bench_recovery,
    "bench-timing": _cmd_bench_timing,
    "cv": _cmd_cv,
    "two-way": _cmd_two_way,
}


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _DISPATCH[args.command](args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except InvariantError as e:
        print(f"internal invariant failure: {e}", file=sys.stderr)
        return 2
    except TreeletError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
