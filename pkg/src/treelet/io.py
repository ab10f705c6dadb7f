"""CSV and tree-document input/output.

All writers are atomic (write to a temp file, then rename) and deterministic:
the same tree and flags always produce byte-identical files. Numbers are
rendered with Python's shortest round-trip repr, so every float survives a
write/read cycle exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np

from ._build_py import PI_4
from .build import RotationRecord, TreeletTree
from .data import DataMatrix
from .errors import InputError
from .similarity import MEASURES

FORMAT_VERSION = "1"
TIE_RULE = "lex"

_TOP_KEYS = ("format_version", "p", "measure", "tie_rule", "rotations", "metadata")
_ROT_KEYS = ("level", "alpha", "beta", "theta", "sum_index")
_META_KEYS = ("seed", "input_hash", "flags")


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a same-directory temp file and rename."""
    target = os.path.abspath(path)
    d = os.path.dirname(target)
    try:
        fd, tmp = tempfile.mkstemp(dir=d, prefix=os.path.basename(target) + ".")
    except OSError as e:
        raise InputError(f"cannot write {path}: {e}")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except OSError as e:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise InputError(f"cannot write {path}: {e}")


def canonical_json(obj) -> str:
    """Deterministic JSON text: fixed key order, round-trip-exact floats."""
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path: str, obj) -> None:
    atomic_write_text(path, canonical_json(obj))


def read_csv(path: str) -> DataMatrix:
    """Parse a CSV with a header row of variable names.

    Rejects ragged rows, non-numeric and non-finite cells (with row/column
    coordinates), and duplicate names.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}")
    if not rows:
        raise InputError(f"{path}: empty file")
    names = [c.strip() for c in rows[0]]
    p = len(names)
    data = np.empty((len(rows) - 1, p))
    for r, row in enumerate(rows[1:]):
        if len(row) != p:
            raise InputError(f"{path}: row {r} has {len(row)} cells, expected {p}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise InputError(
                    f"{path}: row {r}, column {c} ({names[c]!r}): not a number: {cell!r}"
                )
            if not math.isfinite(v):
                raise InputError(
                    f"{path}: row {r}, column {c} ({names[c]!r}): non-finite value {cell!r}"
                )
            data[r, c] = v
    try:
        return DataMatrix(data, names)
    except InputError as e:
        raise InputError(f"{path}: {e}")


def write_csv(path: str, dm: DataMatrix) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(dm.names)
    for row in dm.values:
        w.writerow([repr(float(v)) for v in row])
    atomic_write_text(path, buf.getvalue())


def tree_document(tree: TreeletTree, seed=None) -> dict:
    """The serializable form of a tree; see parse_tree for the field contract."""
    sims = np.asarray(tree.similarities)
    flags: dict = {"zero_similarity_merges": int(np.count_nonzero(sims == 0.0))}
    if tree.stop_below is not None:
        flags["stop_below"] = float(tree.stop_below)
    if tree.n_obs is not None:
        flags["n_obs"] = int(tree.n_obs)
    if tree.names is not None:
        flags["variable_names"] = list(tree.names)
    meta: dict = {}
    if seed is not None:
        meta["seed"] = seed
    meta["input_hash"] = tree.input_hash or ""
    meta["flags"] = flags
    return {
        "format_version": FORMAT_VERSION,
        "p": tree.p,
        "measure": tree.measure,
        "tie_rule": TIE_RULE,
        "rotations": [
            {"level": r.level, "alpha": r.alpha, "beta": r.beta,
             "theta": float(r.theta), "sum_index": r.sum_index}
            for r in tree.rotations
        ],
        "metadata": meta,
    }


def serialize_tree(tree: TreeletTree, seed=None) -> str:
    return canonical_json(tree_document(tree, seed))


def write_tree(path: str, tree: TreeletTree, seed=None) -> None:
    atomic_write_text(path, serialize_tree(tree, seed))


def _req_int(doc: dict, key: str, where: str) -> int:
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise InputError(f"{where}: {key} must be an integer, got {v!r}")
    return v


def _check_keys(doc: dict, allowed, required, where: str) -> None:
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise InputError(f"{where}: unknown field(s) {unknown}")
    missing = sorted(set(required) - set(doc))
    if missing:
        raise InputError(f"{where}: missing field(s) {missing}")


def parse_tree(text: str) -> TreeletTree:
    """Strict parse of a tree document.

    Unknown fields anywhere in the document are rejected (version drift must
    fail loudly, not silently). Thetas are recovered exactly. Per-level
    similarities are in-memory diagnostics, not persisted, so a parsed tree
    carries NaNs there.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid JSON: {e}")
    if not isinstance(doc, dict):
        raise InputError("tree document must be a JSON object")
    _check_keys(doc, _TOP_KEYS, _TOP_KEYS, "tree document")
    if doc["format_version"] != FORMAT_VERSION:
        raise InputError(
            f"unsupported format_version {doc['format_version']!r}, expected {FORMAT_VERSION!r}"
        )
    if doc["tie_rule"] != TIE_RULE:
        raise InputError(f"unsupported tie_rule {doc['tie_rule']!r}, expected {TIE_RULE!r}")
    p = _req_int(doc, "p", "tree document")
    if p < 2:
        raise InputError(f"p must be >= 2, got {p}")
    measure = doc["measure"]
    if measure not in MEASURES:
        raise InputError(f"unknown measure {measure!r}; expected one of {MEASURES}")
    rots_doc = doc["rotations"]
    if not isinstance(rots_doc, list) or len(rots_doc) > p - 1:
        raise InputError(f"rotations must be a list of at most {p - 1} records")

    rotations = []
    retired: set[int] = set()
    for k, rd in enumerate(rots_doc):
        where = f"rotation {k}"
        if not isinstance(rd, dict):
            raise InputError(f"{where}: must be a JSON object")
        _check_keys(rd, _ROT_KEYS, _ROT_KEYS, where)
        level = _req_int(rd, "level", where)
        alpha = _req_int(rd, "alpha", where)
        beta = _req_int(rd, "beta", where)
        sum_index = _req_int(rd, "sum_index", where)
        theta = rd["theta"]
        if isinstance(theta, bool) or not isinstance(theta, (int, float)):
            raise InputError(f"{where}: theta must be a number, got {theta!r}")
        theta = float(theta)
        if level != k + 1:
            raise InputError(f"{where}: level {level}, expected {k + 1} (consecutive from 1)")
        if not 0 <= alpha < beta < p:
            raise InputError(f"{where}: need 0 <= alpha < beta < p, got ({alpha}, {beta})")
        if alpha in retired or beta in retired:
            dead = alpha if alpha in retired else beta
            raise InputError(f"{where}: index {dead} was already retired as a detail")
        if sum_index not in (alpha, beta):
            raise InputError(f"{where}: sum_index {sum_index} not in the pair ({alpha}, {beta})")
        if not math.isfinite(theta) or abs(theta) > PI_4 + 1e-12:
            raise InputError(f"{where}: theta {theta!r} outside [-pi/4, pi/4]")
        detail = alpha if sum_index == beta else beta
        retired.add(detail)
        rotations.append(RotationRecord(level=level, alpha=alpha, beta=beta,
                                        theta=theta, sum_index=sum_index,
                                        detail_index=detail))

    meta = doc["metadata"]
    if not isinstance(meta, dict):
        raise InputError("metadata must be a JSON object")
    _check_keys(meta, _META_KEYS, ("input_hash", "flags"), "metadata")
    flags = meta["flags"]
    if not isinstance(flags, dict):
        raise InputError("metadata.flags must be a JSON object")
    names = flags.get("variable_names")
    if names is not None:
        if not isinstance(names, list) or len(names) != p:
            raise InputError(f"variable_names must list {p} names")
        names = tuple(str(s) for s in names)
    n_obs = flags.get("n_obs")
    stop_below = flags.get("stop_below")

    return TreeletTree(
        p=p,
        measure=measure,
        rotations=tuple(rotations),
        root_active=frozenset(range(p)) - frozenset(retired),
        similarities=np.full(len(rotations), np.nan),
        names=names,
        n_obs=None if n_obs is None else int(n_obs),
        input_hash=str(meta["input_hash"]) or None,
        stop_below=None if stop_below is None else float(stop_below),
    )


def read_tree(path: str) -> TreeletTree:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}")
    try:
        return parse_tree(text)
    except InputError as e:
        raise InputError(f"{path}: {e}")
