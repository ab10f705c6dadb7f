"""Observation matrices: n rows of observations over p named variables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass
class DataMatrix:
    """An n x p matrix of observations with one name per variable (column).

    Parameters
    ----------
    values : array_like, shape (n, p)
        Observation rows. Coerced to a C-contiguous float64 array. Requires
        n >= 2 and p >= 2 and every cell finite.
    names : sequence of str, optional
        Column names, unique, one per variable. Defaults to x0..x{p-1}.
    """

    values: np.ndarray
    names: tuple[str, ...] = field(default=None)

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if arr.ndim != 2:
            raise InputError(f"expected a 2-d matrix, got {arr.ndim}-d")
        n, p = arr.shape
        if n < 2:
            raise InputError(f"need at least 2 observations, got {n}")
        if p < 2:
            raise InputError(f"need at least 2 variables, got {p}")
        bad = ~np.isfinite(arr)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise InputError(
                f"non-finite value {arr[r, c]!r} at row {r}, column {c}"
            )
        self.values = arr
        if self.names is None:
            self.names = tuple(f"x{j}" for j in range(p))
        else:
            names = tuple(str(s) for s in self.names)
            if len(names) != p:
                raise InputError(
                    f"got {len(names)} names for {p} variables"
                )
            if len(set(names)) != p:
                dup = next(s for s in names if names.count(s) > 1)
                raise InputError(f"duplicate variable name {dup!r}")
            self.names = names

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def as_data_matrix(source) -> DataMatrix:
    """Coerce an array or DataMatrix into a DataMatrix."""
    if isinstance(source, DataMatrix):
        return source
    return DataMatrix(np.asarray(source))
