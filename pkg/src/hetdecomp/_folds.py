"""Random K-fold partitions, optionally stratified by treatment."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Assignment of each row to one of ``K`` folds."""

    fold_of: np.ndarray
    K: int
    seed: int | None = None
    stratified: bool = False

    def __post_init__(self):
        fold_of = np.array(self.fold_of, dtype=np.int64)
        fold_of.setflags(write=False)
        object.__setattr__(self, "fold_of", fold_of)

    @property
    def n(self) -> int:
        return self.fold_of.shape[0]

    def test_rows(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == f)

    def train_rows(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != f)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.K)


def make_folds(n: int, K: int, seed=None, stratify_by=None) -> FoldPlan:
    """Uniform random partition of ``range(n)`` into ``K`` folds.

    With ``stratify_by`` (integer class labels), each class is dealt out
    round-robin so every fold receives its share of each class within one
    row, while total fold sizes still differ by at most one. If some class
    has fewer than ``K`` rows the plan falls back to an unstratified
    partition and warns.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    if K > n:
        raise ValueError(f"K={K} exceeds the number of rows n={n}")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    if stratify_by is not None:
        labels = np.asarray(stratify_by)
        if labels.shape != (n,):
            raise ValueError("stratify_by must have one label per row")
        classes, counts = np.unique(labels, return_counts=True)
        if counts.min() < K:
            warnings.warn(
                f"cannot stratify: class {classes[counts.argmin()].item()!r} has {counts.min()} rows < K={K}; "
                "using an unstratified partition",
                stacklevel=2,
            )
        else:
            offset = 0
            for c in classes:
                rows = rng.permutation(np.flatnonzero(labels == c))
                fold_of[rows] = (offset + np.arange(rows.size)) % K
                offset = (offset + rows.size) % K
            return FoldPlan(fold_of, K, seed, stratified=True)
    perm = rng.permutation(n)
    fold_of[perm] = np.arange(n) % K
    return FoldPlan(fold_of, K, seed, stratified=False)
