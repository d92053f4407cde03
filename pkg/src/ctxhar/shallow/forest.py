"""Bagged CART random forest with Gini splits.

Tree ``t`` draws its bootstrap sample and per-node feature subsets from its
own random stream, seeded by mixing the forest seed with ``t``.  The fitted
forest therefore does not depend on how trees are scheduled across threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._kernels import get_kernels

_MASK = (1 << 64) - 1


def tree_seed(seed: int, index: int) -> int:
    """Seed of tree ``index``'s random stream."""
    k = get_kernels("python")
    return k.mix64((int(seed) & _MASK) ^ k.mix64(int(index) + 1))


@dataclass(frozen=True)
class ForestModel:
    """Trees concatenated into flat node arrays.

    Child indices are local to their tree; ``offsets[t]`` is the first node of
    tree ``t`` and ``offsets[-1]`` the total node count.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    offsets: np.ndarray
    n_classes: int
    width: int
    mtry: int
    seed: int

    @property
    def n_trees(self) -> int:
        return self.offsets.shape[0] - 1

    @property
    def leaf_class(self) -> np.ndarray:
        return np.argmax(self.counts, axis=1).astype(np.int32)

    def tree(self, t: int) -> dict:
        sl = slice(int(self.offsets[t]), int(self.offsets[t + 1]))
        return {
            "feature": self.feature[sl],
            "threshold": self.threshold[sl],
            "left": self.left[sl],
            "right": self.right[sl],
            "counts": self.counts[sl],
        }


def rf_fit(
    X,
    y,
    trees: int = 500,
    seed: int = 0,
    n_classes: int | None = None,
    mtry: int | None = None,
    n_jobs: int = 1,
    backend: str | None = None,
) -> ForestModel:
    """Fit a forest of ``trees`` bootstrapped, fully grown CART trees.

    ``mtry`` defaults to ``ceil(sqrt(width))`` candidate features per node.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int32)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError("X must be a non-empty (n, width) array matching y")
    if trees < 1:
        raise ValueError("forest needs at least one tree")
    if y.min() < 0:
        raise ValueError("class labels must be non-negative")
    if np.unique(y).size < 2:
        raise ValueError("random forest needs at least two classes in the training data")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if y.max() >= n_classes:
        raise ValueError("class label exceeds n_classes")
    width = X.shape[1]
    if mtry is None:
        mtry = math.ceil(math.sqrt(width))
    mtry = max(1, min(int(mtry), width))
    kern = get_kernels(backend)
    seeds = [tree_seed(seed, t) for t in range(trees)]

    def grow(t):
        return kern.build_tree(X, y, n_classes, mtry, seeds[t])

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            grown = list(pool.map(grow, range(trees)))
    else:
        grown = [grow(t) for t in range(trees)]

    sizes = [g[0].shape[0] for g in grown]
    offsets = np.zeros(trees + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(sizes)
    return ForestModel(
        feature=np.concatenate([g[0] for g in grown]),
        threshold=np.concatenate([g[1] for g in grown]),
        left=np.concatenate([g[2] for g in grown]),
        right=np.concatenate([g[3] for g in grown]),
        counts=np.concatenate([g[4] for g in grown]),
        offsets=offsets,
        n_classes=int(n_classes),
        width=width,
        mtry=mtry,
        seed=int(seed),
    )


def rf_votes(model: ForestModel, X, backend: str | None = None) -> np.ndarray:
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    if X.shape[1] != model.width:
        raise ValueError(f"feature width {X.shape[1]} does not match the forest's {model.width}")
    kern = get_kernels(backend)
    return kern.predict_votes(
        X,
        model.feature,
        model.threshold,
        model.left,
        model.right,
        model.leaf_class,
        model.offsets,
        model.n_classes,
    )


def rf_predict(model: ForestModel, X, backend: str | None = None):
    """Majority vote per row (ties to the lowest class) and vote fractions."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    votes = rf_votes(model, X, backend=backend)
    fractions = votes / model.n_trees
    pred = np.argmax(votes, axis=1)
    if single:
        return int(pred[0]), fractions[0]
    return pred, fractions
