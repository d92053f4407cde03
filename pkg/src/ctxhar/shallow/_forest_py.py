"""Pure-Python forest kernels.

Reference implementation of the tree growing and voting loops.  The compiled
kernels in ``_forest_ext`` follow the same random stream and the same split
rules, so both produce identical trees for identical inputs.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"

_MASK = (1 << 64) - 1


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)


def mix64(value: int) -> int:
    """One splitmix64 output for a given state; used to derive tree seeds."""
    return SplitMix64(value).next()


def build_tree(X: np.ndarray, y: np.ndarray, n_classes: int, mtry: int, seed: int):
    """Grow one bootstrapped CART tree with Gini splits.

    Returns ``(feature, threshold, left, right, counts)`` arrays in pre-order;
    leaves carry ``feature == -1``.
    """
    n, p = X.shape
    rng = SplitMix64(seed)
    samples = np.array([rng.next() % n for _ in range(n)], dtype=np.intp)
    feats = list(range(p))
    max_nodes = 2 * n - 1
    feature = np.full(max_nodes, -1, dtype=np.int32)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int32)
    right = np.full(max_nodes, -1, dtype=np.int32)
    counts = np.zeros((max_nodes, n_classes), dtype=np.int32)

    stack = [(0, n, -1, False)]
    n_nodes = 0
    while stack:
        start, end, parent, is_left = stack.pop()
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node
        idx = samples[start:end]
        yy = y[idx]
        cnt = np.bincount(yy, minlength=n_classes).astype(np.int64)
        counts[node] = cnt
        m = end - start
        if m < 2 or cnt.max() == m:
            continue

        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        nl = np.arange(1, m, dtype=np.int64)
        nr = m - nl
        i = 0
        visited = 0
        while i < p and (visited < mtry or best_f < 0):
            j = i + rng.next() % (p - i)
            feats[i], feats[j] = feats[j], feats[i]
            f = feats[i]
            i += 1
            visited += 1
            vals = X[idx, f]
            order = np.argsort(vals, kind="stable")
            sv = vals[order]
            if sv[0] == sv[-1]:
                continue
            onehot = np.zeros((m, n_classes), dtype=np.int64)
            onehot[np.arange(m), yy[order]] = 1
            lc = np.cumsum(onehot, axis=0)[:-1]
            rc = cnt[None, :] - lc
            score = (lc * lc).sum(axis=1) / nl + (rc * rc).sum(axis=1) / nr
            score = np.where(sv[:-1] < sv[1:], score, -np.inf)
            k = int(np.argmax(score))
            if score[k] > best_score:
                best_score = float(score[k])
                best_f = f
                thr = (sv[k] + sv[k + 1]) / 2.0
                if thr == sv[k + 1]:
                    thr = sv[k]
                best_thr = float(thr)
        if best_f < 0:
            continue

        feature[node] = best_f
        threshold[node] = best_thr
        go_left = X[idx, best_f] <= best_thr
        mid = start + int(go_left.sum())
        samples[start:end] = np.concatenate([idx[go_left], idx[~go_left]])
        stack.append((mid, end, node, False))
        stack.append((start, mid, node, True))

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        counts[:n_nodes].copy(),
    )


def predict_votes(X, feature, threshold, left, right, leaf_class, offsets, n_classes):
    """Per-row vote counts over all trees stored in the flat node arrays."""
    n = X.shape[0]
    votes = np.zeros((n, n_classes), dtype=np.int64)
    rows = np.arange(n)
    for t in range(offsets.shape[0] - 1):
        base = offsets[t]
        node = np.full(n, base, dtype=np.int64)
        active = feature[node] >= 0
        while np.any(active):
            cur = node[active]
            f = feature[cur]
            go_left = X[rows[active], f] <= threshold[cur]
            node[active] = base + np.where(go_left, left[cur], right[cur])
            active = feature[node] >= 0
        np.add.at(votes, (rows, leaf_class[node]), 1)
    return votes
