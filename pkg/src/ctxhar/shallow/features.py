"""Feature rows for the forest: posterior plus an optional step encoding."""
from __future__ import annotations

import numpy as np


def encode_features(pi, step: int | None, n_steps: int, mode: str = "onehot") -> np.ndarray:
    """Concatenate ``pi`` with a one-hot (or integer) step encoding."""
    pi = np.asarray(pi, dtype=np.float64)
    if step is None:
        return pi.copy()
    step = int(step)
    if not 0 <= step < n_steps:
        raise ValueError(f"step id {step} out of range for {n_steps} steps")
    if mode == "onehot":
        block = np.zeros(n_steps)
        block[step] = 1.0
    elif mode == "integer":
        block = np.array([float(step)])
    else:
        raise ValueError(f"unknown step encoding {mode!r}")
    return np.concatenate([pi, block])


def encode_batch(pis, steps, n_steps: int, mode: str = "onehot") -> np.ndarray:
    """Vectorised ``encode_features`` over rows; ``steps=None`` drops the block."""
    pis = np.asarray(pis, dtype=np.float64)
    if steps is None:
        return pis.copy()
    steps = np.asarray(steps, dtype=np.int64)
    if steps.shape[0] != pis.shape[0]:
        raise ValueError("posterior rows and step labels differ in length")
    if steps.size and (steps.min() < 0 or steps.max() >= n_steps):
        raise ValueError(f"step id out of range for {n_steps} steps")
    if mode == "onehot":
        block = np.zeros((pis.shape[0], n_steps))
        block[np.arange(pis.shape[0]), steps] = 1.0
    elif mode == "integer":
        block = steps[:, None].astype(np.float64)
    else:
        raise ValueError(f"unknown step encoding {mode!r}")
    return np.hstack([pis, block])


def decode_step(row, k: int) -> int:
    """Recover the step id from the one-hot block of an encoded row."""
    block = np.asarray(row)[k:]
    hits = np.flatnonzero(block == 1.0)
    if hits.size != 1 or np.count_nonzero(block) != 1:
        raise ValueError("row carries no valid one-hot step block")
    return int(hits[0])
