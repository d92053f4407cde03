"""Gaussian-observation HMM with one transition matrix per process step.

A transition ``c_{t-1} -> c_t`` is governed by the step active at frame ``t``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qda import GaussianObservations, _logsumexp, fit_gaussians, laplace_priors

TRANSITION_ALPHA = 0.01


@dataclass(frozen=True)
class HmmModel:
    obs: GaussianObservations
    transitions: np.ndarray  # (S, C, C); a single pooled matrix when S == 1 and not use_steps
    initial: np.ndarray  # (C,)
    use_steps: bool

    @property
    def n_classes(self) -> int:
        return self.obs.n_classes

    @property
    def n_steps(self) -> int:
        return self.transitions.shape[0] if self.use_steps else 0

    def log_transitions(self, steps, length: int) -> np.ndarray:
        """Log transition matrix used into each frame ``t = 1 .. length-1``."""
        logT = np.log(self.transitions)
        if not self.use_steps or steps is None:
            if self.use_steps and steps is None:
                raise ValueError("model uses per-step transitions; steps are required")
            return np.broadcast_to(logT[0], (max(length - 1, 0),) + logT.shape[1:])
        steps = np.asarray(steps, dtype=np.int64)
        if steps.shape[0] != length:
            raise ValueError("step sequence and observation sequence differ in length")
        if steps.size and (steps.min() < 0 or steps.max() >= self.transitions.shape[0]):
            bad = steps[(steps < 0) | (steps >= self.transitions.shape[0])][0]
            raise ValueError(f"unknown step id {int(bad)}")
        return logT[steps[1:]]


def count_transitions(sequences, n_classes: int, n_steps: int, use_steps: bool) -> np.ndarray:
    n_mats = n_steps if use_steps else 1
    counts = np.zeros((n_mats, n_classes, n_classes))
    for classes, steps in sequences:
        classes = np.asarray(classes, dtype=np.int64)
        if classes.size < 2:
            continue
        dest = np.asarray(steps, dtype=np.int64)[1:] if use_steps else np.zeros(classes.size - 1, np.int64)
        np.add.at(counts, (dest, classes[:-1], classes[1:]), 1.0)
    return counts


def hmm_fit(
    sequences: Sequence[tuple],
    use_steps: bool = True,
    n_classes: int | None = None,
    n_steps: int | None = None,
    alpha: float = TRANSITION_ALPHA,
) -> HmmModel:
    """Fit from ``(X, classes, steps)`` tuples, one per recording in time order.

    Transition counts get ``alpha`` added per cell before row normalisation.
    The initial distribution is the Laplace-smoothed class frequency.
    """
    if not sequences:
        raise ValueError("no training sequences")
    for i, seq in enumerate(sequences):
        if len(seq[1]) == 0:
            raise ValueError(f"training sequence {i} is empty")
    X = np.vstack([np.asarray(s[0], dtype=np.float64) for s in sequences])
    y = np.concatenate([np.asarray(s[1], dtype=np.int64) for s in sequences])
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if use_steps and n_steps is None:
        n_steps = int(max(np.max(s[2]) for s in sequences)) + 1
    obs = fit_gaussians(X, y, n_classes)
    counts = count_transitions(
        [(s[1], s[2]) for s in sequences], n_classes, n_steps or 1, use_steps
    )
    smoothed = counts + alpha
    transitions = smoothed / smoothed.sum(axis=2, keepdims=True)
    initial = laplace_priors(y, n_classes)
    return HmmModel(obs, transitions, initial, use_steps)


def hmm_path_log_prob(model: HmmModel, X, steps, path) -> float:
    """Joint log-probability of a class path and the observations."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    path = np.asarray(path, dtype=np.int64)
    ll = model.obs.log_likelihood(X)
    logT = model.log_transitions(steps, X.shape[0])
    total = np.log(model.initial[path[0]]) + ll[0, path[0]]
    for t in range(1, X.shape[0]):
        total += logT[t - 1][path[t - 1], path[t]] + ll[t, path[t]]
    return float(total)


def viterbi(log_init: np.ndarray, log_trans: np.ndarray, log_obs: np.ndarray):
    """MAP state path; ties resolve to the lowest state index.

    ``log_trans[t-1]`` is the transition matrix into frame ``t``.
    """
    n, c = log_obs.shape
    delta = log_init + log_obs[0]
    back = np.zeros((n, c), dtype=np.int64)
    for t in range(1, n):
        cand = delta[:, None] + log_trans[t - 1]
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(c)] + log_obs[t]
    path = np.empty(n, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    for t in range(n - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, float(delta[path[-1]])


def forward_filter(log_init: np.ndarray, log_trans: np.ndarray, log_obs: np.ndarray) -> np.ndarray:
    """Normalised log filtering distributions ``log p(c_t | x_1..t)``."""
    n, c = log_obs.shape
    out = np.empty((n, c))
    alpha = log_init + log_obs[0]
    out[0] = alpha - _logsumexp(alpha)
    for t in range(1, n):
        alpha = _logsumexp(out[t - 1][:, None] + log_trans[t - 1], axis=0) + log_obs[t]
        out[t] = alpha - _logsumexp(alpha)
    return out


def hmm_decode(model: HmmModel, X, steps=None, mode: str = "viterbi") -> np.ndarray:
    """Decode one recording; ``mode`` is ``"viterbi"`` or ``"filter"``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("cannot decode an empty sequence")
    log_obs = model.obs.log_likelihood(X)
    log_trans = model.log_transitions(steps, X.shape[0])
    with np.errstate(divide="ignore"):
        log_init = np.log(model.initial)
    if mode == "viterbi":
        return viterbi(log_init, log_trans, log_obs)[0]
    if mode == "filter":
        return np.argmax(forward_filter(log_init, log_trans, log_obs), axis=1)
    raise ValueError(f"unknown decoding mode {mode!r}")
