"""Quadratic discriminant analysis with optional per-step class priors.

The class-conditional Gaussians ``p(pi | c)`` are shared by all process
steps; only the priors change with the step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RIDGE_SCALE = 1e-6
RIDGE_FLOOR = 1e-9
_LOG_2PI = float(np.log(2.0 * np.pi))


def _logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


@dataclass(frozen=True)
class GaussianObservations:
    """Per-class mean vectors and ridge-regularised full covariances."""

    means: np.ndarray  # (C, K)
    covs: np.ndarray  # (C, K, K)

    @property
    def n_classes(self) -> int:
        return self.means.shape[0]

    @property
    def k(self) -> int:
        return self.means.shape[1]

    def log_likelihood(self, X) -> np.ndarray:
        """``log N(x; mu_c, Sigma_c)`` for every row and class, shape (n, C)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.k:
            raise ValueError(f"row width {X.shape[1]} does not match K={self.k}")
        out = np.empty((X.shape[0], self.n_classes))
        for c in range(self.n_classes):
            chol = np.linalg.cholesky(self.covs[c])
            diff = X - self.means[c]
            z = np.linalg.solve(chol, diff.T)
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            out[:, c] = -0.5 * (self.k * _LOG_2PI + logdet + np.sum(z * z, axis=0))
        return out


def fit_gaussians(X, y, n_classes: int) -> GaussianObservations:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    k = X.shape[1]
    means = np.zeros((n_classes, k))
    covs = np.zeros((n_classes, k, k))
    for c in range(n_classes):
        rows = X[y == c]
        if rows.shape[0] < 2:
            raise ValueError(f"class {c} has {rows.shape[0]} training samples; need at least 2")
        means[c] = rows.mean(axis=0)
        cov = np.atleast_2d(np.cov(rows, rowvar=False))
        ridge = max(RIDGE_SCALE * np.trace(cov) / k, RIDGE_FLOOR)
        covs[c] = cov + ridge * np.eye(k)
    return GaussianObservations(means, covs)


def laplace_priors(y, n_classes: int, alpha: float = 1.0) -> np.ndarray:
    counts = np.bincount(np.asarray(y, dtype=np.int64), minlength=n_classes).astype(np.float64)
    return (counts + alpha) / (counts.sum() + alpha * n_classes)


@dataclass(frozen=True)
class GaussianClassModel:
    obs: GaussianObservations
    priors: np.ndarray  # (C,)
    step_priors: np.ndarray | None = None  # (S, C)

    @property
    def n_classes(self) -> int:
        return self.obs.n_classes

    @property
    def n_steps(self) -> int:
        return 0 if self.step_priors is None else self.step_priors.shape[0]

    def with_step_priors(self, table) -> "GaussianClassModel":
        """Copy of the model using the given ``(S, C)`` prior table."""
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2 or table.shape[1] != self.n_classes:
            raise ValueError("step prior table must have one column per class")
        return GaussianClassModel(self.obs, self.priors, table / table.sum(axis=1, keepdims=True))

    def log_prior(self, steps) -> np.ndarray:
        with np.errstate(divide="ignore"):
            if steps is None:
                return np.log(self.priors)[None, :]
            steps = np.asarray(steps, dtype=np.int64)
            if self.step_priors is None:
                raise ValueError("model was fitted without step priors")
            if steps.size and (steps.min() < 0 or steps.max() >= self.n_steps):
                bad = steps[(steps < 0) | (steps >= self.n_steps)][0]
                raise ValueError(f"unknown step id {int(bad)}")
            return np.log(self.step_priors)[steps]


def qda_fit(X, y, steps=None, n_classes: int | None = None, n_steps: int | None = None,
            alpha: float = 1.0) -> GaussianClassModel:
    """Fit per-class Gaussians, Laplace-smoothed priors and, given ``steps``,
    one smoothed prior per step."""
    y = np.asarray(y, dtype=np.int64)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    obs = fit_gaussians(X, y, n_classes)
    priors = laplace_priors(y, n_classes, alpha)
    step_priors = None
    if steps is not None:
        steps = np.asarray(steps, dtype=np.int64)
        if n_steps is None:
            n_steps = int(steps.max()) + 1
        step_priors = np.stack(
            [laplace_priors(y[steps == s], n_classes, alpha) for s in range(n_steps)]
        )
    return GaussianClassModel(obs, priors, step_priors)


def qda_log_posterior(model: GaussianClassModel, X, steps=None) -> np.ndarray:
    joint = model.obs.log_likelihood(X) + model.log_prior(steps)
    return joint - _logsumexp(joint, axis=1)[:, None]


def qda_predict(model: GaussianClassModel, X, steps=None):
    """Class argmax (ties to lowest id) and normalised log-posteriors.

    Accepts one row with an optional scalar step, or a batch with a step array.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single and steps is not None:
        steps = [steps]
    post = qda_log_posterior(model, X, steps)
    pred = np.argmax(post, axis=1)
    if single:
        return int(pred[0]), post[0]
    return pred, post
