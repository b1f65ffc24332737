"""Linear SVM trained with Pegasos-style stochastic subgradient descent.

Minimizes ``lam/2 * |w|^2 + mean(hinge(y * (w.x + b)))`` over standardized
features. The bias is an extra unregularized coordinate. Steps follow
``1 / (lam * (t + t0))``; the offset ``t0`` (default ``1 / lam``) caps the first
steps near 1, which keeps the unshrunk bias from blowing up when ``lam`` is
small. The returned iterate is a polynomial-decay average of the iterates,
which converges much faster than the plain running mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend


@dataclass(frozen=True)
class SVMParams:
    lam: float = 1e-4
    epochs: int = 200
    seed: int = 0
    avg_decay: float = 3.0
    step_offset: float | None = None  # None means 1 / lam

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.step_offset is not None and self.step_offset < 0:
            raise ValueError("step_offset must be nonnegative")

    @property
    def t0(self) -> float:
        return 1.0 / self.lam if self.step_offset is None else float(self.step_offset)


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    feature_means: np.ndarray
    feature_stddevs: np.ndarray
    config: str | None = None
    hyperparams: SVMParams = field(default_factory=SVMParams)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def standardize_fit(X) -> tuple[np.ndarray, np.ndarray]:
    """Column means and population stddevs; constant columns get stddev 1."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("standardize_fit needs a 2-D array with at least 2 rows")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    constant = np.all(X == X[0], axis=0)
    # exact centering for constant columns
    means[constant] = X[0, constant]
    stds[constant] = 1.0
    stds[stds == 0.0] = 1.0
    return means, stds


def standardize_apply(X, means, stds) -> np.ndarray:
    return (np.asarray(X, dtype=np.float64) - means) / stds


def _signed_labels(y) -> np.ndarray:
    y = np.asarray(y)
    values = set(np.unique(y).tolist())
    if values <= {0, 1} and 0 in values:
        y = np.where(y == 1, 1.0, -1.0)
    else:
        y = y.astype(np.float64)
        if not set(np.unique(y).tolist()) <= {-1.0, 1.0}:
            raise ValueError("labels must be in {0, 1} or {-1, +1}")
    if len(set(y.tolist())) < 2:
        raise ValueError("training data contains a single class")
    return y


def epoch_order(n: int, epochs: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.concatenate([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)


def train_linear_svm(X, y, params: SVMParams = SVMParams(), config: str | None = None,
                     standardize: bool = True, backend: str | None = None) -> LinearModel:
    """Fit a linear SVM; ``y`` may use {0, 1} or {-1, +1} labels."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    y = _signed_labels(y)
    if y.shape[0] != X.shape[0]:
        raise ValueError("X and y have different lengths")
    if standardize:
        means, stds = standardize_fit(X)
        Xs = np.ascontiguousarray(standardize_apply(X, means, stds))
    else:
        means, stds = np.zeros(X.shape[1]), np.ones(X.shape[1])
        Xs = X
    order = epoch_order(X.shape[0], params.epochs, params.seed)
    w, b = _backend.get(backend).pegasos(Xs, np.ascontiguousarray(y), order, params.lam, params.avg_decay,
                                        params.t0)
    return LinearModel(np.asarray(w), float(b), means, stds, config, params)


def predict_score(model: LinearModel, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise ValueError(f"expected {model.dim} features, got {x.shape[-1]}")
    scores = standardize_apply(x, model.feature_means, model.feature_stddevs) @ model.weights + model.bias
    return float(scores) if x.ndim == 1 else scores


def svm_objective(w, b: float, Xs, y, lam: float) -> float:
    """Primal objective on already-standardized inputs with {-1, +1} labels."""
    w = np.asarray(w, dtype=np.float64)
    margins = np.asarray(y, dtype=np.float64) * (np.asarray(Xs) @ w + b)
    return float(lam / 2.0 * (w @ w) + np.maximum(0.0, 1.0 - margins).mean())
