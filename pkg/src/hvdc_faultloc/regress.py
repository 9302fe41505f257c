"""Bayesian ridge regression with predictive intervals, plus KNN and tree baselines.

Model: ``y = w.x + beta`` with ``w ~ N(0, (sigma2 / a) I)`` and ``beta ~ N(0, sigma2)``.
For a new row ``x`` the predictive distribution is ``N(y_hat, (1 + g) sigma2)``
with ``g = x' (X'X + a I)^-1 x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Union

import numpy as np
from scipy.special import ndtri

__all__ = [
    "BayesianRidgeRegressor",
    "BrrModel",
    "DecisionTreeRegressor",
    "Evidence",
    "FitError",
    "Fixed",
    "KNNRegressor",
    "MeanRegressor",
    "NotFittedError",
    "PredictionInterval",
    "REGISTRY",
    "brr_fit",
    "brr_interval",
    "brr_predict",
    "dtree_fit_predict",
    "knn_fit_predict",
    "make_regressor",
]


class FitError(ValueError):
    """Model fitting failed (bad input or a numerical breakdown)."""


class NotFittedError(RuntimeError):
    pass


@dataclass(frozen=True)
class Fixed:
    """Fixed prior precision ``a`` and noise variance ``sigma2``."""

    a: float
    noise_variance: float


@dataclass(frozen=True)
class Evidence:
    """Type-II maximum likelihood estimation of ``a`` and ``sigma2``."""

    max_iter: int = 300
    tol: float = 1e-6


@dataclass(frozen=True)
class BrrModel:
    weights: np.ndarray
    intercept: float
    prior_precision_a: float
    noise_variance: float
    posterior_matrix: np.ndarray
    n_train: int
    feature_mean: Optional[np.ndarray] = None
    n_iter: int = 0

    def to_text(self) -> str:
        """Versioned text form; vectors and matrices carry their dimensions."""
        p = len(self.weights)

        def fmt(values):
            return " ".join(repr(float(v)) for v in np.ravel(values))

        mean = self.feature_mean if self.feature_mean is not None else np.zeros(p)
        lines = [
            "brr_model v1",
            f"weights {p}",
            fmt(self.weights),
            f"intercept {self.intercept!r}",
            f"prior_precision_a {self.prior_precision_a!r}",
            f"noise_variance {self.noise_variance!r}",
            f"posterior_matrix {p} {p}",
            fmt(self.posterior_matrix),
            f"n_train {self.n_train}",
            f"feature_mean {p}",
            fmt(mean),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BrrModel":
        lines = text.splitlines()
        if not lines or lines[0].strip() != "brr_model v1":
            raise ValueError("not a brr_model v1 file")

        def vector(line, n):
            values = np.array([float(v) for v in line.split()]) if line.strip() else np.zeros(0)
            if values.size != n:
                raise ValueError(f"expected {n} values, got {values.size}")
            return values

        p = int(lines[1].split()[1])
        weights = vector(lines[2], p)
        intercept = float(lines[3].split()[1])
        a = float(lines[4].split()[1])
        sigma2 = float(lines[5].split()[1])
        posterior = vector(lines[7], p * p).reshape(p, p)
        n_train = int(lines[8].split()[1])
        mean = vector(lines[10], p)
        return cls(weights, intercept, a, sigma2, posterior, n_train, mean)


@dataclass(frozen=True)
class PredictionInterval:
    point: float
    lower: float
    upper: float
    confidence: float


def _check_xy(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise FitError(f"X has {X.shape[0]} rows but y has {y.shape[0]} values")
    if X.shape[0] < 2:
        raise FitError("need at least 2 training rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise FitError("non-finite values in training data")
    return X, y


def brr_fit(
    X,
    y,
    hyper: Union[Fixed, Evidence] = Evidence(),
    center_features: bool = False,
) -> BrrModel:
    """Fit Bayesian ridge regression.

    The targets are centered, ``intercept = mean(y)`` and the posterior mean
    weights are ``(X'X + a I)^-1 X' (y - mean(y))``. With
    ``center_features=True`` the same formulas are applied to column-centered
    ``X`` and the column means are kept for prediction.

    Under :class:`Evidence` the hyperparameters start at ``a = 1`` and
    ``sigma2 = var(y)`` and are updated with the effective number of
    parameters ``gamma = sum_j lambda_j / (lambda_j + a)``::

        a      <- gamma * sigma2 / ||w||^2
        sigma2 <- ||y - X w - intercept||^2 / (n - gamma)

    until both change by less than ``tol`` relatively or ``max_iter`` is hit.
    """
    X, y = _check_xy(X, y)
    n, p = X.shape
    feature_mean = None
    if center_features:
        feature_mean = X.mean(axis=0)
        X = X - feature_mean
    intercept = float(y.mean())
    yc = y - intercept

    gram = X.T @ X
    xty = X.T @ yc
    n_iter = 0
    if isinstance(hyper, Fixed):
        a, sigma2 = float(hyper.a), float(hyper.noise_variance)
        if not (a > 0 and sigma2 > 0):
            raise FitError("a and noise_variance must be positive")
    else:
        a, sigma2, n_iter = _evidence(gram, xty, X, yc, hyper)

    # Solve through the spectrum of X'X: every eigenvalue of X'X + aI is at
    # least a > 0, so this stays well defined when p > n.
    try:
        eigvals, eigvecs = np.linalg.eigh(gram)
    except np.linalg.LinAlgError as exc:
        raise FitError("eigendecomposition of X'X failed") from exc
    eigvals = np.clip(eigvals, 0.0, None)
    posterior = (eigvecs / (eigvals + a)) @ eigvecs.T
    posterior = (posterior + posterior.T) / 2
    weights = eigvecs @ ((eigvecs.T @ xty) / (eigvals + a))
    if not np.all(np.isfinite(weights)):
        raise FitError("non-finite weights")
    return BrrModel(weights, intercept, a, sigma2, posterior, n, feature_mean, n_iter)


def _evidence(gram, xty, X, yc, hyper: Evidence):
    n = X.shape[0]
    try:
        eigvals, eigvecs = np.linalg.eigh(gram)
    except np.linalg.LinAlgError as exc:
        raise FitError("eigendecomposition of X'X failed") from exc
    eigvals = np.clip(eigvals, 0.0, None)
    proj = eigvecs.T @ xty

    a = 1.0
    sigma2 = float(np.var(yc))
    if sigma2 <= 0:
        sigma2 = 1e-12
    tiny = np.finfo(float).tiny
    it = 0
    for it in range(1, hyper.max_iter + 1):
        w = eigvecs @ (proj / (eigvals + a))
        gamma = float(np.sum(eigvals / (eigvals + a)))
        resid = float(np.sum((yc - X @ w) ** 2))
        new_sigma2 = max(resid / max(n - gamma, 1e-12), tiny)
        new_a = max(gamma * new_sigma2 / max(float(w @ w), tiny), tiny)
        done = (
            abs(new_a - a) <= hyper.tol * abs(a)
            and abs(new_sigma2 - sigma2) <= hyper.tol * abs(sigma2)
        )
        a, sigma2 = new_a, new_sigma2
        if done:
            break
    if not (math.isfinite(a) and math.isfinite(sigma2)):
        raise FitError("evidence iteration diverged")
    return a, sigma2, it


def _rows(m: BrrModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(m.weights):
        raise ValueError(f"rows have {X.shape[1]} features, model expects {len(m.weights)}")
    if m.feature_mean is not None:
        X = X - m.feature_mean
    return X


def brr_predict(m: BrrModel, X) -> np.ndarray:
    return _rows(m, X) @ m.weights + m.intercept


def brr_interval(m: BrrModel, x, confidence: float = 0.9) -> PredictionInterval:
    """Symmetric Gaussian predictive interval ``y_hat +- z sqrt((1 + g) sigma2)``."""
    if not 0 < confidence < 1:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input row")
    xc = _rows(m, x)[0]
    g = max(float(xc @ m.posterior_matrix @ xc), 0.0)
    z = float(ndtri(1 - (1 - confidence) / 2))
    half = z * math.sqrt((1 + g) * m.noise_variance)
    point = float(xc @ m.weights + m.intercept)
    return PredictionInterval(point, point - half, point + half, confidence)


def knn_fit_predict(X_train, y_train, X_test, k: int = 5) -> np.ndarray:
    """Mean target of the ``k`` nearest training rows (Euclidean).

    Equal distances go to the lower training index.
    """
    X_train = np.atleast_2d(np.asarray(X_train, dtype=float))
    y_train = np.asarray(y_train, dtype=float).ravel()
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    n = X_train.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= {n}, got {k}")
    d2 = np.sum((X_test[:, None, :] - X_train[None, :, :]) ** 2, axis=2)
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return y_train[nearest].mean(axis=1)


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    # Lowest children SSE; ties go to the lower feature, then the lower threshold.
    n, p = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = (y - y.mean())[order]
    csum = np.cumsum(ys, axis=0)
    csq = np.cumsum(ys**2, axis=0)
    total, total_sq = csum[-1], csq[-1]

    left_n = np.arange(1, n)[:, None]
    right_n = n - left_n
    left_sse = csq[:-1] - csum[:-1] ** 2 / left_n
    right_sse = (total_sq - csq[:-1]) - (total - csum[:-1]) ** 2 / right_n
    cost = left_sse + right_sse
    valid = (xs[1:] > xs[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
    if not valid.any():
        return None
    cost = np.where(valid, cost, np.inf)

    # Costs within rounding of the best are ties (e.g. two features inducing
    # the same partition); the first such column, then row, wins.
    best_cost = float(np.min(cost))
    tied = cost <= best_cost + 1e-12 * max(float(total_sq[0]), 1e-300)
    j = int(np.argmax(tied.any(axis=0)))
    i = int(np.argmax(tied[:, j]))
    return cost[i, j], j, (xs[i, j] + xs[i + 1, j]) / 2


def _grow(X, y, depth, max_depth, min_leaf):
    value = float(y.mean())
    if (max_depth is not None and depth >= max_depth) or len(y) < 2 * min_leaf:
        return value
    if np.all(y == y[0]):
        return value
    split = _best_split(X, y, min_leaf)
    if split is None:
        return value
    _, feature, threshold = split
    left = X[:, feature] <= threshold
    return (
        feature,
        threshold,
        _grow(X[left], y[left], depth + 1, max_depth, min_leaf),
        _grow(X[~left], y[~left], depth + 1, max_depth, min_leaf),
    )


def _tree_predict(node, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if not isinstance(node, tuple):
            out[idx] = node
            continue
        feature, threshold, left, right = node
        go_left = X[idx, feature] <= threshold
        stack.append((left, idx[go_left]))
        stack.append((right, idx[~go_left]))
    return out


def dtree_fit_predict(
    X_train, y_train, X_test, max_depth: Optional[int] = 12, min_leaf: int = 2
) -> np.ndarray:
    """CART regression tree with variance-reduction splits at midpoints.

    ``max_depth=None`` grows until leaves are pure or too small to split.
    """
    tree = DecisionTreeRegressor(max_depth=max_depth, min_leaf=min_leaf)
    return tree.fit(X_train, y_train).predict(X_test)


class _Regressor:
    name = "base"

    def _fitted(self):
        if not getattr(self, "_is_fitted", False):
            raise NotFittedError(f"{type(self).__name__} used before fit()")

    def _check_predict(self, X):
        self._fitted()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self._n_features:
            raise ValueError(f"expected {self._n_features} features, got {X.shape[1]}")
        return X

    def params(self) -> Dict[str, object]:
        return {}


class BayesianRidgeRegressor(_Regressor):
    """Regressor wrapper around :func:`brr_fit` that centers features."""

    name = "brr"

    def __init__(self, hyper: Union[Fixed, Evidence] = Evidence(), confidence: float = 0.9):
        self.hyper = hyper
        self.confidence = confidence

    def fit(self, X, y):
        self.model_ = brr_fit(X, y, self.hyper, center_features=True)
        self._n_features = len(self.model_.weights)
        self._is_fitted = True
        return self

    def predict(self, X) -> np.ndarray:
        X = self._check_predict(X)
        return brr_predict(self.model_, X)

    def predict_interval(self, X):
        """Lower and upper interval bounds per row."""
        X = self._check_predict(X)
        bounds = [brr_interval(self.model_, row, self.confidence) for row in X]
        return np.array([b.lower for b in bounds]), np.array([b.upper for b in bounds])

    def params(self):
        if isinstance(self.hyper, Fixed):
            return {"a": self.hyper.a, "noise_variance": self.hyper.noise_variance}
        return {"max_iter": self.hyper.max_iter, "tol": self.hyper.tol}


class KNNRegressor(_Regressor):
    name = "knn"

    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        if self.k > X.shape[0]:
            raise FitError(f"k={self.k} exceeds {X.shape[0]} training rows")
        self._X, self._y = X, y
        self._n_features = X.shape[1]
        self._is_fitted = True
        return self

    def predict(self, X):
        X = self._check_predict(X)
        return knn_fit_predict(self._X, self._y, X, self.k)

    def params(self):
        return {"k": self.k}


class DecisionTreeRegressor(_Regressor):
    name = "dtree"

    def __init__(self, max_depth: Optional[int] = 12, min_leaf: int = 2):
        if min_leaf < 1:
            raise ValueError("min_leaf must be positive")
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] == 0:
            raise FitError("empty training set")
        if X.shape[0] != y.shape[0]:
            raise FitError("X and y row counts differ")
        if X.shape[0] < self.min_leaf:
            raise FitError(f"{X.shape[0]} rows is fewer than min_leaf={self.min_leaf}")
        self.tree_ = _grow(X, y, 0, self.max_depth, self.min_leaf)
        self._n_features = X.shape[1]
        self._is_fitted = True
        return self

    def predict(self, X):
        X = self._check_predict(X)
        return _tree_predict(self.tree_, X)

    def params(self):
        return {"max_depth": self.max_depth, "min_leaf": self.min_leaf}


class MeanRegressor(_Regressor):
    """Predicts the training-target mean; the reference baseline."""

    name = "mean"

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self._mean = float(np.mean(y))
        self._n_features = X.shape[1]
        self._is_fitted = True
        return self

    def predict(self, X):
        return np.full(self._check_predict(X).shape[0], self._mean)


REGISTRY = {
    "brr": BayesianRidgeRegressor,
    "knn": KNNRegressor,
    "dtree": DecisionTreeRegressor,
    "mean": MeanRegressor,
}


def make_regressor(name: str, **params):
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(REGISTRY)}") from None
    return cls(**params)
