"""Goodness-of-fit measures and k-fold cross-validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .dataset import Channel, TraceDataset
from .preprocess import PipelineConfig, fit_transform_pipeline, transform
from .regress import make_regressor

__all__ = [
    "EvalReport",
    "FoldPlan",
    "HeldOut",
    "MetricDomainError",
    "Metrics",
    "compute_metrics",
    "cross_val_predict",
    "cross_validate",
    "evaluate_models",
    "mae",
    "make_folds",
    "mape",
    "pp",
    "prr",
]


class MetricDomainError(ValueError):
    """A metric denominator is zero."""


def _pair(actual, predicted):
    actual = np.asarray(actual, dtype=float).ravel()
    predicted = np.asarray(predicted, dtype=float).ravel()
    if actual.shape != predicted.shape:
        raise ValueError(f"length mismatch: {actual.size} actual vs {predicted.size} predicted")
    if actual.size == 0:
        raise ValueError("metrics need at least one point")
    return actual, predicted


def _nonzero(values, what):
    if np.any(values == 0):
        raise MetricDomainError(f"{what} contains zero; relative error undefined")


def mape(actual, predicted) -> float:
    """Mean absolute percentage error, in percent."""
    actual, predicted = _pair(actual, predicted)
    _nonzero(actual, "actual")
    return float(np.mean(np.abs((predicted - actual) / actual)) * 100)


def mae(actual, predicted) -> float:
    actual, predicted = _pair(actual, predicted)
    return float(np.mean(np.abs(predicted - actual)))


def prr(actual, predicted) -> float:
    """Predictive ratio risk: squared error relative to the prediction, summed."""
    actual, predicted = _pair(actual, predicted)
    _nonzero(predicted, "predicted")
    return float(np.sum(((predicted - actual) / predicted) ** 2))


def pp(actual, predicted) -> float:
    """Predictive power: squared error relative to the actual value, summed."""
    actual, predicted = _pair(actual, predicted)
    _nonzero(actual, "actual")
    return float(np.sum(((predicted - actual) / actual) ** 2))


@dataclass(frozen=True)
class Metrics:
    mape: float
    mae: float
    prr: float
    pp: float

    @classmethod
    def mean_of(cls, items: Sequence["Metrics"]) -> "Metrics":
        return cls(
            *(float(np.mean([getattr(m, f) for m in items])) for f in ("mape", "mae", "prr", "pp"))
        )


def compute_metrics(actual, predicted) -> Metrics:
    return Metrics(mape(actual, predicted), mae(actual, predicted), prr(actual, predicted), pp(actual, predicted))


@dataclass(frozen=True)
class FoldPlan:
    fold_assignments: Tuple[int, ...]
    k: int
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.fold_assignments) == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.fold_assignments) != fold)


def make_folds(n: int, k: int = 4, seed: int = 0) -> FoldPlan:
    """Seeded shuffle of ``0..n-1`` cut into ``k`` contiguous near-equal blocks."""
    if k < 1 or n < 1:
        raise ValueError("n and k must be positive")
    if k > n:
        raise ValueError(f"cannot make {k} folds from {n} records")
    order = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=int)
    for fold, block in enumerate(np.array_split(order, k)):
        assignments[block] = fold
    return FoldPlan(tuple(int(a) for a in assignments), k, seed)


@dataclass(frozen=True)
class EvalReport:
    per_fold: Tuple[Metrics, ...]
    averaged: Metrics
    config: PipelineConfig
    model_name: str
    channel: Channel
    seed: int
    k: int
    model_params: Optional[dict] = None

    def to_json(self) -> str:
        record = {
            "model_name": self.model_name,
            "model_params": self.model_params or {},
            "channel": self.channel.value,
            "seed": self.seed,
            "k": self.k,
            "config": self.config.to_dict(),
            "averaged": asdict(self.averaged),
            "per_fold": [asdict(m) for m in self.per_fold],
        }
        return json.dumps(record, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class HeldOut:
    """Out-of-fold predictions in record order."""

    actual: np.ndarray
    predicted: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    fold: np.ndarray


def _folds(ds: TraceDataset, config: PipelineConfig, plan: FoldPlan, features=None):
    if len(plan.fold_assignments) != len(ds):
        raise ValueError(f"fold plan covers {len(plan.fold_assignments)} records, dataset has {len(ds)}")
    config.validate(ds.sample_rate_hz, ds.n_samples)
    X, y = ds.X, ds.y
    for fold in range(plan.k):
        train, test = plan.train_indices(fold), plan.test_indices(fold)
        if len(train) < 2:
            raise ValueError(f"fold {fold} leaves {len(train)} training records, need 2")
        if features is None:
            fitted, Z_train = fit_transform_pipeline(config, X[train], ds.sample_rate_hz)
            Z_test = transform(fitted, X[test])
        else:
            fitted, Z_train = fit_transform_pipeline(
                config, X[train], ds.sample_rate_hz, features=features[train]
            )
            Z_test = transform(fitted, X[test], features=features[test])
        yield fold, train, test, Z_train, y[train], Z_test, y[test]


def evaluate_models(
    ds: TraceDataset,
    config: PipelineConfig,
    model_names: Sequence[str],
    plan: FoldPlan,
    model_params: Optional[dict] = None,
    features=None,
) -> dict:
    """Cross-validate several models sharing one set of fitted pipelines.

    Returns ``{model_name: EvalReport or Exception}``; a model whose fit fails
    on any fold maps to the exception. ``features`` optionally holds the
    per-record stages (:func:`row_features`) for all of ``ds``.
    """
    model_params = model_params or {}
    per_fold = {name: [] for name in model_names}
    failures = {}
    for _, _, _, Z_train, y_train, Z_test, y_test in _folds(ds, config, plan, features):
        for name in model_names:
            if name in failures:
                continue
            try:
                model = make_regressor(name, **model_params.get(name, {}))
                predicted = model.fit(Z_train, y_train).predict(Z_test)
                per_fold[name].append(compute_metrics(y_test, predicted))
            except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                failures[name] = exc
    out = {}
    for name in model_names:
        if name in failures:
            out[name] = failures[name]
            continue
        params = make_regressor(name, **model_params.get(name, {})).params()
        out[name] = EvalReport(
            tuple(per_fold[name]),
            Metrics.mean_of(per_fold[name]),
            config,
            name,
            ds.channel,
            plan.seed,
            plan.k,
            params,
        )
    return out


def cross_validate(
    ds: TraceDataset,
    config: PipelineConfig,
    model_name: str,
    plan: FoldPlan,
    model_params: Optional[dict] = None,
) -> EvalReport:
    """Fit pipeline and model on k-1 folds, score the held-out fold, average."""
    result = evaluate_models(ds, config, [model_name], plan, {model_name: model_params or {}})
    outcome = result[model_name]
    if isinstance(outcome, Exception):
        raise outcome
    return outcome


def cross_val_predict(
    ds: TraceDataset,
    config: PipelineConfig,
    model_name: str,
    plan: FoldPlan,
    model_params: Optional[dict] = None,
) -> Tuple[EvalReport, HeldOut]:
    """Like :func:`cross_validate` but also return every out-of-fold prediction.

    Interval bounds are filled for models exposing ``predict_interval`` and
    are NaN otherwise.
    """
    n = len(ds)
    predicted = np.full(n, np.nan)
    lower = np.full(n, np.nan)
    upper = np.full(n, np.nan)
    fold_of = np.asarray(plan.fold_assignments)
    metrics = []
    params = {}
    for _, _, test, Z_train, y_train, Z_test, y_test in _folds(ds, config, plan):
        model = make_regressor(model_name, **(model_params or {}))
        model.fit(Z_train, y_train)
        params = model.params()
        predicted[test] = model.predict(Z_test)
        if hasattr(model, "predict_interval"):
            lower[test], upper[test] = model.predict_interval(Z_test)
        metrics.append(compute_metrics(y_test, predicted[test]))
    report = EvalReport(
        tuple(metrics), Metrics.mean_of(metrics), config, model_name, ds.channel, plan.seed, plan.k, params
    )
    return report, HeldOut(ds.y, predicted, lower, upper, fold_of)
