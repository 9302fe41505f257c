"""Exhaustive preprocessing x regressor sweep with k-fold scoring and ranking."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import Channel, TraceDataset, format_float
from .evaluate import Metrics, evaluate_models, make_folds
from .preprocess import InvalidConfigError, PipelineConfig, row_features

__all__ = [
    "SearchFailure",
    "SearchOutcome",
    "SearchRow",
    "SearchSpace",
    "TableRow",
    "best_per_model",
    "enumerate_space",
    "enumerate_valid",
    "format_table",
    "mae_distribution",
    "read_rows_csv",
    "report_table",
    "rows_csv",
    "run_search",
    "summary_json",
    "table_csv",
]

CONFIG_KEYS = tuple(f.name for f in fields(PipelineConfig))
METRIC_KEYS = ("mape", "mae", "prr", "pp")


@dataclass(frozen=True)
class SearchSpace:
    lpf_options: Tuple[Optional[float], ...] = (500.0, 300.0, 250.0, 200.0, 150.0, 100.0, 50.0)
    ds_options: Tuple[int, ...] = (1, 3, 5, 10, 100)
    fft_options: Tuple[bool, ...] = (True, False)
    l2norm_options: Tuple[bool, ...] = (True, False)
    pca_options: Tuple[Optional[int], ...] = (None, 4, 8, 12, 16, 28)
    sqrt_options: Tuple[bool, ...] = (True, False)
    scaler_options: Tuple[bool, ...] = (True, False)
    models: Tuple[str, ...] = ("brr", "knn", "dtree")
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name != "seed":
                object.__setattr__(self, f.name, tuple(value))
                if not value:
                    raise ValueError(f"{f.name} must not be empty")

    def product_size(self) -> int:
        return math.prod(
            len(getattr(self, name))
            for name in (
                "lpf_options", "ds_options", "fft_options", "l2norm_options",
                "pca_options", "sqrt_options", "scaler_options",
            )
        )

    def to_text(self) -> str:
        def fmt(v):
            if v is None:
                return "none"
            if isinstance(v, bool):
                return "true" if v else "false"
            return str(v)

        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "seed":
                lines.append(f"seed={value}")
            else:
                lines.append(f"{f.name}=" + ",".join(fmt(v) for v in value))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides) -> "SearchSpace":
        """Parse ``key=v1,v2,...`` lines; keys not given keep their defaults."""
        parsers = {
            "lpf_options": lambda v: None if v == "none" else float(v),
            "ds_options": int,
            "pca_options": lambda v: None if v == "none" else int(v),
            "models": str,
        }
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = (s.strip() for s in line.partition("="))
            if not sep:
                raise ValueError(f"line {lineno}: expected key=value")
            if key == "seed":
                kwargs["seed"] = int(value)
                continue
            if key.endswith("_options") and key not in parsers:
                parse = _parse_bool
            elif key in parsers:
                parse = parsers[key]
            else:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            try:
                kwargs[key] = tuple(parse(v.strip().lower() if key != "models" else v.strip())
                                    for v in value.split(","))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        kwargs.update(overrides)
        return cls(**kwargs)


def _parse_bool(v: str) -> bool:
    if v not in ("true", "false"):
        raise ValueError(f"expected true/false, got {v!r}")
    return v == "true"


def enumerate_space(space: SearchSpace, sample_rate_hz: float, input_len: int):
    """All valid configs in declaration order, and the number rejected."""
    if input_len < 2:
        raise ValueError("input_len must be at least 2")
    valid, skipped = [], 0
    for lpf, ds, fft, l2, pca, sq, sc in itertools.product(
        space.lpf_options, space.ds_options, space.fft_options, space.l2norm_options,
        space.pca_options, space.sqrt_options, space.scaler_options,
    ):
        config = PipelineConfig(
            None if lpf is None else float(lpf), int(ds), bool(fft), bool(l2),
            None if pca is None else int(pca), bool(sq), bool(sc),
        )
        try:
            config.validate(sample_rate_hz, input_len)
        except InvalidConfigError:
            skipped += 1
            continue
        valid.append(config)
    return valid, skipped


def enumerate_valid(space: SearchSpace, sample_rate_hz: float, input_len: int) -> List[PipelineConfig]:
    return enumerate_space(space, sample_rate_hz, input_len)[0]


@dataclass(frozen=True)
class SearchRow:
    channel: Channel
    config: PipelineConfig
    model_name: str
    metrics: Metrics
    seed: int

    def sort_key(self):
        return (self.metrics.mae, self.model_name, self.config.to_text(), self.channel.value)


@dataclass(frozen=True)
class SearchFailure:
    channel: Channel
    config: PipelineConfig
    model_name: str
    error: str


@dataclass(frozen=True)
class SearchOutcome:
    rows: Tuple[SearchRow, ...]
    best_per_model: Dict[str, SearchRow]
    skipped_invalid: int
    failures: Tuple[SearchFailure, ...] = ()
    models: Tuple[str, ...] = ()
    k_folds: int = 4
    n_valid_configs: Dict[str, int] = field(default_factory=dict)


_WORKER_STATE: dict = {}


def _init_worker(datasets, plans, models, model_params):
    _WORKER_STATE.update(datasets=datasets, plans=plans, models=models, model_params=model_params)


def _evaluate_task(task):
    # One task = one channel and all configs sharing a per-record stage prefix.
    channel, configs = task
    state = _WORKER_STATE
    ds = state["datasets"][channel]
    plan = state["plans"][channel]
    models = state["models"]
    out = []
    try:
        features = row_features(configs[0], ds.X, ds.sample_rate_hz)
    except (ValueError, ArithmeticError) as exc:
        features, prefix_error = None, exc
    for config in configs:
        if features is None:
            results = {name: prefix_error for name in models}
        else:
            try:
                results = evaluate_models(ds, config, models, plan, state["model_params"], features)
            except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                results = {name: exc for name in models}
        for name in models:
            r = results[name]
            if isinstance(r, Exception):
                out.append((channel, config, name, None, f"{type(r).__name__}: {r}"))
            else:
                out.append((channel, config, name, r.averaged, None))
    return out


def _prefix(config: PipelineConfig):
    return (config.lpf_cutoff_hz, config.ds_factor, config.apply_fft, config.apply_l2_norm)


def run_search(
    ds_current: Optional[TraceDataset],
    ds_voltage: Optional[TraceDataset],
    space: SearchSpace = SearchSpace(),
    k_folds: int = 4,
    workers: int = 1,
    model_params: Optional[dict] = None,
) -> SearchOutcome:
    """Cross-validate every valid (channel, config, model) combination.

    Non-fault records are dropped. Every combination on a channel shares one
    fold plan drawn from ``space.seed``. A failing evaluation becomes a
    :class:`SearchFailure` instead of stopping the sweep. The result does not
    depend on ``workers``.
    """
    if k_folds < 2:
        raise ValueError("k_folds must be at least 2")
    datasets, plans, tasks = {}, {}, []
    skipped = 0
    n_valid = {}
    for ds in (ds_current, ds_voltage):
        if ds is None:
            continue
        ds = ds.faults_only()
        ch = ds.channel
        if ch in datasets:
            raise ValueError(f"two datasets given for channel {ch.value}")
        datasets[ch] = ds
        plans[ch] = make_folds(len(ds), k_folds, space.seed)
        valid, skipped = enumerate_space(space, ds.sample_rate_hz, ds.n_samples)
        n_valid[ch.value] = len(valid)
        groups: Dict[tuple, list] = {}
        for config in valid:
            groups.setdefault(_prefix(config), []).append(config)
        tasks.extend((ch, tuple(group)) for group in groups.values())
    if not datasets:
        raise ValueError("no datasets given")

    models = tuple(space.models)
    init_args = (datasets, plans, models, model_params or {})
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=init_args) as pool:
            results = list(pool.map(_evaluate_task, tasks))
    else:
        _init_worker(*init_args)
        results = [_evaluate_task(t) for t in tasks]

    rows, failures = [], []
    for batch in results:
        for channel, config, name, metrics, error in batch:
            if error is None:
                rows.append(SearchRow(channel, config, name, metrics, space.seed))
            else:
                failures.append(SearchFailure(channel, config, name, error))
    if not rows:
        raise RuntimeError(f"search produced no successful rows ({len(failures)} failures)")
    rows.sort(key=SearchRow.sort_key)
    return SearchOutcome(
        tuple(rows), best_per_model(rows), skipped, tuple(failures), models, k_folds, n_valid
    )


def best_per_model(rows: Sequence[SearchRow], channel=None) -> Dict[str, SearchRow]:
    """Lowest-MAE row of each model, optionally on one channel only."""
    best = {}
    for row in sorted(rows, key=SearchRow.sort_key):
        if channel is not None and row.channel is not Channel(channel):
            continue
        best.setdefault(row.model_name, row)
    return best


@dataclass(frozen=True)
class TableRow:
    model: str
    mape: float
    mae: float
    prr: float
    pp: float


def report_table(outcome_or_rows, channel=None) -> List[TableRow]:
    """Per model, the four metrics of its minimum-MAE configuration."""
    rows = outcome_or_rows.rows if isinstance(outcome_or_rows, SearchOutcome) else outcome_or_rows
    best = best_per_model(rows, channel)
    if not best:
        raise ValueError("no rows matched")
    order = []
    for row in rows:
        if row.model_name in best and row.model_name not in order:
            order.append(row.model_name)
    return [TableRow(m, *(getattr(best[m].metrics, k) for k in METRIC_KEYS)) for m in order]


def format_table(table: Sequence[TableRow]) -> str:
    header = ("Model", "MAPE", "MAE", "PRR", "PP")
    body = [
        (t.model, f"{t.mape:.4g}", f"{t.mae:.4g}", f"{t.prr:.4g}", f"{t.pp:.4g}") for t in table
    ]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = []
    for r in [header] + body:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def table_csv(table: Sequence[TableRow]) -> str:
    return _csv_text(
        ("model",) + METRIC_KEYS,
        [(t.model,) + tuple(repr(getattr(t, k)) for k in METRIC_KEYS) for t in table],
    )


def rows_csv(rows: Sequence[SearchRow]) -> str:
    """One line per evaluation: channel, config fields, model, metrics, seed."""
    header = ("channel",) + CONFIG_KEYS + ("model",) + METRIC_KEYS + ("seed",)
    body = []
    for r in rows:
        flat = r.config.to_dict()
        body.append(
            (r.channel.value,)
            + tuple(flat[k] for k in CONFIG_KEYS)
            + (r.model_name,)
            + tuple(repr(getattr(r.metrics, k)) for k in METRIC_KEYS)
            + (r.seed,)
        )
    return _csv_text(header, body)


def read_rows_csv(text: str) -> List[SearchRow]:
    """Parse the output of :func:`rows_csv`; raises ``ValueError`` naming the bad line."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("rows CSV is empty") from None
    expected = ["channel", *CONFIG_KEYS, "model", *METRIC_KEYS, "seed"]
    if header != expected:
        raise ValueError(f"rows CSV header mismatch: expected {expected}, got {header}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(expected):
            raise ValueError(f"line {lineno}: expected {len(expected)} fields, got {len(rec)}")
        try:
            channel = Channel(rec[0])
            config = PipelineConfig.from_dict(dict(zip(CONFIG_KEYS, rec[1:8])))
            metrics = Metrics(*(float(v) for v in rec[9:13]))
            rows.append(SearchRow(channel, config, rec[8], metrics, int(rec[13])))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return rows


def summary_json(outcome: SearchOutcome) -> str:
    best = {
        name: {
            "channel": row.channel.value,
            "config": row.config.to_dict(),
            "metrics": asdict(row.metrics),
        }
        for name, row in outcome.best_per_model.items()
    }
    per_channel = {}
    for ch in sorted({r.channel.value for r in outcome.rows}):
        per_channel[ch] = {
            name: {"config": row.config.to_dict(), "metrics": asdict(row.metrics)}
            for name, row in best_per_model(outcome.rows, ch).items()
        }
    record = {
        "models": list(outcome.models),
        "k_folds": outcome.k_folds,
        "seed": outcome.rows[0].seed,
        "n_rows": len(outcome.rows),
        "n_failures": len(outcome.failures),
        "n_valid_configs": outcome.n_valid_configs,
        "skipped_invalid": outcome.skipped_invalid,
        "best_per_model": best,
        "best_per_model_by_channel": per_channel,
    }
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def mae_distribution(rows: Sequence[SearchRow]) -> str:
    """Per (channel, model) five-number summary of averaged MAE, as CSV."""
    groups: Dict[Tuple[str, str], List[float]] = {}
    for r in rows:
        groups.setdefault((r.channel.value, r.model_name), []).append(r.metrics.mae)
    body = []
    for (ch, model), values in sorted(groups.items()):
        q = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0])
        body.append((ch, model, len(values)) + tuple(format_float(v) for v in q))
    return _csv_text(("channel", "model", "count", "min", "q1", "median", "q3", "max"), body)
