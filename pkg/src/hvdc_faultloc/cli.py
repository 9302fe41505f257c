"""Command-line entry point: ``generate``, ``run``, ``search`` and ``report``.

Every command writes its outputs plus a ``manifest.json`` into ``--out-dir``.
Outputs are byte-for-byte reproducible from the manifest's ``argv``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .dataset import (
    Channel,
    SynthConfig,
    TraceDataset,
    default_scenario_grid,
    format_float,
    generate_load_changes,
    generate_synthetic,
    read_csv,
    write_csv,
)
from .evaluate import cross_val_predict, make_folds
from .preprocess import InvalidConfigError, PipelineConfig, fit_transform_pipeline
from .regress import BayesianRidgeRegressor, REGISTRY
from .search import (
    SearchSpace,
    format_table,
    mae_distribution,
    read_rows_csv,
    report_table,
    rows_csv,
    run_search,
    summary_json,
    table_csv,
)


class CliError(Exception):
    pass


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _write(path: Path, text: str) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _manifest(out: Path, args, argv, inputs, extra) -> None:
    record = {
        "command": args.command,
        "argv": list(argv),
        "inputs": [str(p) for p in inputs],
        "out_dir": str(out),
        "seed": args.seed,
        "tool_version": __version__,
    }
    record.update(extra)
    _write(out / "manifest.json", json.dumps(record, indent=2, sort_keys=True) + "\n")


def cmd_generate(args, argv) -> None:
    out = _out_dir(args.out_dir)
    cfg = SynthConfig(
        line_length_km=args.line_length,
        distance_step_km=args.distance_step,
        wave_speed_km_per_s=args.wave_speed,
        surge_impedance_ohm=args.surge_impedance,
        noise_snr_db=args.noise_snr_db,
        trace_duration_s=args.duration,
        random_seed=args.seed,
    )
    grid = default_scenario_grid(cfg, _floats(args.resistances), _floats(args.inductances))
    for channel in Channel:
        ds = generate_synthetic(cfg, grid, channel)
        if args.non_fault:
            extra = generate_load_changes(cfg, args.non_fault, channel)
            ds = TraceDataset(ds.records + extra.records, ds.sample_rate_hz, channel)
        write_csv(ds, out / f"{channel.value}.csv")
    _manifest(out, args, argv, [], {"synth_config": {k: v for k, v in vars(cfg).items()}})


def _config_from_args(args) -> PipelineConfig:
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
        return PipelineConfig.from_text(text)
    return PipelineConfig(
        lpf_cutoff_hz=args.lpf,
        ds_factor=args.ds,
        apply_fft=args.fft,
        apply_l2_norm=args.l2_norm,
        pca_components=args.pca,
        apply_sqrt=args.sqrt,
        apply_std_scaler=args.std_scaler,
    )


def _model_params(args) -> dict:
    if args.model == "knn":
        return {"k": args.k}
    if args.model == "dtree":
        depth = None if args.max_depth.lower() == "none" else int(args.max_depth)
        return {"max_depth": depth, "min_leaf": args.min_leaf}
    if args.model == "brr":
        return {"confidence": args.confidence}
    return {}


def _scatter_svg(actual, predicted, size: int = 480, margin: int = 48) -> str:
    top = float(max(np.max(actual), np.nanmax(predicted), 1.0)) * 1.05
    bottom = float(min(0.0, np.nanmin(predicted)))
    span = top - bottom
    inner = size - 2 * margin

    def px(v):
        return margin + (v - bottom) / span * inner

    def py(v):
        return size - margin - (v - bottom) / span * inner

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}"'
        f' viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{inner}" height="{inner}" fill="none" stroke="black"/>',
        f'<line x1="{px(bottom):.2f}" y1="{py(bottom):.2f}" x2="{px(top):.2f}" y2="{py(top):.2f}"'
        ' stroke="blue" stroke-width="1.5"/>',
    ]
    for a, p in zip(actual, predicted):
        parts.append(f'<circle cx="{px(a):.2f}" cy="{py(p):.2f}" r="2.5" fill="black" fill-opacity="0.6"/>')
    parts.append(
        f'<text x="{size / 2:.0f}" y="{size - 12}" text-anchor="middle" font-size="13">actual distance (km)</text>'
    )
    parts.append(
        f'<text x="14" y="{size / 2:.0f}" text-anchor="middle" font-size="13"'
        f' transform="rotate(-90 14 {size / 2:.0f})">predicted distance (km)</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_run(args, argv) -> None:
    out = _out_dir(args.out_dir)
    ds = read_csv(args.data).faults_only()
    config = _config_from_args(args)
    try:
        config.validate(ds.sample_rate_hz, ds.n_samples)
    except InvalidConfigError as exc:
        raise CliError(f"invalid pipeline config: {exc}") from exc
    plan = make_folds(len(ds), args.folds, args.seed)
    params = _model_params(args)
    report, held = cross_val_predict(ds, config, args.model, plan, params)

    _write(out / "report.json", report.to_json())
    _write(out / "config.txt", config.to_text())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("actual_km", "predicted_km", "lower_km", "upper_km", "fold"))
    for a, p, lo, hi, f in zip(held.actual, held.predicted, held.lower, held.upper, held.fold):
        writer.writerow((format_float(a), format_float(p), format_float(lo), format_float(hi), int(f)))
    _write(out / "scatter.csv", buf.getvalue())
    if args.svg:
        _write(out / "scatter.svg", _scatter_svg(held.actual, held.predicted))
    if args.save_model:
        if args.model != "brr":
            raise CliError("--save-model is only supported for --model brr")
        _, Z = fit_transform_pipeline(config, ds.X, ds.sample_rate_hz)
        model = BayesianRidgeRegressor(confidence=args.confidence).fit(Z, ds.y)
        _write(out / "model.txt", model.model_.to_text())
    _manifest(
        out, args, argv, [args.data],
        {"config": config.to_dict(), "model": args.model, "model_params": params, "folds": args.folds},
    )


def _space_from_args(args) -> SearchSpace:
    text = ""
    if args.space:
        try:
            text = Path(args.space).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot read search space {args.space}: {exc}") from exc
    overrides = {}
    if args.models:
        overrides["models"] = tuple(m.strip() for m in args.models.split(",") if m.strip())
    if args.seed is not None:
        overrides["seed"] = args.seed
    space = SearchSpace.from_text(text, **overrides)
    unknown = [m for m in space.models if m not in REGISTRY]
    if unknown:
        raise CliError(f"unknown model(s) {unknown}; choose from {sorted(REGISTRY)}")
    return space


def _failures_csv(failures) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("channel", "config", "model", "error"))
    for f in failures:
        writer.writerow((f.channel.value, f.config.to_text().strip().replace("\n", ";"), f.model_name, f.error))
    return buf.getvalue()


def cmd_search(args, argv) -> None:
    if not (args.current or args.voltage):
        raise CliError("search needs --current and/or --voltage")
    out = _out_dir(args.out_dir)
    space = _space_from_args(args)
    args.seed = space.seed
    current = read_csv(args.current) if args.current else None
    voltage = read_csv(args.voltage) if args.voltage else None
    try:
        outcome = run_search(current, voltage, space, args.folds, workers=args.threads)
    except RuntimeError as exc:
        raise CliError(str(exc)) from exc
    table = report_table(outcome)
    _write(out / "rows.csv", rows_csv(outcome.rows))
    _write(out / "failures.csv", _failures_csv(outcome.failures))
    _write(out / "summary.json", summary_json(outcome))
    _write(out / "table.txt", format_table(table))
    _write(out / "table.csv", table_csv(table))
    _write(out / "mae_by_model.csv", mae_distribution(outcome.rows))
    inputs = [p for p in (args.current, args.voltage) if p]
    _manifest(out, args, argv, inputs, {"space": space.to_text(), "folds": args.folds})


def cmd_report(args, argv) -> None:
    try:
        text = Path(args.rows).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read rows file {args.rows}: {exc}") from exc
    try:
        rows = read_rows_csv(text)
    except ValueError as exc:
        raise CliError(f"malformed rows CSV {args.rows}: {exc}") from exc
    if args.channel:
        rows = [r for r in rows if r.channel is Channel(args.channel)]
    if not rows:
        raise CliError("no rows matched")
    out = _out_dir(args.out_dir)
    table = report_table(rows)
    _write(out / "table.txt", format_table(table))
    _write(out / "table.csv", table_csv(table))
    _write(out / "mae_by_model.csv", mae_distribution(rows))
    _manifest(out, args, argv, [args.rows], {"channel": args.channel})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hvdc-faultloc", description="Single-ended HVdc fault location experiments."
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", required=True, help="directory for outputs and manifest")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--folds", type=int, default=4, help="cross-validation folds")
    common.add_argument("--threads", type=int, default=1, help="worker processes for the sweep")

    g = sub.add_parser("generate", parents=[common], help="write surrogate current/voltage CSVs")
    g.add_argument("--line-length", type=float, default=1000.0, help="km")
    g.add_argument("--distance-step", type=float, default=25.0, help="km between fault positions")
    g.add_argument("--resistances", default="0.01,50,200", help="fault resistances, ohm")
    g.add_argument("--inductances", default="1,200", help="current-limiting inductances, mH")
    g.add_argument("--wave-speed", type=float, default=2.9e5, help="km/s")
    g.add_argument("--surge-impedance", type=float, default=350.0, help="ohm")
    g.add_argument("--noise-snr-db", type=float, default=None)
    g.add_argument("--duration", type=float, default=0.02, help="trace length, s")
    g.add_argument("--non-fault", type=int, default=0, help="number of load-change events to add")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", parents=[common], help="cross-validate one config and model")
    r.add_argument("--data", required=True, help="trace CSV")
    r.add_argument("--config", help="key=value pipeline config file (overrides stage flags)")
    r.add_argument("--lpf", type=float, default=None, help="low-pass cutoff, Hz")
    r.add_argument("--ds", type=int, default=1, help="downsampling factor")
    r.add_argument("--fft", action="store_true")
    r.add_argument("--l2-norm", action="store_true")
    r.add_argument("--pca", type=int, default=None, help="principal components")
    r.add_argument("--sqrt", action="store_true")
    r.add_argument("--std-scaler", action="store_true")
    r.add_argument("--model", default="brr", choices=sorted(REGISTRY))
    r.add_argument("--k", type=int, default=5, help="neighbours for knn")
    r.add_argument("--max-depth", default="12", help="tree depth, or 'none'")
    r.add_argument("--min-leaf", type=int, default=2)
    r.add_argument("--confidence", type=float, default=0.9, help="BRR interval level")
    r.add_argument("--svg", action="store_true", help="also render scatter.svg")
    r.add_argument("--save-model", action="store_true", help="fit BRR on all records, write model.txt")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("search", parents=[common], help="exhaustive pipeline x model sweep")
    s.add_argument("--current", help="current-channel trace CSV")
    s.add_argument("--voltage", help="voltage-channel trace CSV")
    s.add_argument("--space", help="search-space override file (key=v1,v2,... lines)")
    s.add_argument("--models", help="comma-separated model names")
    s.set_defaults(func=cmd_search)

    p = sub.add_parser("report", parents=[common], help="rebuild tables from a rows CSV")
    p.add_argument("--rows", required=True, help="rows.csv written by search")
    p.add_argument("--channel", choices=[c.value for c in Channel])
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.seed is None and args.command != "search":
        args.seed = 0
    try:
        args.func(args, argv)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
