"""End-to-end acceptance checks.

Each test prints one ``[acceptance] <name>: PASS|FAIL (<detail>)`` line and
then asserts, so ``pytest -v -s`` or the tee'd log shows a verdict for every
check even when one fails. The last three checks drive the command-line tool
on the default surrogate data (seed 7); the sweep is marked ``slow``.
"""

import csv
import json
import math
import time

import numpy as np
import pytest
from oracles import brute_decimate, count_valid_configs, direct_dft, gram_spectrum, ridge_solve

from hvdc_faultloc.cli import main
from hvdc_faultloc.evaluate import mae, mape, pp, prr
from hvdc_faultloc.preprocess import decimate, fft_magnitude, fit_pca
from hvdc_faultloc.regress import Fixed, brr_fit, brr_interval
from hvdc_faultloc.search import SearchSpace, enumerate_space


def verdict(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"\n[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def test_brr_fixed_weights_match_direct_ridge_solve(capsys):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        X = rng.normal(size=(50, 10))
        y = X @ rng.normal(size=10) + rng.normal(size=50)
        a = 10 ** rng.uniform(-2, 2)
        m = brr_fit(X, y, Fixed(a, 1.0))
        worst = max(worst, float(np.max(np.abs(m.weights - ridge_solve(X, y, a)))))
    elapsed = time.perf_counter() - start
    verdict(capsys, "brr-ridge oracle", worst <= 1e-8 and elapsed < 1.0,
            f"max abs diff {worst:.2e} <= 1e-8, {elapsed:.3f}s < 1s")


def test_fft_magnitude_matches_direct_dft(capsys):
    rng = np.random.default_rng(102)
    start = time.perf_counter()
    worst_rel = worst_parseval = 0.0
    for i in range(50):
        n = (16, 64, 200)[i % 3]
        x = rng.normal(size=n)
        padded = np.concatenate([x, np.zeros(256 - n)]) if n == 200 else x
        P = len(padded)
        expected = np.abs(direct_dft(padded))[: P // 2 + 1]
        got = fft_magnitude(x)
        worst_rel = max(worst_rel, float(np.max(np.abs(got - expected)) / np.max(expected)))
        # Rebuild the full-spectrum energy from the half spectrum of a real signal.
        energy = got[0] ** 2 + got[-1] ** 2 + 2 * np.sum(got[1:-1] ** 2)
        worst_parseval = max(worst_parseval, abs(energy - P * np.sum(padded**2)) / (P * np.sum(padded**2)))
    elapsed = time.perf_counter() - start
    ok = worst_rel <= 1e-9 and worst_parseval <= 1e-9 and elapsed < 1.0
    verdict(capsys, "dft oracle", ok,
            f"rel err {worst_rel:.2e}, parseval {worst_parseval:.2e} (<= 1e-9), {elapsed:.3f}s < 1s")


def test_decimate_matches_brute_force(capsys):
    rng = np.random.default_rng(103)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=int(rng.integers(2, 300)))
        h = rng.normal(size=int(rng.integers(1, 64)))
        factor = int(rng.integers(1, min(len(x), 12) + 1))
        worst = max(worst, float(np.max(np.abs(decimate(x, h, factor) - brute_decimate(x, h, factor)))))
    elapsed = time.perf_counter() - start
    verdict(capsys, "decimator oracle", worst <= 1e-12 and elapsed < 1.0,
            f"max abs diff {worst:.2e} <= 1e-12, {elapsed:.3f}s < 1s")


def test_pca_orthonormal_reconstructs_and_cost_is_discarded_spectrum(capsys):
    rng = np.random.default_rng(104)
    start = time.perf_counter()
    ortho = recon = cost_err = 0.0
    for _ in range(10):
        X = rng.normal(size=(30, 8)) @ rng.normal(size=(8, 8))
        mean, basis = fit_pca(X, 8)
        ortho = max(ortho, float(np.max(np.abs(basis @ basis.T - np.eye(8)))))
        full = (X - mean) @ basis.T @ basis + mean
        recon = max(recon, float(np.max(np.abs(full - X))))
        spectrum = gram_spectrum(X)
        for k in range(1, 8):
            mean, basis = fit_pca(X, k)
            approx = (X - mean) @ basis.T @ basis + mean
            cost = float(np.sum((X - approx) ** 2))
            cost_err = max(cost_err, abs(cost - float(np.sum(spectrum[k:]))))
    elapsed = time.perf_counter() - start
    ok = ortho <= 1e-10 and recon < 1e-8 and cost_err <= 1e-8 and elapsed < 1.0
    verdict(capsys, "pca", ok,
            f"orthonormality {ortho:.1e}, reconstruction {recon:.1e}, cost gap {cost_err:.1e}, {elapsed:.3f}s")


def test_metric_identities_and_asymmetry(capsys):
    start = time.perf_counter()
    examples = [
        mape([100], [100]) == 0, mape([100], [150]) == 50.0, mape([25, 50], [30, 40]) == 20.0,
        mae([1, 2], [1, 2]) == 0, mae([0, 0], [3, -3]) == 3, mae([25, 50, 75], [35, 45, 90]) == 10,
        prr([5], [5]) == 0, prr([100], [50]) == 1.0, prr([100], [200]) == 0.25,
        pp([5], [5]) == 0, pp([50], [100]) == 1.0, pp([200], [100]) == 0.25,
    ]
    rng = np.random.default_rng(105)
    asym = 0
    for _ in range(1000):
        x = rng.uniform(1, 1000)
        d = rng.uniform(0, x)
        if d == 0:
            d = x / 2
        asym += prr([x], [x - d]) > prr([x], [x + d]) and pp([x - d], [x]) > pp([x + d], [x])
    elapsed = time.perf_counter() - start
    ok = all(examples) and asym == 1000 and elapsed < 1.0
    verdict(capsys, "metric identities", ok,
            f"{sum(examples)}/12 worked examples, {asym}/1000 asymmetry pairs, {elapsed:.3f}s")


def test_grid_enumeration_matches_oracle(capsys):
    start = time.perf_counter()
    space = SearchSpace()
    valid, skipped = enumerate_space(space, 10_000.0, 200)
    oracle = count_valid_configs(
        space.lpf_options, space.ds_options, space.fft_options, space.l2norm_options,
        space.pca_options, space.sqrt_options, space.scaler_options, 10_000.0, 200,
    )
    elapsed = time.perf_counter() - start
    ok = (len(valid), skipped) == oracle and len(valid) + skipped == space.product_size() and elapsed < 1.0
    verdict(capsys, "grid enumeration", ok,
            f"valid {len(valid)}, skipped {skipped}, oracle {oracle}, product {space.product_size()}, {elapsed:.3f}s")


def test_interval_coverage(capsys):
    rng = np.random.default_rng(109)
    a, sigma2, n, p = 1.0, 4.0, 50, 5
    start = time.perf_counter()
    hits = 0
    for _ in range(1000):
        w = rng.normal(scale=math.sqrt(sigma2 / a), size=p)
        b = rng.normal()
        X = rng.normal(size=(n, p))
        y = b + X @ w + rng.normal(scale=math.sqrt(sigma2), size=n)
        m = brr_fit(X, y, Fixed(a, sigma2), center_features=True)
        x = rng.normal(size=p)
        iv = brr_interval(m, x, 0.9)
        hits += iv.lower <= b + x @ w + rng.normal(scale=math.sqrt(sigma2)) <= iv.upper
    elapsed = time.perf_counter() - start
    rate = hits / 1000
    verdict(capsys, "interval coverage", 0.87 <= rate <= 0.93 and elapsed < 10.0,
            f"90% interval covered {rate:.3f} in [0.87, 0.93], {elapsed:.2f}s < 10s")


# --- command-line end-to-end ----------------------------------------------------

RUN_FLAGS = ["--lpf", "150", "--ds", "3", "--fft", "--l2-norm", "--pca", "12", "--seed", "7"]


@pytest.fixture(scope="module")
def default_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["generate", "--out-dir", str(out), "--seed", "7"]) == 0
    return out


def _run(data, out, model="brr"):
    assert main(["run", "--out-dir", str(out), "--data", str(data)] + RUN_FLAGS + ["--model", model]) == 0
    with open(out / "scatter.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    report = json.loads((out / "report.json").read_text())
    return report, rows


def _run_both_channels(data_dir, base):
    results = {}
    for channel in ("current", "voltage"):
        for model in ("brr", "mean"):
            results[channel, model] = _run(data_dir / f"{channel}.csv", base / f"{channel}_{model}", model)
    return results


@pytest.fixture(scope="module")
def learning_runs(default_data, tmp_path_factory):
    base = tmp_path_factory.mktemp("run")
    start = time.perf_counter()
    results = _run_both_channels(default_data, base)
    return base, results, time.perf_counter() - start


def test_end_to_end_learning_signal(learning_runs, capsys):
    _, results, elapsed = learning_runs
    ok = elapsed < 30.0
    details = []
    for channel in ("current", "voltage"):
        brr_report, rows = results[channel, "brr"]
        base_report, _ = results[channel, "mean"]
        actual = np.array([float(r["actual_km"]) for r in rows])
        predicted = np.array([float(r["predicted_km"]) for r in rows])
        r = float(np.corrcoef(actual, predicted)[0, 1])
        ratio = brr_report["averaged"]["mae"] / base_report["averaged"]["mae"]
        ok = ok and len(rows) == 234 and ratio <= 0.5 and r >= 0.9
        details.append(f"{channel}: MAE ratio {ratio:.3f} <= 0.5, pearson {r:.3f} >= 0.9")
    verdict(capsys, "end-to-end learning signal", ok, "; ".join(details) + f"; {elapsed:.1f}s < 30s")


def _search(data_dir, out, threads):
    start = time.perf_counter()
    rc = main([
        "search", "--out-dir", str(out), "--current", str(data_dir / "current.csv"),
        "--voltage", str(data_dir / "voltage.csv"), "--seed", "7", "--threads", str(threads),
    ])
    assert rc == 0
    return time.perf_counter() - start


@pytest.fixture(scope="module")
def full_search(default_data, tmp_path_factory):
    out = tmp_path_factory.mktemp("search")
    return out, _search(default_data, out, threads=8)


@pytest.mark.slow
def test_brr_best_row_beats_baselines_on_prr_and_pp(full_search, capsys):
    out, elapsed = full_search
    summary = json.loads((out / "summary.json").read_text())
    table = (out / "table.txt").read_text()
    by_channel = summary["best_per_model_by_channel"]
    wins, details = [], []
    for channel, best in sorted(by_channel.items()):
        b = best["brr"]["metrics"]
        others = [best[m]["metrics"] for m in ("knn", "dtree")]
        won = all(b["prr"] < o["prr"] and b["pp"] < o["pp"] for o in others)
        wins.append(won)
        details.append(
            f"{channel}: brr prr/pp {b['prr']:.3g}/{b['pp']:.3g} vs "
            + ", ".join(f"{m} {best[m]['metrics']['prr']:.3g}/{best[m]['metrics']['pp']:.3g}" for m in ("knn", "dtree"))
        )
    completed = summary["n_rows"] > 0 and len(table.splitlines()) == 2 + 3
    ok = completed and any(wins) and elapsed < 15 * 60
    verdict(capsys, "brr beats baselines on prr and pp", ok,
            "; ".join(details) + f"; {summary['n_rows']} rows, {elapsed:.0f}s < 900s")


def _normalised_manifest(path):
    record = json.loads(path.read_text())
    argv = record.pop("argv")
    record.pop("out_dir")
    i = argv.index("--out-dir")
    return record, argv[:i] + argv[i + 2:]


def _same_outputs(a, b):
    names = sorted(p.name for p in a.iterdir())
    if names != sorted(p.name for p in b.iterdir()):
        return False, "file sets differ"
    for name in names:
        if name == "manifest.json":
            if _normalised_manifest(a / name) != _normalised_manifest(b / name):
                return False, f"{a.name}/{name} differs"
        elif (a / name).read_bytes() != (b / name).read_bytes():
            return False, f"{a.name}/{name} differs"
    return True, f"{len(names)} files"


@pytest.mark.slow
def test_repeated_runs_are_byte_identical(default_data, learning_runs, full_search, tmp_path, capsys):
    base, _, _ = learning_runs
    _run_both_channels(default_data, tmp_path / "run")
    checked = []
    ok = True
    for first in sorted(base.iterdir()):
        same, what = _same_outputs(first, tmp_path / "run" / first.name)
        ok = ok and same
        checked.append(what if not same else f"{first.name} ok")
    search_out, _ = full_search
    _search(default_data, tmp_path / "search", threads=8)
    same, what = _same_outputs(search_out, tmp_path / "search")
    ok = ok and same
    checked.append(f"search {'ok' if same else what}")
    verdict(capsys, "determinism", ok, ", ".join(checked))
