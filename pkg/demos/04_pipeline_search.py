"""
Searching preprocessing x model combinations
============================================

Every valid pipeline configuration is cross-validated with each model and
ranked by fold-averaged MAE; the best row per model forms the summary table.
A reduced space keeps this demo to a few seconds; the command-line
``search`` subcommand runs the full default space.
"""

from hvdc_faultloc import SearchSpace, SynthConfig, default_scenario_grid, generate_synthetic
from hvdc_faultloc.search import enumerate_space, format_table, report_table, run_search

cfg = SynthConfig(random_seed=7)
grid = default_scenario_grid(cfg)
current = generate_synthetic(cfg, grid, "current")
voltage = generate_synthetic(cfg, grid, "voltage")

full = SearchSpace(seed=7)
valid, skipped = enumerate_space(full, current.sample_rate_hz, current.n_samples)
print(f"default space: {full.product_size()} combinations, {len(valid)} valid, {skipped} skipped")

# %%
# A reduced sweep
# ---------------

space = SearchSpace(
    lpf_options=(None, 300.0, 150.0),
    ds_options=(1, 3),
    fft_options=(True, False),
    l2norm_options=(True,),
    pca_options=(None, 12),
    sqrt_options=(False,),
    scaler_options=(False,),
    seed=7,
)
outcome = run_search(current, voltage, space)
print(f"{len(outcome.rows)} rows, {len(outcome.failures)} failures")

for channel in ("current", "voltage"):
    print(f"\n{channel} channel, best configuration per model")
    print(format_table(report_table(outcome, channel)))

best = outcome.rows[0]
print("overall best:", best.model_name, best.channel.value, f"MAE {best.metrics.mae:.2f} km")
print(best.config.to_text())
