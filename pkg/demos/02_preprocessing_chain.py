"""
The preprocessing chain
=======================

Stages always run in one order: low-pass, downsample, magnitude spectrum,
per-record l2 normalisation, PCA, signed square root, standard scaling.
Stateful stages (PCA, scaler) are fitted on training records only.
"""

import numpy as np

from hvdc_faultloc import REFERENCE_CONFIG, PipelineConfig, SynthConfig, default_scenario_grid
from hvdc_faultloc import fit_transform_pipeline, generate_synthetic, transform
from hvdc_faultloc.preprocess import InvalidConfigError, stage_lengths

cfg = SynthConfig(random_seed=7)
ds = generate_synthetic(cfg, default_scenario_grid(cfg), "current")
print(f"{len(ds)} records x {ds.n_samples} samples")

# %%
# Shapes through the reference chain
# ----------------------------------

print(REFERENCE_CONFIG.to_text())
after_ds, after_fft = stage_lengths(REFERENCE_CONFIG, ds.n_samples)
print(f"{ds.n_samples} samples -> {after_ds} after downsampling -> {after_fft} spectrum bins"
      f" -> {REFERENCE_CONFIG.pca_components} principal components")

# %%
# Fit on a training split, apply to the rest
# ------------------------------------------

rng = np.random.default_rng(0)
order = rng.permutation(len(ds))
train, test = order[:180], order[180:]
fitted, Z_train = fit_transform_pipeline(REFERENCE_CONFIG, ds.X[train], ds.sample_rate_hz)
Z_test = transform(fitted, ds.X[test])
print("train features", Z_train.shape, "test features", Z_test.shape)
print("PCA basis orthonormal:", np.allclose(fitted.pca_basis @ fitted.pca_basis.T, np.eye(12)))

# %%
# Invalid combinations are refused up front
# -----------------------------------------

for bad in (
    PipelineConfig(apply_l2_norm=True, apply_std_scaler=True),
    PipelineConfig(lpf_cutoff_hz=500.0, ds_factor=100),
    PipelineConfig(ds_factor=100, pca_components=4),
):
    try:
        bad.validate(ds.sample_rate_hz, ds.n_samples)
    except InvalidConfigError as exc:
        print("rejected:", exc)
