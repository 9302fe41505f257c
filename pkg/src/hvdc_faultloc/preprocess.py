"""Preprocessing stages and the fixed-order pipeline that chains them.

Stage order, applied the same way to every record::

    low-pass FIR -> downsample -> FFT magnitude -> l2 row norm
        -> PCA -> signed sqrt -> standard scaler

The FIR filter and the downsampler run together as one decimating filter.
PCA and scaler statistics are fitted on training rows only.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "DEFAULT_NUM_TAPS",
    "FittedPipeline",
    "InvalidConfigError",
    "PipelineConfig",
    "decimate",
    "design_lowpass",
    "fft",
    "fft_magnitude",
    "fit_pca",
    "fit_transform_pipeline",
    "l2_normalize",
    "next_pow2",
    "row_features",
    "signed_sqrt",
    "stage_lengths",
    "transform",
]

DEFAULT_NUM_TAPS = 63


class InvalidConfigError(ValueError):
    """A pipeline configuration breaks one of the validity rules."""


def design_lowpass(cutoff_hz: float, sample_rate_hz: float, num_taps: int = DEFAULT_NUM_TAPS) -> np.ndarray:
    """Hamming-windowed sinc low-pass taps with unit DC gain."""
    nyquist = sample_rate_hz / 2
    if not 0 < cutoff_hz < nyquist:
        raise InvalidConfigError(
            f"cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz for fs={sample_rate_hz} Hz"
        )
    if num_taps < 1 or num_taps % 2 == 0:
        raise InvalidConfigError(f"num_taps must be a positive odd integer, got {num_taps}")
    fc = cutoff_hz / sample_rate_hz
    n = np.arange(num_taps) - (num_taps - 1) / 2
    taps = 2 * fc * np.sinc(2 * fc * n) * np.hamming(num_taps)
    return taps / taps.sum()


def decimate(x, taps, factor: int) -> np.ndarray:
    """Decimating FIR: ``y[m] = sum_i x[m*N - i] * h[i]`` for ``m < len(x) // N``.

    Samples before the start of the record are taken to equal ``x[0]``.
    ``x`` may be a single record or a 2-D batch of records (one per row).
    """
    if factor < 1:
        raise ValueError(f"decimation factor must be a positive integer, got {factor}")
    x = np.asarray(x, dtype=float)
    h = np.asarray(taps, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    k = len(h)
    length = x2.shape[1]

    m = np.arange(length // factor) * factor
    padded = np.concatenate([np.repeat(x2[:, :1], k - 1, axis=1), x2], axis=1)
    # column (k-1) + j of ``padded`` holds x[j]
    out = np.zeros((x2.shape[0], len(m)))
    for i in range(k):
        out += h[i] * padded[:, m - i + k - 1]
    return out[0] if single else out


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def fft(x) -> np.ndarray:
    """Iterative radix-2 decimation-in-time DFT along the last axis.

    Input is zero-padded to the next power of two.
    """
    x = np.asarray(x, dtype=complex)
    n = x.shape[-1]
    size = next_pow2(n)
    if size != n:
        pad = [(0, 0)] * (x.ndim - 1) + [(0, size - n)]
        x = np.pad(x, pad)
    bits = size.bit_length() - 1
    rev = np.zeros(size, dtype=int)
    for b in range(bits):
        rev |= ((np.arange(size) >> b) & 1) << (bits - 1 - b)
    a = x[..., rev]

    half = 1
    while half < size:
        twiddle = np.exp(-2j * np.pi * np.arange(half) / (2 * half))
        blocks = a.reshape(a.shape[:-1] + (size // (2 * half), 2, half))
        even = blocks[..., 0, :]
        odd = blocks[..., 1, :] * twiddle
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(a.shape)
        half *= 2
    return a


def fft_magnitude(x) -> np.ndarray:
    """``|X[k]|`` for ``k = 0 .. P/2`` where ``P`` is the padded power-of-two length."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise ValueError("fft_magnitude needs at least 2 samples")
    spectrum = fft(x)
    return np.abs(spectrum[..., : spectrum.shape[-1] // 2 + 1])


def l2_normalize(x) -> np.ndarray:
    """``(x - mean) / ||x - mean||_2`` along the last axis."""
    x = np.asarray(x, dtype=float)
    centered = x - x.mean(axis=-1, keepdims=True)
    # Rescale by the largest magnitude first so tiny inputs do not underflow.
    scale = np.max(np.abs(centered), axis=-1, keepdims=True)
    if np.any(scale == 0):
        raise ValueError("l2_normalize: input has zero variance")
    centered = centered / scale
    return centered / np.sqrt(np.sum(centered**2, axis=-1, keepdims=True))


def signed_sqrt(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.sqrt(np.abs(x))


def fit_pca(X, components: int) -> Tuple[np.ndarray, np.ndarray]:
    """Column means and the top principal directions (rows, orthonormal).

    Each direction is signed so that its largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if not 1 <= components <= min(n, p):
        raise InvalidConfigError(
            f"PCA with {components} components needs 1 <= components <= min(n, p) = {min(n, p)}"
        )
    mean = X.mean(axis=0)
    _, _, vt = np.linalg.svd(X - mean, full_matrices=False)
    basis = vt[:components].copy()
    pivots = np.argmax(np.abs(basis), axis=1)
    signs = np.sign(basis[np.arange(components), pivots])
    basis *= signs[:, None]
    return mean, basis


@dataclass(frozen=True)
class PipelineConfig:
    lpf_cutoff_hz: Optional[float] = None
    ds_factor: int = 1
    apply_fft: bool = False
    apply_l2_norm: bool = False
    pca_components: Optional[int] = None
    apply_sqrt: bool = False
    apply_std_scaler: bool = False

    def validate(self, sample_rate_hz: float, input_len: Optional[int] = None) -> None:
        """Raise :class:`InvalidConfigError` if the config cannot run.

        The check needs only the config, the sample rate and the record length.
        """
        if int(self.ds_factor) != self.ds_factor or self.ds_factor < 1:
            raise InvalidConfigError(f"ds_factor must be a positive integer, got {self.ds_factor}")
        if self.apply_l2_norm and self.apply_std_scaler:
            raise InvalidConfigError("l2 normalization and standard scaling are mutually exclusive")
        if self.lpf_cutoff_hz is not None:
            limit = sample_rate_hz / (2 * self.ds_factor)
            if not 0 < self.lpf_cutoff_hz < limit:
                raise InvalidConfigError(
                    f"cutoff {self.lpf_cutoff_hz} Hz not below the post-downsampling"
                    f" Nyquist frequency {limit} Hz"
                )
        if self.pca_components is not None and self.pca_components < 1:
            raise InvalidConfigError("pca_components must be positive")
        if input_len is None:
            return
        taps = DEFAULT_NUM_TAPS if self.lpf_cutoff_hz is not None else 1
        if input_len < taps:
            raise InvalidConfigError(f"records of {input_len} samples are shorter than the {taps}-tap filter")
        after_ds, after_fft = stage_lengths(self, input_len)
        if after_ds < 1:
            raise InvalidConfigError(f"downsampling by {self.ds_factor} leaves no samples")
        if self.apply_fft and after_ds < 2:
            raise InvalidConfigError("FFT needs at least 2 samples after downsampling")
        if self.apply_l2_norm and after_fft < 2:
            raise InvalidConfigError("l2 normalization needs at least 2 features")
        if self.pca_components is not None and self.pca_components > after_fft:
            raise InvalidConfigError(
                f"pca_components={self.pca_components} exceeds the {after_fft} features"
                " produced by the earlier stages"
            )

    def to_text(self) -> str:
        """Flat ``key=value`` lines, ``none`` for absent optionals."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                text = "none"
            elif isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{f.name}={text}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return dict(line.split("=", 1) for line in self.to_text().splitlines())

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        kwargs = {}
        known = {f.name for f in fields(cls)}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise InvalidConfigError(f"line {lineno}: unknown key {key!r}")
            kwargs[key] = value
        return cls.from_dict(kwargs)

    @classmethod
    def from_dict(cls, values: dict) -> "PipelineConfig":
        def parse_bool(key, v):
            v = str(v).lower()
            if v not in ("true", "false"):
                raise InvalidConfigError(f"{key}: expected true/false, got {v!r}")
            return v == "true"

        def parse_opt(key, v, kind):
            if v is None or str(v).lower() == "none":
                return None
            try:
                return kind(v)
            except ValueError:
                raise InvalidConfigError(f"{key}: cannot parse {v!r}") from None

        out = {}
        for key, v in values.items():
            if key == "lpf_cutoff_hz":
                out[key] = parse_opt(key, v, float)
            elif key == "pca_components":
                out[key] = parse_opt(key, v, int)
            elif key == "ds_factor":
                out[key] = parse_opt(key, v, int)
                if out[key] is None:
                    raise InvalidConfigError("ds_factor cannot be none")
            elif key.startswith("apply_"):
                out[key] = parse_bool(key, v)
            else:
                raise InvalidConfigError(f"unknown key {key!r}")
        return cls(**out)


def stage_lengths(config: PipelineConfig, input_len: int) -> Tuple[int, int]:
    """Feature counts after downsampling and after the FFT stage."""
    after_ds = input_len // config.ds_factor
    if config.apply_fft and after_ds >= 1:
        return after_ds, next_pow2(after_ds) // 2 + 1
    return after_ds, after_ds


@dataclass(frozen=True)
class FittedPipeline:
    config: PipelineConfig
    fir_taps: np.ndarray
    pca_mean: Optional[np.ndarray]
    pca_basis: Optional[np.ndarray]
    scaler_mean: Optional[np.ndarray]
    scaler_std: Optional[np.ndarray]
    input_len: int
    output_dim: int


def _row_stages(config: PipelineConfig, taps: np.ndarray, X: np.ndarray) -> np.ndarray:
    if config.lpf_cutoff_hz is not None or config.ds_factor > 1:
        X = decimate(X, taps, config.ds_factor)
    if config.apply_fft:
        X = fft_magnitude(X)
    if config.apply_l2_norm:
        X = l2_normalize(X)
    return X


def _taps(config: PipelineConfig, sample_rate_hz: float) -> np.ndarray:
    if config.lpf_cutoff_hz is not None:
        return design_lowpass(config.lpf_cutoff_hz, sample_rate_hz)
    return np.ones(1)


def row_features(config: PipelineConfig, X, sample_rate_hz: float) -> np.ndarray:
    """Stages that act on each record alone: filter/downsample, FFT, l2 norm.

    They carry no fitted state, so the result for a record does not depend on
    which other records are present.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    config.validate(sample_rate_hz, X.shape[1])
    return _row_stages(config, _taps(config, sample_rate_hz), X)


def _fit_tail(config: PipelineConfig, Z: np.ndarray):
    pca_mean = pca_basis = None
    if config.pca_components is not None:
        pca_mean, pca_basis = fit_pca(Z, config.pca_components)
        Z = (Z - pca_mean) @ pca_basis.T
    if config.apply_sqrt:
        Z = signed_sqrt(Z)
    scaler_mean = scaler_std = None
    if config.apply_std_scaler:
        scaler_mean = Z.mean(axis=0)
        scaler_std = Z.std(axis=0)
        scaler_std[scaler_std == 0] = 1.0
        Z = (Z - scaler_mean) / scaler_std
    return (pca_mean, pca_basis, scaler_mean, scaler_std), Z


def _apply_tail(fp: "FittedPipeline", Z: np.ndarray) -> np.ndarray:
    if fp.pca_basis is not None:
        Z = (Z - fp.pca_mean) @ fp.pca_basis.T
    if fp.config.apply_sqrt:
        Z = signed_sqrt(Z)
    if fp.scaler_mean is not None:
        Z = (Z - fp.scaler_mean) / fp.scaler_std
    return Z


def fit_transform_pipeline(
    config: PipelineConfig, X_train, sample_rate_hz: float, features=None
):
    """Fit the pipeline on training rows; return ``(FittedPipeline, transformed rows)``.

    ``features`` may carry precomputed :func:`row_features` output for
    ``X_train`` so that sweeps over PCA/sqrt/scaler settings reuse it.
    """
    X = np.atleast_2d(np.asarray(X_train, dtype=float))
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training rows")
    config.validate(sample_rate_hz, X.shape[1])
    taps = _taps(config, sample_rate_hz)
    Z = _row_stages(config, taps, X) if features is None else np.asarray(features, dtype=float)
    state, Z = _fit_tail(config, Z)
    fitted = FittedPipeline(config, taps, *state, X.shape[1], Z.shape[1])
    return fitted, Z


def transform(fp: FittedPipeline, X, features=None) -> np.ndarray:
    """Apply a fitted pipeline to new rows with its frozen statistics."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != fp.input_len:
        raise ValueError(f"rows have {X.shape[1]} samples, pipeline was fitted on {fp.input_len}")
    Z = _row_stages(fp.config, fp.fir_taps, X) if features is None else np.asarray(features, dtype=float)
    return _apply_tail(fp, Z)
