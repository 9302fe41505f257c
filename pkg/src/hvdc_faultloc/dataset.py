"""Single-ended fault traces: data model, CSV I/O and a traveling-wave surrogate.

The surrogate replaces electromagnetic-transient simulation with a closed-form
model that keeps the label-relevant structure of a dc line fault seen from one
terminal:

* the first wavefront reaches the terminal after ``d / v`` seconds,
* reflections between terminal and fault point follow every ``2 d / v`` seconds,
  each scaled by the fault reflection coefficient
  ``rho = (R_f - Z_c) / (R_f + Z_c)``; the converter terminal looks like a
  short to travelling waves (coefficient -1), so one round trip scales the
  wave by ``-rho``,
* step amplitudes scale with ``V_dc / (Z_c + R_f + r d)``,
* each step rises with time constant ``tau = L / (R_f + r d + Z_c)``.

The current channel sees ``I_0 + sum_j A (-rho)^j env_j[n]`` and the voltage
channel sees ``V_dc - Z_c sum_j A (-rho)^j env_j[n]``.  For ``R_f <= Z_c`` all
terms are non-negative and each shrinks as ``R_f`` grows, so the peak deviation
is non-increasing in fault resistance.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

__all__ = [
    "Channel",
    "EventKind",
    "SchemaError",
    "SynthConfig",
    "TraceDataset",
    "TraceRecord",
    "default_scenario_grid",
    "first_arrival_index",
    "generate_load_changes",
    "generate_synthetic",
    "read_csv",
    "reflection_coefficient",
    "write_csv",
]

RESISTANCE_RANGE_OHM = (0.01, 200.0)
INDUCTANCE_RANGE_MH = (1.0, 200.0)
MIN_TRACE_SAMPLES = 64

METADATA_COLUMNS = (
    "channel",
    "sample_rate_hz",
    "distance_km",
    "fault_resistance_ohm",
    "inductance_mh",
    "event_kind",
)


class SchemaError(ValueError):
    """Raised when a trace CSV file does not follow the expected layout."""


class Channel(str, enum.Enum):
    CURRENT = "current"
    VOLTAGE = "voltage"


class EventKind(str, enum.Enum):
    FAULT = "fault"
    NON_FAULT = "non_fault"


@dataclass(frozen=True)
class TraceRecord:
    samples: Tuple[float, ...]
    distance_km: float
    fault_resistance_ohm: float
    inductance_mh: float
    event_kind: EventKind = EventKind.FAULT

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))
        object.__setattr__(self, "event_kind", EventKind(self.event_kind))
        if self.event_kind is EventKind.FAULT and not self.distance_km > 0:
            raise ValueError(f"fault record needs distance_km > 0, got {self.distance_km}")


@dataclass(frozen=True)
class TraceDataset:
    """Rectangular set of equally long traces from one measurement channel."""

    records: Tuple[TraceRecord, ...]
    sample_rate_hz: float = 10_000.0
    channel: Channel = Channel.CURRENT

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "channel", Channel(self.channel))
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        lengths = {len(r.samples) for r in self.records}
        if len(lengths) > 1:
            raise ValueError(f"records have differing sample counts: {sorted(lengths)}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_samples(self) -> int:
        return len(self.records[0].samples) if self.records else 0

    @cached_property
    def X(self) -> np.ndarray:
        """Samples as a read-only ``(n_records, n_samples)`` float array."""
        X = np.array([r.samples for r in self.records], dtype=float).reshape(
            len(self.records), self.n_samples
        )
        X.flags.writeable = False
        return X

    @cached_property
    def y(self) -> np.ndarray:
        """Fault distances in km (read-only)."""
        y = np.array([r.distance_km for r in self.records], dtype=float)
        y.flags.writeable = False
        return y

    def faults_only(self) -> "TraceDataset":
        keep = tuple(r for r in self.records if r.event_kind is EventKind.FAULT)
        return TraceDataset(keep, self.sample_rate_hz, self.channel)

    def subset(self, indices: Iterable[int]) -> "TraceDataset":
        return TraceDataset(
            tuple(self.records[i] for i in indices), self.sample_rate_hz, self.channel
        )


@dataclass(frozen=True)
class SynthConfig:
    line_length_km: float = 1000.0
    distance_step_km: float = 25.0
    dc_voltage_v: float = 640e3
    line_resistance_ohm_per_km: float = 0.03206
    wave_speed_km_per_s: float = 2.9e5
    surge_impedance_ohm: float = 350.0
    noise_snr_db: Optional[float] = None
    trace_duration_s: float = 0.02
    random_seed: int = 0
    sample_rate_hz: float = 10_000.0
    rated_power_w: float = 1e9

    def __post_init__(self):
        if self.wave_speed_km_per_s <= 0:
            raise ValueError("wave_speed_km_per_s must be positive")
        if self.line_length_km <= 0 or self.distance_step_km <= 0:
            raise ValueError("line length and distance step must be positive")
        if self.surge_impedance_ohm <= 0:
            raise ValueError("surge_impedance_ohm must be positive")
        if self.random_seed < 0:
            raise ValueError("random_seed must be non-negative")
        if self.n_samples < MIN_TRACE_SAMPLES:
            raise ValueError(
                f"trace_duration_s * sample_rate_hz gives {self.n_samples} samples,"
                f" need at least {MIN_TRACE_SAMPLES}"
            )

    @property
    def n_samples(self) -> int:
        return int(round(self.trace_duration_s * self.sample_rate_hz))

    @property
    def prefault_current_a(self) -> float:
        return self.rated_power_w / self.dc_voltage_v

    def distances(self) -> np.ndarray:
        """Fault positions ``step, 2*step, ...`` strictly short of the far-end bus."""
        count = math.ceil(self.line_length_km / self.distance_step_km - 1e-9) - 1
        return self.distance_step_km * np.arange(1, count + 1)


Scenario = Tuple[float, float, float]


def default_scenario_grid(
    cfg: SynthConfig,
    resistances_ohm: Sequence[float] = (0.01, 50.0, 200.0),
    inductances_mh: Sequence[float] = (1.0, 200.0),
) -> list:
    """Cartesian product of distances x resistances x inductances, distance-major."""
    return [
        (float(d), float(r), float(l))
        for d in cfg.distances()
        for r in resistances_ohm
        for l in inductances_mh
    ]


def reflection_coefficient(fault_resistance_ohm: float, surge_impedance_ohm: float) -> float:
    return (fault_resistance_ohm - surge_impedance_ohm) / (
        fault_resistance_ohm + surge_impedance_ohm
    )


def first_arrival_index(distance_km: float, cfg: SynthConfig) -> int:
    return int(round(cfg.sample_rate_hz * distance_km / cfg.wave_speed_km_per_s))


def _transient(cfg: SynthConfig, distance_km: float, r_f: float, l_mh: float) -> np.ndarray:
    # Sum of delayed, geometrically scaled rising steps, in amperes.
    n = cfg.n_samples
    fs = cfg.sample_rate_hz
    series_r = cfg.surge_impedance_ohm + r_f + cfg.line_resistance_ohm_per_km * distance_km
    amplitude = cfg.dc_voltage_v / series_r
    tau_samples = fs * (l_mh * 1e-3) / series_r
    rho = reflection_coefficient(r_f, cfg.surge_impedance_ohm)

    out = np.zeros(n)
    idx = np.arange(n)
    j = 0
    while True:
        start = int(round(fs * (2 * j + 1) * distance_km / cfg.wave_speed_km_per_s))
        if start >= n:
            break
        step = amplitude * (-rho) ** j
        if step == 0.0:
            break
        elapsed = idx[start:] - start + 1
        out[start:] += step * -np.expm1(-elapsed / tau_samples)
        j += 1
    return out


def _add_noise(trace: np.ndarray, transient: np.ndarray, snr_db: float, rng) -> np.ndarray:
    power = float(np.mean(transient**2))
    if power == 0.0:
        return trace
    sigma = math.sqrt(power / 10 ** (snr_db / 10))
    return trace + rng.normal(0.0, sigma, size=trace.shape)


def _check_scenario(cfg: SynthConfig, d: float, r_f: float, l_mh: float) -> None:
    if not 0 < d <= cfg.line_length_km:
        raise ValueError(f"distance {d} km outside (0, {cfg.line_length_km}] km")
    lo, hi = RESISTANCE_RANGE_OHM
    if not lo <= r_f <= hi:
        raise ValueError(f"fault resistance {r_f} ohm outside [{lo}, {hi}]")
    lo, hi = INDUCTANCE_RANGE_MH
    if not lo <= l_mh <= hi:
        raise ValueError(f"inductance {l_mh} mH outside [{lo}, {hi}]")


def generate_synthetic(
    cfg: SynthConfig,
    scenario_grid: Sequence[Scenario],
    channel: Union[Channel, str] = Channel.CURRENT,
) -> TraceDataset:
    """One surrogate fault trace per ``(distance_km, R_f, L_mh)`` scenario.

    Noise, when ``cfg.noise_snr_db`` is set, is zero-mean Gaussian scaled to the
    power of the transient component and drawn from a per-record generator
    seeded by ``(random_seed, record index)``.
    """
    channel = Channel(channel)
    if len(scenario_grid) == 0:
        raise ValueError("scenario_grid is empty")

    records = []
    for i, (d, r_f, l_mh) in enumerate(scenario_grid):
        _check_scenario(cfg, d, r_f, l_mh)
        transient = _transient(cfg, d, r_f, l_mh)
        if channel is Channel.CURRENT:
            transient_signal = transient
            trace = cfg.prefault_current_a + transient
        else:
            transient_signal = -cfg.surge_impedance_ohm * transient
            trace = cfg.dc_voltage_v + transient_signal
        if cfg.noise_snr_db is not None:
            rng = np.random.default_rng([cfg.random_seed, i])
            trace = _add_noise(trace, transient_signal, cfg.noise_snr_db, rng)
        records.append(TraceRecord(tuple(trace), float(d), float(r_f), float(l_mh)))
    return TraceDataset(tuple(records), cfg.sample_rate_hz, channel)


def generate_load_changes(
    cfg: SynthConfig, count: int, channel: Union[Channel, str] = Channel.CURRENT
) -> TraceDataset:
    """Non-fault events: a 1-5 % ramp in the steady level starting at a random sample.

    Distance, resistance and inductance fields are written as zero.
    """
    channel = Channel(channel)
    n = cfg.n_samples
    base = cfg.prefault_current_a if channel is Channel.CURRENT else cfg.dc_voltage_v
    idx = np.arange(n)
    records = []
    for i in range(count):
        rng = np.random.default_rng([cfg.random_seed, 1_000_003, i])
        start = int(rng.integers(0, n // 2))
        ramp = int(rng.integers(5, n // 2))
        change = base * rng.uniform(0.01, 0.05) * rng.choice([-1.0, 1.0])
        trace = base + change * np.clip((idx - start) / ramp, 0.0, 1.0)
        if cfg.noise_snr_db is not None:
            trace = _add_noise(trace, trace - base, cfg.noise_snr_db, rng)
        records.append(TraceRecord(tuple(trace), 0.0, 0.0, 0.0, EventKind.NON_FAULT))
    return TraceDataset(tuple(records), cfg.sample_rate_hz, channel)


def format_float(x: float) -> str:
    """Shortest round-trip decimal, with a trailing ``.0`` dropped."""
    text = repr(float(x))
    return text[:-2] if text.endswith(".0") else text


def write_csv(ds: TraceDataset, path: Union[str, Path]) -> None:
    path = Path(path)
    header = list(METADATA_COLUMNS) + [f"s{i}" for i in range(ds.n_samples)]
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for r in ds.records:
                writer.writerow(
                    [
                        ds.channel.value,
                        format_float(ds.sample_rate_hz),
                        format_float(r.distance_km),
                        format_float(r.fault_resistance_ohm),
                        format_float(r.inductance_mh),
                        r.event_kind.value,
                    ]
                    + [format_float(s) for s in r.samples]
                )
    except OSError as exc:
        raise OSError(f"cannot write trace CSV {path}: {exc}") from exc


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise SchemaError(f"row {row}, column {column!r}: not a number: {cell!r}") from None


def read_csv(path: Union[str, Path]) -> TraceDataset:
    """Read a trace CSV; rows are numbered from 1 with the header as row 1."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read trace CSV {path}: {exc}") from exc

    if not rows or not any(cell.strip() for cell in rows[0]):
        raise SchemaError(f"{path}: missing header")
    header = rows[0]
    k = len(METADATA_COLUMNS)
    missing = [c for c in METADATA_COLUMNS if c not in header[:k]]
    if missing or tuple(header[:k]) != METADATA_COLUMNS:
        raise SchemaError(f"{path}: header missing metadata columns {missing or list(METADATA_COLUMNS)}")
    sample_cols = header[k:]
    for j, name in enumerate(sample_cols):
        if name != f"s{j}":
            raise SchemaError(f"{path}: header column {k + j + 1} should be 's{j}', got {name!r}")

    channel = None
    sample_rate = None
    records = []
    for rownum, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise SchemaError(
                f"{path}: row {rownum} has {len(row)} columns, header has {len(header)}"
            )
        try:
            row_channel = Channel(row[0])
        except ValueError:
            raise SchemaError(f"{path}: row {rownum}, column 'channel': unknown {row[0]!r}") from None
        row_rate = _parse_float(row[1], rownum, "sample_rate_hz")
        if channel is None:
            channel, sample_rate = row_channel, row_rate
        elif row_channel is not channel or row_rate != sample_rate:
            raise SchemaError(f"{path}: row {rownum} changes channel or sample rate")
        try:
            kind = EventKind(row[5])
        except ValueError:
            raise SchemaError(f"{path}: row {rownum}, column 'event_kind': unknown {row[5]!r}") from None
        samples = tuple(
            _parse_float(cell, rownum, sample_cols[j]) for j, cell in enumerate(row[k:])
        )
        try:
            records.append(
                TraceRecord(
                    samples,
                    _parse_float(row[2], rownum, "distance_km"),
                    _parse_float(row[3], rownum, "fault_resistance_ohm"),
                    _parse_float(row[4], rownum, "inductance_mh"),
                    kind,
                )
            )
        except ValueError as exc:
            raise SchemaError(f"{path}: row {rownum}: {exc}") from None

    if channel is None:
        raise SchemaError(f"{path}: no data rows")
    return TraceDataset(tuple(records), sample_rate, channel)
