"""Seeded synthetic rover telemetry with a labeled anomaly taxonomy.

Nominal windows are a per-channel operating level plus a few low-frequency
sinusoids plus AR(1) Gaussian noise; anomalies are injected on top.  Files are
JSON-lines: one header line (format, version, generator config) followed by one
line per window.
"""

from dataclasses import asdict, dataclass, replace
import json
from pathlib import Path

import numpy as np

from ._validation import check_int_range, check_nonnegative, check_positive, check_unit_interval
from .exceptions import FormatError, InputDomainError

FORMAT_NAME = "htdbench-telemetry"
FORMAT_VERSION = 1

NOMINAL, ANOMALY = "nominal", "anomaly"
MECHANICAL, DEGRADATION, DROPOUT, NONE = "mechanical", "sensor-degradation", "dropout", "none"
ANOMALY_KINDS = (MECHANICAL, DEGRADATION, DROPOUT)
CLASS_INDEX = {NOMINAL: 0, ANOMALY: 1}


@dataclass(frozen=True)
class DatasetConfig:
    n_windows: int = 600
    anomaly_fraction: float = 0.3
    n_channels: int = 6
    n_samples: int = 200
    sample_period: float = 0.1
    base_levels: tuple = (0.45, 0.5, 0.55, 0.5, 0.45, 0.55)
    base_frequencies: tuple = (60.0, 90.0, 140.0)
    dynamics_amplitude: float = 0.06
    noise_sigma: float = 0.02
    noise_corr_ms: float = 4.0
    level_spread: float = 0.03
    # anomaly severities are drawn uniformly from [severity_min, 1]
    severity_min: float = 0.6
    drift_amplitude: float = 0.8
    harmonic_amplitude: float = 0.2
    harmonic_frequency: float = 400.0
    gain_floor: float = 0.1
    noise_inflation: float = 4.0
    dropout_fraction: tuple = (0.3, 0.6)
    seed: int = 0

    def __post_init__(self):
        check_int_range(self.n_windows, "n_windows", 0, 10**7)
        check_unit_interval(self.anomaly_fraction, "anomaly_fraction")
        check_int_range(self.n_channels, "n_channels", 1, 1024)
        check_int_range(self.n_samples, "n_samples", 1, 10**6)
        check_positive(self.sample_period, "sample_period")
        check_nonnegative(self.noise_sigma, "noise_sigma")
        check_positive(self.noise_corr_ms, "noise_corr_ms")
        check_positive(self.noise_inflation, "noise_inflation")
        object.__setattr__(self, "base_levels", tuple(float(b) for b in self.base_levels))
        object.__setattr__(self, "base_frequencies", tuple(float(f) for f in self.base_frequencies))
        object.__setattr__(self, "dropout_fraction", tuple(float(f) for f in self.dropout_fraction))
        if len(self.base_levels) < self.n_channels:
            raise InputDomainError("need one base level per channel")

    @property
    def duration(self):
        return self.n_samples * self.sample_period

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True, eq=False)
class TelemetryWindow:
    channels: np.ndarray
    label: str = NOMINAL
    anomaly_kind: str = NONE
    seed: int = 0
    noise_sigma: float = 0.0
    sample_period: float = 0.1

    def __post_init__(self):
        arr = np.asarray(self.channels, dtype=float)
        if arr.ndim != 2:
            raise InputDomainError("channels must be a (C, T) matrix")
        if arr.size and (arr.min() < 0 or arr.max() > 1 or not np.all(np.isfinite(arr))):
            raise InputDomainError("telemetry values must lie in [0, 1]")
        if self.label not in CLASS_INDEX:
            raise InputDomainError(f"unknown label {self.label!r}")
        if (self.anomaly_kind == NONE) != (self.label == NOMINAL):
            raise InputDomainError("anomaly_kind must be 'none' exactly for nominal windows")
        object.__setattr__(self, "channels", arr)

    @property
    def target(self):
        return CLASS_INDEX[self.label]

    @property
    def duration(self):
        return self.channels.shape[1] * self.sample_period

    def __eq__(self, other):
        if not isinstance(other, TelemetryWindow):
            return NotImplemented
        return (self.label == other.label and self.anomaly_kind == other.anomaly_kind
                and self.seed == other.seed and self.noise_sigma == other.noise_sigma
                and self.sample_period == other.sample_period
                and np.array_equal(self.channels, other.channels))


def _ar1_noise(rng, shape, sigma, corr_samples):
    # stationary AR(1) with marginal std sigma
    rho = np.exp(-1.0 / corr_samples)
    eps = rng.standard_normal(shape) * sigma * np.sqrt(1.0 - rho * rho)
    out = np.empty(shape)
    out[:, 0] = rng.standard_normal(shape[0]) * sigma
    for t in range(1, shape[1]):
        out[:, t] = rho * out[:, t - 1] + eps[:, t]
    return out


def nominal_window(cfg, seed):
    rng = np.random.default_rng(seed)
    c, n = cfg.n_channels, cfg.n_samples
    t = np.arange(n) * cfg.sample_period * 1e-3
    levels = np.asarray(cfg.base_levels[:c]) + rng.normal(0.0, cfg.level_spread, c)
    signal = np.repeat(levels[:, None], n, axis=1)
    for freq in cfg.base_frequencies:
        amp = cfg.dynamics_amplitude * rng.uniform(0.5, 1.0, c) / len(cfg.base_frequencies) ** 0.5
        phase = rng.uniform(0, 2 * np.pi, c)
        signal += amp[:, None] * np.sin(2 * np.pi * freq * t[None, :] + phase[:, None])
    if cfg.noise_sigma > 0:
        signal += _ar1_noise(rng, (c, n), cfg.noise_sigma, cfg.noise_corr_ms / cfg.sample_period)
    return TelemetryWindow(np.clip(signal, 0.0, 1.0), NOMINAL, NONE, int(seed), cfg.noise_sigma, cfg.sample_period)


def inject_anomaly(window, kind, seed, cfg=None):
    """Return a copy of nominal ``window`` carrying an anomaly of ``kind``.

    mechanical: linear drift plus a harmonic on two channels.
    sensor-degradation: exponential gain decay on one to three channels plus
    additive noise whose variance is ``noise_inflation`` times the window's
    nominal noise variance.
    dropout: one to three channels zeroed over a contiguous segment covering
    ``dropout_fraction`` of the window (at least 10%).
    """
    cfg = cfg or DatasetConfig(n_channels=window.channels.shape[0], n_samples=window.channels.shape[1])
    if kind not in ANOMALY_KINDS:
        raise InputDomainError(f"unknown anomaly kind {kind!r}; expected one of {ANOMALY_KINDS}")
    if window.label != NOMINAL:
        raise InputDomainError("anomalies are injected into nominal windows only")
    rng = np.random.default_rng(seed)
    x = window.channels.copy()
    c, n = x.shape
    severity = rng.uniform(cfg.severity_min, 1.0)
    ramp = np.linspace(0.0, 1.0, n)
    if kind == MECHANICAL:
        chans = rng.choice(c, size=min(2, c), replace=False)
        t = np.arange(n) * window.sample_period * 1e-3
        for ch in chans:
            sign = rng.choice([-1.0, 1.0])
            phase = rng.uniform(0, 2 * np.pi)
            x[ch] += sign * severity * cfg.drift_amplitude * ramp
            x[ch] += severity * cfg.harmonic_amplitude * np.sin(2 * np.pi * cfg.harmonic_frequency * t + phase)
    elif kind == DEGRADATION:
        chans = rng.choice(c, size=rng.integers(1, min(3, c) + 1), replace=False)
        floor = 1.0 - severity * (1.0 - cfg.gain_floor)
        gain = floor + (1.0 - floor) * np.exp(-5.0 * ramp)
        sigma = window.noise_sigma if window.noise_sigma > 0 else cfg.noise_sigma
        noise_std = np.sqrt(cfg.noise_inflation) * sigma
        for ch in chans:
            x[ch] = gain * x[ch] + rng.normal(0.0, noise_std, n)
    else:
        chans = rng.choice(c, size=rng.integers(1, min(3, c) + 1), replace=False)
        lo, hi = cfg.dropout_fraction
        length = max(int(np.ceil(0.1 * n)), int(round(rng.uniform(lo, hi) * n)))
        length = min(length, n)
        start = int(rng.integers(0, n - length + 1))
        x[chans, start:start + length] = 0.0
    return replace(window, channels=np.clip(x, 0.0, 1.0), label=ANOMALY, anomaly_kind=kind)


def generate_dataset(cfg):
    """Deterministic list of windows; exactly ``round(anomaly_fraction * n)`` are anomalous."""
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.n_windows)
    n_anom = int(round(cfg.anomaly_fraction * cfg.n_windows))
    order = np.random.default_rng(root.spawn(1)[0]).permutation(cfg.n_windows)
    is_anom = np.zeros(cfg.n_windows, dtype=bool)
    is_anom[order[:n_anom]] = True
    windows = []
    for i, child in enumerate(children):
        base_seed, kind_seed, inject_seed = (int(s) for s in child.generate_state(3))
        w = nominal_window(cfg, base_seed)
        if is_anom[i]:
            kind = ANOMALY_KINDS[kind_seed % len(ANOMALY_KINDS)]
            w = inject_anomaly(w, kind, inject_seed, cfg)
        windows.append(w)
    return windows


def labels(windows):
    return np.array([w.target for w in windows], dtype=np.int64)


def stack(windows):
    return np.stack([w.channels for w in windows]) if windows else np.empty((0, 0, 0))


# -- file I/O ---------------------------------------------------------------


def save_dataset(path, windows, cfg=None):
    header = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "n_windows": len(windows),
              "config": cfg.to_dict() if cfg is not None else None}
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for w in windows:
            row = {"label": w.label, "kind": w.anomaly_kind, "seed": w.seed, "noise_sigma": w.noise_sigma,
                   "sample_period": w.sample_period, "shape": list(w.channels.shape),
                   "data": w.channels.ravel().tolist()}
            fh.write(json.dumps(row) + "\n")


def load_dataset(path, *, with_config=False):
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not a text dataset file") from exc
    if not lines:
        raise FormatError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: corrupted header") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise FormatError(f"{path}: not an {FORMAT_NAME} file")
    if header.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {header.get('version')!r}")
    body = lines[1:]
    if len(body) != header.get("n_windows"):
        raise FormatError(f"{path}: truncated, header promises {header.get('n_windows')} windows, found {len(body)}")
    windows = []
    for lineno, line in enumerate(body, start=2):
        try:
            row = json.loads(line)
            data = np.asarray(row["data"], dtype=float).reshape(row["shape"])
            windows.append(TelemetryWindow(data, row["label"], row["kind"], row["seed"],
                                           row["noise_sigma"], row["sample_period"]))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"{path}:{lineno}: malformed window record ({exc})") from exc
    if with_config:
        cfg = DatasetConfig.from_dict(header["config"]) if header.get("config") else None
        return windows, cfg
    return windows
