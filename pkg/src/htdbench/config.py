"""The single structured config file covering every module (YAML).

Every section is optional; omitted keys take the defaults below.  Unknown
keys are rejected so that typos fail loudly instead of being ignored.  See
``configs/example.yaml`` for the annotated reference.
"""

from dataclasses import asdict, dataclass, field, fields, replace
import hashlib
import json

import yaml

from .adversary import JitterConfig, PgdConfig
from .exceptions import ConfigurationError, HTDError
from .metering import DeviceLatencyModel, EnergyModel, fit_energy_model
from .telemetry import DatasetConfig


def _default_model():
    return {
        "n_hidden": 128, "neurons_per_channel": 20, "r_max": 1.0, "init_std": 0.1,
        "n_hypotheses": 8, "eta": 0.8, "likelihood_sigma": 1.5, "n_slices": 8,
        "tau_m": 20.0, "t_refrac": 2.0, "threshold": 1.0,
        "delta_boost": 0.15, "tau_theta": 30.0, "ema_alpha": 0.1,
        "a_plus": 0.01, "a_minus": 0.012, "tau_plus": 20.0, "tau_minus": 20.0,
        "stdp_windows": 20,
    }


@dataclass(frozen=True)
class CalibrationConfig:
    target_f1: float = 0.86
    tolerance: float = 0.05
    max_iter: int = 20
    sigma_low: float = 0.0
    sigma_high: float = 0.4
    seeds: int = 2


@dataclass(frozen=True)
class BenchConfig:
    """Everything a benchmark run depends on; its hash is stamped into every report."""

    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: dict = field(default_factory=_default_model)
    pgd: PgdConfig = field(default_factory=lambda: PgdConfig(random_start=True))
    jitter: JitterConfig = field(default_factory=lambda: JitterConfig(J=3.0, trials=10))
    master_seed: int = 0
    n_seeds: int = 10
    train_fraction: float = 0.6
    max_attack_windows: int = 25
    eps_grid: tuple = (0.05, 0.10, 0.15)
    jitter_grid: tuple = (1.0, 2.0, 3.0, 4.0)
    energy: EnergyModel = field(default_factory=lambda: fit_energy_model()[0])
    latency: DeviceLatencyModel = field(default_factory=DeviceLatencyModel)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ConfigurationError("train_fraction must lie in (0, 1)")
        if self.n_seeds < 1:
            raise ConfigurationError("n_seeds must be >= 1")
        if self.max_attack_windows < 1:
            raise ConfigurationError("max_attack_windows must be >= 1")
        if not self.eps_grid or not self.jitter_grid:
            raise ConfigurationError("sweep grids must be non-empty")
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        object.__setattr__(self, "jitter_grid", tuple(float(j) for j in self.jitter_grid))

    def to_dict(self):
        out = {
            "dataset": self.dataset.to_dict(),
            "model": dict(sorted(self.model.items())),
            "pgd": asdict(self.pgd),
            "jitter": asdict(self.jitter),
            "bench": {
                "master_seed": self.master_seed,
                "n_seeds": self.n_seeds,
                "train_fraction": self.train_fraction,
                "max_attack_windows": self.max_attack_windows,
                "eps_grid": list(self.eps_grid),
                "jitter_grid": list(self.jitter_grid),
            },
            "energy": asdict(self.energy),
            "latency": asdict(self.latency),
            "calibration": asdict(self.calibration),
        }
        return out

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_dataset(self, **changes):
        return replace(self, dataset=replace(self.dataset, **changes))


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigurationError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {name!r}: {', '.join(sorted(unknown))}")
    try:
        return cls(**data)
    except (TypeError, ValueError, HTDError) as exc:
        raise ConfigurationError(f"invalid {name!r} section: {exc}") from exc


_TOP_LEVEL = {"dataset", "model", "pgd", "jitter", "bench", "energy", "latency", "calibration"}
_BENCH_KEYS = {"master_seed", "n_seeds", "train_fraction", "max_attack_windows", "eps_grid", "jitter_grid"}


def config_from_dict(data):
    """Build a :class:`BenchConfig` from the parsed YAML mapping."""
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigurationError("config file must contain a mapping at top level")
    unknown = set(data) - _TOP_LEVEL
    if unknown:
        raise ConfigurationError(f"unknown top-level section(s): {', '.join(sorted(unknown))}")
    model = _default_model()
    user_model = data.get("model") or {}
    if not isinstance(user_model, dict):
        raise ConfigurationError("section 'model' must be a mapping")
    bad = set(user_model) - set(model) - {"init_mean", "v0", "readout_C", "readout_w_max"}
    if bad:
        raise ConfigurationError(f"unknown key(s) in 'model': {', '.join(sorted(bad))}")
    model.update(user_model)
    bench = data.get("bench") or {}
    if set(bench) - _BENCH_KEYS:
        raise ConfigurationError(f"unknown key(s) in 'bench': {', '.join(sorted(set(bench) - _BENCH_KEYS))}")
    energy = data.get("energy")
    if energy is None:
        energy_model = fit_energy_model()[0]
    else:
        energy_model = _section(EnergyModel, energy, "energy")
    try:
        return BenchConfig(
            dataset=_section(DatasetConfig, data.get("dataset"), "dataset"),
            model=model,
            pgd=_section(PgdConfig, {"random_start": True, **(data.get("pgd") or {})}, "pgd"),
            jitter=_section(JitterConfig, data.get("jitter") or {"J": 3.0, "trials": 10}, "jitter"),
            energy=energy_model,
            latency=_section(DeviceLatencyModel, data.get("latency"), "latency"),
            calibration=_section(CalibrationConfig, data.get("calibration"), "calibration"),
            **bench,
        )
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path=None):
    """Read a YAML config file; ``None`` gives the built-in defaults."""
    if path is None:
        return BenchConfig()
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: not valid YAML ({exc})") from exc
    return config_from_dict(data)


def dump_config(cfg, path):
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)
