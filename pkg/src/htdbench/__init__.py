"""Event-driven spiking anomaly detector with layered temporal defenses, and its benchmark harness.

Modules
-------
snn        exact event-driven LIF network, 4-bit synapses, online STDP
encoding   rate coding and belief-state (BSPS) spike-pattern filtering
assurance  homeostatic adaptive thresholds, volatility-gated metaplasticity
adversary  PGD through the unrolled network, temporal jitter, ASR
telemetry  seeded synthetic multichannel telemetry with injected anomalies
metering   activity traces, linear energy model, latency decomposition
harness    ablation / sensitivity protocol, calibration, report emission
"""

from .adversary import JitterConfig, PgdConfig, asr, pgd_attack, temporal_jitter
from .config import BenchConfig, load_config
from .encoding import BSPSEncoder, RateEncoder, bsps_encode, bsps_update, rate_encode
from .estimator import HTDClassifier
from .exceptions import (
    CalibrationFailure,
    CapabilityError,
    ConfigurationError,
    DegenerateObservationError,
    FormatError,
    HTDError,
    InputDomainError,
    NumericInputError,
    UndefinedStatisticError,
)
from .harness import calibrate, emit_report, f1_score, run_ablation, run_sensitivity, trend_suite
from .metering import energy_estimate, fit_energy_model
from .snn import Network, NetworkConfig, SpikeTrain, quantize_weight, run_window
from .telemetry import DatasetConfig, generate_dataset, inject_anomaly, load_dataset, save_dataset

__version__ = "0.1.0"

__all__ = [
    "BSPSEncoder",
    "BenchConfig",
    "CalibrationFailure",
    "CapabilityError",
    "ConfigurationError",
    "DatasetConfig",
    "DegenerateObservationError",
    "FormatError",
    "HTDClassifier",
    "HTDError",
    "InputDomainError",
    "JitterConfig",
    "Network",
    "NetworkConfig",
    "NumericInputError",
    "PgdConfig",
    "RateEncoder",
    "SpikeTrain",
    "UndefinedStatisticError",
    "asr",
    "bsps_encode",
    "bsps_update",
    "calibrate",
    "emit_report",
    "energy_estimate",
    "f1_score",
    "fit_energy_model",
    "generate_dataset",
    "inject_anomaly",
    "load_config",
    "load_dataset",
    "pgd_attack",
    "quantize_weight",
    "rate_encode",
    "run_ablation",
    "run_sensitivity",
    "run_window",
    "save_dataset",
    "temporal_jitter",
    "trend_suite",
]
