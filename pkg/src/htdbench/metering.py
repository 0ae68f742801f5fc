"""Activity accounting and the activity-proportional energy / latency model.

Energies are *modeled*: a two-parameter line ``E = e_static + e_dynamic * A``
whose constants are least-squares fitted to the four published
(activity, energy) operating points.  Nothing here touches a power rail.
"""

from dataclasses import dataclass, field
import time

import numpy as np

from ._validation import check_nonnegative, check_positive
from .exceptions import UndefinedStatisticError

# (normalized activity, energy in uJ) for baseline, +input, +neuronal, +synaptic
TABLE_I_OPERATING_POINTS = ((1.00, 48.2), (1.08, 51.4), (1.02, 49.8), (0.94, 45.1))
# (device ms, host overhead ms) per configuration, same order
TABLE_III_LATENCY = ((1.1, 0.15), (1.1, 0.23), (1.2, 0.15), (1.2, 0.15))


@dataclass(frozen=True)
class LayerActivity:
    spikes: int = 0
    synaptic_events: int = 0
    neuron_updates: int = 0


@dataclass(frozen=True)
class ActivityTrace:
    """Event counts of one simulated window; per-layer rows sum to the totals."""

    layers: tuple = ()
    input_spikes: int = 0
    window_duration: float = 0.0

    @property
    def synaptic_events(self):
        return sum(layer.synaptic_events for layer in self.layers)

    @property
    def neuron_updates(self):
        return sum(layer.neuron_updates for layer in self.layers)

    @property
    def total_events(self):
        return self.synaptic_events + self.neuron_updates

    @property
    def spike_counts(self):
        return tuple(layer.spikes for layer in self.layers)

    def __add__(self, other):
        if not self.layers:
            return other
        if not other.layers:
            return self
        layers = tuple(
            LayerActivity(a.spikes + b.spikes, a.synaptic_events + b.synaptic_events,
                          a.neuron_updates + b.neuron_updates)
            for a, b in zip(self.layers, other.layers)
        )
        return ActivityTrace(layers, self.input_spikes + other.input_spikes,
                             self.window_duration + other.window_duration)


def normalized_activity(trace, reference):
    """Events of ``trace`` relative to ``reference`` (an event count or another trace)."""
    if isinstance(reference, ActivityTrace):
        reference = reference.total_events
    if not reference > 0:
        raise UndefinedStatisticError("reference activity must be positive")
    return (trace.synaptic_events + trace.neuron_updates) / reference


@dataclass(frozen=True)
class EnergyModel:
    """Linear activity-to-energy map; ``e_dynamic`` in uJ per unit normalized activity."""

    e_dynamic: float
    e_static: float
    reference_activity: float = 1.0

    def __post_init__(self):
        check_positive(self.e_dynamic, "e_dynamic")
        check_nonnegative(self.e_static, "e_static")
        check_positive(self.reference_activity, "reference_activity")

    def energy(self, activity_ratio):
        return energy_estimate(activity_ratio, self)


def fit_energy_model(points=TABLE_I_OPERATING_POINTS, reference_activity=1.0):
    """Ordinary least squares of energy on activity; returns ``(model, max_abs_residual)``."""
    pts = np.asarray(points, dtype=float)
    design = np.column_stack([pts[:, 0], np.ones(len(pts))])
    (slope, intercept), *_ = np.linalg.lstsq(design, pts[:, 1], rcond=None)
    residual = np.abs(design @ np.array([slope, intercept]) - pts[:, 1]).max()
    return EnergyModel(float(slope), float(intercept), reference_activity), float(residual)


DEFAULT_ENERGY_MODEL = fit_energy_model()[0]


def energy_estimate(activity_ratio, model=DEFAULT_ENERGY_MODEL):
    check_nonnegative(activity_ratio, "activity_ratio")
    return model.e_static + model.e_dynamic * activity_ratio


@dataclass(frozen=True)
class DeviceLatencyModel:
    """Device time = max(floor, intercept + slope * events); events in units of 1e3."""

    intercept_ms: float = 1.0
    slope_ms_per_kevent: float = 0.001
    floor_ms: float = 1.0

    def __post_init__(self):
        check_nonnegative(self.slope_ms_per_kevent, "slope_ms_per_kevent")
        check_nonnegative(self.floor_ms, "floor_ms")

    def device_time(self, events):
        return max(self.floor_ms, self.intercept_ms + self.slope_ms_per_kevent * events / 1e3)


@dataclass(frozen=True)
class LatencyReport:
    device: float
    overhead: float

    @property
    def total(self):
        return self.device + self.overhead


def latency_report(trace, host_encode_time, device_time_model=DeviceLatencyModel()):
    """Combine the modeled device time of ``trace`` with a measured host overhead (ms)."""
    return LatencyReport(device_time_model.device_time(trace.total_events), float(host_encode_time))


@dataclass
class HostTimer:
    """Accumulates wall-clock milliseconds spent in host-side encoding."""

    samples: list = field(default_factory=list)

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.samples.append((time.perf_counter() - self._start) * 1e3)
        return False

    @property
    def mean_ms(self):
        return float(np.mean(self.samples)) if self.samples else 0.0
