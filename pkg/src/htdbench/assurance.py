"""Neuronal and synaptic assurance: adaptive thresholds and volatility-gated plasticity.

Both mechanisms are pure state transitions.  The scalar functions operate on a
single :class:`~htdbench.snn.NeuronState` / :class:`~htdbench.snn.SynapseState`;
the ``*_array`` variants do the same arithmetic on whole layers and are what the
simulator uses in its inner loop.
"""

from dataclasses import dataclass, replace

import numpy as np

from ._validation import check_finite, check_nonnegative, check_positive, check_unit_interval


@dataclass(frozen=True)
class ThresholdConfig:
    """Homeostatic threshold: jumps by ``delta_boost`` per spike, relaxes with ``tau_theta``."""

    delta_boost: float = 0.3
    tau_theta: float = 30.0
    enabled: bool = False

    def __post_init__(self):
        check_nonnegative(self.delta_boost, "delta_boost")
        check_positive(self.tau_theta, "tau_theta")


@dataclass(frozen=True)
class MetaplasticityConfig:
    """Volatility gate: ``gate = 1 / (1 + var / v0)`` with EMA-tracked variance."""

    v0: float = (2 * 0.01) ** 2
    ema_alpha: float = 0.1
    enabled: bool = False

    def __post_init__(self):
        check_positive(self.v0, "v0")
        check_unit_interval(self.ema_alpha, "ema_alpha", open_left=True)


def adaptive_threshold(state, spiked, elapsed, cfg):
    """Relax the threshold boost over ``elapsed`` ms, then add ``delta_boost`` if the neuron spiked."""
    check_nonnegative(elapsed, "elapsed")
    if not cfg.enabled:
        return replace(state, threshold_boost=0.0)
    boost = state.threshold_boost * np.exp(-elapsed / cfg.tau_theta)
    if spiked:
        boost += cfg.delta_boost
    return replace(state, threshold_boost=float(boost))


def volatility_track(syn, raw_delta, cfg):
    check_finite(raw_delta, "raw_delta")
    mean, var, count = _ema_step(
        syn.volatility_mean, syn.volatility_var, syn.volatility_count, raw_delta, cfg.ema_alpha
    )
    return replace(syn, volatility_mean=float(mean), volatility_var=float(var), volatility_count=int(count))


def plasticity_gate(volatility_var, cfg):
    """Learning-rate multiplier in [0, 1]; 1 for a calm synapse, 0 in the infinite-variance limit."""
    check_nonnegative(volatility_var, "volatility_var")
    if not cfg.enabled:
        return 1.0
    return 1.0 / (1.0 + volatility_var / cfg.v0)


def _ema_step(mean, var, count, x, alpha):
    # incremental EMA mean/variance; the first sample seeds the mean with zero variance
    first = count == 0
    diff = x - mean
    new_mean = np.where(first, x, mean + alpha * diff)
    new_var = np.where(first, 0.0, (1.0 - alpha) * (var + alpha * diff * diff))
    return new_mean, new_var, count + 1


def volatility_track_array(mean, var, count, raw_delta, cfg, mask=None):
    """Vectorized :func:`volatility_track`; updates the arrays in place where ``mask`` holds."""
    new_mean, new_var, new_count = _ema_step(mean, var, count, raw_delta, cfg.ema_alpha)
    if mask is None:
        mean[...], var[...], count[...] = new_mean, new_var, new_count
    else:
        mean[mask], var[mask], count[mask] = new_mean[mask], new_var[mask], new_count[mask]


def plasticity_gate_array(var, cfg):
    if not cfg.enabled:
        return np.ones_like(var)
    return 1.0 / (1.0 + var / cfg.v0)
