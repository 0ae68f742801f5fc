"""Event-driven LIF simulator with 4-bit synapses and pair-based STDP.

Neuron states are integrated exactly between events (no global tick), so the
amount of work done for a window is proportional to the number of spikes it
contains.  A dt-tick unrolled mode (:func:`unroll` / :func:`unroll_backward`)
reproduces the same dynamics on a fixed grid and supports surrogate-gradient
backpropagation for white-box attacks.

Layer 0 is an input layer of LIF units, each driven one-to-one by the encoder
spike stream of its row; every later layer is fully connected to the previous
one.  Projection ``k`` maps layer ``k`` onto layer ``k + 1``.
"""

from dataclasses import dataclass, field, replace
import json
import math
from pathlib import Path

import numpy as np

from ._validation import check_finite, check_int_range, check_nonnegative, check_positive, check_unit_interval
from .assurance import (
    MetaplasticityConfig,
    ThresholdConfig,
    plasticity_gate_array,
    volatility_track,
    volatility_track_array,
)
from .exceptions import FormatError, InputDomainError
from .metering import ActivityTrace, LayerActivity

SNAPSHOT_VERSION = 1
INFERENCE = "inference"
ONLINE_LEARNING = "online-learning"
# spike times are products of grid indices and dt; comparisons tolerate that rounding
_TIME_EPS = 1e-9


@dataclass(frozen=True, order=True)
class SpikeEvent:
    time: float
    neuron: int

    def __post_init__(self):
        check_nonnegative(self.time, "time")
        if self.neuron < 0:
            raise InputDomainError(f"neuron index must be >= 0, got {self.neuron}")


@dataclass(frozen=True, eq=False)
class SpikeTrain:
    """Column-oriented spike list, sorted by (time, neuron)."""

    times: np.ndarray
    neurons: np.ndarray
    n_neurons: int
    window: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        neurons = np.asarray(self.neurons, dtype=np.int64).ravel()
        if times.shape != neurons.shape:
            raise InputDomainError("times and neurons must have equal length")
        order = np.lexsort((neurons, times))
        object.__setattr__(self, "times", times[order])
        object.__setattr__(self, "neurons", neurons[order])

    @classmethod
    def empty(cls, n_neurons, window):
        return cls(np.empty(0), np.empty(0, dtype=np.int64), n_neurons, window)

    @classmethod
    def from_events(cls, events, n_neurons, window):
        events = list(events)
        return cls([e.time for e in events], [e.neuron for e in events], n_neurons, window)

    @classmethod
    def from_raster(cls, raster, dt):
        """Build a train from an integer (neurons x bins) count raster on a ``dt`` grid."""
        raster = np.asarray(raster)
        rows, bins = np.nonzero(raster)
        reps = raster[rows, bins].astype(np.int64)
        return cls(np.repeat(bins * dt, reps), np.repeat(rows, reps), raster.shape[0], raster.shape[1] * dt)

    def to_events(self):
        return [SpikeEvent(float(t), int(n)) for t, n in zip(self.times, self.neurons)]

    def to_raster(self, dt):
        n_bins = int(round(self.window / dt))
        raster = np.zeros((self.n_neurons, n_bins), dtype=np.int64)
        bins = np.minimum(np.floor(self.times / dt + 1e-9).astype(np.int64), n_bins - 1)
        np.add.at(raster, (self.neurons, bins), 1)
        return raster

    def row(self, neuron):
        return self.times[self.neurons == neuron]

    def counts(self):
        return np.bincount(self.neurons, minlength=self.n_neurons)

    def __len__(self):
        return int(self.times.size)

    def __eq__(self, other):
        if not isinstance(other, SpikeTrain):
            return NotImplemented
        return (self.n_neurons == other.n_neurons and self.window == other.window
                and np.array_equal(self.times, other.times) and np.array_equal(self.neurons, other.neurons))


@dataclass(frozen=True)
class NeuronState:
    potential: float = 0.0
    threshold_base: float = 1.0
    threshold_boost: float = 0.0
    last_spike: float | None = None
    last_update: float = 0.0

    def __post_init__(self):
        if self.threshold_boost < 0:
            raise InputDomainError("threshold_boost must be >= 0")

    @property
    def effective_threshold(self):
        return self.threshold_base + self.threshold_boost


@dataclass(frozen=True)
class SynapseState:
    """One plastic synapse.  ``latent`` is the full-precision accumulator behind ``weight``."""

    weight: float
    pre: int = 0
    post: int = 0
    latent: float | None = None
    volatility_mean: float = 0.0
    volatility_var: float = 0.0
    volatility_count: int = 0

    def __post_init__(self):
        if self.latent is None:
            object.__setattr__(self, "latent", float(self.weight))
        if self.volatility_var < 0:
            raise InputDomainError("volatility_var must be >= 0")


@dataclass(frozen=True)
class StdpParams:
    a_plus: float = 0.01
    a_minus: float = 0.012
    tau_plus: float = 20.0
    tau_minus: float = 20.0

    def __post_init__(self):
        check_nonnegative(self.a_plus, "a_plus")
        check_nonnegative(self.a_minus, "a_minus")
        check_positive(self.tau_plus, "tau_plus")
        check_positive(self.tau_minus, "tau_minus")

    def kernel(self, dt):
        """Raw weight change for ``dt = t_post - t_pre``; ``dt == 0`` counts as causal."""
        dt = np.asarray(dt, dtype=float)
        return np.where(dt >= 0, self.a_plus * np.exp(-dt / self.tau_plus),
                        -self.a_minus * np.exp(dt / self.tau_minus))


@dataclass(frozen=True)
class NetworkConfig:
    layer_sizes: tuple = (6, 128, 2)
    tau_m: float = 20.0
    t_refrac: float = 2.0
    threshold: float = 1.0
    input_gain: float = 1.0
    stdp: StdpParams = field(default_factory=StdpParams)
    quant_bits: int = 4
    # one value for every projection, or one per projection (a per-layer weight scale)
    w_max: float = 1.0
    init_mean: float = 0.05
    init_std: float = 0.35
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise InputDomainError("need at least an input and an output layer, each >= 1 neuron")
        check_positive(self.tau_m, "tau_m")
        check_positive(self.t_refrac, "t_refrac")
        check_positive(self.threshold, "threshold")
        if np.ndim(self.w_max):
            object.__setattr__(self, "w_max", tuple(float(w) for w in self.w_max))
            if len(self.w_max) != len(self.layer_sizes) - 1:
                raise InputDomainError("w_max needs one value per projection")
        for w in np.atleast_1d(self.w_max):
            check_positive(w, "w_max")
        check_int_range(self.quant_bits, "quant_bits", 1, 8)

    def layer_w_max(self, k):
        """Weight range of projection ``k``."""
        return self.w_max[k] if isinstance(self.w_max, tuple) else self.w_max


def grid_step(bits, w_max):
    return 2.0 * w_max / (2 ** bits - 1)


def quantize_index(w, bits, w_max):
    levels = 2 ** bits - 1
    idx = np.rint((np.asarray(w, dtype=float) + w_max) / grid_step(bits, w_max))
    return np.clip(idx, 0, levels).astype(np.int64)


def dequantize_index(idx, bits, w_max):
    return -w_max + np.asarray(idx) * grid_step(bits, w_max)


def quantize_weight(w, bits=4, w_max=1.0):
    """Nearest of the ``2**bits`` evenly spaced levels spanning [-w_max, w_max]."""
    check_int_range(bits, "bits", 1, 8)
    check_positive(w_max, "w_max")
    out = dequantize_index(quantize_index(w, bits, w_max), bits, w_max)
    return float(out) if np.ndim(out) == 0 else out


def lif_update(state, input_current, now, effective_threshold, *, tau_m=20.0, t_refrac=2.0):
    """Advance one LIF unit to ``now`` and deliver ``input_current``.  Returns ``(state, spiked)``."""
    check_finite(input_current, "input_current")
    check_finite(now, "now")
    if now < state.last_update:
        raise InputDomainError(f"time moved backwards: {now} < {state.last_update}")
    potential = state.potential * math.exp(-(now - state.last_update) / tau_m) + input_current
    refractory = state.last_spike is not None and now - state.last_spike < t_refrac - _TIME_EPS
    if potential >= effective_threshold and not refractory:
        return replace(state, potential=0.0, last_spike=now, last_update=now), True
    return replace(state, potential=potential, last_update=now), False


def stdp_update(syn, pre_time, post_time, gate, *, stdp=StdpParams(), bits=4, w_max=1.0,
                metaplasticity=MetaplasticityConfig()):
    """Apply one gated pair-STDP update.  Returns ``(synapse, applied_delta)``.

    The weight moves on the quantization grid through the ``latent`` accumulator;
    volatility statistics always see the raw, ungated change.
    """
    check_finite(pre_time, "pre_time")
    check_finite(post_time, "post_time")
    check_unit_interval(gate, "gate")
    raw = float(stdp.kernel(post_time - pre_time))
    applied = gate * raw
    latent = float(np.clip(syn.latent + applied, -w_max, w_max))
    syn = replace(syn, latent=latent, weight=quantize_weight(latent, bits, w_max))
    return volatility_track(syn, raw, metaplasticity), applied


class Network:
    """Weights, plasticity state and assurance settings of a feed-forward SNN.

    Parameters
    ----------
    config : NetworkConfig
    threshold : ThresholdConfig
        Adaptive-threshold settings; ``enabled=False`` gives fixed thresholds.
    metaplasticity : MetaplasticityConfig
        Volatility gate applied to STDP; ``enabled=False`` gives plain STDP.
    plastic : sequence of bool, optional
        Which projections learn under STDP.  Defaults to every projection except
        the readout.
    """

    def __init__(self, config=None, threshold=None, metaplasticity=None, plastic=None, weights=None):
        self.config = config or NetworkConfig()
        self.threshold = threshold or ThresholdConfig()
        self.metaplasticity = metaplasticity or MetaplasticityConfig()
        sizes = self.config.layer_sizes
        n_proj = len(sizes) - 1
        self.plastic = tuple(plastic) if plastic is not None else tuple(k < n_proj - 1 for k in range(n_proj))
        if len(self.plastic) != n_proj:
            raise InputDomainError("plastic must have one flag per projection")
        if weights is None:
            rng = np.random.default_rng(self.config.seed)
            weights = [
                rng.normal(self.config.init_mean, self.config.init_std, size=(sizes[k], sizes[k + 1]))
                for k in range(n_proj)
            ]
        bounds = [self.config.layer_w_max(k) for k in range(n_proj)]
        self.latent = [np.clip(np.asarray(w, dtype=float), -b, b).copy() for w, b in zip(weights, bounds)]
        self.weights = [self._quantize(w, k) for k, w in enumerate(self.latent)]
        self.vol_mean = [np.zeros_like(w) for w in self.latent]
        self.vol_var = [np.zeros_like(w) for w in self.latent]
        self.vol_count = [np.zeros(w.shape, dtype=np.int64) for w in self.latent]

    @property
    def layer_sizes(self):
        return self.config.layer_sizes

    @property
    def n_inputs(self):
        return self.config.layer_sizes[0]

    @property
    def n_outputs(self):
        return self.config.layer_sizes[-1]

    def _quantize(self, w, k):
        bits, w_max = self.config.quant_bits, self.config.layer_w_max(k)
        return dequantize_index(quantize_index(w, bits, w_max), bits, w_max)

    def set_weights(self, k, latent):
        w_max = self.config.layer_w_max(k)
        self.latent[k] = np.clip(np.asarray(latent, dtype=float), -w_max, w_max)
        self.weights[k] = self._quantize(self.latent[k], k)

    def copy(self):
        other = Network.__new__(Network)
        other.config, other.threshold, other.metaplasticity = self.config, self.threshold, self.metaplasticity
        other.plastic = self.plastic
        for name in ("latent", "weights", "vol_mean", "vol_var", "vol_count"):
            setattr(other, name, [a.copy() for a in getattr(self, name)])
        return other

    def out_degree(self, layer):
        sizes = self.config.layer_sizes
        return sizes[layer + 1] if layer + 1 < len(sizes) else 0

    def synapse(self, k, pre, post):
        return SynapseState(
            weight=float(self.weights[k][pre, post]), pre=pre, post=post,
            latent=float(self.latent[k][pre, post]),
            volatility_mean=float(self.vol_mean[k][pre, post]),
            volatility_var=float(self.vol_var[k][pre, post]),
            volatility_count=int(self.vol_count[k][pre, post]),
        )

    # -- learning ---------------------------------------------------------

    def _apply_stdp(self, k, rows, cols, raw):
        """Gate, accumulate and re-quantize a block of raw STDP changes on projection ``k``."""
        sel = np.ix_(rows, cols)
        var = self.vol_var[k][sel]
        gate = plasticity_gate_array(var, self.metaplasticity)
        w_max = self.config.layer_w_max(k)
        latent = np.clip(self.latent[k][sel] + gate * raw, -w_max, w_max)
        self.latent[k][sel] = latent
        self.weights[k][sel] = self._quantize(latent, k)
        mean, var, count = self.vol_mean[k][sel], var.copy(), self.vol_count[k][sel]
        volatility_track_array(mean, var, count, raw, self.metaplasticity)
        self.vol_mean[k][sel], self.vol_var[k][sel], self.vol_count[k][sel] = mean, var, count

    # -- serialization ----------------------------------------------------

    def to_dict(self):
        cfg = self.config
        return {
            "format": "htdbench-network",
            "version": SNAPSHOT_VERSION,
            "config": {
                "layer_sizes": list(cfg.layer_sizes), "tau_m": cfg.tau_m, "t_refrac": cfg.t_refrac,
                "threshold": cfg.threshold, "input_gain": cfg.input_gain,
                "stdp": vars(cfg.stdp).copy(), "quant_bits": cfg.quant_bits,
                "w_max": list(cfg.w_max) if isinstance(cfg.w_max, tuple) else cfg.w_max,
                "init_mean": cfg.init_mean, "init_std": cfg.init_std, "seed": cfg.seed,
            },
            "threshold": vars(self.threshold).copy(),
            "metaplasticity": vars(self.metaplasticity).copy(),
            "plastic": list(self.plastic),
            "weight_indices": [quantize_index(w, cfg.quant_bits, cfg.layer_w_max(k)).tolist()
                               for k, w in enumerate(self.weights)],
            "latent": [w.tolist() for w in self.latent],
            "volatility": [
                {"mean": m.tolist(), "var": v.tolist(), "count": c.tolist()}
                for m, v, c in zip(self.vol_mean, self.vol_var, self.vol_count)
            ],
        }

    @classmethod
    def from_dict(cls, data):
        try:
            if data.get("format") != "htdbench-network":
                raise FormatError("not an htdbench network snapshot")
            if data.get("version") != SNAPSHOT_VERSION:
                raise FormatError(f"unsupported snapshot version {data.get('version')!r}")
            raw = dict(data["config"])
            raw["stdp"] = StdpParams(**raw["stdp"])
            cfg = NetworkConfig(**raw)
            net = cls(cfg, ThresholdConfig(**data["threshold"]), MetaplasticityConfig(**data["metaplasticity"]),
                      plastic=data["plastic"], weights=data["latent"])
            for k, idx in enumerate(data["weight_indices"]):
                net.weights[k] = dequantize_index(np.asarray(idx, dtype=np.int64), cfg.quant_bits,
                                                  cfg.layer_w_max(k))
                if net.weights[k].shape != net.latent[k].shape:
                    raise FormatError("weight matrix shape does not match layer sizes")
            for k, vol in enumerate(data["volatility"]):
                net.vol_mean[k] = np.asarray(vol["mean"], dtype=float)
                net.vol_var[k] = np.asarray(vol["var"], dtype=float)
                net.vol_count[k] = np.asarray(vol["count"], dtype=np.int64)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"malformed network snapshot: {exc}") from exc
        return net

    def save(self, path, extra=None):
        payload = self.to_dict()
        if extra:
            payload["extra"] = extra
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)


# -- event-driven execution ------------------------------------------------


@dataclass
class _LayerResult:
    times: np.ndarray
    neurons: np.ndarray
    activity: LayerActivity


def _simulate_layer(net, layer, pre_times, pre_ids, learn):
    """Integrate layer ``layer`` exactly over the sorted presynaptic event stream."""
    cfg = net.config
    n = cfg.layer_sizes[layer]
    proj = layer - 1
    thr_cfg = net.threshold
    v = np.zeros(n)
    boost = np.zeros(n)
    last_spike = np.full(n, -np.inf)
    learning = learn and proj >= 0 and net.plastic[proj]
    if learning:
        last_pre = np.full(cfg.layer_sizes[proj], -np.inf)
        stdp = cfg.stdp
        weights = net.weights[proj]
    elif proj >= 0:
        weights = net.weights[proj]
    out_t, out_i = [], []
    if pre_times.size == 0:
        return _LayerResult(np.empty(0), np.empty(0, dtype=np.int64), LayerActivity())
    if not learning:
        return _simulate_layer_static(net, layer, pre_times, pre_ids)
    uniq, starts = np.unique(pre_times, return_index=True)
    bounds = np.append(starts, pre_times.size)
    updates = 0
    prev_t = 0.0
    for k, t in enumerate(uniq):
        rows = pre_ids[bounds[k]:bounds[k + 1]]
        gap = t - prev_t
        if gap > 0:
            v *= math.exp(-gap / cfg.tau_m)
            if thr_cfg.enabled:
                boost *= math.exp(-gap / thr_cfg.tau_theta)
        prev_t = t
        if proj < 0:
            # one-to-one encoder drive: only the addressed input units are touched
            touched, hits = np.unique(rows, return_counts=True)
            v[touched] += cfg.input_gain * hits
            updates += touched.size
        else:
            if learning:
                posts = np.flatnonzero(last_spike > -np.inf)
                if posts.size:
                    urows = np.unique(rows)
                    raw = stdp.kernel(last_spike[posts][np.newaxis, :] - t) * np.ones((urows.size, 1))
                    net._apply_stdp(proj, urows, posts, raw)
                    weights = net.weights[proj]
                last_pre[rows] = t
            v += weights[rows].sum(axis=0) if rows.size > 1 else weights[rows[0]]
            updates += n
        fire = (v >= cfg.threshold + boost) & (t - last_spike >= cfg.t_refrac - _TIME_EPS)
        idx = np.flatnonzero(fire)
        if idx.size:
            v[idx] = 0.0
            last_spike[idx] = t
            if thr_cfg.enabled:
                boost[idx] += thr_cfg.delta_boost
            out_t.append(np.full(idx.size, t))
            out_i.append(idx)
            if learning:
                pres = np.flatnonzero(last_pre > -np.inf)
                if pres.size:
                    raw = stdp.kernel(t - last_pre[pres])[:, np.newaxis] * np.ones((1, idx.size))
                    net._apply_stdp(proj, pres, idx, raw)
                    weights = net.weights[proj]
    syn = pre_times.size * (1 if proj < 0 else n)
    if out_t:
        times, neurons = np.concatenate(out_t), np.concatenate(out_i)
    else:
        times, neurons = np.empty(0), np.empty(0, dtype=np.int64)
    return _LayerResult(times, neurons, LayerActivity(int(times.size), int(syn), int(updates)))


def _simulate_layer_static(net, layer, pre_times, pre_ids, weights=None):
    """Inference-mode :func:`_simulate_layer`: fixed weights, so the drive of every
    distinct event time is computed up front and the loop only integrates.

    ``weights`` overrides the projection into ``layer``; its columns are
    independent neurons, so several candidate readouts can share one pass.
    """
    cfg = net.config
    proj = layer - 1
    if weights is None and proj >= 0:
        weights = net.weights[proj]
    n = cfg.layer_sizes[layer] if proj < 0 else weights.shape[1]
    thr_cfg = net.threshold
    uniq, inv = np.unique(pre_times, return_inverse=True)
    if proj < 0:
        hits = np.zeros((uniq.size, n))
        np.add.at(hits, (inv, pre_ids), 1.0)
        drive = cfg.input_gain * hits
        updates = int(np.count_nonzero(hits))
    else:
        counts = np.zeros((uniq.size, cfg.layer_sizes[proj]))
        np.add.at(counts, (inv, pre_ids), 1.0)
        drive = counts @ weights
        updates = uniq.size * n
    gaps = np.diff(uniq, prepend=0.0)
    v_decay = np.exp(-gaps / cfg.tau_m)
    b_decay = np.exp(-gaps / thr_cfg.tau_theta) if thr_cfg.enabled else None
    v = np.zeros(n)
    boost = np.zeros(n)
    last_spike = np.full(n, -np.inf)
    refrac = cfg.t_refrac - _TIME_EPS
    out_t, out_i = [], []
    for k, t in enumerate(uniq):
        v *= v_decay[k]
        if b_decay is not None:
            boost *= b_decay[k]
        v += drive[k]
        idx = np.flatnonzero((v >= cfg.threshold + boost) & (t - last_spike >= refrac))
        if idx.size:
            v[idx] = 0.0
            last_spike[idx] = t
            if b_decay is not None:
                boost[idx] += thr_cfg.delta_boost
            out_t.append(np.full(idx.size, t))
            out_i.append(idx)
    syn = pre_times.size * (1 if proj < 0 else n)
    if out_t:
        times, neurons = np.concatenate(out_t), np.concatenate(out_i)
    else:
        times, neurons = np.empty(0), np.empty(0, dtype=np.int64)
    return _LayerResult(times, neurons, LayerActivity(int(times.size), int(syn), int(updates)))


def run_window(network, input_spikes, window, mode=INFERENCE, *, record=False):
    """Process one input window; returns ``(output_class, trace, network)``.

    ``input_spikes`` is a :class:`SpikeTrain` or an iterable of :class:`SpikeEvent`
    addressed to input-layer units.  In ``"online-learning"`` mode plastic
    projections are updated in place by STDP.  The output class is the argmax of
    output-layer spike counts, ties resolved towards the lowest index.  With
    ``record=True`` the per-layer spike trains are attached as ``trace.spikes``.
    """
    if mode not in (INFERENCE, ONLINE_LEARNING):
        raise InputDomainError(f"unknown mode {mode!r}")
    check_positive(window, "window")
    if not isinstance(input_spikes, SpikeTrain):
        input_spikes = SpikeTrain.from_events(input_spikes, network.n_inputs, window)
    times, ids = input_spikes.times, input_spikes.neurons
    if times.size:
        if not np.all(np.isfinite(times)) or times.min() < 0 or times.max() >= window:
            raise InputDomainError(f"input spike times must lie in [0, {window})")
        if ids.min() < 0 or ids.max() >= network.n_inputs:
            raise InputDomainError("input spike addressed to a non-existent input unit")
    learn = mode == ONLINE_LEARNING
    layers, trains = [], []
    for layer in range(len(network.layer_sizes)):
        res = _simulate_layer(network, layer, times, ids, learn)
        layers.append(res.activity)
        trains.append(SpikeTrain(res.times, res.neurons, network.layer_sizes[layer], window))
        times, ids = trains[-1].times, trains[-1].neurons
    counts = trains[-1].counts()
    trace = ActivityTrace(tuple(layers), len(input_spikes), float(window))
    if record:
        object.__setattr__(trace, "spikes", tuple(trains))
    return int(np.argmax(counts)), trace, network


def output_counts(trace):
    return trace.layers[-1].spikes if trace.layers else 0


# -- dt-tick unrolled mode -------------------------------------------------


@dataclass
class Unrolled:
    """Forward record of :func:`unroll`; enough state for :func:`unroll_backward`."""

    potentials: list
    spikes: list
    thresholds: list
    refractory: list
    counts: np.ndarray
    dt: float


def unroll(network, drive, dt):
    """Simulate on a fixed ``dt`` grid.

    ``drive`` is an (n_inputs x n_bins) array of encoder spike counts (real values
    allowed).  Inference only; no plasticity.  A unit may only fire on a tick
    where it is updated, as in the event-driven simulator, so on grid-aligned
    inputs this matches :func:`run_window` spike for spike (up to rounding of
    exact threshold ties).
    """
    cfg = network.config
    thr_cfg = network.threshold
    drive = np.asarray(drive, dtype=float)
    n_bins = drive.shape[1]
    beta = math.exp(-dt / cfg.tau_m)
    theta_decay = math.exp(-dt / thr_cfg.tau_theta)
    record = Unrolled([], [], [], [], None, dt)
    current = cfg.input_gain * drive.T
    # the event-driven model only tests for threshold crossings at event
    # times: ticks on which the layer receives at least one input spike
    events = np.repeat((current != 0).any(axis=1, keepdims=True), current.shape[1], axis=1)
    for layer, n in enumerate(cfg.layer_sizes):
        if layer > 0:
            current = record.spikes[-1] @ network.weights[layer - 1]
            events = np.repeat(record.spikes[-1].any(axis=1, keepdims=True), n, axis=1)
        v_rec = np.empty((n_bins, n))
        s_rec = np.zeros((n_bins, n))
        th_rec = np.empty((n_bins, n))
        ok_rec = np.empty((n_bins, n), dtype=bool)
        v = np.zeros(n)
        boost = np.zeros(n)
        last_spike = np.full(n, -np.inf)
        for t in range(n_bins):
            now = t * dt
            v = v * beta + current[t]
            if thr_cfg.enabled:
                boost *= theta_decay
            theta = cfg.threshold + boost
            ok = (now - last_spike >= cfg.t_refrac - _TIME_EPS) & events[t]
            fire = (v >= theta) & ok
            v_rec[t], th_rec[t], ok_rec[t] = v, theta, ok
            if fire.any():
                s_rec[t] = fire
                v = np.where(fire, 0.0, v)
                last_spike = np.where(fire, now, last_spike)
                if thr_cfg.enabled:
                    boost = boost + thr_cfg.delta_boost * fire
        record.potentials.append(v_rec)
        record.spikes.append(s_rec)
        record.thresholds.append(th_rec)
        record.refractory.append(ok_rec)
    record.counts = record.spikes[-1].sum(axis=0)
    return record


def unroll_backward(network, record, grad_counts, surrogate):
    """Backpropagate ``dL/d(output counts)`` to ``dL/d(drive)`` through time.

    ``surrogate(v, theta)`` supplies the pseudo-derivative of the spike
    nonlinearity.  Resets, refractoriness and threshold boosts are treated as
    constants (detached), as is usual for surrogate-gradient BPTT.
    """
    cfg = network.config
    beta = math.exp(-record.dt / cfg.tau_m)
    n_layers = len(cfg.layer_sizes)
    grad_s = np.broadcast_to(np.asarray(grad_counts, dtype=float), record.spikes[-1].shape).copy()
    for layer in range(n_layers - 1, -1, -1):
        v, s = record.potentials[layer], record.spikes[layer]
        slope = surrogate(v, record.thresholds[layer]) * record.refractory[layer]
        keep = beta * (1.0 - s)
        grad_v = np.empty_like(v)
        carry = np.zeros(v.shape[1])
        for t in range(v.shape[0] - 1, -1, -1):
            carry = grad_s[t] * slope[t] + keep[t] * carry
            grad_v[t] = carry
        if layer > 0:
            grad_s = grad_v @ network.weights[layer - 1].T
        else:
            return (cfg.input_gain * grad_v).T
