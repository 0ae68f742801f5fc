"""scikit-learn compatible anomaly detector built on the event-driven SNN.

:class:`HTDClassifier` wires an encoder (rate or BSPS), a three-layer LIF
network and the optional assurance mechanisms into one estimator.  Each of the
four ablation configurations is just a parameter setting::

    HTDClassifier(encoding="rate")                                   # baseline
    HTDClassifier(encoding="bsps")                                   # + input assurance
    HTDClassifier(encoding="bsps", adaptive_threshold=True)          # + neuronal assurance
    HTDClassifier(encoding="bsps", adaptive_threshold=True,
                  metaplasticity=True)                               # + synaptic assurance
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import f1_score
from sklearn.utils.validation import check_is_fitted

from ._validation import check_window_values
from .assurance import MetaplasticityConfig, ThresholdConfig
from .encoding import BSPSEncoder, RateEncoder, expand_rows, firing_probability
from .exceptions import InputDomainError
from .snn import (
    INFERENCE,
    ONLINE_LEARNING,
    Network,
    NetworkConfig,
    StdpParams,
    _simulate_layer,
    _simulate_layer_static,
    run_window,
    unroll,
    unroll_backward,
)


def _check_batch(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[np.newaxis]
    if X.ndim != 3:
        raise InputDomainError(f"expected (n_windows, channels, samples), got shape {X.shape}")
    for x in X:
        check_window_values(x)
    return X


def window_seeds(random_state, n, stream=0):
    """Per-window encoder seeds derived from ``random_state`` by counter."""
    if n == 0:
        return np.empty(0, dtype=np.int64)
    return np.random.SeedSequence([int(random_state), stream]).generate_state(n).astype(np.int64)


def rectangular_surrogate(width):
    def slope(v, theta):
        return np.where(np.abs(v - theta) < width, 0.5 / width, 0.0)
    return slope


class HTDClassifier(ClassifierMixin, BaseEstimator):
    """Spiking anomaly detector with toggleable hierarchical temporal defenses.

    Class 0 is nominal, class 1 anomaly; the prediction is the output unit with
    the most spikes, ties going to nominal.

    Training follows two phases: unsupervised online STDP on the first
    ``stdp_windows`` (shuffled) nominal training windows, hidden projection
    only, then a supervised delta rule for the readout (see ``_fit_readout``).  With ``online_inference=True`` the model keeps
    learning by STDP while it predicts.
    """

    def __init__(self, encoding="rate", adaptive_threshold=False, metaplasticity=False,
                 n_hidden=128, neurons_per_channel=20, r_max=1.0, window=20.0,
                 n_hypotheses=8, eta=0.8, likelihood_sigma=1.5, n_slices=8,
                 tau_m=20.0, t_refrac=2.0, threshold=1.0, init_mean=0.0, init_std=0.1,
                 delta_boost=0.15, tau_theta=30.0, v0=None, ema_alpha=0.1,
                 a_plus=0.01, a_minus=0.012, tau_plus=20.0, tau_minus=20.0,
                 stdp_windows=20, stdp_normalize=True, readout_C=0.1, readout_w_max=1.0, readout_scales=(1.0, 1.5, 2.0, 3.0),
                 readout_offsets=(0.0, 1.0, 2.0), online_inference=False, surrogate_width=None,
                 random_state=0):
        self.encoding = encoding
        self.adaptive_threshold = adaptive_threshold
        self.metaplasticity = metaplasticity
        self.n_hidden = n_hidden
        self.neurons_per_channel = neurons_per_channel
        self.r_max = r_max
        self.window = window
        self.n_hypotheses = n_hypotheses
        self.eta = eta
        self.likelihood_sigma = likelihood_sigma
        self.n_slices = n_slices
        self.tau_m = tau_m
        self.t_refrac = t_refrac
        self.threshold = threshold
        self.init_mean = init_mean
        self.init_std = init_std
        self.delta_boost = delta_boost
        self.tau_theta = tau_theta
        self.v0 = v0
        self.ema_alpha = ema_alpha
        self.a_plus = a_plus
        self.a_minus = a_minus
        self.tau_plus = tau_plus
        self.tau_minus = tau_minus
        self.stdp_windows = stdp_windows
        self.stdp_normalize = stdp_normalize
        self.readout_C = readout_C
        self.readout_w_max = readout_w_max
        self.readout_scales = readout_scales
        self.readout_offsets = readout_offsets
        self.online_inference = online_inference
        self.surrogate_width = surrogate_width
        self.random_state = random_state

    # -- construction ---------------------------------------------------------

    def _make_encoder(self):
        common = dict(window=self.window, r_max=self.r_max, neurons_per_channel=self.neurons_per_channel,
                      random_state=self.random_state)
        if self.encoding == "rate":
            return RateEncoder(**common)
        if self.encoding == "bsps":
            return BSPSEncoder(n_hypotheses=self.n_hypotheses, eta=self.eta,
                               likelihood_sigma=self.likelihood_sigma, n_slices=self.n_slices, **common)
        raise InputDomainError(f"encoding must be 'rate' or 'bsps', got {self.encoding!r}")

    def _make_network(self, n_channels):
        m = self.neurons_per_channel
        stdp = StdpParams(self.a_plus, self.a_minus, self.tau_plus, self.tau_minus)
        cfg = NetworkConfig(layer_sizes=(n_channels * m, self.n_hidden, 2), tau_m=self.tau_m,
                            t_refrac=self.t_refrac, threshold=self.threshold, stdp=stdp,
                            init_mean=self.init_mean, init_std=self.init_std, seed=self.random_state,
                            w_max=(1.0, self.readout_w_max))
        thr = ThresholdConfig(self.delta_boost * self.threshold, self.tau_theta, bool(self.adaptive_threshold))
        v0 = self.v0 if self.v0 is not None else (2.0 * self.a_plus) ** 2
        meta = MetaplasticityConfig(v0, self.ema_alpha, bool(self.metaplasticity))
        rng = np.random.default_rng(self.random_state)
        # replicas of one channel start with tied weights so each hidden unit sees channel-level rates
        tied = rng.normal(self.init_mean, self.init_std, size=(n_channels, self.n_hidden))
        weights = [np.repeat(tied, m, axis=0), np.zeros((self.n_hidden, 2))]
        return Network(cfg, thr, meta, weights=weights)

    @property
    def dt_(self):
        return self.window / self.n_samples_

    # -- fitting ------------------------------------------------------------------

    def fit(self, X, y, seeds=None):
        X = _check_batch(X)
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (len(X),):
            raise InputDomainError("y must have one label per window")
        self.classes_ = np.array([0, 1])
        self.n_channels_, self.n_samples_ = X.shape[1], X.shape[2]
        self.encoder_ = self._make_encoder().fit(X)
        self.network_ = self._make_network(self.n_channels_)
        seeds = window_seeds(self.random_state, len(X), stream=1) if seeds is None else np.asarray(seeds)
        trains = [self.encoder_.encode(x, int(s)) for x, s in zip(X, seeds)]
        rng = np.random.default_rng(self.random_state)
        nominal = rng.permutation(np.flatnonzero(y == 0))
        for i in nominal[:self.stdp_windows]:
            self._stdp_exposure(trains[i])
        self._fit_readout(trains, y)
        return self

    def _stdp_exposure(self, train):
        # Online STDP on one window, then each hidden unit's incoming weights are
        # re-centred on their previous mean: the hidden layer sits on a balanced
        # excitation/inhibition point that a small common drift would destroy.
        net = self.network_
        before = net.latent[0].mean(axis=0)
        run_window(net, train, self.window, ONLINE_LEARNING)
        if self.stdp_normalize:
            net.set_weights(0, net.latent[0] - net.latent[0].mean(axis=0) + before)

    def _hidden_spikes(self, train):
        net = self.network_
        l0 = _simulate_layer(net, 0, train.times, train.neurons, False)
        return _simulate_layer(net, 1, l0.times, l0.neurons, False)

    def _fit_readout(self, trains, y):
        """Supervised delta rule for the output projection, folded onto the 4-bit grid.

        The logistic delta rule is solved to convergence on hidden spike counts
        (``LogisticRegression``); its intercept is spread over the weights using
        the mean hidden spike count, the direction is split antisymmetrically
        between the two output units, and the scale / bias offset whose
        quantized spiking readout scores best on the training windows is kept.
        """
        net = self.network_
        k = len(net.weights) - 1
        hidden = [self._hidden_spikes(tr) for tr in trains]
        counts = np.array([np.bincount(h.neurons, minlength=self.n_hidden) for h in hidden], dtype=float)
        if np.unique(y).size < 2 or not counts.any():
            net.set_weights(k, np.zeros_like(net.latent[k]))
            return
        lr = LogisticRegression(C=self.readout_C, max_iter=5000).fit(counts, y)
        coef, bias = lr.coef_[0], lr.intercept_[0]
        mass = max(counts.sum(axis=1).mean(), 1.0)
        norm = max(np.abs(coef).max(), 1e-12)
        candidates = []
        for scale in self.readout_scales:
            for offset in self.readout_offsets:
                v = (coef + (bias + offset) / mass) * (scale * self.readout_w_max / norm)
                net.set_weights(k, np.column_stack([-v, v]))
                candidates.append(net.latent[k].copy())
        # output units are independent given the hidden spikes: score every candidate in one pass
        stacked = np.hstack([net._quantize(c, k) for c in candidates])
        votes = np.zeros((len(hidden), len(candidates)), dtype=np.int64)
        for n, h in enumerate(hidden):
            out = _simulate_layer_static(net, k + 1, h.times, h.neurons, weights=stacked)
            per_unit = np.bincount(out.neurons, minlength=stacked.shape[1]).reshape(-1, 2)
            votes[n] = np.argmax(per_unit, axis=1)
        scores = [f1_score(y, votes[:, j], zero_division=0.0) for j in range(len(candidates))]
        best = int(np.argmax(scores))
        net.set_weights(k, candidates[best])
        self.readout_score_ = scores[best]

    def _readout(self, hidden):
        res = _simulate_layer(self.network_, len(self.network_.layer_sizes) - 1, hidden.times, hidden.neurons, False)
        return int(np.argmax(np.bincount(res.neurons, minlength=2)))

    # -- inference ----------------------------------------------------------------

    def encode(self, window, seed):
        """Spike train fed to the input layer for ``window`` under encoder seed ``seed``."""
        check_is_fitted(self, "network_")
        return self.encoder_.encode(window, int(seed))

    def run(self, train, mode=None, network=None):
        """Simulate one encoded window; returns ``(class, trace)``."""
        net = self.network_ if network is None else network
        if mode is None:
            mode = ONLINE_LEARNING if self.online_inference else INFERENCE
        cls, trace, _ = run_window(net, train, self.window, mode)
        return cls, trace

    def predict(self, X, seeds=None):
        X = _check_batch(X)
        check_is_fitted(self, "network_")
        seeds = window_seeds(self.random_state, len(X), stream=2) if seeds is None else np.asarray(seeds)
        return np.array([self.run(self.encode(x, s))[0] for x, s in zip(X, seeds)], dtype=np.int64)

    def predict_trains(self, trains, network=None):
        return np.array([self.run(tr, network=network)[0] for tr in trains], dtype=np.int64)

    # -- white-box gradient ------------------------------------------------------

    def loss_gradient(self, window, label, seed):
        """Cross-entropy of softmaxed output counts and its gradient w.r.t. the window values.

        The forward pass is the dt-tick unrolled network on the exact spike
        stream the encoder emits for ``seed``; the backward pass uses the
        rectangular surrogate at every spike and a straight-through estimate
        ``d spike / d value = r_max * dt`` for the encoder.  BSPS filtering is
        treated as identity on the backward pass.
        """
        check_is_fitted(self, "network_")
        dt = self.window / np.asarray(window).shape[1]
        train = self.encode(window, seed)
        drive = train.to_raster(dt)
        record = unroll(self.network_, drive, dt)
        counts = record.counts
        z = counts - counts.max()
        soft = np.exp(z) / np.exp(z).sum()
        loss = float(-np.log(soft[label]))
        grad_counts = soft.copy()
        grad_counts[label] -= 1.0
        width = self.surrogate_width if self.surrogate_width is not None else 0.5 * self.threshold
        grad_drive = unroll_backward(self.network_, record, grad_counts, rectangular_surrogate(width))
        probs = expand_rows(firing_probability(window, self.encoder_._cfg()), self.neurons_per_channel)
        live = (probs > 0) & (probs < 1) | (np.asarray(window).repeat(self.neurons_per_channel, axis=0) == 0)
        grad_rows = grad_drive * (self.r_max * dt) * live
        grad = grad_rows.reshape(self.n_channels_, self.neurons_per_channel, -1).sum(axis=1)
        return loss, grad
