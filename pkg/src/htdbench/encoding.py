"""Telemetry-to-spike encoders: Bernoulli rate coding and Bayesian Spike Pattern Superposition.

BSPS keeps, for every channel, a belief over ``K`` spike-pattern hypotheses.
The rate-coded observation of the window is cut into slices; each slice moves
the belief by the mixing rule

    p_i <- (1 - eta) * p_i + eta * P(o | s_i) p_i / sum_j P(o | s_j) p_j

and the emitted train superposes the hypothesis templates, template ``i``
contributing each of its spikes with probability ``p_i``.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.cluster import KMeans
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int_range, check_positive, check_unit_interval, check_window_values
from .exceptions import DegenerateObservationError, InputDomainError
from .snn import SpikeTrain

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class EncoderConfig:
    window: float = 20.0
    n_hypotheses: int = 8
    eta: float = 0.3
    r_max: float = 0.5
    likelihood_sigma: float = 1.5
    n_slices: int = 4
    neurons_per_channel: int = 1
    seed: int = 0

    def __post_init__(self):
        check_positive(self.window, "window")
        check_int_range(self.n_hypotheses, "n_hypotheses", 2, 10**4)
        check_unit_interval(self.eta, "eta")
        check_positive(self.r_max, "r_max")
        check_positive(self.likelihood_sigma, "likelihood_sigma")
        check_int_range(self.n_slices, "n_slices", 1, 10**4)
        check_int_range(self.neurons_per_channel, "neurons_per_channel", 1, 10**4)


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Probabilities over ``K`` hypothesis templates (spike-time arrays over one window)."""

    probs: np.ndarray
    hypotheses: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise InputDomainError("a belief needs at least two hypotheses")
        if (p < 0).any() or abs(p.sum() - 1.0) > NORMALIZATION_TOL:
            raise InputDomainError("belief probabilities must be non-negative and sum to 1")
        if self.hypotheses and len(self.hypotheses) != p.size:
            raise InputDomainError("one template per probability required")
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, hypotheses):
        k = len(hypotheses)
        return cls(np.full(k, 1.0 / k), tuple(hypotheses))

    @property
    def k(self):
        return self.probs.size


def _sample_grid(cfg, n_samples):
    return cfg.window / n_samples


def firing_probability(window, cfg):
    """Per-sample spike probability ``clip(value * r_max * dt, 0, 1)`` for each channel."""
    values = check_window_values(window)
    dt = _sample_grid(cfg, values.shape[1])
    return np.clip(values * cfg.r_max * dt, 0.0, 1.0)


def expand_rows(values, neurons_per_channel):
    return np.repeat(values, neurons_per_channel, axis=0) if neurons_per_channel > 1 else values


def rate_encode(window, cfg, seed=None):
    """Seeded Bernoulli rate code: each sample of each row spikes with ``value * r_max * dt``."""
    probs = expand_rows(firing_probability(window, cfg), cfg.neurons_per_channel)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    uniforms = rng.random(probs.shape)
    return SpikeTrain.from_raster((uniforms < probs).astype(np.int64), _sample_grid(cfg, probs.shape[1]))


# -- pattern likelihood ------------------------------------------------------


def spike_distance(a, b, cap=np.inf):
    """Symmetrized nearest-neighbour distance between two spike-time sets (pooled mean).

    Every spike contributes its distance to the nearest spike of the other set,
    capped at ``cap``; a spike facing an empty set contributes ``cap``.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 and b.size == 0:
        return 0.0
    total = _nearest(a, b, cap).sum() + _nearest(b, a, cap).sum()
    return float(total / (a.size + b.size))


def _nearest(queries, ref, cap):
    if queries.size == 0:
        return np.empty(0)
    if ref.size == 0:
        return np.full(queries.size, cap)
    idx = np.searchsorted(ref, queries)
    left = np.abs(queries - ref[np.clip(idx - 1, 0, ref.size - 1)])
    right = np.abs(ref[np.clip(idx, 0, ref.size - 1)] - queries)
    return np.minimum(np.minimum(left, right), cap)


def pattern_likelihood(observed, template, sigma, cap=np.inf):
    """Gaussian kernel ``exp(-d^2 / (2 sigma^2))`` on the spike distance; 1 for identical patterns."""
    check_positive(sigma, "sigma")
    d = spike_distance(observed, template, cap)
    if not np.isfinite(d):
        return 0.0
    return float(np.exp(-d * d / (2.0 * sigma * sigma)))


# -- belief update -------------------------------------------------------------


def mix_posterior(probs, likelihoods, eta):
    """The belief mixing rule on raw arrays (last axis indexes hypotheses)."""
    check_unit_interval(eta, "eta")
    probs = np.asarray(probs, dtype=float)
    lik = np.asarray(likelihoods, dtype=float)
    joint = lik * probs
    evidence = joint.sum(axis=-1, keepdims=True)
    if (evidence <= 0).any() or not np.isfinite(evidence).all():
        raise DegenerateObservationError("every hypothesis has zero likelihood; belief cannot be normalized")
    new = (1.0 - eta) * probs + eta * (joint / evidence)
    return new / new.sum(axis=-1, keepdims=True)


def bsps_update(belief, likelihoods, eta):
    """One belief step given the observation's likelihood under each hypothesis."""
    lik = np.asarray(likelihoods, dtype=float)
    if lik.shape != belief.probs.shape:
        raise InputDomainError("need one likelihood per hypothesis")
    return BeliefState(mix_posterior(belief.probs, lik, eta), belief.hypotheses)


# -- hypothesis sets -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HypothesisSet:
    """Per-channel spike-pattern templates.

    ``templates[c][i]`` is a :class:`SpikeTrain` over the ``rows`` replica
    input rows of channel ``c``: one population pattern per hypothesis.
    """

    templates: tuple
    window: float
    rows: int = 1
    prior: np.ndarray = None

    def __post_init__(self):
        k = len(self.templates[0]) if self.templates else 0
        prior = np.full((len(self.templates), k), 1.0 / max(k, 1)) if self.prior is None else self.prior
        prior = np.asarray(prior, dtype=float)
        if prior.shape != (len(self.templates), k):
            raise InputDomainError("prior needs one probability per template and channel")
        object.__setattr__(self, "prior", prior / prior.sum(axis=1, keepdims=True))

    @property
    def n_channels(self):
        return len(self.templates)

    @property
    def k(self):
        return len(self.templates[0])

    def to_dict(self):
        return {"window": self.window, "rows": self.rows, "prior": self.prior.tolist(),
                "templates": [[{"times": t.times.tolist(), "rows": t.neurons.tolist()} for t in chan]
                              for chan in self.templates]}

    @classmethod
    def from_dict(cls, data):
        window, rows = float(data["window"]), int(data["rows"])
        return cls(tuple(tuple(SpikeTrain(t["times"], t["rows"], rows, window) for t in chan)
                         for chan in data["templates"]), window, rows, data.get("prior"))

    def __eq__(self, other):
        if not isinstance(other, HypothesisSet):
            return NotImplemented
        return (self.window == other.window and self.rows == other.rows
                and np.array_equal(self.prior, other.prior) and self.templates == other.templates)


def profile_to_template(rate_profile, dt, phase=0.5):
    """Deterministic integrate-and-fire conversion of an expected-count profile to spike times.

    A spike is placed where the cumulative expected count first reaches
    ``phase``, ``phase + 1``, ...; ``phase=0.5`` rounds the count to nearest.
    """
    cum = np.cumsum(rate_profile)
    if cum.size == 0 or cum[-1] < phase:
        return np.empty(0)
    marks = np.arange(int(np.floor(cum[-1] - phase)) + 1) + phase
    return np.searchsorted(cum, marks) * dt


def population_template(rate_profile, dt, rows, window):
    """Spread one row's expected-count profile over ``rows`` replicas with staggered phases.

    Row ``r`` integrates-and-fires with phase ``(r + 0.5) / rows``, so each row is
    regular and the population count tracks ``rows`` times the expected count.
    """
    times, ids = [], []
    for r in range(rows):
        t = profile_to_template(rate_profile, dt, (r + 0.5) / rows)
        times.append(t)
        ids.append(np.full(t.size, r))
    return SpikeTrain(np.concatenate(times), np.concatenate(ids), rows, window)


def fit_hypotheses(windows, cfg, seed=None, fit_bin_ms=1.0):
    """Cluster rate-code intensity profiles into ``K`` slice patterns per channel.

    Every update slice of every training window contributes one profile (the
    expected spike count per ``fit_bin_ms`` bin of one input row).  k-means
    centroids are tiled over the ``n_slices`` slices and spread over the
    channel's replica rows by :func:`population_template`, so a template spans
    the whole window and looks the same in each slice.  Templates are ordered
    by spike count; the prior belief is the share of slices in each cluster.
    """
    X = np.asarray(windows, dtype=float)
    if X.ndim != 3 or X.shape[0] == 0:
        raise InputDomainError("need a non-empty (N, C, T) stack of windows")
    n_win, n_chan, n_samp = X.shape
    if n_samp % cfg.n_slices:
        raise InputDomainError(f"{n_samp} samples do not split into {cfg.n_slices} equal slices")
    dt = _sample_grid(cfg, n_samp)
    per_slice = n_samp // cfg.n_slices
    per_bin = max(1, int(round(fit_bin_ms / dt)))
    n_bins = per_slice // per_bin
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    k = min(cfg.n_hypotheses, n_win * cfg.n_slices)
    templates, priors = [], []
    for c in range(n_chan):
        rate = np.clip(X[:, c, :] * cfg.r_max * dt, 0, 1).reshape(n_win * cfg.n_slices, per_slice)
        binned = rate[:, :n_bins * per_bin].reshape(-1, n_bins, per_bin).sum(axis=2)
        km = KMeans(n_clusters=k, n_init=4, random_state=int(rng.integers(2**31))).fit(binned)
        order = np.argsort(km.cluster_centers_.sum(axis=1), kind="stable")
        centers = km.cluster_centers_[order]
        share = np.bincount(km.labels_, minlength=k)[order].astype(float)
        if k < cfg.n_hypotheses:
            centers = np.vstack([centers] + [centers[-1:]] * (cfg.n_hypotheses - k))
            share = np.concatenate([share, np.zeros(cfg.n_hypotheses - k)])
        priors.append(share / share.sum())
        chan = []
        for center in centers:
            profile = np.repeat(np.clip(center, 0, None) / per_bin, per_bin)
            profile = np.concatenate([profile, np.zeros(per_slice - profile.size)])
            chan.append(population_template(np.tile(profile, cfg.n_slices), dt,
                                            cfg.neurons_per_channel, cfg.window))
        templates.append(tuple(chan))
    return HypothesisSet(tuple(templates), cfg.window, cfg.neurons_per_channel, np.array(priors))


# -- BSPS filtering ------------------------------------------------------------


def _nearest_in_row(q_t, q_r, ref_t, ref_r, cap):
    """Distance from every query spike to the nearest reference spike of the same row, capped."""
    near = np.full(q_t.size, float(cap))
    if q_t.size == 0 or ref_t.size == 0:
        return near
    stride = 4.0 * (max(q_t.max(), ref_t.max()) + cap + 1.0)
    key = np.sort(ref_r * stride + ref_t)
    q = q_r * stride + q_t
    idx = np.searchsorted(key, q)
    for cand in (idx - 1, idx):
        ok = (cand >= 0) & (cand < key.size)
        gap = np.abs(key[np.clip(cand, 0, key.size - 1)] - q)
        near = np.where(ok, np.minimum(near, gap), near)
    return near


def row_distances(obs_t, obs_r, tpl_t, tpl_r, n_rows, cap):
    """Per-row :func:`spike_distance` between an observation and a template (both (time, row) lists)."""
    sums = (np.bincount(obs_r, weights=_nearest_in_row(obs_t, obs_r, tpl_t, tpl_r, cap), minlength=n_rows)
            + np.bincount(tpl_r, weights=_nearest_in_row(tpl_t, tpl_r, obs_t, obs_r, cap), minlength=n_rows))
    counts = np.bincount(obs_r, minlength=n_rows) + np.bincount(tpl_r, minlength=n_rows)
    return np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)


def _slice_index(times, edges):
    return np.clip(np.searchsorted(edges, times, side="right") - 1, 0, edges.size - 2)


def _grouped_nearest(q_group, q_t, ref_group, ref_t, cap):
    """Distance from each query to the nearest reference spike sharing its group id, capped."""
    near = np.full(q_t.size, float(cap))
    if q_t.size == 0 or ref_t.size == 0:
        return near
    stride = 4.0 * (max(q_t.max(), ref_t.max()) + cap + 1.0)
    key = np.sort(ref_group * stride + ref_t)
    q = q_group * stride + q_t
    idx = np.searchsorted(key, q)
    for cand in (idx - 1, idx):
        ok = (cand >= 0) & (cand < key.size)
        gap = np.abs(key[np.clip(cand, 0, key.size - 1)] - q)
        near = np.where(ok, np.minimum(near, gap), near)
    return near


def _template_index(hypotheses, edges):
    """Flattened (channel, template, slice, row, time) arrays of every template spike."""
    cached = getattr(hypotheses, "_flat", None)
    if cached is not None and cached[0] == tuple(edges):
        return cached[1]
    c_, i_, s_, r_, t_ = [], [], [], [], []
    for c, chan in enumerate(hypotheses.templates):
        for i, tpl in enumerate(chan):
            c_.append(np.full(len(tpl), c))
            i_.append(np.full(len(tpl), i))
            s_.append(_slice_index(tpl.times, edges))
            r_.append(tpl.neurons)
            t_.append(tpl.times)
    flat = tuple(np.concatenate(a) if a else np.empty(0) for a in (c_, i_, s_, r_, t_))
    flat = tuple(a.astype(np.int64) for a in flat[:4]) + (flat[4].astype(float),)
    object.__setattr__(hypotheses, "_flat", (tuple(edges), flat))
    return flat


def slice_log_likelihoods(observation, hypotheses, cfg):
    """``log P(o_s | s_i)`` up to a constant, shape ``(n_slices, channels, K)``.

    ``-sum_r d_r^2 / (2 sigma^2)``: the replica rows of a channel are
    independent observations of one signal, so the per-row Gaussian kernels on
    the :func:`row_distances` multiply.
    """
    m, k, n_chan, n_sl = hypotheses.rows, hypotheses.k, hypotheses.n_channels, cfg.n_slices
    if observation.n_neurons != n_chan * m:
        raise InputDomainError(f"observation has {observation.n_neurons} rows, hypotheses expect {n_chan * m}")
    edges = np.linspace(0.0, cfg.window, n_sl + 1)
    cap = cfg.window / n_sl
    tc, ti, ts, tr, tt = _template_index(hypotheses, edges)
    oc, orow = np.divmod(observation.neurons, m)
    osl = _slice_index(observation.times, edges)
    ot = observation.times
    # group ids: (channel, template, slice, row) and (channel, slice, row)
    tpl_full = ((tc * k + ti) * n_sl + ts) * m + tr
    tpl_csr = (tc * n_sl + ts) * m + tr
    obs_csr = (oc * n_sl + osl) * m + orow
    n_groups = n_chan * k * n_sl * m
    # every observed spike against every template of its channel
    rep_i = np.repeat(np.arange(k), ot.size)
    obs_full = ((np.tile(oc, k) * k + rep_i) * n_sl + np.tile(osl, k)) * m + np.tile(orow, k)
    d_obs = _grouped_nearest(obs_full, np.tile(ot, k), tpl_full, tt, cap)
    d_tpl = _grouped_nearest(tpl_csr, tt, obs_csr, ot, cap)
    sums = (np.bincount(obs_full, weights=d_obs, minlength=n_groups)
            + np.bincount(tpl_full, weights=d_tpl, minlength=n_groups))
    counts = np.bincount(obs_full, minlength=n_groups) + np.bincount(tpl_full, minlength=n_groups)
    d = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0).reshape(n_chan, k, n_sl, m)
    inv = 1.0 / (2.0 * cfg.likelihood_sigma ** 2)
    return -(d * d).sum(axis=3).transpose(2, 0, 1) * inv


def bsps_beliefs(observation, hypotheses, cfg):
    """Belief trajectory, shape ``(n_slices, channels, K)``: the belief after each slice.

    Each channel starts from the hypothesis prior (template frequencies in the
    training data).  A slice's likelihoods are rescaled by their largest entry
    before mixing (the posterior is invariant to a common factor), which keeps
    the product of replica kernels from underflowing.
    """
    log_lik = slice_log_likelihoods(observation, hypotheses, cfg)
    probs = hypotheses.prior.copy()
    out = np.empty_like(log_lik)
    for s in range(cfg.n_slices):
        lik = np.exp(log_lik[s] - log_lik[s].max(axis=1, keepdims=True))
        probs = mix_posterior(probs, lik, cfg.eta)
        out[s] = probs
    return out


def bsps_emit(beliefs, hypotheses, cfg, seed):
    """Superpose templates slice by slice.

    In slice ``s`` each row of channel ``c`` emits its part of template ``i``
    with probability ``beliefs[s, c, i]``, the belief once that slice has been
    observed.  A template is emitted or withheld as a whole pattern: the row
    draws one template per slice.
    """
    rng = np.random.default_rng(seed)
    m = hypotheses.rows
    edges = np.linspace(0.0, cfg.window, cfg.n_slices + 1)
    out_t, out_r = [], []
    for c in range(hypotheses.n_channels):
        cum = np.cumsum(beliefs[:, c, :], axis=1)
        u = rng.random((m, cfg.n_slices))
        choice = (u[:, :, np.newaxis] >= cum[np.newaxis, :, :-1]).sum(axis=2)
        for i, tpl in enumerate(hypotheses.templates[c]):
            if len(tpl) == 0:
                continue
            keep = choice[tpl.neurons, _slice_index(tpl.times, edges)] == i
            out_t.append(tpl.times[keep])
            out_r.append(tpl.neurons[keep] + c * m)
    if out_t:
        times, rows = np.concatenate(out_t), np.concatenate(out_r)
    else:
        times, rows = np.empty(0), np.empty(0, dtype=np.int64)
    return SpikeTrain(times, rows, hypotheses.n_channels * m, cfg.window)


def bsps_filter(observation, hypotheses, cfg, seed):
    """Replace an observed spike train by its belief-weighted template superposition."""
    beliefs = bsps_beliefs(observation, hypotheses, cfg)
    return bsps_emit(beliefs, hypotheses, cfg, seed), beliefs


def bsps_encode(window, cfg, hypotheses, seed=None):
    """Rate-code ``window`` as the observation stream, then BSPS-filter it.

    Returns ``(spike_train, beliefs)`` where ``beliefs`` is one
    :class:`BeliefState` per channel.
    """
    seed = cfg.seed if seed is None else seed
    obs_seed, emit_seed = np.random.SeedSequence(seed).generate_state(2)
    observation = rate_encode(window, cfg, int(obs_seed))
    train, probs = bsps_filter(observation, hypotheses, cfg, int(emit_seed))
    return train, [BeliefState(p, hypotheses.templates[c]) for c, p in enumerate(probs[-1])]


# -- scikit-learn transformers -------------------------------------------------------


class RateEncoder(TransformerMixin, BaseEstimator):
    """Stateless rate coder; ``transform`` maps (N, C, T) windows to a list of spike trains."""

    def __init__(self, window=20.0, r_max=0.5, neurons_per_channel=1, random_state=0):
        self.window = window
        self.r_max = r_max
        self.neurons_per_channel = neurons_per_channel
        self.random_state = random_state

    def _cfg(self):
        return EncoderConfig(window=self.window, r_max=self.r_max,
                             neurons_per_channel=self.neurons_per_channel, seed=self.random_state)

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        self.n_channels_ = X.shape[1]
        return self

    def observe(self, window, seed):
        """Sensor-level spike stream of one window."""
        return rate_encode(window, self._cfg(), seed)

    def filter(self, observation, seed):
        return observation

    def encode(self, window, seed):
        return self.filter(self.observe(window, seed), seed)

    def transform(self, X, seeds=None):
        X = np.asarray(X, dtype=float)
        seeds = _window_seeds(self.random_state, len(X)) if seeds is None else seeds
        return [self.encode(x, s) for x, s in zip(X, seeds)]

    @property
    def n_rows_(self):
        return self.n_channels_ * self.neurons_per_channel


class BSPSEncoder(RateEncoder):
    """Rate coding followed by belief-state filtering over fitted spike-pattern hypotheses."""

    def __init__(self, window=20.0, r_max=0.5, neurons_per_channel=1, n_hypotheses=8, eta=0.3,
                 likelihood_sigma=1.5, n_slices=4, random_state=0):
        super().__init__(window, r_max, neurons_per_channel, random_state)
        self.n_hypotheses = n_hypotheses
        self.eta = eta
        self.likelihood_sigma = likelihood_sigma
        self.n_slices = n_slices

    def _cfg(self):
        return EncoderConfig(window=self.window, n_hypotheses=self.n_hypotheses, eta=self.eta, r_max=self.r_max,
                             likelihood_sigma=self.likelihood_sigma, n_slices=self.n_slices,
                             neurons_per_channel=self.neurons_per_channel, seed=self.random_state)

    def fit(self, X, y=None):
        super().fit(X)
        self.hypotheses_ = fit_hypotheses(X, self._cfg())
        return self

    def filter(self, observation, seed):
        check_is_fitted(self, "hypotheses_")
        emit_seed = int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])
        return bsps_filter(observation, self.hypotheses_, self._cfg(), emit_seed)[0]


def _window_seeds(random_state, n):
    return [int(s) for s in np.random.SeedSequence(random_state).generate_state(n)] if n else []
