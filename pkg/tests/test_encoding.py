import math

import numpy as np
import pytest
from sklearn.base import clone

from htdbench.encoding import (
    NORMALIZATION_TOL,
    BeliefState,
    BSPSEncoder,
    EncoderConfig,
    HypothesisSet,
    RateEncoder,
    bsps_beliefs,
    bsps_encode,
    bsps_filter,
    bsps_update,
    fit_hypotheses,
    pattern_likelihood,
    population_template,
    rate_encode,
    spike_distance,
)
from htdbench.exceptions import DegenerateObservationError, InputDomainError
from htdbench.snn import SpikeTrain
from htdbench.telemetry import DatasetConfig, generate_dataset, stack


# -- rate coding ----------------------------------------------------------------


def test_zero_window_gives_empty_train():
    train = rate_encode(np.zeros((3, 200)), EncoderConfig(), seed=1)
    assert len(train) == 0
    assert train.n_neurons == 3


def test_rate_code_poisson_mean():
    # value 1, r_max 0.5 / ms, 20 ms window -> 10 expected spikes per row
    cfg = EncoderConfig(r_max=0.5, window=20.0)
    window = np.ones((1, 200))
    counts = np.array([len(rate_encode(window, cfg, seed=s)) for s in range(1000)])
    assert abs(counts.mean() - 10.0) <= 10.0 * 3 / math.sqrt(1000 * 10)


def test_rate_code_deterministic_per_seed():
    window = np.random.default_rng(0).random((4, 200))
    cfg = EncoderConfig(neurons_per_channel=3)
    assert rate_encode(window, cfg, seed=7) == rate_encode(window, cfg, seed=7)
    assert rate_encode(window, cfg, seed=7) != rate_encode(window, cfg, seed=8)
    assert rate_encode(window, cfg, seed=7).n_neurons == 12


def test_rate_code_rejects_out_of_range_values():
    with pytest.raises(InputDomainError):
        rate_encode(np.full((1, 10), 1.5), EncoderConfig())


# -- pattern likelihood ---------------------------------------------------------------


def test_likelihood_identical_patterns():
    assert pattern_likelihood([1.0, 4.0, 9.0], [1.0, 4.0, 9.0], 1.5) == 1.0


def test_likelihood_vanishes_with_distance():
    assert pattern_likelihood([0.0], [1e4], 1.5) == pytest.approx(0.0, abs=1e-300)


def test_likelihood_single_spikes_offset_by_sigma():
    sigma = 1.5
    assert pattern_likelihood([5.0], [5.0 + sigma], sigma) == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert math.exp(-0.5) == pytest.approx(0.6065, abs=1e-4)


def test_spike_distance_hand_case():
    # a = {0, 10}, b = {1}: nearest distances 1, 9 from a and 1 from b -> 11 / 3
    assert spike_distance([0.0, 10.0], [1.0]) == pytest.approx(11.0 / 3.0)
    assert spike_distance([], []) == 0.0
    assert spike_distance([0.0], [], cap=2.5) == 2.5


# -- belief update ---------------------------------------------------------------------


def test_uniform_belief_is_fixed_point():
    b = BeliefState(np.full(4, 0.25))
    new = bsps_update(b, np.full(4, 0.3), 0.7)
    np.testing.assert_allclose(new.probs, np.full(4, 0.25), rtol=0, atol=1e-15)


def test_eta_zero_is_identity():
    b = BeliefState(np.array([0.1, 0.2, 0.7]))
    new = bsps_update(b, np.array([0.9, 0.05, 0.01]), 0.0)
    np.testing.assert_array_equal(new.probs, b.probs)


def test_belief_update_hand_case():
    # posterior (0.45, 0.05) / 0.5 = (0.9, 0.1); mixed with eta 0.5 -> (0.7, 0.3)
    new = bsps_update(BeliefState(np.array([0.5, 0.5])), np.array([0.9, 0.1]), 0.5)
    np.testing.assert_allclose(new.probs, [0.7, 0.3], rtol=0, atol=1e-15)


def test_belief_update_rejects_all_zero_likelihood():
    with pytest.raises(DegenerateObservationError):
        bsps_update(BeliefState(np.array([0.5, 0.5])), np.zeros(2), 0.5)


def test_belief_update_shape_mismatch():
    with pytest.raises(InputDomainError):
        bsps_update(BeliefState(np.array([0.5, 0.5])), np.ones(3), 0.5)


def test_random_updates_stay_normalized():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        k = int(rng.integers(2, 9))
        b = BeliefState(rng.dirichlet(np.ones(k)))
        new = bsps_update(b, rng.random(k) + 1e-12, float(rng.random()))
        assert abs(new.probs.sum() - 1.0) <= NORMALIZATION_TOL
        assert np.all(new.probs >= 0)


# -- BSPS filtering ------------------------------------------------------------------------


def _ladder(k=5, window=20.0):
    """One channel, one row; template i is a regular train of 2 + 3 i spikes."""
    templates = []
    for i in range(k):
        n = 2 + 3 * i
        templates.append(SpikeTrain((np.arange(n) + 0.5) * window / n, np.zeros(n, dtype=int), 1, window))
    return HypothesisSet((tuple(templates),), window, 1)


def test_matching_input_concentrates_belief():
    hyp = _ladder()
    cfg = EncoderConfig(n_hypotheses=5, eta=0.5, n_slices=20, likelihood_sigma=0.5)
    beliefs = bsps_beliefs(hyp.templates[0][3], hyp, cfg)
    trajectory = beliefs[:, 0, 3]
    # slices where no template differs from the input leave the belief unchanged
    assert np.all(np.diff(trajectory) >= 0)
    assert trajectory[-1] > 0.9
    assert np.argmax(beliefs[-1, 0]) == 3


def test_eta_zero_output_ignores_input():
    hyp = _ladder()
    cfg = EncoderConfig(n_hypotheses=5, eta=0.0, n_slices=4)
    a, _ = bsps_filter(hyp.templates[0][0], hyp, cfg, seed=3)
    b, _ = bsps_filter(hyp.templates[0][4], hyp, cfg, seed=3)
    assert a == b


def test_bsps_output_is_superposition_of_templates():
    hyp = _ladder()
    cfg = EncoderConfig(n_hypotheses=5, eta=0.8, n_slices=4)
    out, _ = bsps_filter(hyp.templates[0][2], hyp, cfg, seed=0)
    allowed = np.concatenate([t.times for t in hyp.templates[0]])
    assert np.all(np.isin(out.times, allowed))


@pytest.fixture(scope="module")
def fitted_hypotheses():
    windows = stack(generate_dataset(DatasetConfig(n_windows=100, seed=5)))
    # the package's default encoder geometry
    cfg = EncoderConfig(r_max=1.0, neurons_per_channel=20, n_slices=8, eta=0.8)
    return windows, cfg, fit_hypotheses(windows[:50], cfg, seed=0)


def test_hypotheses_prior_and_shape(fitted_hypotheses):
    windows, cfg, hyp = fitted_hypotheses
    assert hyp.n_channels == windows.shape[1]
    assert hyp.k == cfg.n_hypotheses
    np.testing.assert_allclose(hyp.prior.sum(axis=1), 1.0)
    assert HypothesisSet.from_dict(hyp.to_dict()) == hyp


def test_bsps_encode_beliefs_normalized(fitted_hypotheses):
    windows, cfg, hyp = fitted_hypotheses
    train, beliefs = bsps_encode(windows[60], cfg, hyp, seed=4)
    assert train.n_neurons == windows.shape[1] * cfg.neurons_per_channel
    assert len(beliefs) == windows.shape[1]
    for b in beliefs:
        assert abs(b.probs.sum() - 1.0) <= NORMALIZATION_TOL


def test_jitter_moves_belief_less_than_symbol_flip(fitted_hypotheses):
    """Paired oracle over 100 windows: 1 ms jitter of one spike vs deleting that spike."""
    windows, cfg, hyp = fitted_hypotheses
    jitter_change, flip_change = [], []
    for s in range(100):
        obs = rate_encode(windows[50 + s % 50], cfg, seed=s)
        j = int(np.random.default_rng(s).integers(len(obs)))
        times = obs.times.copy()
        times[j] = times[j] + 1.0 if times[j] + 1.0 < cfg.window else times[j] - 1.0
        jittered = SpikeTrain(times, obs.neurons, obs.n_neurons, obs.window)
        keep = np.arange(len(obs)) != j
        flipped = SpikeTrain(obs.times[keep], obs.neurons[keep], obs.n_neurons, obs.window)
        base = bsps_beliefs(obs, hyp, cfg)
        jitter_change.append(np.abs(bsps_beliefs(jittered, hyp, cfg) - base).sum())
        flip_change.append(np.abs(bsps_beliefs(flipped, hyp, cfg) - base).sum())
    assert np.mean(jitter_change) <= np.mean(flip_change)


# -- transformers ---------------------------------------------------------------------------


def test_encoders_follow_estimator_api(small_data):
    X, _ = small_data
    enc = RateEncoder(neurons_per_channel=2, random_state=3)
    assert clone(enc).get_params() == enc.get_params()
    trains = enc.fit(X[:4]).transform(X[:4])
    assert len(trains) == 4
    assert enc.n_rows_ == X.shape[1] * 2
    bsps = BSPSEncoder(neurons_per_channel=2, n_slices=4).fit(X)
    train = bsps.encode(X[0], 11)
    assert train == bsps.encode(X[0], 11)
    assert train.n_neurons == bsps.n_rows_


def test_population_template_count_tracks_expectation():
    profile = np.full(200, 0.05)  # 10 expected spikes per row
    train = population_template(profile, 0.1, 4, 20.0)
    assert np.array_equal(train.counts(), [10, 10, 10, 10])


def test_config_validation():
    with pytest.raises(InputDomainError):
        EncoderConfig(eta=1.5)
    with pytest.raises(InputDomainError):
        EncoderConfig(n_hypotheses=1)
