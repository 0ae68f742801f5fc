import math

import numpy as np
import pytest

from htdbench.exceptions import FormatError, InputDomainError
from htdbench.snn import (
    INFERENCE,
    ONLINE_LEARNING,
    Network,
    NetworkConfig,
    NeuronState,
    SpikeEvent,
    SpikeTrain,
    StdpParams,
    SynapseState,
    _simulate_layer,
    _simulate_layer_static,
    grid_step,
    lif_update,
    quantize_weight,
    run_window,
    stdp_update,
    unroll,
)


# -- LIF ----------------------------------------------------------------------


def test_lif_pure_decay_to_rest():
    state, spiked = lif_update(NeuronState(potential=0.5), 0.0, 10 * 20.0, 1.0, tau_m=20.0)
    assert not spiked
    assert state.potential == pytest.approx(0.0, abs=1e-4)


def test_lif_supra_threshold_spike_resets():
    state, spiked = lif_update(NeuronState(), 2.0, 0.0, 1.0)
    assert spiked
    assert state.potential == 0.0
    assert state.last_spike == 0.0


def test_lif_decay_closed_form_matches_stepping():
    closed = 0.8 * math.exp(-1.0)
    assert closed == pytest.approx(0.2943, abs=1e-4)
    one_step, _ = lif_update(NeuronState(potential=0.8), 0.0, 20.0, 1.0, tau_m=20.0)
    state = NeuronState(potential=0.8)
    for k in range(1, 201):
        state, _ = lif_update(state, 0.0, k * 0.1, 1.0, tau_m=20.0)
    assert one_step.potential == pytest.approx(closed, rel=1e-12)
    assert state.potential == pytest.approx(closed, rel=1e-9)


def test_lif_refractory_blocks_second_spike():
    state, spiked = lif_update(NeuronState(), 2.0, 0.0, 1.0, t_refrac=2.0)
    assert spiked
    state, spiked = lif_update(state, 2.0, 1.0, 1.0, t_refrac=2.0)
    assert not spiked
    state, spiked = lif_update(state, 2.0, 3.0, 1.0, t_refrac=2.0)
    assert spiked


def test_lif_rejects_time_travel():
    with pytest.raises(InputDomainError):
        lif_update(NeuronState(last_update=5.0), 0.0, 4.0, 1.0)


# -- STDP ---------------------------------------------------------------------


def test_stdp_causal_pair_potentiates():
    _, delta = stdp_update(SynapseState(0.0), 10.0, 12.0, 1.0)
    assert delta > 0


def test_stdp_anticausal_pair_depresses():
    _, delta = stdp_update(SynapseState(0.0), 12.0, 10.0, 1.0)
    assert delta < 0


def test_stdp_zero_gate_freezes_weight_but_tracks_volatility():
    syn = SynapseState(quantize_weight(0.2), latent=0.2)
    new, delta = stdp_update(syn, 10.0, 12.0, 0.0)
    assert delta == 0.0
    assert new.weight == syn.weight and new.latent == syn.latent
    assert new.volatility_count == 1


def test_stdp_kernel_hand_value():
    params = StdpParams(a_plus=0.1, tau_plus=20.0)
    assert float(params.kernel(20.0)) == pytest.approx(0.1 * math.exp(-1.0), abs=1e-12)
    assert 0.1 * math.exp(-1.0) == pytest.approx(0.03679, abs=1e-5)
    syn, delta = stdp_update(SynapseState(0.0), 0.0, 20.0, 1.0, stdp=params)
    assert delta == pytest.approx(0.03679, abs=1e-5)
    assert syn.latent == pytest.approx(0.03679, abs=1e-5)


# -- quantization ---------------------------------------------------------------


def test_quantize_zero_maps_to_nearest_level():
    # the 16-level grid on [-1, 1] has no zero; its two nearest levels are +-1/15
    assert abs(quantize_weight(0.0, 4, 1.0)) == pytest.approx(1.0 / 15.0)


def test_quantize_top_level():
    assert quantize_weight(1.0, 4, 1.0) == pytest.approx(1.0)
    assert quantize_weight(-1.0, 4, 1.0) == pytest.approx(-1.0)


def test_quantize_error_bounded_by_half_step_exhaustive():
    w = np.linspace(-1.0, 1.0, 2001)
    q = quantize_weight(w, 4, 1.0)
    assert np.max(np.abs(q - w)) <= grid_step(4, 1.0) / 2 + 1e-12
    assert grid_step(4, 1.0) / 2 == pytest.approx(0.0667, abs=1e-4)
    assert np.unique(np.round(q, 12)).size == 16


def test_quantize_clips_out_of_range():
    assert quantize_weight(5.0) == pytest.approx(1.0)
    assert quantize_weight(-5.0) == pytest.approx(-1.0)


# -- spike trains -------------------------------------------------------------------


def test_spike_train_sorted_and_round_trips():
    train = SpikeTrain([3.0, 1.0, 1.0], [0, 2, 1], 3, 5.0)
    assert train.times.tolist() == [1.0, 1.0, 3.0]
    assert train.neurons.tolist() == [1, 2, 0]
    assert SpikeTrain.from_events(train.to_events(), 3, 5.0) == train
    raster = train.to_raster(1.0)
    assert SpikeTrain.from_raster(raster, 1.0) == train


def test_spike_event_validates():
    with pytest.raises(InputDomainError):
        SpikeEvent(-1.0, 0)
    with pytest.raises(InputDomainError):
        SpikeEvent(0.0, -1)


# -- networks -------------------------------------------------------------------------


def _net(seed=0, plastic=None, stdp=None, sizes=(4, 8, 2)):
    cfg = NetworkConfig(layer_sizes=sizes, init_mean=0.3, init_std=0.4, seed=seed,
                        stdp=stdp or StdpParams())
    return Network(cfg, plastic=plastic)


def _poisson_train(n, window, rate, seed):
    rng = np.random.default_rng(seed)
    count = rng.poisson(rate * window * n)
    times = np.round(rng.uniform(0, window, count), 1)
    times = np.minimum(times, window - 0.1)
    return SpikeTrain(times, rng.integers(0, n, count), n, window)


def test_empty_input_gives_tie_break_and_zero_trace():
    cls, trace, _ = run_window(_net(), SpikeTrain.empty(4, 20.0), 20.0)
    assert cls == 0
    assert trace.total_events == 0
    assert trace.spike_counts == (0, 0, 0)


def test_run_window_deterministic():
    train = _poisson_train(4, 20.0, 0.5, 1)
    a = run_window(_net(), train, 20.0, record=True)
    b = run_window(_net(), train, 20.0, record=True)
    assert a[0] == b[0]
    assert a[1] == b[1]
    assert all(x == y for x, y in zip(a[1].spikes, b[1].spikes))


def test_synaptic_events_equal_spike_out_degree_recount():
    net = _net()
    train = _poisson_train(4, 20.0, 0.8, 2)
    _, trace, _ = run_window(net, train, 20.0, record=True)
    # every input spike drives one input unit; every spike of layer l fans out to layer l + 1
    expected = len(train) + sum(len(trace.spikes[l]) * net.out_degree(l) for l in range(len(net.layer_sizes) - 1))
    assert trace.synaptic_events == expected


def test_static_path_matches_event_loop():
    # zero-amplitude STDP runs the learning loop without changing any weight
    frozen = StdpParams(a_plus=0.0, a_minus=0.0)
    for seed in range(5):
        train = _poisson_train(4, 20.0, 1.0, seed)
        net = _net(seed, plastic=(True, True), stdp=frozen)
        l0 = _simulate_layer_static(net, 0, train.times, train.neurons)
        loop = _simulate_layer(net, 1, l0.times, l0.neurons, learn=True)
        static = _simulate_layer_static(net, 1, l0.times, l0.neurons)
        assert np.array_equal(loop.times, static.times)
        assert np.array_equal(loop.neurons, static.neurons)
        assert loop.activity == static.activity


def test_online_learning_changes_plastic_weights_only():
    net = _net(plastic=(True, False))
    before = [w.copy() for w in net.weights]
    run_window(net, _poisson_train(4, 20.0, 2.0, 3), 20.0, ONLINE_LEARNING)
    assert not np.array_equal(before[0], net.weights[0])
    assert np.array_equal(before[1], net.weights[1])


def test_unroll_matches_event_driven_on_grid():
    net = _net(4)
    train = _poisson_train(4, 20.0, 1.0, 4)
    _, trace, _ = run_window(net, train, 20.0, record=True)
    record = unroll(net, train.to_raster(0.1), 0.1)
    assert np.array_equal(record.counts, trace.spikes[-1].counts())


def test_run_window_rejects_bad_inputs():
    net = _net()
    with pytest.raises(InputDomainError):
        run_window(net, SpikeTrain([25.0], [0], 4, 20.0), 20.0)
    with pytest.raises(InputDomainError):
        run_window(net, SpikeTrain([1.0], [7], 4, 20.0), 20.0)
    with pytest.raises(InputDomainError):
        run_window(net, SpikeTrain.empty(4, 20.0), 20.0, mode="training")


def test_network_snapshot_round_trip(tmp_path):
    net = _net(plastic=(True, False))
    run_window(net, _poisson_train(4, 20.0, 2.0, 5), 20.0, ONLINE_LEARNING)
    path = tmp_path / "net.json"
    net.save(path)
    other = Network.load(path)
    for a, b in zip(net.weights, other.weights):
        assert np.array_equal(a, b)
    for a, b in zip(net.vol_var, other.vol_var):
        assert np.array_equal(a, b)
    train = _poisson_train(4, 20.0, 1.0, 6)
    assert run_window(net, train, 20.0)[1] == run_window(other, train, 20.0)[1]


def test_network_snapshot_rejects_garbage(tmp_path):
    with pytest.raises(FormatError):
        Network.from_dict({"format": "something-else"})
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(FormatError):
        Network.load(path)


def test_per_projection_weight_range():
    cfg = NetworkConfig(layer_sizes=(2, 3, 2), w_max=(1.0, 0.5))
    net = Network(cfg, weights=[np.full((2, 3), 1.5), np.full((3, 2), 1.5)])
    assert net.weights[0].max() == pytest.approx(1.0)
    assert net.weights[1].max() == pytest.approx(0.5)
    with pytest.raises(InputDomainError):
        NetworkConfig(layer_sizes=(2, 3, 2), w_max=(1.0,))


def test_inference_mode_does_not_learn():
    net = _net(plastic=(True, True))
    before = [w.copy() for w in net.weights]
    run_window(net, _poisson_train(4, 20.0, 2.0, 7), 20.0, INFERENCE)
    assert all(np.array_equal(a, b) for a, b in zip(before, net.weights))
