import numpy as np
import pytest

from htdbench.exceptions import FormatError, InputDomainError
from htdbench.telemetry import (
    ANOMALY,
    ANOMALY_KINDS,
    DEGRADATION,
    DROPOUT,
    NOMINAL,
    DatasetConfig,
    TelemetryWindow,
    generate_dataset,
    inject_anomaly,
    labels,
    load_dataset,
    nominal_window,
    save_dataset,
    stack,
)

SMALL = DatasetConfig(n_windows=40, n_samples=60, seed=11)


def test_generation_is_deterministic():
    a, b = generate_dataset(SMALL), generate_dataset(SMALL)
    assert all(x == y for x, y in zip(a, b))
    assert not all(x == y for x, y in zip(a, generate_dataset(DatasetConfig(n_windows=40, n_samples=60, seed=12))))


def test_no_anomalies_when_fraction_zero():
    ws = generate_dataset(DatasetConfig(n_windows=50, n_samples=40, anomaly_fraction=0.0))
    assert all(w.label == NOMINAL for w in ws)


def test_exact_anomaly_count():
    ws = generate_dataset(DatasetConfig(n_windows=1000, n_samples=20, anomaly_fraction=0.3))
    assert int(labels(ws).sum()) == 300
    assert {w.anomaly_kind for w in ws if w.label == ANOMALY} == set(ANOMALY_KINDS)


def test_values_in_unit_interval_and_shape():
    X = stack(generate_dataset(SMALL))
    assert X.shape == (40, 6, 60)
    assert X.min() >= 0.0 and X.max() <= 1.0


def test_dropout_zero_run():
    cfg = DatasetConfig(n_samples=100)
    for seed in range(30):
        w = inject_anomaly(nominal_window(cfg, seed), DROPOUT, seed + 100, cfg)
        assert w.label == ANOMALY
        longest = 0
        for ch in w.channels:
            run = best = 0
            for v in ch:
                run = run + 1 if v == 0.0 else 0
                best = max(best, run)
            longest = max(longest, best)
        assert longest >= 0.1 * cfg.n_samples


def test_injection_labels_and_rejects_double_injection():
    w = nominal_window(SMALL, 1)
    for kind in ANOMALY_KINDS:
        out = inject_anomaly(w, kind, 2, SMALL)
        assert out.label == ANOMALY and out.anomaly_kind == kind
        with pytest.raises(InputDomainError):
            inject_anomaly(out, kind, 3, SMALL)
    with pytest.raises(InputDomainError):
        inject_anomaly(w, "meteor", 2, SMALL)


def test_degradation_noise_variance_inflation():
    # unit gain floor isolates the additive noise: anomaly - nominal on affected channels
    cfg = DatasetConfig(n_samples=2000, noise_sigma=0.01, gain_floor=1.0, noise_inflation=4.0,
                        dynamics_amplitude=0.0)
    ratios = []
    for seed in range(100):
        base = nominal_window(cfg, seed)
        out = inject_anomaly(base, DEGRADATION, 10_000 + seed, cfg)
        diff = out.channels - base.channels
        for ch in np.flatnonzero(np.any(diff != 0, axis=1)):
            ratios.append(diff[ch].var(ddof=1) / cfg.noise_sigma ** 2)
    assert np.mean(ratios) == pytest.approx(cfg.noise_inflation, rel=0.10)


def test_window_validation():
    with pytest.raises(InputDomainError):
        TelemetryWindow(np.full((2, 3), 1.2))
    with pytest.raises(InputDomainError):
        TelemetryWindow(np.zeros((2, 3)), label=ANOMALY)
    with pytest.raises(InputDomainError):
        DatasetConfig(n_channels=8)


def test_save_load_round_trip(tmp_path):
    ws = generate_dataset(SMALL)
    path = tmp_path / "d.jsonl"
    save_dataset(path, ws, SMALL)
    back, cfg = load_dataset(path, with_config=True)
    assert cfg == SMALL
    assert len(back) == len(ws) and all(a == b for a, b in zip(ws, back))


@pytest.mark.parametrize("mutate", [
    lambda lines: ["{broken"] + lines[1:],
    lambda lines: ['{"format": "other", "version": 1}'] + lines[1:],
    lambda lines: lines[:-1],
    lambda lines: lines[:1] + ['{"label": "nominal"}'] + lines[2:],
])
def test_corrupted_files_raise_format_error(tmp_path, mutate):
    path = tmp_path / "d.jsonl"
    save_dataset(path, generate_dataset(SMALL), SMALL)
    path.write_text("\n".join(mutate(path.read_text().splitlines())) + "\n")
    with pytest.raises(FormatError):
        load_dataset(path)


def test_binary_and_empty_files(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(FormatError):
        load_dataset(empty)
    binary = tmp_path / "bin.jsonl"
    binary.write_bytes(b"\xff\xfe\x00\x81")
    with pytest.raises(FormatError):
        load_dataset(binary)


def test_file_size_linear_in_windows(tmp_path):
    sizes = {}
    for n in (20, 40, 80):
        cfg = DatasetConfig(n_windows=n, n_samples=50, seed=1)
        path = tmp_path / f"{n}.jsonl"
        save_dataset(path, generate_dataset(cfg), cfg)
        sizes[n] = path.stat().st_size
    per_window_a = (sizes[40] - sizes[20]) / 20
    per_window_b = (sizes[80] - sizes[40]) / 40
    assert per_window_b == pytest.approx(per_window_a, rel=0.05)
