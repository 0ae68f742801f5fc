import numpy as np
import pytest

from htdbench.config import config_from_dict
from htdbench import harness

# lines recorded by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES = {}


def record_acceptance(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])


TINY = {
    "dataset": {"n_windows": 80, "n_samples": 80},
    "model": {"n_hidden": 16, "neurons_per_channel": 3, "stdp_windows": 3, "n_slices": 4},
    "pgd": {"iters": 2},
    "jitter": {"trials": 2},
    "bench": {"n_seeds": 2, "max_attack_windows": 2, "eps_grid": [0.05, 0.1, 0.15],
              "jitter_grid": [1.0, 2.0, 3.0, 4.0]},
    "calibration": {"seeds": 1, "max_iter": 2},
}


@pytest.fixture
def tiny_dict():
    import copy
    return copy.deepcopy(TINY)


@pytest.fixture
def tiny_bench():
    return config_from_dict(TINY)


@pytest.fixture
def clear_caches():
    harness._RUN_CACHE.clear()
    harness._FIT_CACHE.clear()
    yield
    harness._RUN_CACHE.clear()
    harness._FIT_CACHE.clear()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_data():
    from htdbench.telemetry import DatasetConfig, generate_dataset, labels, stack
    cfg = DatasetConfig(n_windows=60, n_samples=80, seed=3)
    windows = generate_dataset(cfg)
    return stack(windows), labels(windows)


@pytest.fixture(scope="session")
def small_model(small_data):
    from htdbench.estimator import HTDClassifier
    X, y = small_data
    return HTDClassifier(n_hidden=16, neurons_per_channel=3, stdp_windows=3, random_state=1).fit(X, y)
