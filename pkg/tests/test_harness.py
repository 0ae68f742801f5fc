from dataclasses import replace

import numpy as np
import pytest

from htdbench import harness
from htdbench.exceptions import CalibrationFailure, ConfigurationError, InputDomainError, UndefinedStatisticError
from htdbench.harness import (
    CONFIG_NAMES,
    TABLE_I_HEADER,
    ResultRow,
    SensitivityCell,
    aggregate_rows,
    calibrate,
    cumulative_configs,
    emit_report,
    f1_score,
    load_runs,
    mean_std,
    render_reports,
    run_ablation,
    run_seeds,
    run_sensitivity,
    save_runs,
    sensitivity_check,
    trend_suite,
)


# -- statistics -------------------------------------------------------------------


def test_f1_examples():
    assert f1_score([1, 0, 1], [1, 0, 1]) == 1.0
    assert f1_score([0, 1], [1, 0]) == 0.0
    # TP = 2, FP = 1, FN = 1
    assert f1_score([1, 1, 1, 0, 0], [1, 1, 0, 1, 0]) == pytest.approx(0.6667, abs=1e-4)
    assert f1_score([0, 0], [0, 0]) == 0.0


def test_f1_rejects_bad_input():
    with pytest.raises(InputDomainError):
        f1_score([1, 0], [1])
    with pytest.raises(InputDomainError):
        f1_score([], [])


def test_mean_std_of_duplicates_is_zero():
    assert mean_std([0.7, 0.7, 0.7]) == (0.7, 0.0)
    assert mean_std([3.0]) == (3.0, 0.0)
    assert mean_std([1.0, 3.0]) == (2.0, pytest.approx(np.sqrt(2.0)))
    with pytest.raises(UndefinedStatisticError):
        mean_std([])


def test_run_seeds_derived_by_counter():
    assert run_seeds(0, 3) == run_seeds(0, 3)
    assert run_seeds(0, 5)[:3] == run_seeds(0, 3)
    assert run_seeds(1, 3) != run_seeds(0, 3)


def test_result_row_invariants():
    with pytest.raises(InputDomainError):
        ResultRow("x", (0.9, -0.1), (1, 0), (1, 0), (1, 0), (1, 0), 1.0)
    with pytest.raises(InputDomainError):
        ResultRow("x", (0.9, 0.1), (120.0, 0), (1, 0), (1, 0), (1, 0), 1.0)


# -- protocol on a tiny configuration ----------------------------------------------------


@pytest.fixture
def tiny_ablation(tiny_bench, clear_caches):
    rows, runs = run_ablation(tiny_bench)
    return tiny_bench, rows, runs


def test_ablation_rows_in_cumulative_order(tiny_ablation):
    bench, rows, runs = tiny_ablation
    assert [r.name for r in rows] == list(CONFIG_NAMES)
    assert rows[0].norm_activity == 1.0
    assert len(runs) == 4 * bench.n_seeds
    assert all(len(r.seeds) == bench.n_seeds for r in rows)


def test_ablation_rerun_is_identical(tiny_ablation):
    bench, rows, _ = tiny_ablation
    harness._RUN_CACHE.clear()
    harness._FIT_CACHE.clear()
    again, _ = run_ablation(bench)
    assert again == rows


def test_duplicate_seed_rows_have_zero_std(tiny_bench, clear_caches):
    configs = cumulative_configs((7, 7))
    rows, _ = run_ablation(tiny_bench, configs)
    for r in rows:
        assert r.clean_f1[1] == 0.0 and r.asr_pgd[1] == 0.0 and r.energy[1] == 0.0


def test_ablation_needs_all_four_configs(tiny_bench):
    configs = cumulative_configs((1,))
    with pytest.raises(ConfigurationError):
        run_ablation(tiny_bench, configs[:3])
    with pytest.raises(ConfigurationError):
        run_ablation(tiny_bench, configs[::-1])
    with pytest.raises(ConfigurationError):
        run_ablation(None)


def test_sensitivity_has_fourteen_cells(tiny_bench, clear_caches):
    cells = run_sensitivity(tiny_bench)
    assert len(cells) == 14
    assert {c.config for c in cells} == {CONFIG_NAMES[0], CONFIG_NAMES[-1]}
    with pytest.raises(ConfigurationError):
        run_sensitivity(tiny_bench, eps_grid=())


def test_reports_headers_counts_and_determinism(tiny_ablation, tmp_path):
    bench, rows, runs = tiny_ablation
    cells = run_sensitivity(bench)
    files = render_reports(bench, rows, cells, runs)
    md = files["report.md"]
    header_line = next(line for line in md.splitlines() if line.startswith("| Configuration | Clean F1"))
    assert [h.strip() for h in header_line.strip("|").split("|")] == list(TABLE_I_HEADER)
    assert len(TABLE_I_HEADER) == 7
    coupling = [line for line in files["coupling.csv"].splitlines() if not line.startswith("#")]
    assert len(coupling) == 1 + 4
    for text in files.values():
        assert bench.config_hash() in text
        assert str(rows[0].seeds[0]) in text
    again = render_reports(bench, rows, cells, runs)
    for name in files:
        if not name.startswith("latency"):
            assert again[name] == files[name]
    paths = emit_report(tmp_path / "out", bench, rows, cells, runs)
    assert {p.name for p in paths} == set(files)


def test_emit_report_unwritable_path(tiny_ablation, tmp_path):
    bench, rows, runs = tiny_ablation
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(blocker / "sub", bench, rows, None, runs)


def test_runs_round_trip(tiny_ablation, tmp_path):
    bench, rows, runs = tiny_ablation
    save_runs(tmp_path / "runs.json", runs)
    back = load_runs(tmp_path / "runs.json")
    assert back == runs
    assert aggregate_rows(bench, cumulative_configs(rows[0].seeds), back) == rows


# -- calibration ------------------------------------------------------------------------


def test_calibration_in_band_is_noop(tiny_bench):
    tuned, log = calibrate(tiny_bench, evaluate=lambda sigma: 0.87)
    assert tuned is tiny_bench
    assert len(log) == 1


def test_calibration_raises_sigma_when_too_good(tiny_bench):
    bench = replace(tiny_bench, calibration=replace(tiny_bench.calibration, max_iter=20))
    bench = bench.with_dataset(noise_sigma=0.0)
    tuned, log = calibrate(bench, evaluate=lambda sigma: 1.0 - sigma)
    assert tuned.dataset.noise_sigma > 0.0
    assert abs((1.0 - tuned.dataset.noise_sigma) - 0.86) <= 0.05
    assert log[0] == (0.0, 1.0)


def test_calibration_failure_carries_closest_sigma(tiny_bench):
    bench = replace(tiny_bench, calibration=replace(tiny_bench.calibration, max_iter=4))
    with pytest.raises(CalibrationFailure) as info:
        calibrate(bench, evaluate=lambda sigma: 0.5)
    assert len(info.value.log) == 4
    assert info.value.best is not None


def test_f1_falls_monotonically_with_noise():
    """Empirical oracle for the binary search: baseline F1 over five noise levels."""
    from htdbench.config import BenchConfig
    bench = BenchConfig().with_dataset(n_windows=300)
    seeds = run_seeds(5, 1)
    f1 = [harness.baseline_f1(bench, sigma, seeds) for sigma in (0.0, 0.1, 0.2, 0.3, 0.4)]
    assert all(a >= b for a, b in zip(f1, f1[1:])), f1


# -- trend suite -------------------------------------------------------------------------


def _row(name, f1, pgd, jit, activity):
    return ResultRow(name, (f1, 0.02), (pgd, 5.0), (jit, 5.0), (1.1, 0.0), (2.5 + 45.7 * activity, 0.1), activity)


def test_trend_suite_passes_on_well_separated_rows():
    rows = [_row("baseline", 0.86, 82.1, 75.8, 1.0), _row("input-assurance", 0.88, 65.0, 48.0, 1.08),
            _row("neuronal-assurance", 0.87, 40.0, 35.0, 1.02), _row("synaptic-assurance", 0.87, 18.7, 25.1, 0.94)]
    cells = [SensitivityCell("pgd", e, n, m, 1.0) for e, n, m in
             [(0.05, "baseline", 60), (0.05, "synaptic-assurance", 10), (0.1, "baseline", 80),
              (0.1, "synaptic-assurance", 18), (0.15, "baseline", 93), (0.15, "synaptic-assurance", 30)]]
    checks = trend_suite(rows, cells, strict_monotone=True)
    assert [c.name for c in checks] == ["T1-pgd", "T1-jitter", "T2", "T3", "T4", "T5"]
    assert all(c.passed for c in checks)


def test_trend_suite_detects_violations():
    rows = [_row("baseline", 0.86, 50.0, 20.0, 1.0), _row("input-assurance", 0.70, 45.0, 18.0, 0.98),
            _row("neuronal-assurance", 0.7, 45.0, 18.0, 1.0), _row("synaptic-assurance", 0.7, 47.0, 19.0, 1.01)]
    checks = {c.name: c.passed for c in trend_suite(rows)}
    assert checks == {"T1-pgd": False, "T1-jitter": False, "T2": False, "T3": True, "T4": False}


def test_sensitivity_check_monotonicity():
    flat = [SensitivityCell("jitter", j, n, 20.0, 0.0) for j in (1.0, 2.0) for n in CONFIG_NAMES[::3]]
    assert sensitivity_check(flat).passed
    assert not sensitivity_check(flat, strict=True).passed
