"""Benchmark protocol: cumulative ablation, attack-strength sweeps, calibration, reports.

One *run* is a (configuration, seed) pair.  A run generates its dataset,
fits the detector, scores Clean F1 on the held-out split and attacks the
correctly detected anomaly windows at every requested strength.  The ablation
table and the sensitivity sweep are aggregations over runs, so the two share
runs through an in-process cache.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
import csv
import io
import json
import logging
import math
from pathlib import Path
import time

import numpy as np

from .adversary import asr, pgd_attack, temporal_jitter
from .estimator import HTDClassifier, window_seeds
from .exceptions import CalibrationFailure, ConfigurationError, InputDomainError, UndefinedStatisticError
from .metering import energy_estimate
from .telemetry import generate_dataset, labels, stack

log = logging.getLogger(__name__)

CONFIG_NAMES = ("baseline", "input-assurance", "neuronal-assurance", "synaptic-assurance")
DISPLAY_NAMES = {
    "baseline": "Baseline",
    "input-assurance": "+ Input Assurance",
    "neuronal-assurance": "+ Neuronal Assurance",
    "synaptic-assurance": "+ Synaptic Assurance",
}
_TOGGLES = {
    "baseline": (False, False, False),
    "input-assurance": (True, False, False),
    "neuronal-assurance": (True, True, False),
    "synaptic-assurance": (True, True, True),
}


@dataclass(frozen=True)
class AblationConfig:
    """One row of the ablation; the toggles must match the cumulative layer ``name``."""

    name: str
    bsps: bool
    adaptive_threshold: bool
    metaplasticity: bool
    seeds: tuple = ()

    def __post_init__(self):
        if self.name not in _TOGGLES:
            raise ConfigurationError(f"unknown configuration {self.name!r}; expected one of {CONFIG_NAMES}")
        if (self.bsps, self.adaptive_threshold, self.metaplasticity) != _TOGGLES[self.name]:
            raise ConfigurationError(f"toggles of {self.name!r} are not the cumulative set {_TOGGLES[self.name]}")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def estimator_params(self):
        return {"encoding": "bsps" if self.bsps else "rate",
                "adaptive_threshold": self.adaptive_threshold, "metaplasticity": self.metaplasticity}


def run_seeds(master_seed, n):
    """Run seeds derived from the master seed by counter."""
    return tuple(int(s) for s in np.random.SeedSequence([int(master_seed), 0x5EED]).generate_state(n))


def cumulative_configs(seeds):
    return [AblationConfig(name, *_TOGGLES[name], seeds=seeds) for name in CONFIG_NAMES]


def mean_std(values):
    """Mean and sample standard deviation (0 for a single value)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise UndefinedStatisticError("mean of an empty list")
    if np.all(v == v[0]):
        # exact for duplicates; summation would leave rounding noise in both moments
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1))


def f1_score(predictions, labels_, positive=1):
    """``2TP / (2TP + FP + FN)`` for the anomaly class; 0 when the denominator is 0."""
    pred = np.asarray(predictions)
    true = np.asarray(labels_)
    if pred.shape != true.shape:
        raise InputDomainError(f"length mismatch: {pred.shape} predictions vs {true.shape} labels")
    if pred.size == 0:
        raise InputDomainError("F1 of an empty prediction list")
    tp = int(np.sum((pred == positive) & (true == positive)))
    fp = int(np.sum((pred == positive) & (true != positive)))
    fn = int(np.sum((pred != positive) & (true == positive)))
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


# -- one run ---------------------------------------------------------------------


@dataclass(frozen=True)
class RunResult:
    config: str
    seed: int
    clean_f1: float
    events_per_window: float
    asr_pgd: dict
    asr_jitter: dict
    n_attacked: int
    host_overhead_ms: float = field(default=0.0, compare=False)


def _dataset_for(bench, seed):
    cfg = replace(bench.dataset, seed=int(seed))
    windows = generate_dataset(cfg)
    X, y = stack(windows), labels(windows)
    n_train = int(round(bench.train_fraction * len(X)))
    return X[:n_train], y[:n_train], X[n_train:], y[n_train:]


def _make_model(bench, acfg, seed):
    params = dict(bench.model)
    params.update(acfg.estimator_params())
    params["random_state"] = int(seed)
    return HTDClassifier(**params)


def _jitter_seed(seed, window, trial):
    # independent of J: the delays of one trial are the same uniform draws scaled by J
    return int(np.random.SeedSequence([int(seed), int(window), int(trial)]).generate_state(1)[0])


@dataclass
class _FittedRun:
    """Fitted model plus the held-out windows it attacks; kept in-process only."""

    model: HTDClassifier
    windows: np.ndarray
    enc_seeds: list
    result: RunResult


def _fit_run(bench, acfg, seed):
    X_tr, y_tr, X_te, y_te = _dataset_for(bench, seed)
    if len(X_te) == 0 or np.unique(y_tr).size < 2:
        raise ConfigurationError("dataset split leaves no test windows or a single training class")
    model = _make_model(bench, acfg, seed).fit(X_tr, y_tr)
    enc_seeds = window_seeds(seed, len(X_te), stream=2)
    preds, events, encode_ms = [], [], []
    for x, s in zip(X_te, enc_seeds):
        t0 = time.perf_counter()
        train = model.encode(x, s)
        encode_ms.append((time.perf_counter() - t0) * 1e3)
        cls, trace = model.run(train)
        preds.append(cls)
        events.append(trace.total_events)
    preds = np.array(preds)
    targets = np.flatnonzero((y_te == 1) & (preds == 1))[:bench.max_attack_windows]
    result = RunResult(acfg.name, int(seed), f1_score(preds, y_te), float(np.mean(events)),
                       {}, {}, int(len(targets)), float(np.mean(encode_ms)))
    return _FittedRun(model, X_te[targets], [int(enc_seeds[i]) for i in targets], result)


def _pgd_asr(bench, fitted, eps):
    cfg = replace(bench.pgd, epsilon=float(eps))
    model = fitted.model
    outcomes = []
    for x, s in zip(fitted.windows, fitted.enc_seeds):
        x_adv = pgd_attack(model, x, 1, cfg, seed=s)
        outcomes.append(model.run(model.encode(x_adv, s))[0])
    return asr(outcomes) if outcomes else 0.0


def _jitter_asr(bench, fitted, J):
    """Best of ``trials`` jitter draws per window, applied to the sensor-level spike stream."""
    jcfg = replace(bench.jitter, J=float(J))
    model, seed = fitted.model, fitted.result.seed
    outcomes = []
    for n, (x, s) in enumerate(zip(fitted.windows, fitted.enc_seeds)):
        obs = model.encoder_.observe(x, s)
        pred = 1
        for k in range(jcfg.trials):
            moved = temporal_jitter(obs, jcfg, seed=_jitter_seed(seed, n, k))
            pred = model.run(model.encoder_.filter(moved, s))[0]
            if pred == 0:
                break
        outcomes.append(pred)
    return asr(outcomes) if outcomes else 0.0


def _extend(bench, fitted, eps_values, jitter_values):
    """Attack results for any strengths ``fitted`` has not been attacked at yet."""
    r = fitted.result
    pgd, jit = dict(r.asr_pgd), dict(r.asr_jitter)
    for eps in eps_values:
        if float(eps) not in pgd:
            pgd[float(eps)] = _pgd_asr(bench, fitted, eps)
    for J in jitter_values:
        if float(J) not in jit:
            jit[float(J)] = _jitter_asr(bench, fitted, J)
    fitted.result = replace(r, asr_pgd=dict(sorted(pgd.items())), asr_jitter=dict(sorted(jit.items())))
    log.info("%s seed=%d F1=%.3f attacked=%d PGD=%s jitter=%s", r.config, r.seed, r.clean_f1,
             r.n_attacked, fitted.result.asr_pgd, fitted.result.asr_jitter)
    return fitted.result


def execute_run(bench, acfg, seed, eps_values, jitter_values):
    """Fit, score and attack one (configuration, seed) pair.

    Clean F1 is scored on the held-out split; the first ``max_attack_windows``
    correctly detected anomaly windows are attacked at every strength.
    """
    return _extend(bench, _fit_run(bench, acfg, seed), eps_values, jitter_values)


_RUN_CACHE = {}
_FIT_CACHE = {}


def _run_job(args):
    bench, acfg, seed, eps, jit = args
    return execute_run(bench, acfg, seed, eps, jit)


def _missing(run, eps_values, jitter_values):
    return (any(e not in run.asr_pgd for e in eps_values)
            or any(j not in run.asr_jitter for j in jitter_values))


def collect_runs(bench, configs, eps_values, jitter_values, jobs=1):
    """Results for every (config, seed), attacked at least at the requested strengths.

    Runs are cached per process; a cached run that lacks some strengths is
    extended on its fitted model.  ``jobs > 1`` computes uncached runs in
    worker processes (their fitted models are not kept).
    """
    eps_values = tuple(sorted(set(float(e) for e in eps_values)))
    jitter_values = tuple(sorted(set(float(j) for j in jitter_values)))
    digest = bench.config_hash()
    keys, todo = [], []
    for acfg in configs:
        for seed in acfg.seeds:
            key = (digest, acfg.name, int(seed))
            keys.append(key)
            cached = _RUN_CACHE.get(key)
            if cached is not None and not _missing(cached, eps_values, jitter_values):
                continue
            if key in _FIT_CACHE:
                _RUN_CACHE[key] = _extend(bench, _FIT_CACHE[key], eps_values, jitter_values)
                continue
            if cached is not None:
                eps_need = tuple(sorted(set(eps_values) | set(cached.asr_pgd)))
                jit_need = tuple(sorted(set(jitter_values) | set(cached.asr_jitter)))
            else:
                eps_need, jit_need = eps_values, jitter_values
            todo.append((key, (bench, acfg, seed, eps_need, jit_need)))
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for (key, _), res in zip(todo, pool.map(_run_job, [args for _, args in todo])):
                _RUN_CACHE[key] = res
    else:
        for key, (b, acfg, seed, eps_need, jit_need) in todo:
            fitted = _fit_run(b, acfg, seed)
            _FIT_CACHE[key] = fitted
            _RUN_CACHE[key] = _extend(b, fitted, eps_need, jit_need)
    return [_RUN_CACHE[k] for k in keys]


# -- aggregation -------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    """One Table-I row: means and sample standard deviations over the seeds."""

    name: str
    clean_f1: tuple
    asr_pgd: tuple
    asr_jitter: tuple
    latency: tuple
    energy: tuple
    norm_activity: float
    seeds: tuple = ()

    def __post_init__(self):
        for pair in (self.clean_f1, self.asr_pgd, self.asr_jitter, self.energy):
            if pair[1] < 0:
                raise InputDomainError("standard deviations must be non-negative")
        for pct in (self.asr_pgd[0], self.asr_jitter[0]):
            if not 0 <= pct <= 100:
                raise InputDomainError("ASR must be a percentage")


def _check_configs(configs):
    if [c.name for c in configs] != list(CONFIG_NAMES):
        raise ConfigurationError(f"need the four cumulative configurations in order {CONFIG_NAMES}")
    seeds = configs[0].seeds
    if not seeds or any(c.seeds != seeds for c in configs):
        raise ConfigurationError("every configuration needs the same non-empty seed list")


def aggregate_rows(bench, configs, runs):
    """Fold per-run results into four :class:`ResultRow` objects (order-independent per seed list)."""
    by = {(r.config, r.seed): r for r in runs}
    base = {s: by[("baseline", s)].events_per_window for s in configs[0].seeds}
    eps, J = bench.pgd.epsilon, bench.jitter.J
    rows = []
    for acfg in configs:
        rs = [by[(acfg.name, s)] for s in acfg.seeds]
        ratios = [r.events_per_window / base[r.seed] for r in rs]
        device = [bench.latency.device_time(r.events_per_window) for r in rs]
        rows.append(ResultRow(
            name=acfg.name,
            clean_f1=mean_std([r.clean_f1 for r in rs]),
            asr_pgd=mean_std([r.asr_pgd[float(eps)] for r in rs]),
            asr_jitter=mean_std([r.asr_jitter[float(J)] for r in rs]),
            latency=mean_std(device),
            energy=mean_std([energy_estimate(a, bench.energy) for a in ratios]),
            norm_activity=float(np.mean(ratios)),
            seeds=acfg.seeds,
        ))
    return rows


def run_ablation(bench, configs=None, jobs=1, extra_eps=(), extra_jitter=()):
    """The four cumulative configurations, each over its seed list; returns ``(rows, runs)``."""
    if bench is None or bench.dataset is None:
        raise ConfigurationError("a dataset configuration is required")
    configs = configs if configs is not None else cumulative_configs(run_seeds(bench.master_seed, bench.n_seeds))
    _check_configs(configs)
    runs = collect_runs(bench, configs, (bench.pgd.epsilon,) + tuple(extra_eps),
                        (bench.jitter.J,) + tuple(extra_jitter), jobs)
    return aggregate_rows(bench, configs, runs), runs


@dataclass(frozen=True)
class SensitivityCell:
    attack: str
    strength: float
    config: str
    mean: float
    std: float


def run_sensitivity(bench, baseline_cfg=None, full_cfg=None, eps_grid=None, jitter_grid=None, jobs=1):
    """ASR mean ± std per (configuration, attack, strength): ``2 * (|eps| + |J|)`` cells."""
    eps_grid = tuple(bench.eps_grid if eps_grid is None else eps_grid)
    jitter_grid = tuple(bench.jitter_grid if jitter_grid is None else jitter_grid)
    if not eps_grid or not jitter_grid:
        raise ConfigurationError("sweep grids must be non-empty")
    seeds = run_seeds(bench.master_seed, bench.n_seeds)
    configs = cumulative_configs(seeds)
    baseline_cfg = baseline_cfg or configs[0]
    full_cfg = full_cfg or configs[-1]
    # the ablation's default strengths ride along so both tables share one set of runs
    runs = collect_runs(bench, [baseline_cfg, full_cfg], eps_grid + (bench.pgd.epsilon,),
                        jitter_grid + (bench.jitter.J,), jobs)
    return sensitivity_from_runs(runs, eps_grid, jitter_grid, (baseline_cfg.name, full_cfg.name))


def sensitivity_from_runs(runs, eps_grid, jitter_grid, names=(CONFIG_NAMES[0], CONFIG_NAMES[-1])):
    """Aggregate per-seed ASRs into :class:`SensitivityCell` objects, grid order then ``names`` order."""
    cells = []
    for attack, grid, getter in (("pgd", eps_grid, "asr_pgd"), ("jitter", jitter_grid, "asr_jitter")):
        for strength in grid:
            for name in names:
                vals = [getattr(r, getter)[float(strength)] for r in runs
                        if r.config == name and float(strength) in getattr(r, getter)]
                if not vals:
                    raise ConfigurationError(f"no {attack} results at strength {strength:g} for {name!r}")
                cells.append(SensitivityCell(attack, float(strength), name, *mean_std(vals)))
    return cells


# -- trend suite ------------------------------------------------------------------


@dataclass(frozen=True)
class TrendCheck:
    name: str
    passed: bool
    detail: str


def pooled_std(a, b):
    """Root mean square of two sample standard deviations."""
    return math.sqrt(0.5 * (a ** 2 + b ** 2))


def trend_suite(rows, cells=None, strict_monotone=False):
    """Directional checks T1-T5 on aggregated results.

    Strict inequalities between means (T1) must hold by a margin of one
    pooled standard deviation.  T5 is skipped (not reported) when no
    sensitivity cells are given.
    """
    by = {r.name: r for r in rows}
    base, inp, full = by[CONFIG_NAMES[0]], by[CONFIG_NAMES[1]], by[CONFIG_NAMES[-1]]
    checks = []
    for label, attr in (("pgd", "asr_pgd"), ("jitter", "asr_jitter")):
        (mb, sb), (mf, sf) = getattr(base, attr), getattr(full, attr)
        margin = pooled_std(sb, sf)
        checks.append(TrendCheck(
            f"T1-{label}", mb - mf > margin,
            f"baseline {mb:.1f} vs full {mf:.1f} (margin {margin:.1f})"))
    checks.append(TrendCheck(
        "T2", inp.norm_activity > 1.0 > full.norm_activity,
        f"input-assurance {inp.norm_activity:.3f}, full {full.norm_activity:.3f}"))
    order_a = np.argsort([r.norm_activity for r in rows], kind="stable")
    order_e = np.argsort([r.energy[0] for r in rows], kind="stable")
    checks.append(TrendCheck("T3", bool(np.array_equal(order_a, order_e)),
                             f"activity order {order_a.tolist()}, energy order {order_e.tolist()}"))
    diff = full.clean_f1[0] - base.clean_f1[0]
    checks.append(TrendCheck("T4", abs(diff) <= 0.05, f"F1 full - baseline = {diff:+.3f}"))
    if cells is not None:
        checks.append(sensitivity_check(cells, strict=strict_monotone))
    return checks


def sensitivity_check(cells, strict=False, names=(CONFIG_NAMES[0], CONFIG_NAMES[-1])):
    """T5: baseline ASR monotone in strength per attack, defended <= baseline in every cell."""
    problems = []
    for attack in sorted({c.attack for c in cells}):
        grid = sorted({c.strength for c in cells if c.attack == attack})
        mean = {(c.config, c.strength): c.mean for c in cells if c.attack == attack}
        base = [mean[(names[0], s)] for s in grid]
        steps = np.diff(base)
        if np.any(steps <= 0) if strict else np.any(steps < 0):
            problems.append(f"{attack} baseline not {'strictly ' if strict else ''}increasing: "
                            + ", ".join(f"{v:.1f}" for v in base))
        for s in grid:
            if mean[(names[1], s)] > mean[(names[0], s)]:
                problems.append(f"{attack}@{s:g}: defended {mean[(names[1], s)]:.1f} > "
                                f"baseline {mean[(names[0], s)]:.1f}")
    return TrendCheck("T5", not problems, "; ".join(problems) or f"{len(cells)} cells consistent")


# -- calibration ------------------------------------------------------------------


def baseline_f1(bench, sigma, seeds):
    """Mean Clean F1 of the baseline detector at noise ``sigma`` (no attacks)."""
    b = bench.with_dataset(noise_sigma=float(sigma))
    acfg = cumulative_configs(())[0]
    scores = []
    for seed in seeds:
        X_tr, y_tr, X_te, y_te = _dataset_for(b, seed)
        model = _make_model(b, acfg, seed).fit(X_tr, y_tr)
        scores.append(f1_score(model.predict(X_te, window_seeds(seed, len(X_te), stream=2)), y_te))
    return float(np.mean(scores))


def calibrate(bench, evaluate=None):
    """Binary-search the generator noise σ until baseline Clean F1 is in ``target ± tolerance``.

    Returns ``(tuned BenchConfig, log)``; the log holds one ``(sigma, f1)``
    entry per evaluation.  When the band is not reached within the iteration
    cap a :class:`CalibrationFailure` carrying the closest σ and the log is
    raised; callers may proceed with ``exc.best``.
    """
    cal = bench.calibration
    seeds = run_seeds(bench.master_seed + 1, cal.seeds)
    evaluate = evaluate or (lambda sigma: baseline_f1(bench, sigma, seeds))
    history = []

    def score(sigma):
        f1 = evaluate(sigma)
        history.append((float(sigma), float(f1)))
        log.info("calibrate sigma=%.5f F1=%.4f", sigma, f1)
        return f1

    def in_band(f1):
        return abs(f1 - cal.target_f1) <= cal.tolerance

    sigma = bench.dataset.noise_sigma
    if in_band(score(sigma)):
        return bench, history
    lo, hi = cal.sigma_low, cal.sigma_high
    # F1 falls as noise grows: too good -> raise sigma, too poor -> lower it
    if history[-1][1] > cal.target_f1:
        lo = sigma
    else:
        hi = sigma
    for _ in range(cal.max_iter - 1):
        mid = 0.5 * (lo + hi)
        f1 = score(mid)
        if in_band(f1):
            return bench.with_dataset(noise_sigma=mid), history
        if f1 > cal.target_f1:
            lo = mid
        else:
            hi = mid
    best_sigma = min(history, key=lambda h: abs(h[1] - cal.target_f1))[0]
    raise CalibrationFailure(
        f"baseline F1 did not reach {cal.target_f1} ± {cal.tolerance} in {cal.max_iter} evaluations",
        best=bench.with_dataset(noise_sigma=best_sigma), log=history)


# -- reports ----------------------------------------------------------------------

TABLE_I_HEADER = ("Configuration", "Clean F1", "ASR (PGD)", "ASR (Jitter)", "Latency (ms)", "Energy (μJ)",
                  "Norm. Activity")
TABLE_II_HEADER = ("Attack Type", "Parameter", "Baseline", "Full Defense")
TABLE_III_HEADER = ("Configuration", "Device", "Overhead", "Total")


def _pm(pair, digits=2, suffix=""):
    return f"{pair[0]:.{digits}f} ± {pair[1]:.{digits}f}{suffix}"


def _md_table(header, rows):
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return "\n".join(lines)


def table_i(rows):
    return _md_table(TABLE_I_HEADER, [
        (DISPLAY_NAMES[r.name], _pm(r.clean_f1), _pm(r.asr_pgd, 1, "%"), _pm(r.asr_jitter, 1, "%"),
         _pm(r.latency), _pm(r.energy, 1), f"{r.norm_activity:.2f}") for r in rows])


def table_ii(cells):
    out = []
    for attack, label, unit in (("pgd", "ε = {:.2f}", ""), ("jitter", "J = {:g} ms", "")):
        strengths = sorted({c.strength for c in cells if c.attack == attack})
        for s in strengths:
            pick = {c.config: c for c in cells if c.attack == attack and c.strength == s}
            base = pick.get("baseline")
            full = pick.get("synaptic-assurance")
            out.append(("PGD" if attack == "pgd" else "Temporal Jitter", label.format(s),
                        f"{base.mean:.1f} ± {base.std:.1f}" if base else "",
                        f"{full.mean:.1f} ± {full.std:.1f}" if full else ""))
    return _md_table(TABLE_II_HEADER, out)


def table_iii(rows, runs, bench):
    out = []
    for r in rows:
        overhead = mean_std([x.host_overhead_ms for x in runs if x.config == r.name])
        out.append((DISPLAY_NAMES[r.name], _pm(r.latency), f"{overhead[0]:.3f} ± {overhead[1]:.3f}",
                    f"{r.latency[0] + overhead[0]:.2f}"))
    return _md_table(TABLE_III_HEADER, out)


def _stamp(bench, seeds):
    return {"config_hash": bench.config_hash(), "master_seed": bench.master_seed, "seeds": list(seeds)}


def _csv_text(header, rows, stamp):
    buf = io.StringIO()
    buf.write(f"# config_hash={stamp['config_hash']} master_seed={stamp['master_seed']} "
              f"seeds={' '.join(str(s) for s in stamp['seeds'])}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_reports(bench, rows=None, sensitivity=None, runs=(), formats=("markdown", "csv", "json")):
    """Report files as ``{filename: text}``; everything except ``latency.*`` is deterministic.

    The latency breakdown contains measured host time and therefore lives in
    its own files.
    """
    seeds = rows[0].seeds if rows else run_seeds(bench.master_seed, bench.n_seeds)
    stamp = _stamp(bench, seeds)
    files = {}
    header = (f"<!-- config_hash: {stamp['config_hash']} | master_seed: {stamp['master_seed']} | "
              f"seeds: {', '.join(str(s) for s in seeds)} -->\n")
    note = ("Energies are modeled (Table-I-calibrated linear activity model: "
            f"E = {bench.energy.e_static:.3f} + {bench.energy.e_dynamic:.3f} × activity μJ); "
            "latency is the modeled device time.\n")
    if "markdown" in formats:
        parts = [header, "# Hierarchical temporal defense benchmark\n"]
        if rows:
            parts += ["## Benchmarking results per assurance configuration\n", note, table_i(rows), ""]
        if sensitivity:
            parts += ["## Sensitivity: ASR (%) vs. attack strength\n", table_ii(sensitivity), ""]
        files["report.md"] = "\n".join(parts) + "\n"
        if rows:
            files["latency.md"] = (header + "\n# Latency breakdown (ms)\n\nOverhead is measured host-side "
                                   "encoding wall time and varies between runs.\n\n"
                                   + table_iii(rows, runs, bench) + "\n")
    if "csv" in formats and rows:
        files["coupling.csv"] = _csv_text(("configuration", "norm_activity", "energy_uj"),
                                          [(r.name, f"{r.norm_activity:.6f}", f"{r.energy[0]:.6f}") for r in rows],
                                          stamp)
        files["tradeoff.csv"] = _csv_text(("configuration", "energy_uj", "asr_pgd", "asr_jitter"),
                                          [(r.name, f"{r.energy[0]:.6f}", f"{r.asr_pgd[0]:.6f}",
                                            f"{r.asr_jitter[0]:.6f}") for r in rows], stamp)
    if "csv" in formats and sensitivity:
        files["sensitivity.csv"] = _csv_text(("attack", "strength", "configuration", "asr_mean", "asr_std"),
                                             [(c.attack, f"{c.strength:g}", c.config, f"{c.mean:.6f}",
                                               f"{c.std:.6f}") for c in sensitivity], stamp)
    if "json" in formats:
        payload = dict(stamp, config=bench.to_dict())
        if rows:
            payload["rows"] = [asdict(r) for r in rows]
        if sensitivity:
            payload["sensitivity"] = [asdict(c) for c in sensitivity]
        files["results.json"] = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        if runs:
            files["latency.json"] = json.dumps(
                dict(stamp, overhead_ms={r.name: [x.host_overhead_ms for x in runs if x.config == r.name]
                                         for r in rows or []}), indent=2, sort_keys=True) + "\n"
    return files


def emit_report(out_dir, bench, rows=None, sensitivity=None, runs=(), formats=("markdown", "csv", "json")):
    """Write :func:`render_reports` output under ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, text in render_reports(bench, rows, sensitivity, runs, formats).items():
            path = out / name
            path.write_text(text)
            paths.append(path)
    except OSError as exc:
        raise OSError(f"cannot write reports to {out}: {exc}") from exc
    return paths


def save_runs(path, runs):
    Path(path).write_text(json.dumps([_run_to_dict(r) for r in runs], indent=2, sort_keys=True) + "\n")


def _run_to_dict(r):
    d = asdict(r)
    d["asr_pgd"] = {f"{k:g}": v for k, v in r.asr_pgd.items()}
    d["asr_jitter"] = {f"{k:g}": v for k, v in r.asr_jitter.items()}
    return d


def load_runs(path):
    out = []
    for d in json.loads(Path(path).read_text()):
        d["asr_pgd"] = {float(k): v for k, v in d["asr_pgd"].items()}
        d["asr_jitter"] = {float(k): v for k, v in d["asr_jitter"].items()}
        out.append(RunResult(**d))
    return out
