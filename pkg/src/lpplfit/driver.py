"""Multi-start orchestration, bubble classification, report emission, benchmarking.

Runs every (seed x weight-scheme) combination as an independent task in a
thread pool (`jobs` concurrent fits, each internally parallel over `threads`
evaluation workers), ranks results by average error, and classifies the best
fit against the exponential null hypothesis.
"""

from __future__ import annotations

import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .linear import InterleaveConfig, interleave_fit
from .model import LpplParams, PriceSeries, evaluate_batch, lppl_values
from .seeds import InitSeed, SeedRejected, exponential_prefit, propose_triples, triple_to_seed
from .solver import FitResult, lm_fit
from .synth import PRESETS, SynthSpec, generate_trace
from .weights import WeightScheme, build_weights

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ClassifyThresholds:
    """Verdict cutoffs; m ~ 1 or omega ~ 1 or a weak error reduction means no bubble."""

    m_hi: float = 0.95
    omega_lo: float = 1.5
    c_lo: float = 0.01
    min_reduction: float = 0.10


@dataclass(frozen=True)
class Verdict:
    label: str  # lppl-bubble | non-lppl
    reasons: Tuple[str, ...]


def classify(
    best: FitResult,
    baseline_error: float,
    thresholds: ClassifyThresholds = ClassifyThresholds(),
) -> Verdict:
    """Bubble vs non-bubble from the best fit and the exponential pre-fit error.

    Both errors must be on the same scale (average error is used throughout).
    omega is compared by magnitude since the fit may converge to the
    sign-flipped oscillation.
    """
    reasons = []
    if best.params.m >= thresholds.m_hi:
        reasons.append(f"m = {best.params.m:.4g} >= {thresholds.m_hi} (nearly exponential)")
    if abs(best.params.omega) <= thresholds.omega_lo:
        reasons.append(
            f"|omega| = {abs(best.params.omega):.4g} <= {thresholds.omega_lo} (oscillations absent)"
        )
    if abs(best.params.C) <= thresholds.c_lo:
        # Same degeneracy as small omega seen from the other side: when the
        # fitted oscillation amplitude is negligible, omega is unidentified
        # and may sit anywhere, but the fit is effectively super-exponential.
        reasons.append(
            f"|C| = {abs(best.params.C):.4g} <= {thresholds.c_lo} (oscillations absent)"
        )
    if baseline_error > 0:
        reduction = (baseline_error - best.average_error) / baseline_error
        if reduction < thresholds.min_reduction:
            reasons.append(
                f"error reduction {reduction:.1%} vs exponential baseline "
                f"< {thresholds.min_reduction:.0%}"
            )
    if reasons:
        return Verdict(label="non-lppl", reasons=tuple(reasons))
    return Verdict(label="lppl-bubble", reasons=("m, omega, and error reduction all pass",))


@dataclass(frozen=True)
class FitTask:
    seed: InitSeed
    scheme: WeightScheme


@dataclass
class RankedFit:
    task: FitTask
    result: FitResult


@dataclass
class RunReport:
    best: RankedFit
    fits: List[RankedFit]
    verdict: Verdict
    baseline_average_error: float
    thresholds: ClassifyThresholds
    n: int
    timings: Optional[List[dict]] = None
    failures: List[str] = field(default_factory=list)


class AllFitsFailed(RuntimeError):
    def __init__(self, failures: Sequence[str]):
        super().__init__("every fit task failed:\n" + "\n".join(failures))
        self.failures = list(failures)


def build_seed_set(
    log_prices: np.ndarray,
    scheme: WeightScheme,
    manual_triples: Sequence[Tuple[int, int, int, str]] = (),
    auto_triples: int = 0,
    extremum_half_width: int = 10,
) -> List[InitSeed]:
    """Exponential seed (always) plus manual and auto-detected triple seeds."""
    n = log_prices.shape[0]
    series = PriceSeries(log_prices=log_prices, weights=build_weights(scheme, n))
    seeds = [exponential_prefit(series)]
    triples = list(manual_triples)
    if auto_triples > 0:
        # Raw-series detection per the module contract, plus detrended
        # detection over a window ladder: base-like bubbles have a monotone
        # trend that hides the oscillation extrema at any single raw window.
        triples += propose_triples(series, half_width=extremum_half_width,
                                   max_triples=auto_triples)
        for hw in (extremum_half_width, 2 * extremum_half_width, 4 * extremum_half_width):
            triples += propose_triples(series, half_width=hw,
                                       max_triples=auto_triples, detrend=True)
    seen = set()
    for (i, j, k, kind) in triples:
        if (i, j, k, kind) in seen:
            continue
        seen.add((i, j, k, kind))
        try:
            seeds.append(triple_to_seed(i, j, k, kind, series))
        except SeedRejected:
            continue
    return seeds


def fit_command(
    log_prices: np.ndarray,
    schemes: Sequence[WeightScheme],
    manual_triples: Sequence[Tuple[int, int, int, str]] = (),
    auto_triples: int = 8,
    extremum_half_width: int = 10,
    interleave: bool = True,
    config: InterleaveConfig = InterleaveConfig(),
    jobs: int = 1,
    threads: int = 1,
    thresholds: ClassifyThresholds = ClassifyThresholds(),
    collect_timings: bool = False,
) -> RunReport:
    """Fit every (seed x scheme) combination and rank by average error.

    Each task is deterministic, so running them across `jobs` workers cannot
    change any individual result, only wall time. Rank ties break by task
    order so reports are stable.
    """
    n = log_prices.shape[0]
    tasks: List[FitTask] = []
    for scheme in schemes:
        for seed in build_seed_set(log_prices, scheme, manual_triples,
                                   auto_triples, extremum_half_width):
            tasks.append(FitTask(seed=seed, scheme=scheme))
    if not tasks:
        raise AllFitsFailed(["no seed could be constructed"])

    def run(task: FitTask):
        series = PriceSeries(log_prices=log_prices, weights=build_weights(task.scheme, n))
        t0 = time.perf_counter()
        try:
            if interleave:
                result = interleave_fit(series, task.seed.params, config, threads)
            else:
                result = lm_fit(series, task.seed.params, config.lm, threads)
        except Exception as exc:
            return exc, time.perf_counter() - t0
        return result, time.perf_counter() - t0

    failures: List[str] = []
    if jobs <= 1:
        raw = [run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(run, tasks))

    fits: List[RankedFit] = []
    timings: List[dict] = []
    for task, (result, elapsed) in zip(tasks, raw):
        if isinstance(result, Exception):
            failures.append(
                f"{task.seed.provenance} / {task.scheme.label()}: {result}"
            )
            continue
        fits.append(RankedFit(task=task, result=result))
        timings.append({
            "seed": task.seed.provenance,
            "weights": task.scheme.label(),
            "wall_time": elapsed,
            "iterations": result.iterations,
        })
    if not fits:
        raise AllFitsFailed(failures or ["no fit produced a result"])

    order = sorted(range(len(fits)), key=lambda idx: (fits[idx].result.average_error, idx))
    fits = [fits[idx] for idx in order]
    best = fits[0]

    # Self-consistency: the reported error must be reproducible from the
    # reported parameters against the reported data and weights.
    series = PriceSeries(log_prices=log_prices,
                         weights=build_weights(best.task.scheme, n))
    recheck, _ = evaluate_batch(best.result.params, series, threads)
    if not np.isclose(recheck.error, best.result.error, rtol=1e-9, atol=1e-12):
        raise RuntimeError(
            f"best-fit error {best.result.error} not reproducible "
            f"(re-evaluation gives {recheck.error})"
        )

    baseline_seed = exponential_prefit(series)
    baseline_report, _ = evaluate_batch(baseline_seed.params, series, threads)

    verdict = classify(best.result, baseline_report.average_error, thresholds)
    return RunReport(
        best=best,
        fits=fits,
        verdict=verdict,
        baseline_average_error=baseline_report.average_error,
        thresholds=thresholds,
        n=n,
        timings=timings if collect_timings else None,
        failures=failures,
    )


def _params_dict(p: LpplParams) -> dict:
    return {"A": p.A, "B": p.B, "T": p.T, "m": p.m, "C": p.C,
            "omega": p.omega, "phi": p.phi}


def report_to_dict(report: RunReport) -> dict:
    """JSON-ready report; timing data is included only when collected.

    Wall-clock fields are excluded from the per-fit records so that identical
    runs serialize byte-identically.
    """
    def fit_record(rf: RankedFit) -> dict:
        return {
            "seed": rf.task.seed.provenance,
            "weights": rf.task.scheme.label(),
            "params": _params_dict(rf.result.params),
            "error": rf.result.error,
            "average_error": rf.result.average_error,
            "termination": rf.result.termination,
            "iterations": rf.result.iterations,
            "restarts": rf.result.restarts,
        }

    out = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "n": report.n,
        "best": fit_record(report.best),
        "fits": [fit_record(rf) for rf in report.fits],
        "verdict": {"label": report.verdict.label, "reasons": list(report.verdict.reasons)},
        "baseline_average_error": report.baseline_average_error,
        "thresholds": {
            "m_hi": report.thresholds.m_hi,
            "omega_lo": report.thresholds.omega_lo,
            "c_lo": report.thresholds.c_lo,
            "min_reduction": report.thresholds.min_reduction,
        },
        "failures": report.failures,
    }
    if report.timings is not None:
        out["timings"] = report.timings
    return out


def report_to_json(report: RunReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def write_plot_csv(path, log_prices: np.ndarray, best_params: LpplParams) -> None:
    """`index,log_price,fit` CSV for external plotting."""
    x = np.arange(1, log_prices.shape[0] + 1, dtype=float)
    fit = lppl_values(best_params, x)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index,log_price,fit\n")
        for i, (lp, fv) in enumerate(zip(log_prices, fit), start=1):
            fh.write(f"{i},{lp!r},{fv!r}\n")


def bench_command(
    n: int = 100_000,
    thread_counts: Sequence[int] = (1, 2, 4, 8),
    repetitions: int = 5,
    include_fit: bool = True,
) -> List[dict]:
    """Median evaluate_batch wall time per thread count on a synthetic trace.

    Speedup is relative to threads = 1 (first entry if 1 is absent). One
    short lm_fit is timed per thread count as an end-to-end sample.
    """
    if n < 1000:
        raise ValueError("benchmark needs n >= 1000")
    base = PRESETS["base"]
    spec = SynthSpec(params=base.params.replace(T=float(n) * 1.1), sigma=base.sigma,
                     n=n, seed=12345)
    series = generate_trace(spec)
    start = spec.params.replace(A=spec.params.A * 1.01, m=0.6)

    rows = []
    for threads in thread_counts:
        times = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            evaluate_batch(spec.params, series, threads)
            times.append(time.perf_counter() - t0)
        row = {"threads": threads, "evaluate_median_s": statistics.median(times)}
        if include_fit:
            from .solver import LmConfig
            t0 = time.perf_counter()
            lm_fit(series, start, LmConfig(max_iterations=10), threads)
            row["lm_fit_10iter_s"] = time.perf_counter() - t0
        rows.append(row)
    baseline = next((r for r in rows if r["threads"] == 1), rows[0])
    for row in rows:
        row["speedup"] = baseline["evaluate_median_s"] / row["evaluate_median_s"]
    return rows
