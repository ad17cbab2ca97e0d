"""Levenberg-Marquardt for the 7-parameter LPPL fit.

Damping uses Marquardt scaling (mu * diag(J'WJ)), since A and omega live on
wildly different magnitudes. Constraints B > 0, 0 < m <= 1, T > n are enforced
by projecting each candidate step onto the feasible box. When a step solve
breaks down (singular system, non-finite step) or mu underflows to 0, the run
restarts from the current iterate with mu set to a seed value mu_bar that is
doubled on every restart up to a global cap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .model import T_GAP, LpplParams, LpplDomainError, PriceSeries, evaluate_batch

# Feasibility box used by the projection step.
B_MIN = 1e-12
M_MIN = 1e-6
M_MAX = 1.0

# mu step factors within a run: shrink on accept, grow on reject.
MU_SHRINK = 1.0 / 3.0
MU_GROW = 2.0


@dataclass(frozen=True)
class LmConfig:
    """Solver settings: damping seeds, iteration bound, and stopping tolerances."""

    mu_init: float = 1e-3
    mu_bar: float = 1e-3
    mu_bar_cap: float = 1e8
    max_iterations: int = 200
    max_restarts: int = 60
    gradient_tol: float = 1e-12
    step_tol: float = 1e-12
    error_tol: float = 1e-15  # relative E decrease over error_tol_window accepted steps
    error_tol_window: int = 3

    def __post_init__(self):
        if self.mu_init <= 0 or self.mu_bar <= 0:
            raise ValueError("mu_init and mu_bar must be positive")
        if self.mu_bar > self.mu_bar_cap:
            raise ValueError("mu_bar must not exceed mu_bar_cap")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class FitResult:
    """Converged (or stopped) parameters plus error and run accounting."""

    params: LpplParams
    error: float
    average_error: float
    termination: str  # converged | iteration-cap | mu-exhausted | restart-cap
    iterations: int
    restarts: int
    wall_time: float
    error_history: tuple = field(default=(), compare=False)
    # Damping state at exit, so an interleaved caller can resume the run
    # rather than restart it from mu_init.
    mu_final: float = field(default=0.0, compare=False)
    mu_bar_final: float = field(default=0.0, compare=False)


def project_params(params: LpplParams, n: int) -> LpplParams:
    """Project onto the box {B >= 1e-12, 1e-6 <= m <= 1, T >= n + gap}."""
    t_min = n + T_GAP
    while t_min - n < T_GAP:  # rounding in n + gap can land just under the gap
        t_min = np.nextafter(t_min, np.inf)
    return params.replace(
        B=max(params.B, B_MIN),
        m=min(max(params.m, M_MIN), M_MAX),
        T=max(params.T, float(t_min)),
    )


def restart_policy(mu_bar: float, mu_bar_cap: float):
    """Next restart damping seed after a restart-triggering failure.

    Returns (new_mu_bar, exhausted): mu_bar doubles up to the cap; if it was
    already at the cap when the condition recurred, the run must terminate.
    """
    if mu_bar >= mu_bar_cap:
        return mu_bar_cap, True
    return min(2.0 * mu_bar, mu_bar_cap), False


def _solve_step(N: np.ndarray, g: np.ndarray, mu: float) -> Optional[np.ndarray]:
    """Solve (N + mu * diag(N)) delta = -g; None signals a restart-worthy failure.

    Falls back to a minimum-norm least-squares solve when the damped normal
    matrix is singular (e.g. C = 0 zeroes the omega and phi columns), which
    leaves the unidentifiable directions untouched instead of aborting.
    """
    D = np.diag(N).copy()
    with np.errstate(over="ignore", invalid="ignore"):
        # a huge mu can overflow the damping term; the non-finite check below
        # routes that into the restart path
        M = N + mu * np.diag(D)
    if not np.all(np.isfinite(M)):
        return None
    try:
        delta = np.linalg.solve(M, -g)
    except np.linalg.LinAlgError:
        delta, *_ = np.linalg.lstsq(M, -g, rcond=1e-14)
    if not np.all(np.isfinite(delta)):
        return None
    return delta


def lm_fit(
    series: PriceSeries,
    start: LpplParams,
    config: LmConfig = LmConfig(),
    threads: int = 1,
) -> FitResult:
    """Run damped Gauss-Newton iterations from `start` until a stopping rule fires.

    Every accepted step strictly decreases the weighted error E; rejected steps
    (including evaluation domain errors) only raise mu. Identical inputs give
    identical results for a fixed thread count.
    """
    t_start = time.perf_counter()
    series.require_fit_ready()
    n = series.n
    w = series.weights
    d = series.degrees_of_freedom

    params = project_params(start, n)
    report, J = evaluate_batch(params, series, threads)
    error = report.error
    history = [error]

    mu = config.mu_init
    mu_bar = config.mu_bar
    iterations = 0
    restarts = 0
    termination = "iteration-cap"

    def finish(reason):
        return FitResult(
            params=params,
            error=error,
            average_error=error / d,
            termination=reason,
            iterations=iterations,
            restarts=restarts,
            wall_time=time.perf_counter() - t_start,
            error_history=tuple(history),
            mu_final=mu,
            mu_bar_final=mu_bar,
        )

    while iterations < config.max_iterations:
        Jw = J * w[:, None]
        g = Jw.T @ report.residuals
        N = Jw.T @ J

        if np.max(np.abs(g)) < config.gradient_tol:
            return finish("converged")

        restart_needed = False
        if mu <= 0.0 or not np.isfinite(mu):
            restart_needed = True
        else:
            delta = _solve_step(N, g, mu)
            if delta is None:
                restart_needed = True

        if restart_needed:
            mu_bar, exhausted = restart_policy(mu_bar, config.mu_bar_cap)
            if exhausted:
                return finish("mu-exhausted")
            restarts += 1
            if restarts >= config.max_restarts:
                return finish("restart-cap")
            mu = mu_bar  # continue from the current params, not the original seed
            continue

        iterations += 1
        candidate = project_params(LpplParams.from_array(params.as_array() + delta), n)
        try:
            cand_report, cand_J = evaluate_batch(candidate, series, threads)
        except LpplDomainError:
            mu *= MU_GROW
            continue

        if cand_report.error < error:
            step_scale = np.max(
                np.abs(candidate.as_array() - params.as_array())
                / np.maximum(1.0, np.abs(params.as_array()))
            )
            params, report, J = candidate, cand_report, cand_J
            error = cand_report.error
            history.append(error)
            mu *= MU_SHRINK
            if step_scale < config.step_tol:
                return finish("converged")
            k = config.error_tol_window
            if len(history) > k:
                prev = history[-1 - k]
                if prev > 0 and (prev - error) / prev < config.error_tol:
                    return finish("converged")
            if error == 0.0:
                return finish("converged")
        else:
            mu *= MU_GROW

    return finish(termination)


def with_iteration_cap(config: LmConfig, cap: int) -> LmConfig:
    return replace(config, max_iterations=cap)
