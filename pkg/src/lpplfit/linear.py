"""Linear (A, B, C) sub-system and the LM/linear interleave with adaptive L.

Fixing (T, m, omega, phi) makes the fit linear in A, beta = B, and
gamma = B * C: the model is A - beta*v(i) - gamma*z(i) with v = (T-i)^m and
z = v * cos(omega ln(T-i) + phi). The interleave alternates a capped LM run
with this linear solve, accepting a linear result only when it strictly
reduces E, and adapts the LM iteration cap L by comparing the per-unit-time
error reduction of the two solvers. LM always runs on all 7 parameters with
the analytic Jacobian; (A, B, C) are never substituted into the objective.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .model import LpplParams, PriceSeries, evaluate_batch
from .solver import FitResult, LmConfig, lm_fit, project_params

RANK_TOL = 1e-10
RATE_TIE_BAND = 0.01  # rates within 1% count as a tie, broken toward more LM


@dataclass(frozen=True)
class LinearSolveResult:
    """Outcome of one fixed-(T, m, omega, phi) linear solve."""

    status: str  # ok | rank-deficient | nonpositive-beta
    A: float = np.nan
    beta: float = np.nan
    gamma: float = np.nan
    C: float = np.nan
    error: float = np.nan
    params: Optional[LpplParams] = None


def solve_linear_subsystem(
    series: PriceSeries,
    fixed: LpplParams,
    threads: int = 1,
) -> LinearSolveResult:
    """Weighted least-squares for (A, B, C) at fixed (T, m, omega, phi).

    Solved by rank-revealing QR on the sqrt(w)-scaled design matrix rather
    than normal equations; the basis is nearly collinear when oscillations
    are small and squaring the condition number would hurt. A rank-deficient
    system or beta <= 0 (which would break B > 0) is a rejection; the caller
    keeps its incumbent.
    """
    series.require_fit_ready()
    fixed.validate(series.n)
    i = series.indices
    d = fixed.T - i
    v = np.power(d, fixed.m)
    z = v * np.cos(fixed.omega * np.log(d) + fixed.phi)

    sw = np.sqrt(series.weights)
    X = np.column_stack([np.ones(series.n), -v, -z]) * sw[:, None]
    y = series.log_prices * sw

    coef, _, rank, _ = scipy.linalg.lstsq(
        X, y, cond=RANK_TOL, lapack_driver="gelsy"
    )
    if rank < 3:
        return LinearSolveResult(status="rank-deficient")
    A, beta, gamma = (float(c) for c in coef)
    if beta <= 0:
        return LinearSolveResult(status="nonpositive-beta", A=A, beta=beta, gamma=gamma)

    C = gamma / beta
    params = fixed.replace(A=A, B=beta, C=C)
    report, _ = evaluate_batch(params, series, threads)
    return LinearSolveResult(
        status="ok", A=A, beta=beta, gamma=gamma, C=C, error=report.error, params=params
    )


@dataclass
class InterleaveState:
    """Adaptive-L bookkeeping: phase, run-time model, and last measurements."""

    L: int = 5
    phase: str = "startup"  # startup | regime
    T0: float = 0.0
    T1: float = 0.0
    prev_lm: Optional[tuple] = None  # (iterations, wall_time) of the invocation before last
    last_lm: Optional[tuple] = None  # (iterations, wall_time, error_reduction)
    last_linear: Optional[tuple] = None  # (wall_time, error_reduction)


def _refit_runtime_model(state: InterleaveState) -> None:
    """Re-estimate T = T1*l + T0 from the last two LM invocations.

    Requires distinct iteration counts; otherwise the 2x2 system is singular
    and the previous coefficients are kept.
    """
    if state.prev_lm is None or state.last_lm is None:
        return
    la, ta = state.prev_lm[0], state.prev_lm[1]
    lb, tb = state.last_lm[0], state.last_lm[1]
    if la == lb:
        return
    T1 = (tb - ta) / (lb - la)
    if T1 < 0:
        return  # timing noise; keep the previous model
    state.T1 = T1
    state.T0 = tb - T1 * lb


def update_L(state: InterleaveState) -> int:
    """Advance the adaptive schedule one step and return the new L.

    Startup doubles L while the LM marginal unit-time error reduction (with
    the per-invocation setup cost T0 stripped via the run-time model) is at
    least the linear solver's unit-time reduction, then hands over to the
    regime phase, which nudges L by one toward the faster reducer. A tie
    within 1% increments L: the nonlinear solver can leave the fixed
    subspace, the linear one cannot.
    """
    _refit_runtime_model(state)
    if state.last_lm is None or state.last_linear is None:
        return state.L

    l_last, t_lm, dE_lm = state.last_lm
    t_lin, dE_lin = state.last_linear

    lin_rate = dE_lin / t_lin if t_lin > 0 and dE_lin > 0 else 0.0
    marginal_denom = state.T1 * l_last if state.T1 > 0 else t_lm
    lm_rate = dE_lm / marginal_denom if marginal_denom > 0 and dE_lm > 0 else 0.0

    if state.phase == "startup":
        if lm_rate >= lin_rate:
            state.L = max(1, state.L * 2)
        else:
            state.phase = "regime"
            state.L = max(1, state.L - 1)
    else:
        ref = max(lm_rate, lin_rate)
        tie = ref == 0.0 or abs(lm_rate - lin_rate) <= RATE_TIE_BAND * ref
        if tie or lm_rate > lin_rate:
            state.L += 1
        else:
            state.L = max(1, state.L - 1)
    return state.L


@dataclass(frozen=True)
class InterleaveConfig:
    lm: LmConfig = LmConfig()
    L: int = 5
    adaptive_L: bool = True
    max_rounds: int = 200
    max_L: int = 4096
    # Cost measure feeding the adaptive-L schedule. The deterministic mode
    # prices an LM invocation at its iteration count and a linear solve at one
    # iteration-equivalent, so identical runs produce identical schedules and
    # therefore byte-identical reports; wall-clock mode adapts to the real
    # machine but makes the iterate sequence depend on timing jitter.
    wall_clock_costs: bool = False


def interleave_fit(
    series: PriceSeries,
    seed: LpplParams,
    config: InterleaveConfig = InterleaveConfig(),
    threads: int = 1,
    clock: Callable[[], float] = time.perf_counter,
) -> FitResult:
    """Alternate capped LM runs with the linear sub-system solve.

    The linear result replaces the incumbent only on strict error decrease,
    so the accepted-error sequence is strictly decreasing and the loop
    terminates: it stops once the linear solve fails to improve and LM can
    make no further progress (converged or damping exhausted).
    """
    t_start = time.perf_counter()
    n = series.n
    incumbent = project_params(seed, n)
    report, _ = evaluate_batch(incumbent, series, threads)
    error = report.error
    history = [error]

    state = InterleaveState(L=max(1, config.L))
    total_iterations = 0
    total_restarts = 0
    termination = "iteration-cap"  # only if the round cap is exhausted while improving

    mu = config.lm.mu_init
    mu_bar = config.lm.mu_bar
    for _ in range(config.max_rounds):
        round_start_error = error
        t0 = clock()
        # Resume the damping state from the previous round: a fresh mu_init
        # every round would make a stalled L-capped invocation look final
        # even though a larger mu (or a restart) would still make progress.
        lm_res = lm_fit(
            series,
            incumbent,
            replace(config.lm, max_iterations=state.L, mu_init=mu, mu_bar=mu_bar),
            threads,
        )
        t_lm = clock() - t0
        total_iterations += lm_res.iterations
        total_restarts += lm_res.restarts
        mu = lm_res.mu_final if lm_res.mu_final > 0 else config.lm.mu_init
        mu_bar = lm_res.mu_bar_final

        dE_lm = error - lm_res.error
        if lm_res.error < error:
            incumbent = lm_res.params
            error = lm_res.error
            history.extend(lm_res.error_history[1:])
        lm_stalled = lm_res.termination in ("converged", "mu-exhausted", "restart-cap")

        t0 = clock()
        lin = solve_linear_subsystem(series, incumbent, threads)
        t_lin = clock() - t0
        lin_improved = lin.status == "ok" and lin.error < error
        dE_lin = error - lin.error if lin_improved else 0.0
        if lin_improved:
            incumbent = lin.params
            error = lin.error
            history.append(error)
            mu = config.lm.mu_init  # new basin; damping history no longer applies

        if not lin_improved and lm_stalled:
            termination = (
                lm_res.termination if lm_res.termination != "iteration-cap" else "converged"
            )
            break

        # Round-level analogue of the solver's relative-error stopping rule:
        # a round that improves E, but by less than the tolerance, is treated
        # as converged rather than ground out. Zero-progress rounds are not
        # convergence: an L-capped LM invocation may still be searching for a
        # workable mu, which the carried damping state resumes next round.
        if (
            round_start_error > error > 0
            and (round_start_error - error) / round_start_error < config.lm.error_tol
        ):
            termination = "converged"
            break

        if config.adaptive_L:
            if not config.wall_clock_costs:
                t_lm = float(lm_res.iterations + 1)
                t_lin = 1.0
            state.prev_lm = state.last_lm[:2] if state.last_lm is not None else None
            state.last_lm = (max(1, lm_res.iterations), t_lm, max(dE_lm, 0.0))
            state.last_linear = (t_lin, dE_lin)
            update_L(state)
            state.L = min(state.L, config.max_L)

    d = series.degrees_of_freedom
    return FitResult(
        params=incumbent,
        error=error,
        average_error=error / d,
        termination=termination,
        iterations=total_iterations,
        restarts=total_restarts,
        wall_time=time.perf_counter() - t_start,
        error_history=tuple(history),
    )
