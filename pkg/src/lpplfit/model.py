"""LPPL model function, analytic Jacobian, and the data-parallel evaluation kernel.

The model is f(x) = A - B (T - x)^m (1 + C cos(omega ln(T - x) + phi)) fitted
against log prices at integer indices 1..n. Evaluation of the residual vector
and the n x 7 Jacobian dominates fit run time, so the batch evaluator splits
the index range into contiguous chunks processed by a thread pool; per-point
outputs are identical regardless of thread count, and only the weighted
error reduction may differ by reassociation epsilon.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

# Minimum allowed gap between the critical time and the last sample index.
# Smaller gaps blow up (T - x)^(m-1) and ln(T - x); treated as domain errors
# rather than clamped silently.
T_GAP = 1e-6

# Parameter order used for all 7-vectors and Jacobian columns.
PARAM_NAMES = ("A", "B", "T", "m", "C", "omega", "phi")


class LpplDomainError(ValueError):
    """Raised when the model is evaluated where T - x <= 0 (or T too close to n)."""

    def __init__(self, message: str, index=None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class LpplParams:
    """The 7 LPPL parameters (A, B, T, m, C, omega, phi)."""

    A: float
    B: float
    T: float
    m: float
    C: float
    omega: float
    phi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.A, self.B, self.T, self.m, self.C, self.omega, self.phi])

    @classmethod
    def from_array(cls, v) -> "LpplParams":
        v = np.asarray(v, dtype=float)
        if v.shape != (7,):
            raise ValueError(f"expected a 7-vector, got shape {v.shape}")
        return cls(*v.tolist())

    def validate(self, n: int) -> None:
        """Check the fit-problem constraints B > 0, 0 < m <= 1, T > n against a series length."""
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError(f"non-finite parameter in {self}")
        if self.B <= 0:
            raise ValueError(f"B must be positive, got {self.B}")
        if not (0 < self.m <= 1):
            raise ValueError(f"m must be in (0, 1], got {self.m}")
        if self.T - n < T_GAP:
            raise LpplDomainError(
                f"critical time T={self.T} must exceed series length n={n} by at least {T_GAP}",
                index=n,
            )

    def replace(self, **kw) -> "LpplParams":
        d = {name: getattr(self, name) for name in PARAM_NAMES}
        d.update(kw)
        return LpplParams(**d)


@dataclass(frozen=True)
class PriceSeries:
    """Log prices at indices 1..n with per-point weights w(i) >= 0."""

    log_prices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        lp = np.ascontiguousarray(np.asarray(self.log_prices, dtype=float))
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "log_prices", lp)
        object.__setattr__(self, "weights", w)
        if lp.ndim != 1 or w.shape != lp.shape:
            raise ValueError("log_prices and weights must be 1-d arrays of equal length")
        if not np.all(np.isfinite(lp)):
            raise ValueError("log_prices contains non-finite values")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")

    @property
    def n(self) -> int:
        return self.log_prices.shape[0]

    @property
    def indices(self) -> np.ndarray:
        """Sample positions 1..n as floats (1-based trading-period indexing)."""
        return np.arange(1, self.n + 1, dtype=float)

    @property
    def degrees_of_freedom(self) -> int:
        return self.n - 7

    def require_fit_ready(self) -> None:
        """Fitting needs positive degrees of freedom over the effective sample.

        Evaluation alone tolerates any non-negative weights (including all
        zero); solving does not.
        """
        if int(np.count_nonzero(self.weights > 0)) < 8:
            raise ValueError(
                "need at least 8 positively weighted points (n - 7 degrees of freedom)"
            )


@dataclass(frozen=True)
class ResidualReport:
    """Residual vector with the weighted error E and the average error E / (n - 7)."""

    residuals: np.ndarray
    error: float
    average_error: float
    chunk_errors: tuple = field(default=(), compare=False)


def _check_domain(params: LpplParams, x) -> None:
    x = np.asarray(x, dtype=float)
    bad = params.T - x <= 0
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise LpplDomainError(
            f"T - x <= 0 at x={np.atleast_1d(x)[idx]} (T={params.T})",
            index=np.atleast_1d(x)[idx],
        )


def _model_terms(params: LpplParams, x: np.ndarray):
    """Shared intermediates: T-x, ln(T-x), (T-x)^m, theta, cos/sin theta."""
    d = params.T - x
    logd = np.log(d)
    g = np.power(d, params.m)
    theta = params.omega * logd + params.phi
    return d, logd, g, theta, np.cos(theta), np.sin(theta)


def lppl_values(params: LpplParams, x: np.ndarray) -> np.ndarray:
    """Vectorized f(x); requires T - x > 0 elementwise."""
    x = np.asarray(x, dtype=float)
    _check_domain(params, x)
    _, _, g, _, cos_t, _ = _model_terms(params, x)
    return params.A - params.B * g * (1.0 + params.C * cos_t)


def lppl_value(params: LpplParams, x: float) -> float:
    """f(x) at a single point."""
    return float(lppl_values(params, np.array([float(x)]))[0])


def lppl_jacobian(params: LpplParams, x: np.ndarray) -> np.ndarray:
    """Analytic partials of f at each x; rows ordered (A, B, T, m, C, omega, phi).

    With g = (T-x)^m and theta = omega ln(T-x) + phi:
      df/dA = 1
      df/dB = -g (1 + C cos theta)
      df/dT = -B m (T-x)^(m-1) (1 + C cos theta) + B C omega (T-x)^(m-1) sin theta
      df/dm = -B g ln(T-x) (1 + C cos theta)
      df/dC = -B g cos theta
      df/domega = B g C sin theta ln(T-x)
      df/dphi = B g C sin theta
    """
    x = np.asarray(x, dtype=float)
    _check_domain(params, x)
    d, logd, g, _, cos_t, sin_t = _model_terms(params, x)
    B, C = params.B, params.C
    osc = 1.0 + C * cos_t
    g1 = np.power(d, params.m - 1.0)

    J = np.empty((x.shape[0], 7))
    J[:, 0] = 1.0
    J[:, 1] = -g * osc
    J[:, 2] = -B * params.m * g1 * osc + B * C * params.omega * g1 * sin_t
    J[:, 3] = -B * g * logd * osc
    J[:, 4] = -B * g * cos_t
    J[:, 5] = B * g * C * sin_t * logd
    J[:, 6] = B * g * C * sin_t
    return J


def lppl_jacobian_row(params: LpplParams, x: float) -> np.ndarray:
    """Single-point 7-vector of partials."""
    return lppl_jacobian(params, np.array([float(x)]))[0]


def chunk_bounds(n: int, threads: int):
    """Contiguous static partition of range [0, n) into min(threads, n) chunks.

    The partition depends only on (n, threads); each point belongs to exactly
    one chunk, so per-point results are thread-layout independent.
    """
    k = max(1, min(int(threads), n))
    base, extra = divmod(n, k)
    bounds = []
    lo = 0
    for c in range(k):
        hi = lo + base + (1 if c < extra else 0)
        bounds.append((lo, hi))
        lo = hi
    return bounds


def evaluate_batch(params: LpplParams, series: PriceSeries, threads: int = 1):
    """Residuals r_i = f(i) - ln p(i), weighted error E, and the full n x 7 Jacobian.

    Work is split over `threads` contiguous chunks. Residuals and Jacobian rows
    are exactly identical across thread counts; E is the chunk-ordered sum of
    per-chunk partial sums, so it is reproducible for a fixed thread count and
    differs across counts only by reduction-order epsilon.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    params.validate(series.n)
    n = series.n
    x = series.indices
    y = series.log_prices
    w = series.weights

    residuals = np.empty(n)
    J = np.empty((n, 7))
    bounds = chunk_bounds(n, threads)

    def run_chunk(lo_hi):
        lo, hi = lo_hi
        xs = x[lo:hi]
        d, logd, g, _, cos_t, sin_t = _model_terms(params, xs)
        fs = params.A - params.B * g * (1.0 + params.C * cos_t)
        r = fs - y[lo:hi]
        residuals[lo:hi] = r
        B, C = params.B, params.C
        osc = 1.0 + C * cos_t
        g1 = np.power(d, params.m - 1.0)
        J[lo:hi, 0] = 1.0
        J[lo:hi, 1] = -g * osc
        J[lo:hi, 2] = -B * params.m * g1 * osc + B * C * params.omega * g1 * sin_t
        J[lo:hi, 3] = -B * g * logd * osc
        J[lo:hi, 4] = -B * g * cos_t
        J[lo:hi, 5] = B * g * C * sin_t * logd
        J[lo:hi, 6] = B * g * C * sin_t
        return float(np.sum(w[lo:hi] * r * r))

    if len(bounds) == 1:
        partials = [run_chunk(bounds[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
            partials = list(pool.map(run_chunk, bounds))

    error = 0.0
    for p in partials:  # deterministic chunk order
        error += p
    d = series.degrees_of_freedom
    report = ResidualReport(
        residuals=residuals,
        error=error,
        average_error=error / d if d > 0 else np.inf,
        chunk_errors=tuple(partials),
    )
    return report, J
