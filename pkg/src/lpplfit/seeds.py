"""Starting points for the multi-start fit: exponential pre-fit and peak triples.

Three consecutive same-kind price extrema i < j < k that are one full
oscillation apart satisfy (T - i)/(T - j) = (T - j)/(T - k) = rho, which
pins down rho = (j - i)/(k - j), omega = 2*pi / ln(rho), and
T = (rho*k - j)/(rho - 1). The phase is then read off by requiring the
oscillation angle at k to sit at a peak (or trough) of the price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d, uniform_filter1d

from .model import LpplParams, PriceSeries

# Floor substituted when the regression slope is non-positive: keeps the seed
# inside the B > 0 box while staying numerically negligible.
B_FLOOR = 1e-8

DEFAULT_EXTREMUM_HALF_WIDTH = 10


class SeedRejected(ValueError):
    """A candidate starting point violates the geometry or box constraints."""


@dataclass(frozen=True)
class InitSeed:
    params: LpplParams
    provenance: str  # "exponential" or "triple(i,j,k,kind)"


def exponential_prefit(series: PriceSeries, T: Optional[float] = None) -> InitSeed:
    """Weighted linear regression ln p(i) = A - B (T - i), returned as an LPPL seed.

    The regression is ln p(i) = (A - B*T) + B*i, so B is the slope and A is
    recovered from the intercept once T is chosen. T comes from a paired
    triple estimate when available; the pure-exponential seed defaults to
    T = n + n/10. The seed keeps m = 1, C = 0 so the general fit starts from
    the exponential null hypothesis.
    """
    n = series.n
    if T is None:
        T = n + n / 10.0
    i = series.indices
    y = series.log_prices
    w = series.weights

    sw = w.sum()
    if sw <= 0 or np.count_nonzero(w > 0) < 2:
        raise ValueError("exponential pre-fit needs at least 2 positively weighted points")
    ibar = float(np.sum(w * i) / sw)
    var = float(np.sum(w * (i - ibar) ** 2))
    if var == 0:
        raise ValueError("degenerate regression: no variance in the index")
    slope = float(np.sum(w * (i - ibar) * y) / var)
    intercept = float(np.sum(w * y) / sw - slope * ibar)

    B = slope if slope > 0 else B_FLOOR
    A = intercept + B * T
    params = LpplParams(A=A, B=B, T=float(T), m=1.0, C=0.0, omega=1.0, phi=0.0)
    return InitSeed(params=params, provenance="exponential")


def triple_geometry(i: int, j: int, k: int, kind: str = "peak") -> Tuple[float, float, float, float]:
    """(rho, omega, T, phi) from three angle-consecutive extrema i < j < k.

    Peaks put the oscillation angle at pi (the bracketed term minimal under
    the C >= 0 seed convention), troughs at 0 mod 2*pi; the trough convention
    mirrors the peak derivation and is an interpretation, the peak form is
    the derived one.
    """
    if not (1 <= i < j < k):
        raise SeedRejected(f"need 1 <= i < j < k, got ({i}, {j}, {k})")
    if kind not in ("peak", "trough"):
        raise SeedRejected(f"kind must be peak or trough, got {kind!r}")
    rho = (j - i) / (k - j)
    if rho <= 1.0:
        raise SeedRejected(f"triple ({i}, {j}, {k}) gives rho = {rho:g} <= 1")
    omega = 2.0 * math.pi / math.log(rho)
    T = (rho * k - j) / (rho - 1.0)
    if kind == "peak":
        phi = math.pi - omega * math.log(T - k)
    else:
        phi = -omega * math.log(T - k)
    return rho, omega, T, phi


def triple_to_seed(
    i: int, j: int, k: int, kind: str, series: PriceSeries
) -> InitSeed:
    """Full starting vector from an extremum triple plus the exponential pre-fit.

    The triple supplies (T, omega, phi); A and B come from the exponential
    regression at that T; m = 1 and C = 0 are relaxed by the solver. Triples
    whose implied T does not clear the end of the series are rejected.
    """
    _, omega, T, phi = triple_geometry(i, j, k, kind)
    if T <= series.n + 1:
        raise SeedRejected(
            f"triple ({i}, {j}, {k}) implies T = {T:.2f} <= n + 1 = {series.n + 1}"
        )
    base = exponential_prefit(series, T=T).params
    params = base.replace(omega=omega, phi=phi)
    return InitSeed(params=params, provenance=f"triple({i},{j},{k},{kind})")


def _local_extrema(y: np.ndarray, half_width: int, mode: str) -> List[int]:
    """1-based indices where y attains the window extremum, deduplicated plateaus."""
    size = 2 * half_width + 1
    if mode == "max":
        env = maximum_filter1d(y, size=size, mode="nearest")
    else:
        env = minimum_filter1d(y, size=size, mode="nearest")
    hits = np.flatnonzero(y == env)
    out: List[int] = []
    for h in hits:
        if out and h - (out[-1] - 1) <= half_width:
            continue  # same plateau / window
        out.append(int(h) + 1)
    return out


def propose_triples(
    series: PriceSeries,
    half_width: int = DEFAULT_EXTREMUM_HALF_WIDTH,
    max_triples: Optional[int] = None,
    detrend: bool = False,
) -> List[Tuple[int, int, int, str]]:
    """Candidate (i, j, k, kind) triples from sliding-window extrema, recent first.

    Returns consecutive same-kind extremum triples with rho > 1. Selection is
    a heuristic stand-in for manual inspection; `--triple` bypasses it.
    With `detrend`, extrema are taken on the smoothed residual of the
    exponential pre-fit instead of raw ln p: a monotone power-law trend hides
    the oscillation peaks of a developing bubble, so the raw-series detector
    only sees them once the trend is removed.
    """
    if half_width < 1:
        raise ValueError("half_width must be >= 1")
    y = series.log_prices
    if detrend:
        pre = exponential_prefit(series).params
        y = y - (pre.A - pre.B * (pre.T - series.indices))
        y = uniform_filter1d(y, size=2 * half_width + 1, mode="nearest")
    candidates: List[Tuple[int, int, int, str]] = []
    for kind, mode in (("peak", "max"), ("trough", "min")):
        ext = [e for e in _local_extrema(y, half_width, mode) if 1 < e < series.n]
        for a, b, c in zip(ext, ext[1:], ext[2:]):
            if b - a > c - b:
                candidates.append((a, b, c, kind))
    candidates.sort(key=lambda t: t[2], reverse=True)
    if max_triples is not None:
        candidates = candidates[:max_triples]
    return candidates
