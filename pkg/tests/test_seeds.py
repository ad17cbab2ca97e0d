import math

import numpy as np
import pytest

from lpplfit.model import PriceSeries, lppl_values
from lpplfit.seeds import (
    SeedRejected,
    exponential_prefit,
    propose_triples,
    triple_geometry,
    triple_to_seed,
)
from lpplfit.synth import PRESETS, SynthSpec, generate_trace


def flat_series(n=50, level=3.0):
    return PriceSeries(log_prices=np.full(n, level), weights=np.ones(n))


class TestTripleGeometry:
    def test_sp500_2007_peak_triple(self):
        # Three consecutive peaks of the 2003-2007 S&P 500 run-up.
        rho, omega, T, phi = triple_geometry(718, 916, 988, "peak")
        assert rho == pytest.approx(198 / 72) == pytest.approx(2.75)
        assert T == pytest.approx(1029.14, abs=0.01)
        assert omega == pytest.approx(6.21, abs=0.01)
        assert phi == pytest.approx(-19.95, abs=0.01)

    def test_equally_spaced_rejected(self):
        with pytest.raises(SeedRejected):
            triple_geometry(100, 200, 300, "peak")

    def test_wrong_order_rejected(self):
        with pytest.raises(SeedRejected):
            triple_geometry(0, 200, 300, "peak")
        with pytest.raises(SeedRejected):
            triple_geometry(300, 200, 100, "peak")

    def test_shift_invariance(self):
        # shifting all indices shifts T by the same amount, rho/omega unchanged
        rng = np.random.default_rng(11)
        for _ in range(50):
            k = int(rng.integers(30, 1000))
            j = k - int(rng.integers(5, 200))
            i = j - int(rng.integers(j - k + j + 1 - j + 1, 500))  # ensure j-i > k-j
            i = j - (k - j) - int(rng.integers(1, 300))
            if i < 1:
                continue
            s = int(rng.integers(1, 500))
            rho1, om1, T1, _ = triple_geometry(i, j, k, "peak")
            rho2, om2, T2, _ = triple_geometry(i + s, j + s, k + s, "peak")
            assert rho2 == pytest.approx(rho1, rel=1e-12)
            assert om2 == pytest.approx(om1, rel=1e-12)
            assert T2 == pytest.approx(T1 + s, rel=1e-12)

    def test_trough_phase_convention(self):
        # troughs put the angle at 0 mod 2*pi at k
        _, omega, T, phi = triple_geometry(342, 723, 912, "trough")
        angle = omega * math.log(T - 912) + phi
        assert math.cos(angle) == pytest.approx(1.0, abs=1e-12)


class TestExponentialPrefit:
    def test_exact_exponential_recovery(self):
        n, T, A, B = 900, 1100.0, 5.0, 0.001
        x = np.arange(1, n + 1, dtype=float)
        series = PriceSeries(log_prices=A - B * (T - x), weights=np.ones(n))
        seed = exponential_prefit(series, T=T)
        assert seed.params.A == pytest.approx(A, rel=1e-12)
        assert seed.params.B == pytest.approx(B, rel=1e-12)
        assert seed.params.m == 1.0 and seed.params.C == 0.0

    def test_flat_series_floors_B(self):
        seed = exponential_prefit(flat_series())
        assert seed.params.B == 1e-8

    def test_default_T(self):
        seed = exponential_prefit(flat_series(n=100))
        assert seed.params.T == pytest.approx(110.0)

    def test_degenerate_support(self):
        n = 20
        w = np.zeros(n)
        w[3] = 1.0
        series = PriceSeries(log_prices=np.linspace(0, 1, n), weights=w)
        with pytest.raises(ValueError):
            exponential_prefit(series)


class TestTripleToSeed:
    def test_uses_triple_T_and_prefit(self):
        spec = SynthSpec(params=PRESETS["base"].params, sigma=0.0, n=1000, seed=0)
        series = generate_trace(spec)
        seed = triple_to_seed(342, 723, 912, "peak", series)
        assert seed.params.T > 1001
        assert seed.params.m == 1.0 and seed.params.C == 0.0
        assert "triple(342,723,912,peak)" == seed.provenance

    def test_rejects_T_inside_series(self):
        spec = SynthSpec(params=PRESETS["base"].params, sigma=0.0, n=1000, seed=0)
        series = generate_trace(spec)
        with pytest.raises(SeedRejected):
            triple_to_seed(100, 300, 400, "peak", series)


class TestNoiselessRoundTrip:
    def true_peaks(self, params, n):
        # analytic peak positions: omega*ln(T-x) + phi = (2k+1)*pi
        out = []
        k = 0
        while True:
            d = math.exp(((2 * k + 1) * math.pi - params.phi) / params.omega)
            x = params.T - d
            if x < 1:
                break
            if x <= n:
                out.append(int(round(x)))
            k += 1
        return sorted(out)

    def test_recovers_T_and_omega(self):
        params = PRESETS["oscillatory"].params
        n = 1000
        peaks = [p for p in self.true_peaks(params, n) if p < n - 5]
        i, j, k = peaks[-3], peaks[-2], peaks[-1]
        _, omega, T, _ = triple_geometry(i, j, k, "peak")
        # integer rounding of peak positions is the only error source
        assert T == pytest.approx(params.T, rel=0.02)
        assert omega == pytest.approx(params.omega, rel=0.02)


class TestProposeTriples:
    def test_monotone_series_empty(self):
        n = 200
        series = PriceSeries(log_prices=np.linspace(0, 1, n), weights=np.ones(n))
        assert propose_triples(series) == []

    def test_noiseless_oscillatory_omega_within_20pct(self):
        spec = SynthSpec(params=PRESETS["oscillatory"].params, sigma=0.0, n=1000, seed=0)
        series = generate_trace(spec)
        found = []
        for (i, j, k, kind) in propose_triples(series, half_width=10, detrend=True):
            try:
                _, omega, T, _ = triple_geometry(i, j, k, kind)
            except SeedRejected:
                continue
            if T > 1001:
                found.append(omega)
        assert found, "no usable triples on a noiseless oscillatory trace"
        assert any(abs(om - 9.0) / 9.0 < 0.2 for om in found)

    def test_window_validation(self):
        with pytest.raises(ValueError):
            propose_triples(flat_series(), half_width=0)
