"""Emitter Hamiltonian, Bessel evaluation, and protection-condition solver."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import j0 as scipy_j0

from starkshield.emitter import (
    J0_FIRST_ZERO,
    SQRT2,
    EmitterConfig,
    HamiltonianSpec,
    ProbeConfig,
    bessel_j0,
    hamiltonian_at,
    protection_ratio,
    stark_shift_exact,
    stark_shift_linear,
)
from starkshield.errors import HorizonError, InvalidArgument, SingularityError
from starkshield.noise import static_trace


def series_j0(x: float, terms: int = 60) -> float:
    """Independent oracle: truncated power series sum((-x^2/4)^k / (k!)^2)."""
    acc = []
    term = 1.0
    for k in range(terms):
        acc.append(term)
        term *= -(x * x / 4.0) / ((k + 1.0) * (k + 1.0))
    return math.fsum(acc)


class TestBessel:
    def test_value_at_zero(self):
        assert bessel_j0(0.0) == 1.0

    def test_value_at_one_against_series_oracle(self):
        assert bessel_j0(1.0) == pytest.approx(series_j0(1.0), abs=1e-12)
        assert bessel_j0(1.0) == pytest.approx(0.7651976866, abs=1e-9)

    def test_first_zero(self):
        assert abs(bessel_j0(2.404826)) < 1e-6
        assert abs(bessel_j0(J0_FIRST_ZERO)) < 1e-14

    def test_series_oracle_midrange(self):
        for x in (0.3, 2.0, 4.7, 7.5):
            assert bessel_j0(x) == pytest.approx(series_j0(x), abs=1e-12)

    def test_against_scipy_over_domain(self):
        xs = np.linspace(-30.0, 30.0, 6001)
        err = max(abs(bessel_j0(float(x)) - scipy_j0(x)) for x in xs)
        assert err < 1e-12

    def test_even_function(self):
        for x in (0.5, 3.3, 17.2):
            assert bessel_j0(-x) == bessel_j0(x)

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidArgument):
            bessel_j0(math.nan)


class TestProtectionRatio:
    def test_residuals_below_1e10(self):
        for s in (2.0, 10.0, 20.0, 40.0, 80.0, 1e3, 1e6):
            r = protection_ratio(s)
            rhs = (s - 1.0) / (s + 1.0)
            assert abs(bessel_j0(2.0 * SQRT2 * r) - rhs) < 1e-10

    def test_s_equal_one_hits_first_bessel_zero(self):
        r = protection_ratio(1.0)
        assert r == pytest.approx(J0_FIRST_ZERO / (2.0 * SQRT2), abs=1e-9)

    def test_anchor_values_against_scipy_root(self):
        for s in (10.0, 40.0, 80.0):
            rhs = (s - 1.0) / (s + 1.0)
            x = brentq(lambda u: scipy_j0(u) - rhs, 1e-12, J0_FIRST_ZERO, xtol=1e-14)
            assert protection_ratio(s) == pytest.approx(x / (2.0 * SQRT2), abs=1e-9)

    def test_large_s_asymptote(self):
        r = protection_ratio(1e6)
        assert abs(r * math.sqrt(1e6 + 1.0) - 1.0) < 1e-3

    def test_monotonically_decreasing(self):
        grid = [1.0, 1.5, 2.0, 5.0, 10.0, 40.0, 100.0, 1e4, 1e6]
        ratios = [protection_ratio(s) for s in grid]
        assert all(a > b for a, b in zip(ratios, ratios[1:]))

    def test_rejects_s_below_one(self):
        with pytest.raises(InvalidArgument):
            protection_ratio(0.5)


class TestStarkShifts:
    def test_cancellation_returns_delta(self):
        s, delta = 40.0, 10.0
        omega = delta / math.sqrt(s)
        dv = 0.01
        assert stark_shift_linear(omega, delta, s, dv) == pytest.approx(dv, rel=1e-12)

    def test_zero_noise_zero_shift(self):
        assert stark_shift_linear(1.0, 10.0, 40.0, 0.0) == 0.0
        assert stark_shift_exact(1.0, 10.0, 40.0, 0.0) == 0.0

    def test_direct_substitution(self):
        assert stark_shift_linear(1.0, 10.0, 40.0, 0.01) == pytest.approx(0.004)

    def test_exact_to_linear_ratio(self):
        # s*delta/Delta = 0.1 gives ratio 1/(1 - 0.01), independent of Omega
        s, delta = 40.0, 100.0
        dv = 0.1 * delta / s
        omega = delta / math.sqrt(s)
        ratio = stark_shift_exact(omega, delta, s, dv) / stark_shift_linear(omega, delta, s, dv)
        assert ratio == pytest.approx(1.0 / (1.0 - 0.01), rel=1e-12)

    def test_odd_in_delta(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            omega = rng.uniform(0.1, 5.0)
            delta = rng.uniform(1.0, 50.0)
            s = rng.uniform(1.0, 100.0)
            dv = rng.uniform(-0.5, 0.5) * delta / s
            assert stark_shift_exact(omega, delta, s, -dv) == pytest.approx(
                -stark_shift_exact(omega, delta, s, dv), rel=1e-12, abs=1e-15
            )

    def test_large_detuning_consistency(self):
        # |exact - linear| / |linear| <= 2 (s d / Delta)^2 for s d / Delta <= 0.3
        s, delta, omega = 40.0, 100.0, 15.0
        for frac in (0.01, 0.05, 0.1, 0.2, 0.3):
            dv = frac * delta / s
            lin = stark_shift_linear(omega, delta, s, dv)
            exact = stark_shift_exact(omega, delta, s, dv)
            assert abs(exact - lin) / abs(lin) <= 2.0 * frac**2 + 1e-12

    def test_singularities(self):
        with pytest.raises(InvalidArgument):
            stark_shift_linear(1.0, 0.0, 40.0, 0.1)
        with pytest.raises(SingularityError):
            stark_shift_exact(1.0, 4.0, 40.0, 0.1)


class TestHamiltonian:
    def test_all_terms_vanish(self):
        spec = HamiltonianSpec(EmitterConfig(s=40.0), static_trace(0.0, 0.1, 10))
        assert np.all(hamiltonian_at(spec, 0.37) == 0.0)

    def test_static_diagonal(self):
        spec = HamiltonianSpec(EmitterConfig(s=40.0), static_trace(0.2, 0.1, 10))
        h = hamiltonian_at(spec, 0.5)
        assert np.allclose(h, np.diag([0.0, -0.2, 40.0 * 0.2]))

    def test_drive_at_time_zero(self):
        em = EmitterConfig(s=40.0, delta_drive=100.0, omega_drive=3.0, protection_on=True)
        spec = HamiltonianSpec(em, static_trace(0.0, 0.1, 10))
        h = hamiltonian_at(spec, 0.0)
        assert h[1, 2] == pytest.approx(SQRT2 * 3.0)
        assert h[2, 1] == pytest.approx(SQRT2 * 3.0)

    def test_probe_phase(self):
        em = EmitterConfig(s=40.0, probe=ProbeConfig(g=0.2, delta_omega=1.5))
        spec = HamiltonianSpec(em, static_trace(0.0, 0.1, 40))
        t = 1.234
        h = hamiltonian_at(spec, t)
        assert h[0, 1] == pytest.approx(0.1 * np.exp(-1j * 1.5 * t))
        assert h[1, 0] == pytest.approx(np.conj(h[0, 1]))

    def test_hermitian_at_random_times(self):
        em = EmitterConfig(
            s=7.0,
            delta_drive=50.0,
            omega_drive=5.0,
            protection_on=True,
            probe=ProbeConfig(g=0.3, delta_omega=-2.0),
        )
        spec = HamiltonianSpec(em, static_trace(0.11, 0.1, 100))
        rng = np.random.default_rng(3)
        for t in rng.uniform(0.0, 10.0, 64):
            h = hamiltonian_at(spec, float(t))
            assert np.max(np.abs(h - h.conj().T)) == 0.0

    def test_out_of_horizon(self):
        spec = HamiltonianSpec(EmitterConfig(s=2.0), static_trace(0.0, 0.1, 10))
        with pytest.raises(HorizonError):
            hamiltonian_at(spec, 1.5)

    def test_config_invariants(self):
        with pytest.raises(InvalidArgument):
            EmitterConfig(s=0.9)
        with pytest.raises(InvalidArgument):
            EmitterConfig(s=2.0, protection_on=True, delta_drive=0.0)
        with pytest.raises(InvalidArgument):
            ProbeConfig(g=-0.1, delta_omega=0.0)

    def test_with_protection_ratio_helper(self):
        em = EmitterConfig(s=40.0, delta_drive=100.0, protection_on=True)
        filled = em.with_protection_ratio()
        assert filled.omega_drive == pytest.approx(protection_ratio(40.0) * 100.0)
