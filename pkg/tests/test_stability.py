import json
import math
from itertools import combinations_with_replacement

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdrop.coefficients import mu_closed_form, riesz_coefficients
from rdrop.errors import DomainError
from rdrop.numerics import SampleStream
from rdrop.params import ModelParams
from rdrop.stability import (HarmonicPerturbation, Verdict, coercivity_proxy,
                             critical_mass, critical_radius, first_unstable_degree,
                             g_function, harmonic_dimension, mode_eigenvalue,
                             mode_eigenvalues, monotonicity_switch_degree,
                             quadratic_form_oracle, quadratic_form_spectral,
                             stability_verdict, truncation_degree, zonal_harmonic)

PI = math.pi


def r_bar_n3(alpha, gamma):
    return ((6 - alpha) * (4 - alpha) / (2 ** (3 - alpha) * gamma * alpha * PI)) ** (1 / (4 - alpha))


def _monomial_count(N, d):
    return sum(1 for _ in combinations_with_replacement(range(N), d))


class TestHarmonicDimension:
    def test_n3(self):
        for d in range(30):
            assert harmonic_dimension(3, d) == 2 * d + 1

    @pytest.mark.parametrize("N", [2, 4, 5, 6])
    def test_polynomial_count(self, N):
        # harmonics of degree d complement |x|^2 P_{d-2} inside P_d
        for d in range(2, 9):
            assert harmonic_dimension(N, d) == _monomial_count(N, d) - _monomial_count(N, d - 2)

    def test_low_degrees(self):
        assert harmonic_dimension(5, 0) == 1
        assert harmonic_dimension(5, 1) == 5
        assert harmonic_dimension(2, 7) == 2


class TestEigenvalues:
    def test_example(self, p311, c311):
        assert mode_eigenvalue(p311, c311, 1.0, 2) == pytest.approx(4 - 16 * PI / 15, rel=1e-12)

    @pytest.mark.parametrize("N", [2, 3, 4, 5])
    def test_translation_mode(self, coeffs_for, N):
        for frac in (0.1, 0.5, 0.9):
            p = ModelParams(N, frac * (N - 1), 1.7)
            c = coeffs_for(N, p.alpha)
            for R in (0.3, 1.0, 4.0):
                scale = 2 * p.gamma * R ** (N + 1 - p.alpha) * c.mu_at(1)
                assert abs(mode_eigenvalue(p, c, R, 1)) <= 1e-7 * scale

    def test_quadratic_growth(self, p311, c311):
        d = 10**5
        assert mode_eigenvalue(p311, c311, 1.0, d) / d ** 2 == pytest.approx(1.0, rel=1e-4)

    def test_vectorised_matches_scalar(self, p311, c311):
        lam = mode_eigenvalues(p311, c311, 1.3, 2, 400)
        for d in (2, 17, 256, 257, 400):
            assert lam[d - 2] == pytest.approx(mode_eigenvalue(p311, c311, 1.3, d), rel=1e-12)

    def test_domain(self, p311, c311):
        with pytest.raises(DomainError):
            mode_eigenvalue(p311, c311, 0.0, 2)
        with pytest.raises(DomainError):
            mode_eigenvalue(p311, c311, 1.0, 0)


class TestDegrees:
    @pytest.mark.parametrize("alpha", [0.25, 1.0, 1.75])
    def test_n3(self, coeffs_for, alpha):
        p, c = ModelParams(3, alpha), coeffs_for(3, alpha)
        assert first_unstable_degree(p, c) == 2
        assert monotonicity_switch_degree(p, c) == 2

    def test_d_a_brute_scan(self):
        p = ModelParams(2, 0.5)
        c = riesz_coefficients(p, d_max=64, self_energy=False)
        target = p.alpha * c.i_coeff
        brute = next(d for d in range(2, 10**4 + 1) if mu_closed_form(p, d) < target)
        assert first_unstable_degree(p, c) == brute

    @pytest.mark.parametrize("N, alpha", [(4, 1.0), (2, 0.5), (5, 3.5), (6, 0.3), (7, 5.5)])
    def test_d_i_brute_scan(self, coeffs_for, N, alpha):
        p, c = ModelParams(N, alpha), coeffs_for(N, alpha)
        g = [g_function(p, c, d) for d in range(2, 60)]
        brute = next(d for d in range(2, 59) if g[d - 1] > g[d - 2])
        assert monotonicity_switch_degree(p, c) == brute

    @pytest.mark.parametrize("N, alpha", [(3, 0.5), (3, 1.5), (4, 1.0), (5, 3.8), (2, 0.9)])
    def test_g_unimodal(self, coeffs_for, N, alpha):
        p, c = ModelParams(N, alpha), coeffs_for(N, alpha)
        d_i = monotonicity_switch_degree(p, c)
        g = {d: g_function(p, c, d) for d in range(2, 52)}
        for d in range(2, 51):
            if d < d_i:
                assert g[d + 1] < g[d]
            else:
                assert g[d + 1] > g[d]


class TestG:
    def test_example(self, p311, c311):
        assert g_function(p311, c311, 2) == pytest.approx((15 / (4 * PI)) ** (1 / 3), rel=1e-12)

    def test_neutral_mode(self, coeffs_for):
        p, c = ModelParams(3, 0.5), coeffs_for(3, 0.5)
        for d in range(2, 11):
            R = g_function(p, c, d)
            scale = d * (d + 1)
            assert abs(mode_eigenvalue(p, c, R, d)) <= 1e-10 * scale

    def test_growth(self, p311, c311):
        vals = [g_function(p311, c311, 10 ** k) for k in range(2, 6)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_undefined_at_translation_mode(self):
        from rdrop.coefficients import RieszCoefficients
        p = ModelParams(3, 1.0)
        mu = np.array([4 * PI, 4 * PI / 3, 4 * PI / 5])
        for i_coeff in (4 * PI / 3, 0.999 * 4 * PI / 3):
            c = RieszCoefficients(p, mu, i_coeff=i_coeff, c_alpha=1.0, d_max=2)
            with pytest.raises(DomainError):
                g_function(p, c, 1)


class TestCriticalRadius:
    @pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 1.5, 1.75])
    @pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
    def test_closed_form(self, coeffs_for, alpha, gamma):
        p = ModelParams(3, alpha, gamma)
        assert critical_radius(p, coeffs_for(3, alpha)) == pytest.approx(
            r_bar_n3(alpha, gamma), rel=1e-10)

    def test_critical_mass(self, p311, c311):
        assert critical_mass(p311, c311) == pytest.approx(5.0, rel=1e-12)

    def test_gamma_scaling(self, coeffs_for):
        c = coeffs_for(4, 1.3)
        r1 = critical_radius(ModelParams(4, 1.3, 1.0), c)
        r2 = critical_radius(ModelParams(4, 1.3, 2.0), c)
        assert r2 / r1 == pytest.approx(2 ** (-1 / (5 - 1.3)), rel=1e-12)

    @pytest.mark.parametrize("N, alpha", [(2, 0.5), (4, 2.5), (5, 1.0), (6, 4.5)])
    def test_minimum_of_g(self, coeffs_for, N, alpha):
        p, c = ModelParams(N, alpha), coeffs_for(N, alpha)
        brute = min(g_function(p, c, d) for d in range(2, 200))
        assert critical_radius(p, c) == pytest.approx(brute, rel=1e-13)


class TestVerdict:
    def test_stable_example(self, p311, c311):
        r = stability_verdict(p311, c311, 1.0)
        assert r.verdict is Verdict.STRICTLY_STABLE
        assert r.min_degree == 2
        assert r.min_eigenvalue == pytest.approx(0.648971, abs=1e-5)

    def test_unstable_example(self, p311, c311):
        r = stability_verdict(p311, c311, 1.2)
        assert r.verdict is Verdict.UNSTABLE
        assert r.min_degree == 2

    def test_marginal(self, p311, c311):
        r_bar = critical_radius(p311, c311)
        r = stability_verdict(p311, c311, r_bar)
        assert r.verdict is Verdict.MARGINAL
        assert abs(r.min_eigenvalue) <= 1e-8

    def test_truncation_certificate(self, p311, c311):
        for R in (0.5, 1.0, 3.0, 20.0):
            D = truncation_degree(p311, c311, R)
            k = 2 * R ** 3 * c311.alpha_i
            assert D * (D + 1) - 2 >= k
            assert D == 2 or (D - 1) * D - 2 < k
            assert np.all(mode_eigenvalues(p311, c311, R, D, D + 500) > 0)

    def test_report_eigenvalue_cap(self, p311, c311):
        r = stability_verdict(p311, c311, 30.0)
        assert r.truncation_degree > 64
        assert [d for d, _ in r.eigenvalues] == list(range(2, 65))

    def test_report_json(self, p311, c311):
        r = stability_verdict(p311, c311, 0.9)
        doc = json.loads(json.dumps(r.to_dict()))
        assert set(doc) == {"params", "R", "d_A", "d_I", "R_bar", "m_loc", "eigenvalues",
                            "verdict", "truncation_degree"}
        assert doc["verdict"] == "strictly_stable"
        assert doc["m_loc"] == pytest.approx(p311.omega_N * doc["R_bar"] ** 3, rel=1e-14)

    @given(st.floats(0.02, 1.98), st.floats(0.1, 10.0), st.floats(0.2, 2.0))
    @settings(max_examples=40, deadline=None)
    def test_sign_characterisation(self, alpha, gamma, scale):
        p = ModelParams(3, alpha, gamma)
        c = riesz_coefficients(p, d_max=64, self_energy=False)
        r_bar = critical_radius(p, c)
        R = scale * r_bar
        verdict = stability_verdict(p, c, R).verdict
        if abs(R - r_bar) <= 1e-9 * r_bar:
            assert verdict is Verdict.MARGINAL
        else:
            assert (verdict is Verdict.STRICTLY_STABLE) == (R < r_bar)

    def test_zero_at_critical_radius(self, coeffs_for):
        for N, a in [(3, 0.7), (4, 2.0), (2, 0.4)]:
            p, c = ModelParams(N, a), coeffs_for(N, a)
            r_bar = critical_radius(p, c)
            d_star = min(range(2, 100), key=lambda d: g_function(p, c, d))
            assert abs(mode_eigenvalue(p, c, r_bar, d_star)) <= 1e-8


class TestQuadraticForm:
    def test_single_mode(self, p311, c311):
        phi = HarmonicPerturbation(3, {(2, 1): 1.0})
        assert quadratic_form_spectral(p311, c311, 1.0, phi) == pytest.approx(0.648971, abs=1e-5)

    def test_additivity(self, coeffs_for):
        p, c = ModelParams(4, 1.5, 0.7), coeffs_for(4, 1.5)
        a = HarmonicPerturbation(4, {(2, 3): 0.4})
        b = HarmonicPerturbation(4, {(5, 1): -1.2})
        both = HarmonicPerturbation(4, {(2, 3): 0.4, (5, 1): -1.2})
        q = lambda phi: quadratic_form_spectral(p, c, 1.1, phi)
        assert q(both) == pytest.approx(q(a) + q(b), rel=1e-14)

    def test_spectral_lower_bound(self, p311, c311):
        R = 0.8
        rng = np.random.default_rng(4)
        for _ in range(20):
            entries = {(int(d), 1): float(rng.normal()) for d in rng.integers(2, 12, size=4)}
            phi = HarmonicPerturbation(3, entries)
            lam_min = min(mode_eigenvalue(p311, c311, R, d) for d, _ in entries)
            q = quadratic_form_spectral(p311, c311, R, phi)
            # R^{N-3} = 1 at N = 3
            assert q >= lam_min * phi.l2_norm_sq() * (1 - 1e-12) > 0

    def test_perturbation_validation(self):
        with pytest.raises(DomainError):
            HarmonicPerturbation(3, {(1, 1): 1.0})
        with pytest.raises(DomainError):
            HarmonicPerturbation(3, {(2, 6): 1.0})
        with pytest.raises(DomainError):
            quadratic_form_spectral(ModelParams(3, 1.0), None, 1.0, HarmonicPerturbation(3, {}))

    def test_zonal_normalisation(self):
        z, w = np.polynomial.legendre.leggauss(40)
        for N, d in [(3, 0), (3, 2), (3, 5)]:
            Y = zonal_harmonic(N, d)
            x = np.stack([np.sqrt(1 - z * z), np.zeros_like(z), z], axis=1)
            # zonal: the azimuthal integral contributes 2 pi
            assert 2 * PI * np.dot(w, Y(x) ** 2) == pytest.approx(1.0, rel=1e-12)

    def test_oracle_degree_2(self, coeffs_for):
        p, c = ModelParams(3, 0.5), coeffs_for(3, 0.5)
        est = quadratic_form_oracle(p, c, 1.0, zonal_harmonic(3, 2), 20, SampleStream(3), 10**6)
        ref = quadratic_form_spectral(p, c, 1.0, HarmonicPerturbation(3, {(2, 1): 1.0}))
        assert abs(est.value - ref) <= max(0.02 * abs(ref), 4 * est.std_error)
        # the local terms are exact: T1 = d(d+1) - 2 for a unit zonal harmonic
        assert est.t1 == pytest.approx(4.0, rel=1e-10)

    def test_oracle_guards(self, coeffs_for):
        p, c = ModelParams(4, 0.5), coeffs_for(4, 0.5)
        with pytest.raises(DomainError):
            quadratic_form_oracle(p, c, 1.0, zonal_harmonic(4, 2), 20, SampleStream(0), 1000)
        p3 = ModelParams(3, 1.5)
        with pytest.warns(RuntimeWarning):
            est = quadratic_form_oracle(p3, coeffs_for(3, 1.5), 1.0, zonal_harmonic(3, 2), 12,
                                        SampleStream(0), 10**4)
        assert est.variance_warning and est.tolerance == 0.05


class TestCoercivity:
    @pytest.mark.parametrize("N, alpha", [(3, 1.0), (3, 0.3), (4, 2.0)])
    def test_proxy(self, coeffs_for, N, alpha):
        p, c = ModelParams(N, alpha), coeffs_for(N, alpha)
        R = 0.9 * critical_radius(p, c)
        proxy = coercivity_proxy(p, c, R, SampleStream(17), samples=1000, max_degree=20)
        D = truncation_degree(p, c, R)
        floor = R ** (N - 3) * mode_eigenvalues(p, c, R, 2, max(D, 2)).min()
        assert proxy.min_l2 >= 0.9 * floor
        assert proxy.min_h1 > 0
