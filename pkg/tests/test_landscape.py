import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from rdrop.ballmodel import single_ball_energy
from rdrop.errors import BracketError, ConvergenceError, DomainError
from rdrop.landscape import (BallEnergy, Method, breakpoints, brute_partition, ground_state,
                             landscape_table, mglob_upper_bound, optimal_partition,
                             rescale_to_unit_volume, sweep_thresholds)
from rdrop.params import ModelParams
from rdrop.stability import critical_mass

PI = math.pi


def crossing_root(params, c_alpha):
    """Mass where one ball and two equal balls have the same energy."""
    N, a, g, w = params.N, params.alpha, params.gamma, params.omega_N
    A = N * w ** (1 / N)
    B = g * c_alpha * w ** (-(2 * N - a) / N)
    h = lambda m: (A * m ** ((N - 1) / N) * (2 ** (1 / N) - 1)
                   - B * m ** ((2 * N - a) / N) * (1 - 2 ** (-(N - a) / N)))
    return brentq(h, 1e-6, 1e6, xtol=1e-14, rtol=1e-15)


class TestRescale:
    def test_identity(self, p311):
        assert rescale_to_unit_volume(p311, p311.omega_N).gamma == pytest.approx(1.0, rel=1e-15)

    def test_example(self, p311):
        assert rescale_to_unit_volume(p311, 8 * p311.omega_N).gamma == pytest.approx(8.0, rel=1e-14)

    @pytest.mark.parametrize("N, alpha, m", [(3, 1.0, 7.0), (3, 0.4, 0.2), (4, 2.1, 3.0)])
    def test_scaling_identity(self, coeffs_for, N, alpha, m):
        p, c = ModelParams(N, alpha, 1.3), coeffs_for(N, alpha)
        lhs = single_ball_energy(p, m, c).total / (m / p.omega_N) ** ((N - 1) / N)
        unit = single_ball_energy(rescale_to_unit_volume(p, m), p.omega_N, c).total
        assert lhs == pytest.approx(unit, rel=1e-13)

    def test_domain(self, p311):
        with pytest.raises(DomainError):
            rescale_to_unit_volume(p311, 0.0)


class TestPartition:
    def test_single_ball(self, p311, c311):
        r = optimal_partition(p311, c311, 3.0, 1)
        assert r.masses == (3.0,)
        assert r.value == pytest.approx(single_ball_energy(p311, 3.0, c311).total, rel=1e-15)

    def test_equal_split_example(self, p311, c311):
        r = optimal_partition(p311, c311, 10.0, 2)
        assert r.masses == pytest.approx((5.0, 5.0), rel=1e-9)
        assert r.value < single_ball_energy(p311, 10.0, c311).total
        b = brute_partition(p311, c311, 10.0, 2)
        assert r.value == pytest.approx(b.value, rel=1e-6)
        assert b.method is Method.BRUTE_GRID

    @pytest.mark.parametrize("N, alpha, gamma", [(3, 1.0, 1.0), (3, 0.3, 2.0), (2, 0.6, 0.5),
                                                 (4, 2.5, 1.0)])
    def test_brute_oracle(self, coeffs_for, N, alpha, gamma):
        p, c = ModelParams(N, alpha, gamma), coeffs_for(N, alpha)
        for m in (0.3, 1.0, 2.5, 5.0, 9.0, 20.0):
            for k in (2, 3):
                r = optimal_partition(p, c, m, k)
                b = brute_partition(p, c, m, k)
                assert r.value == pytest.approx(b.value, rel=1e-6)
                assert r.value <= b.value * (1 + 1e-12)

    @given(st.floats(0.05, 30.0), st.integers(1, 6))
    @settings(max_examples=60, deadline=None)
    def test_invariants(self, c311, m, k):
        p = c311.params
        r = optimal_partition(p, c311, m, k)
        assert len(r.masses) == k
        assert math.fsum(r.masses) == pytest.approx(m, rel=1e-10)
        assert all(x >= 0 for x in r.masses)
        total = math.fsum(single_ball_energy(p, x, c311).total for x in r.nonzero)
        assert r.value == pytest.approx(total, rel=1e-12)
        assert r.value <= single_ball_energy(p, m, c311).total * (1 + 1e-15)
        for j in range(1, k + 1):
            assert r.value <= j * single_ball_energy(p, m / j, c311).total * (1 + 1e-14)
        if k > 1:
            assert r.value <= optimal_partition(p, c311, m, k - 1).value + 1e-12

    def test_at_most_one_small_ball(self, c311):
        e = BallEnergy.from_coeffs(c311.params, c311)
        for m in (2.2, 4.0, 11.3):
            r = optimal_partition(c311.params, c311, m, 8)
            small = [x for x in r.nonzero if x < e.inflection()]
            assert len(small) <= 1
            assert len(set(np.round(r.nonzero, 9))) <= 2

    def test_brute_limits(self, p311, c311):
        with pytest.raises(DomainError):
            brute_partition(p311, c311, 1.0, 4)
        with pytest.raises(DomainError):
            optimal_partition(p311, c311, -1.0, 2)


class TestBreakpoints:
    def test_first_crossing(self, p311, c311):
        bp = breakpoints(p311, c311, 2, 10.0)
        assert bp[0] == pytest.approx(crossing_root(p311, c311.c_alpha), rel=1e-6)

    def test_increasing(self, p311, c311):
        bp = breakpoints(p311, c311, 6, 12.0)
        assert len(bp) == 5
        assert all(b > a for a, b in zip(bp, bp[1:]))

    def test_gamma_monotone(self, c311):
        b1 = breakpoints(ModelParams(3, 1.0, 1.0), c311, 2, 10.0)[0]
        b2 = breakpoints(ModelParams(3, 1.0, 2.0), c311, 2, 10.0)[0]
        assert b2 < b1

    def test_bracket_not_found(self, p311, c311):
        with pytest.raises(BracketError):
            breakpoints(p311, c311, 3, 1.0)

    def test_k_max(self, p311, c311):
        with pytest.raises(DomainError):
            breakpoints(p311, c311, 1, 10.0)


class TestMglob:
    def test_example(self, p311):
        ref = 6 * (2 ** (1 / 3) - 1) / (1 - 2 ** (-2 / 3))
        assert mglob_upper_bound(p311) == pytest.approx(ref, rel=1e-13)
        assert ref == pytest.approx(4.2145, abs=1e-4)

    @pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
    def test_below_critical_mass(self, c311, gamma):
        p = ModelParams(3, 1.0, gamma)
        assert mglob_upper_bound(p) < critical_mass(p, c311)

    @pytest.mark.parametrize("N, alpha", [(3, 1.0), (3, 0.5), (2, 0.5), (4, 1.5)])
    def test_above_first_crossing(self, coeffs_for, N, alpha):
        p, c = ModelParams(N, alpha), coeffs_for(N, alpha)
        bound = mglob_upper_bound(p)
        assert bound >= breakpoints(p, c, 2, 2 * bound)[0]

    def test_equals_crossing_with_lower_estimate(self, p311):
        # the bound is the two-ball crossing with c_alpha replaced by omega_N^2 2^-alpha
        low = p311.omega_N ** 2 * 2 ** -p311.alpha
        assert mglob_upper_bound(p311) == pytest.approx(crossing_root(p311, low), rel=1e-12)


class TestSweep:
    def test_reference_row(self, p311):
        rows = sweep_thresholds(p311, [1.0], 1.0)
        r = rows[0]
        assert (r.d_A, r.d_I) == (2, 2)
        assert r.R_bar == pytest.approx(1.06078, abs=1e-5)
        assert r.m_loc == pytest.approx(5.0, rel=1e-12)
        assert r.m_glob_upper == pytest.approx(4.2145, abs=1e-4)
        assert r.error is None

    def test_small_alpha_trend(self, p311):
        rows = sweep_thresholds(p311, [0.5, 0.4, 0.3, 0.2, 0.1, 0.05], 1.0)
        m = [r.m_loc for r in rows]
        assert all(b > a for a, b in zip(m, m[1:]))

    def test_bound_versus_local_threshold(self, p311):
        # at gamma = 1 the bound stays below m_loc up to alpha = 1, then overtakes it
        grid = np.round(np.arange(0.25, 1.751, 0.25), 12)
        rows = sweep_thresholds(p311, grid, 1.0)
        for r in rows:
            if r.alpha <= 1.0:
                assert r.m_glob_upper < r.m_loc
            else:
                assert r.m_glob_upper > r.m_loc

    def test_deterministic_and_ordered(self, p311):
        grid = [1.5, 0.5, 1.0]
        a = sweep_thresholds(p311, grid, 2.0, threads=1)
        b = sweep_thresholds(p311, grid, 2.0, threads=3)
        assert a == b
        assert [r.alpha for r in a] == grid

    def test_row_error_flagged(self, p311, monkeypatch):
        import rdrop.landscape as L

        real = L.critical_radius

        def flaky(params, coeffs):
            if params.alpha == 0.5:
                raise ConvergenceError("synthetic failure")
            return real(params, coeffs)

        monkeypatch.setattr(L, "critical_radius", flaky)
        rows = sweep_thresholds(p311, [0.5, 1.0], 1.0)
        assert rows[0].error and "synthetic" in rows[0].error
        assert math.isnan(rows[0].m_loc)
        assert rows[1].error is None


class TestTable:
    def test_structure(self, p311, c311):
        grid = np.round(np.arange(0.25, 8.001, 0.25), 12)
        t = landscape_table(p311, c311, grid, 5)
        k = t.best_k()
        assert np.all(np.diff(k) >= 0)
        counts = [len(r.masses) for r in t.grid]
        assert all(b >= a for a, b in zip(counts, counts[1:]))
        bp = t.breakpoints
        assert all(b > a for a, b in zip(bp, bp[1:]))
        for r in t.grid:
            if r.m < bp[0]:
                assert r.best_k == 1
        assert t.label == "ball-cluster landscape"
        assert t.mglob_upper == pytest.approx(mglob_upper_bound(p311))

    def test_just_above_first_breakpoint(self, p311, c311):
        m1 = breakpoints(p311, c311, 2, 10.0)[0]
        t = landscape_table(p311, c311, [m1 * (1 - 1e-4), m1 * (1 + 1e-4)], 3)
        assert t.grid[0].best_k == 1
        assert t.grid[1].best_k == 2
        a, b = t.grid[1].masses
        assert a == pytest.approx(b, rel=1e-3)
        brute = brute_partition(p311, c311, t.grid[1].m, 2)
        assert t.grid[1].value == pytest.approx(brute.value, rel=1e-6)

    def test_continuity_at_breakpoints(self, p311, c311):
        for j, m in enumerate(breakpoints(p311, c311, 4, 8.0), start=1):
            fj = optimal_partition(p311, c311, m, j).value
            fj1 = optimal_partition(p311, c311, m, j + 1).value
            assert fj1 == pytest.approx(fj, rel=1e-6)

    def test_no_breakpoint_on_small_grid(self, p311, c311):
        t = landscape_table(p311, c311, [0.5, 1.0], 3)
        assert t.breakpoints == ()
        assert list(t.best_k()) == [1, 1]

    def test_grid_validation(self, p311, c311):
        with pytest.raises(DomainError):
            landscape_table(p311, c311, [2.0, 1.0], 2)


class TestGroundState:
    def test_subadditivity(self, p311, c311):
        masses = np.linspace(0.5, 10.0, 20)
        value = {}

        def f(m):
            key = round(float(m), 12)
            if key not in value:
                value[key] = ground_state(p311, c311, key).value
            return value[key]

        for m1 in masses:
            for m2 in masses:
                assert f(m1 + m2) <= f(m1) + f(m2) + 1e-9

    def test_linear_upper_bound(self, p311, c311):
        cap = max(ground_state(p311, c311, m).value for m in np.linspace(1.0, 2.0, 41)[:-1])
        for m in np.linspace(1.0, 50.0, 99):
            assert ground_state(p311, c311, m).value / m <= cap + 1e-9

    def test_ball_count_is_sufficient(self, p311, c311):
        for m in (3.0, 12.0, 30.0):
            g = ground_state(p311, c311, m)
            assert optimal_partition(p311, c311, m, g.k + 5).value >= g.value - 1e-12
