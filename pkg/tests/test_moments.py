import numpy as np
import pytest
from conftest import (
    brute_r_statistics,
    brute_w_matrix,
    enum_univariate_moments,
    random_pattern,
)

from kamp import (
    EdgeCorrection,
    InsufficientPointsError,
    MarkQuery,
    PointPattern,
    RadiusGrid,
    Window,
    accumulate_r_statistics,
    condition_diagnostics,
    exact_moments_small,
    expectation_k,
    k_univariate,
    variance_k_bivariate,
    variance_k_univariate,
)
from kamp.moments import moment_pair_univariate

UNIT = Window(0, 1, 0, 1)
CORRECTIONS = [EdgeCorrection.NONE, EdgeCorrection.TRANSLATION]


def radii_spanning(pattern, count=5):
    """Radii covering empty, partial, and saturated regimes of W(r).

    Picks sit strictly between adjacent pairwise distances so that pair
    membership is unambiguous under any <= convention.
    """
    d = []
    for i in range(pattern.n):
        for j in range(i + 1, pattern.n):
            d.append(np.hypot(pattern.x[i] - pattern.x[j], pattern.y[i] - pattern.y[j]))
    d = np.sort(d)
    mid = lambda k: 0.5 * (d[k] + d[min(k + 1, len(d) - 1)])
    picks = np.unique(
        np.array([d[0] * 0.5, mid(len(d) // 3), mid(len(d) // 2), d[-1] * 1.05])
    )
    limit = pattern.window.shorter_side / 2
    picks = picks[(picks > 0) & (picks <= limit)]
    return RadiusGrid(picks[:count])


class TestAccumulate:
    def test_two_point_hand_count(self):
        pp = PointPattern.from_arrays([0.4, 0.5], [0.5, 0.5], ["a", "b"], UNIT)
        grid = RadiusGrid(np.array([0.05, 0.2]))
        rs = accumulate_r_statistics(pp, grid, EdgeCorrection.NONE)
        np.testing.assert_array_equal(rs.r0, [0.0, 2.0])
        np.testing.assert_array_equal(rs.r1, [0.0, 2.0])
        np.testing.assert_array_equal(rs.r2, [0.0, 0.0])
        np.testing.assert_array_equal(rs.r3, [0.0, 0.0])

    def test_below_min_distance_all_zero(self, rng):
        pp = random_pattern(rng, 12)
        grid = radii_spanning(pp)
        rs = accumulate_r_statistics(pp, grid, EdgeCorrection.TRANSLATION)
        assert rs.r0[0] == rs.r1[0] == rs.r2[0] == rs.r3[0] == 0.0

    def test_requires_two_points(self):
        pp = PointPattern.from_arrays([0.5], [0.5], ["a"], UNIT)
        with pytest.raises(InsufficientPointsError):
            accumulate_r_statistics(pp, RadiusGrid(np.array([0.1])))

    @pytest.mark.parametrize("correction", CORRECTIONS)
    def test_identities_match_literal_loops(self, rng, correction):
        for _ in range(6):
            n = int(rng.integers(4, 9))
            pp = random_pattern(rng, n)
            grid = radii_spanning(pp)
            rs = accumulate_r_statistics(pp, grid, correction)
            for k, r in enumerate(grid.radii):
                w = brute_w_matrix(pp, r, correction)
                r0, r1, r2, r3 = brute_r_statistics(w)
                if correction is EdgeCorrection.NONE:
                    # 0/1 weights make every sum a small integer: exact floats
                    assert rs.r0[k] == r0
                    assert rs.r1[k] == r1
                    assert rs.r2[k] == r2
                    assert rs.r3[k] == r3
                else:
                    np.testing.assert_allclose(
                        [rs.r0[k], rs.r1[k], rs.r2[k], rs.r3[k]],
                        [r0, r1, r2, r3],
                        rtol=1e-11,
                        atol=1e-12,
                    )

    def test_monotone_r0_r1(self, rng):
        pp = random_pattern(rng, 60)
        grid = RadiusGrid(np.linspace(0.01, 0.45, 15))
        rs = accumulate_r_statistics(pp, grid)
        assert np.all(np.diff(rs.r0) >= 0)
        assert np.all(np.diff(rs.r1) >= 0)
        np.testing.assert_allclose(rs.r0, rs.row_sums.sum(axis=0), rtol=1e-12)

    def test_storage_order_invariance(self, rng):
        pp = random_pattern(rng, 40, marks=rng.choice(["m", "bg"], 40))
        grid = RadiusGrid(np.linspace(0.05, 0.4, 6))
        perm = rng.permutation(40)
        shuffled = PointPattern.from_arrays(
            pp.x[perm], pp.y[perm], pp.marks[perm], pp.window
        )
        a = accumulate_r_statistics(pp, grid)
        b = accumulate_r_statistics(shuffled, grid)
        np.testing.assert_allclose(a.r0, b.r0, rtol=1e-12)
        np.testing.assert_allclose(a.r1, b.r1, rtol=1e-12)
        np.testing.assert_allclose(a.r2, b.r2, rtol=1e-11, atol=1e-9)
        np.testing.assert_allclose(a.r3, b.r3, rtol=1e-11, atol=1e-9)
        m = int(np.sum(pp.marks == "m"))
        np.testing.assert_allclose(
            variance_k_univariate(a, m),
            variance_k_univariate(b, m),
            rtol=1e-9,
            atol=1e-12,
        )


class TestExpectation:
    def test_corollary_identity_all_cells(self, rng):
        # E(K) equals univariate K of the pattern with every point marked
        for _ in range(5):
            n = int(rng.integers(20, 80))
            pp = random_pattern(rng, n)
            grid = RadiusGrid(np.linspace(0.02, 0.4, 9))
            for correction in CORRECTIONS:
                rs = accumulate_r_statistics(pp, grid, correction)
                curve = k_univariate(pp, "all", grid, correction)
                np.testing.assert_allclose(
                    expectation_k(rs), curve.values, rtol=1e-12
                )

    def test_query_independent(self, rng):
        marks = rng.choice(["a", "b", "c"], 50)
        pp = random_pattern(rng, 50, marks=marks)
        grid = RadiusGrid(np.linspace(0.05, 0.35, 5))
        rs = accumulate_r_statistics(pp, grid)
        # expectation depends only on all-cell geometry, not on the query
        e = expectation_k(rs)
        assert e.shape == (5,)
        assert np.all(e >= 0)

    def test_csr_mean_near_pi_r_squared(self):
        rng = np.random.default_rng(17)
        w = Window(0, 10, 0, 10)
        grid = RadiusGrid(np.array([1.0, 2.0]))
        reps = np.empty((100, 2))
        for k in range(100):
            n = rng.poisson(2000)
            pp = PointPattern.from_arrays(
                rng.uniform(0, 10, n), rng.uniform(0, 10, n), np.full(n, "c"), w
            )
            reps[k] = expectation_k(accumulate_r_statistics(pp, grid))
        se = reps.std(axis=0, ddof=1) / 10.0
        target = np.pi * grid.radii**2
        assert np.all(np.abs(reps.mean(axis=0) - target) < 3 * se)


class TestVariance:
    def test_all_marked_variance_zero(self, rng):
        pp = random_pattern(rng, 25)
        grid = RadiusGrid(np.linspace(0.05, 0.4, 8))
        rs = accumulate_r_statistics(pp, grid)
        assert np.all(variance_k_univariate(rs, 25) == 0.0)

    def test_univariate_matches_enumeration(self, rng):
        for _ in range(6):
            n = int(rng.integers(5, 9))
            m = int(rng.integers(2, n + 1))
            marks = np.array(["m"] * m + ["bg"] * (n - m))
            pp = random_pattern(rng, n, marks=marks)
            grid = radii_spanning(pp)
            for correction in CORRECTIONS:
                rs = accumulate_r_statistics(pp, grid, correction)
                e = expectation_k(rs)
                v = variance_k_univariate(rs, m)
                for k, r in enumerate(grid.radii):
                    w = brute_w_matrix(pp, r, correction)
                    mean, var = enum_univariate_moments(w, pp.window.area, n, m)
                    scale = max(abs(var), mean * mean, 1e-300)
                    assert abs(e[k] - mean) <= 1e-10 * max(abs(mean), 1e-300)
                    assert abs(v[k] - var) <= 1e-10 * scale

    def test_bivariate_pair_case_zero(self):
        # two points, one of each type: a single assignment class, so Var = 0
        pp = PointPattern.from_arrays([0.3, 0.5], [0.5, 0.5], ["t1", "t2"], UNIT)
        grid = RadiusGrid(np.array([0.1, 0.3]))
        rs = accumulate_r_statistics(pp, grid, EdgeCorrection.NONE)
        e = expectation_k(rs)
        v = variance_k_bivariate(rs, 1, 1)
        assert e[1] == pytest.approx(1.0)
        assert np.allclose(v, 0.0, atol=1e-12)

    def test_bivariate_matches_enumeration(self, rng):
        q = MarkQuery.bivariate("t1", "t2")
        for _ in range(4):
            n = int(rng.integers(5, 8))
            m1 = int(rng.integers(1, n - 1))
            m2 = int(rng.integers(1, n - m1 + 1))
            marks = np.array(["t1"] * m1 + ["t2"] * m2 + ["bg"] * (n - m1 - m2))
            pp = random_pattern(rng, n, marks=marks)
            grid = radii_spanning(pp)
            for correction in CORRECTIONS:
                rs = accumulate_r_statistics(pp, grid, correction)
                e = expectation_k(rs)
                v = variance_k_bivariate(rs, m1, m2)
                for k, r in enumerate(grid.radii):
                    mean, var = exact_moments_small(pp, q, float(r), correction)
                    scale = max(abs(var), mean * mean, 1e-300)
                    assert abs(e[k] - mean) <= 1e-10 * max(abs(mean), 1e-300)
                    assert abs(v[k] - var) <= 1e-10 * scale

    def test_monte_carlo_univariate(self):
        import kamp

        rng = np.random.default_rng(5)
        w = Window(0, 10, 0, 10)
        x, y = rng.uniform(0, 10, 200), rng.uniform(0, 10, 200)
        marks = np.array(["m"] * 40 + ["bg"] * 160)
        pp = PointPattern.from_arrays(x, y, marks, w)
        grid = RadiusGrid(np.linspace(0.5, 2.5, 5))
        rs = accumulate_r_statistics(pp, grid)
        e = expectation_k(rs)
        v = variance_k_univariate(rs, 40)
        summary, _ = kamp.perm_null(pp, "m", grid, n_perms=3000, seed=8)
        assert np.all(np.abs(summary.mean - e) <= 3 * np.sqrt(v / 3000))
        # variance of the sample variance via the normal-theory bound is too
        # tight for skewed K; use a generous 4-sigma chi-square style bound
        se_var = v * np.sqrt(2.0 / (3000 - 1))
        assert np.all(np.abs(summary.variance - v) <= 6 * se_var)

    def test_preconditions(self, rng):
        pp = random_pattern(rng, 10)
        grid = RadiusGrid(np.array([0.2]))
        rs = accumulate_r_statistics(pp, grid)
        with pytest.raises(InsufficientPointsError):
            variance_k_univariate(rs, 1)
        with pytest.raises(InsufficientPointsError):
            variance_k_univariate(rs, 11)
        with pytest.raises(InsufficientPointsError):
            variance_k_bivariate(rs, 0, 2)
        with pytest.raises(InsufficientPointsError):
            variance_k_bivariate(rs, 6, 6)


class TestConditionDiagnostics:
    def test_complete_graph_degenerate(self):
        # equilateral-ish cluster where every pair is within r and weights are 1
        pp = PointPattern.from_arrays(
            [0.5, 0.52, 0.5, 0.52], [0.5, 0.5, 0.52, 0.52], ["a"] * 4, UNIT
        )
        grid = RadiusGrid(np.array([0.2]))
        rs = accumulate_r_statistics(pp, grid, EdgeCorrection.NONE)
        report = condition_diagnostics(rs)
        assert report.degenerate[0]
        assert np.isnan(report.rho1[0])

    def test_matches_direct_computation(self, rng):
        pp = random_pattern(rng, 10)
        grid = radii_spanning(pp)
        rs = accumulate_r_statistics(pp, grid, EdgeCorrection.TRANSLATION)
        report = condition_diagnostics(rs)
        n = 10
        for k, r in enumerate(grid.radii):
            w = brute_w_matrix(pp, r, EdgeCorrection.TRANSLATION)
            wbar = w.sum() / (n * (n - 1))
            tilde = np.where(~np.eye(n, dtype=bool), w - wbar, 0.0)
            rows = tilde.sum(axis=1)
            s2 = np.sum(rows**2)
            if s2 == 0:
                assert report.degenerate[k]
                continue
            rho1 = np.sum(np.abs(rows) ** 3) / s2**1.5
            rho2 = np.sum(tilde**2) / s2
            assert report.rho1[k] == pytest.approx(rho1, rel=1e-9)
            assert report.rho2[k] == pytest.approx(rho2, rel=1e-9)

    def test_ratios_shrink_with_n(self):
        rng = np.random.default_rng(31)
        w = Window(0, 10, 0, 10)
        grid = RadiusGrid(np.array([1.0]))
        rho1s, rho2s = [], []
        for n in (500, 1000, 2000):
            pp = PointPattern.from_arrays(
                rng.uniform(0, 10, n), rng.uniform(0, 10, n), np.full(n, "c"), w
            )
            report = condition_diagnostics(accumulate_r_statistics(pp, grid))
            rho1s.append(report.rho1[0])
            rho2s.append(report.rho2[0])
        assert rho1s[0] > rho1s[1] > rho1s[2]
        assert rho2s[0] > rho2s[1] > rho2s[2]


class TestVarianceClamp:
    def test_m_equals_n_not_flagged(self, rng):
        pp = random_pattern(rng, 12)
        grid = RadiusGrid(np.array([0.3]))
        rs = accumulate_r_statistics(pp, grid)
        var, clamped = moment_pair_univariate(rs, 12)
        assert var[0] == 0.0
        assert not clamped[0]

    def test_tiny_negative_clamped_large_negative_fatal(self):
        from kamp import InternalConsistencyError
        from kamp.moments import _clamp_variance

        e = np.array([10.0, 10.0])
        var, clamped = _clamp_variance(np.array([-1e-8, 0.5]), e)
        assert var[0] == 0.0 and clamped[0]
        assert var[1] == 0.5 and not clamped[1]
        with pytest.raises(InternalConsistencyError):
            _clamp_variance(np.array([-1.0]), np.array([10.0]))
