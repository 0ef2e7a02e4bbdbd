import numpy as np
import pytest

from kamp import (
    BACKGROUND,
    IMMUNE,
    IMMUNE1,
    IMMUNE2,
    Condition,
    InfeasibleAbundanceError,
    KampError,
    SimScenario,
    Window,
    sim_hom_clustered,
    sim_hom_null,
    sim_inhom_clustered,
    sim_inhom_null,
    simulate,
)


def scenario(condition, seed=0, **kwargs):
    params = dict(lambda_n=2000.0, abundance=0.1)
    params.update(kwargs)
    return SimScenario(condition=condition, seed=seed, **params)


class TestScenarioValidation:
    def test_abundance_bounds(self):
        with pytest.raises(KampError):
            scenario(Condition.HOM_NULL, abundance=0.0)
        with pytest.raises(KampError):
            scenario(Condition.HOM_NULL, abundance=1.0)
        with pytest.raises(KampError):
            scenario(Condition.HOM_NULL, abundance=0.6, bivariate=True)

    def test_condition_parse(self):
        assert Condition.parse("hom_null") is Condition.HOM_NULL
        with pytest.raises(KampError):
            Condition.parse("nope")


class TestHomNull:
    def test_poisson_total_and_abundance(self):
        totals, immune = [], []
        for seed in range(300):
            pp = sim_hom_null(scenario(Condition.HOM_NULL, seed=seed))
            totals.append(pp.n)
            immune.append(pp.mark_count(IMMUNE))
        mean_total = np.mean(totals)
        assert abs(mean_total - 2000) < 3 * np.sqrt(2000 / 300)
        frac = np.sum(immune) / np.sum(totals)
        assert abs(frac - 0.1) < 4 * np.sqrt(0.1 * 0.9 / np.sum(totals))

    def test_inside_window_and_deterministic(self):
        sc = scenario(Condition.HOM_NULL, seed=5)
        pp1, pp2 = sim_hom_null(sc), sim_hom_null(sc)
        np.testing.assert_array_equal(pp1.points, pp2.points)
        np.testing.assert_array_equal(pp1.marks, pp2.marks)
        assert np.all(pp1.window.contains(pp1.x, pp1.y))

    def test_bivariate_marks(self):
        pp = sim_hom_null(scenario(Condition.HOM_NULL, seed=1, bivariate=True))
        kinds = set(np.unique(pp.marks))
        assert kinds <= {BACKGROUND, IMMUNE1, IMMUNE2}
        n1, n2 = pp.mark_count(IMMUNE1), pp.mark_count(IMMUNE2)
        assert abs(n1 - 200) < 4 * np.sqrt(200) and abs(n2 - 200) < 4 * np.sqrt(200)


class TestInhomNull:
    def test_right_half_seven_times_denser(self):
        # intensity ~ x^2 integrates 1:7 across the window halves
        left = right = 0
        for seed in range(100):
            pp = sim_inhom_null(scenario(Condition.INHOM_NULL, seed=seed))
            left += int(np.sum(pp.x < 5.0))
            right += int(np.sum(pp.x >= 5.0))
        ratio = right / left
        assert 6.2 < ratio < 7.9

    def test_marks_independent_of_location(self):
        pp = sim_inhom_null(scenario(Condition.INHOM_NULL, seed=3, lambda_n=20000))
        immune_x = pp.x[pp.marks == IMMUNE]
        all_x = pp.x
        # same intensity shape for both types: mean x should agree closely
        assert abs(immune_x.mean() - all_x.mean()) < 4 * all_x.std() / np.sqrt(
            immune_x.size
        )


class TestHomClustered:
    def test_abundance_calibrated(self):
        totals, immune = [], []
        for seed in range(200):
            pp = sim_hom_clustered(scenario(Condition.HOM_CLUSTERED, seed=seed, lambda_n=5000))
            totals.append(pp.n)
            immune.append(pp.mark_count(IMMUNE))
        frac = np.sum(immune) / np.sum(totals)
        assert abs(frac - 0.1) < 4 * np.sqrt(0.1 * 0.9 / np.sum(totals))

    def test_marks_concentrate_in_disks(self):
        pp = sim_hom_clustered(scenario(Condition.HOM_CLUSTERED, seed=7, lambda_n=10000))
        # immune fraction should vary spatially: compare against a null split
        immune = pp.marks == IMMUNE
        left = immune[pp.x < 5].mean()
        right = immune[pp.x >= 5].mean()
        assert immune.mean() == pytest.approx(0.1, abs=0.02)
        assert abs(left - right) > 0  # clusters are never perfectly balanced

    def test_infeasible_abundance(self):
        sc = scenario(
            Condition.HOM_CLUSTERED,
            seed=1,
            lambda_n=3000,
            abundance=0.5,
            cluster_count=1,
            cluster_radius=0.3,
        )
        with pytest.raises(InfeasibleAbundanceError):
            sim_hom_clustered(sc)


class TestInhomClustered:
    def test_deletion_from_clustered_pattern(self):
        # same seed: the holed pattern is the clustered one minus hole points,
        # with marks travelling unchanged
        sc = scenario(Condition.INHOM_CLUSTERED, seed=11, lambda_n=5000)
        holed = sim_inhom_clustered(sc)
        base = sim_hom_clustered(scenario(Condition.HOM_CLUSTERED, seed=11, lambda_n=5000))
        assert 0 < holed.n < base.n
        base_lookup = {
            (x, y): m for x, y, m in zip(base.x, base.y, base.marks)
        }
        for x, y, m in zip(holed.x, holed.y, holed.marks):
            assert base_lookup[(x, y)] == m
        assert np.all(holed.window.contains(holed.x, holed.y))

    def test_deterministic(self):
        sc = scenario(Condition.INHOM_CLUSTERED, seed=2, lambda_n=3000)
        a, b = sim_inhom_clustered(sc), sim_inhom_clustered(sc)
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.marks, b.marks)


class TestDispatcher:
    @pytest.mark.parametrize("condition", list(Condition))
    def test_dispatch(self, condition):
        pp = simulate(scenario(condition, seed=4, lambda_n=1000))
        assert pp.n > 0
        assert pp.window == Window(0, 10, 0, 10)
