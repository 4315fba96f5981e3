import numpy as np
import pytest

from distfix.dist_core import Pmf, make_rng
from distfix.errors import ParameterError
from distfix.isotonic import (
    WeightedHistogram,
    closest_monotone_histogram,
    closest_monotone_pmf,
    distance_to_monotone_exact,
)
from oracle_isotonic import exhaustive_optimum, mesh_search_optimum


def test_monotone_input_is_fixed_point():
    h = WeightedHistogram.make([0.5, 0.3, 0.2], [1, 1, 1])
    proj, cost = closest_monotone_histogram(h)
    assert cost == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(proj.levels, h.levels)


def test_worked_example_unit_lengths():
    h = WeightedHistogram.make([0.2, 0.5, 0.3], [1, 1, 1])
    proj, cost = closest_monotone_histogram(h)
    assert cost == pytest.approx(0.3, abs=1e-10)
    assert np.allclose(proj.levels, [0.35, 0.35, 0.3], atol=1e-9)


def test_worked_example_weighted():
    h = WeightedHistogram.make([0.3, 0.35], [1, 2])
    proj, cost = closest_monotone_histogram(h)
    assert cost == pytest.approx(1 / 15, abs=1e-10)
    assert np.allclose(proj.levels, [1 / 3, 1 / 3], atol=1e-9)


def test_distance_oracle_values():
    assert distance_to_monotone_exact(Pmf.make([0.5, 0.3, 0.2])) == 0.0
    assert distance_to_monotone_exact(Pmf.make([0.2, 0.5, 0.3])) == pytest.approx(0.15, abs=1e-10)
    # gap instance: the solver's optimum is 1/3, confirmed by the exhaustive oracle
    d = Pmf.make([0.5, 0.0, 0.0, 0.5])
    ex = float(exhaustive_optimum([0.5, 0.0, 0.0, 0.5], [1, 1, 1, 1])) / 2.0
    assert ex == pytest.approx(1 / 3)
    assert distance_to_monotone_exact(d) == pytest.approx(ex, abs=1e-9)


def test_output_always_monotone_mass_one():
    rng = make_rng(0)
    for _ in range(50):
        l = int(rng.integers(1, 30))
        h = WeightedHistogram.make(rng.random(l), rng.integers(1, 9, size=l))
        total = float(np.dot(h.levels, h.lengths))
        proj, _ = closest_monotone_histogram(h, total=total)
        assert np.all(np.diff(proj.levels) <= 1e-10)
        assert np.dot(proj.levels, proj.lengths) == pytest.approx(total, abs=1e-9)
        assert np.all(proj.levels >= -1e-12)


def test_matches_exhaustive_on_grid_instances():
    rng = make_rng(1)
    for _ in range(40):
        l = int(rng.integers(2, 7))
        cuts = np.sort(rng.choice(np.arange(1, 20), size=l - 1, replace=False))
        a = np.diff(np.concatenate([[0], cuts, [20]])) / 20.0
        a = rng.permutation(a)
        _, cost = closest_monotone_histogram(WeightedHistogram.make(a, np.ones(l)))
        assert cost == pytest.approx(float(exhaustive_optimum(a, [1] * l)), abs=1e-9)
        # a literal mesh search can only sit above the continuum optimum
        assert cost <= mesh_search_optimum(a, [1] * l) + 1e-9


def test_weighted_instances_match_exhaustive():
    rng = make_rng(2)
    for _ in range(25):
        l = int(rng.integers(2, 6))
        w = rng.integers(1, 5, size=l).astype(float)
        a = rng.random(l)
        total = float(np.dot(a, w))
        _, cost = closest_monotone_histogram(WeightedHistogram.make(a, w), total=total)
        assert cost == pytest.approx(float(exhaustive_optimum(a, w, total)), abs=1e-9)


def test_flattening_compatibility():
    from distfix.birge import birge_partition, flatten

    rng = make_rng(3)
    for _ in range(20):
        d = Pmf.make(rng.dirichlet(np.ones(60)))
        f = flatten(d, birge_partition(60, 0.3))
        assert distance_to_monotone_exact(f) <= distance_to_monotone_exact(d) + 1e-9


def test_all_zero_rejected():
    h = WeightedHistogram(levels=np.zeros(3), lengths=np.ones(3))
    with pytest.raises(ParameterError):
        closest_monotone_histogram(h)


def test_oracle_scale_guard():
    big = Pmf.uniform(10_001)
    with pytest.raises(ParameterError):
        distance_to_monotone_exact(big)


def test_closest_monotone_pmf():
    d = Pmf.make([0.2, 0.5, 0.3])
    proj, dist = closest_monotone_pmf(d)
    assert dist == pytest.approx(0.15, abs=1e-9)
    assert proj.is_monotone()
    assert np.allclose(proj.p, [0.35, 0.35, 0.3], atol=1e-8)


def test_canonical_tie_break_is_lex_largest():
    # (0.6, 0.1) with total 1: every x1 in [0.6, 0.9] (x2 = 1 - x1) costs 0.3,
    # so the optimum is a face; the canonical answer takes the largest x1
    h = WeightedHistogram.make([0.6, 0.1], [1, 1])
    proj, cost = closest_monotone_histogram(h, total=1.0, canonical=True)
    assert cost == pytest.approx(0.3, abs=1e-9)
    assert np.allclose(proj.levels, [0.9, 0.1], atol=1e-7)
    # same face padded to three levels, exercising the LP + sequential pass
    h3 = WeightedHistogram.make([0.6, 0.1, 0.0], [1, 1, 1])
    proj3, cost3 = closest_monotone_histogram(h3, total=1.0, canonical=True)
    assert cost3 == pytest.approx(0.3, abs=1e-9)
    assert np.allclose(proj3.levels, [0.9, 0.1, 0.0], atol=1e-6)


def test_determinism():
    rng = make_rng(4)
    a = rng.random(12)
    w = np.ones(12)
    total = float(a.sum())
    p1, c1 = closest_monotone_histogram(WeightedHistogram.make(a, w), total=total)
    p2, c2 = closest_monotone_histogram(WeightedHistogram.make(a, w), total=total)
    assert c1 == c2
    assert np.array_equal(p1.levels, p2.levels)
