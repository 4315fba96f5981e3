import numpy as np
import pytest

from distfix.dist_core import DistAccess, Pmf, empirical_pmf, make_rng, tv_distance
from distfix.errors import OverlapError, ParameterError, PromiseViolationError
from distfix.fixtures import make_geometric, make_zipf, random_monotone
from distfix.isotonic import distance_to_monotone_exact
from distfix.missing_data import (
    CLOSE,
    GAP,
    MissingDataReport,
    corrected_pmf_exact,
    detect_gap,
    estimate_weights,
    inject_missing,
    missing_data_improver,
)

EIGHT_POINT = Pmf.make([0.30, 0.20, 0.15, 0.10, 0.08, 0.07, 0.05, 0.05])


def eight_point_faulty():
    return inject_missing(EIGHT_POINT, 4, 4)


class TestInjection:
    def test_uniform_middle_deletion(self):
        out, w = inject_missing(Pmf.uniform(4), 2, 3)
        assert w == pytest.approx(0.5)
        assert np.allclose(out.p, [0.5, 0, 0, 0.5])

    def test_empty_mass_interval_is_identity(self):
        d = Pmf.make([0.5, 0.5, 0.0, 0.0])
        out, w = inject_missing(d, 3, 4)
        assert w == 0.0
        assert np.allclose(out.p, d.p)

    def test_worked_renormalization(self):
        out, w = eight_point_faulty()
        assert w == pytest.approx(0.1)
        expected = np.array([0.30, 0.20, 0.15, 0.0, 0.08, 0.07, 0.05, 0.05]) / 0.9
        assert np.allclose(out.p, expected)

    def test_cannot_delete_everything(self):
        with pytest.raises(ParameterError):
            inject_missing(Pmf.uniform(4), 1, 4)


class TestDistanceLemmas:
    def test_additive_error_bound(self):
        # D' = (1+eps) D - eps D1 (and the mixture form) stay eps-close to D
        rng = make_rng(0)
        for _ in range(40):
            n = int(rng.integers(4, 64))
            d = Pmf.make(rng.dirichlet(np.ones(n)))
            d1 = Pmf.make(rng.dirichlet(np.ones(n)))
            eps = float(rng.uniform(0.01, 0.4))
            mixed = Pmf.make((1 - eps) * d.p + eps * d1.p)
            assert tv_distance(d, mixed) <= eps + 1e-12
            signed = (1 + eps) * d.p - eps * d1.p
            if np.all(signed >= 0):
                assert tv_distance(d, Pmf.make(signed, renormalize=True)) <= eps + 1e-9

    def test_far_direction(self):
        # mass > eps in the window right after the gap forces eps/2-farness
        rng = make_rng(1)
        for seed in range(10):
            d = random_monotone(128, rng)
            i, j = 20, 30
            dp, _ = inject_missing(d, i, j)
            window = dp.mass(j + 1, 2 * j - i + 1)
            if window > 1e-3:
                assert distance_to_monotone_exact(dp) >= window / 2 - 1e-9

    def test_close_direction(self):
        # window mass < eps/2 caps the distance at eps
        d = make_geometric(128, 0.9)
        dp, _ = inject_missing(d, 100, 110)
        window = dp.mass(111, 121)
        eps = 2 * window + 1e-6
        assert dp.mass(111, 121) < eps / 2 + 1e-9
        assert distance_to_monotone_exact(dp) <= eps + 1e-9


class TestDetectGap:
    def test_monotone_input_is_close(self):
        d = make_zipf(64, 1.2)
        rep = detect_gap(DistAccess.from_pmf(d, seed=0), alpha=0.3, delta=0.1, exact=True)
        assert rep.kind == CLOSE

    def test_big_element_gap_found_exactly(self):
        dp, _ = eight_point_faulty()
        rep = detect_gap(DistAccess.from_pmf(dp, seed=0), alpha=0.3, delta=0.1, exact=True)
        assert rep.kind == GAP
        assert (rep.a, rep.b) == (4, 4)
        assert dp.mass(rep.a, rep.b) <= 3 * 0.3**2

    def test_light_region_gap_covered(self):
        d = make_zipf(512, 1.0)
        dp, _ = inject_missing(d, 200, 260)
        rep = detect_gap(DistAccess.from_pmf(dp, seed=1), alpha=0.25, delta=0.1, exact=True)
        assert rep.kind == GAP
        assert rep.a <= 200 and rep.b >= 260
        assert dp.mass(rep.a, rep.b) <= 3 * 0.25**2 + 1e-9

    def test_sample_mode_smoke(self):
        d = make_zipf(256, 1.0)
        dp, _ = inject_missing(d, 100, 140)
        rep = detect_gap(DistAccess.from_pmf(dp, seed=2), alpha=0.3, delta=0.2)
        assert rep.kind == GAP
        assert rep.a <= 100 and rep.b >= 140

    def test_sample_mode_close_on_monotone(self):
        d = make_zipf(256, 1.2)
        rep = detect_gap(DistAccess.from_pmf(d, seed=3), alpha=0.3, delta=0.2)
        assert rep.kind == CLOSE


class TestEstimateWeights:
    def test_worked_values(self):
        dp, _ = eight_point_faulty()
        rep = estimate_weights(DistAccess.from_pmf(dp, seed=0), 4, 4,
                               alpha=0.3, delta=0.1, exact=True)
        assert rep.gamma == pytest.approx(4 / 45)
        assert rep.c == 7
        assert rep.gamma_prime == pytest.approx(1 / 9)
        assert rep.gamma_prime >= rep.gamma

    def test_zero_window_clamps_to_zero(self):
        d = Pmf.make([0.6, 0.4, 0.0, 0.0])
        rep = estimate_weights(DistAccess.from_pmf(d, seed=0), 2, 3,
                               alpha=0.3, delta=0.1, exact=True)
        assert rep.gamma == 0.0

    def test_tail_cut_inequalities(self):
        dp, _ = eight_point_faulty()
        rep = estimate_weights(DistAccess.from_pmf(dp, seed=0), 4, 4,
                               alpha=0.3, delta=0.1, exact=True)
        a3 = 0.3**3
        window = dp.mass(5, 5)
        assert abs(window - rep.gamma) <= a3
        assert dp.mass(rep.c, 8) >= window - 2 * a3
        assert dp.mass(rep.c + 1, 8) < window + 2 * a3

    def test_promise_guard(self):
        dp, _ = eight_point_faulty()
        with pytest.raises(PromiseViolationError):
            estimate_weights(DistAccess.from_pmf(dp, seed=0), 4, 4,
                             alpha=0.05, delta=0.1, exact=True, eps=0.001)


class TestCorrectedPmf:
    def test_worked_table(self):
        dp, _ = eight_point_faulty()
        rep = estimate_weights(DistAccess.from_pmf(dp, seed=0), 4, 4,
                               alpha=0.3, delta=0.1, exact=True)
        out = corrected_pmf_exact(dp, rep)
        expected = [0.3333, 0.2222, 0.1667, 0.0889, 0.0889, 0.0778, 0.0111, 0.0111]
        assert np.allclose(out.p, expected, atol=2e-4)
        assert out.p.sum() == pytest.approx(1.0, abs=1e-12)
        assert out.is_monotone(tol=1e-12)

    def test_gamma_zero_returns_input(self):
        dp, _ = eight_point_faulty()
        rep = MissingDataReport(kind=GAP, a=4, b=4, gamma=0.0, gamma_prime=0.1, c=7)
        assert corrected_pmf_exact(dp, rep) is dp

    def test_distance_to_input_bound(self):
        rng = make_rng(2)
        for seed in range(10):
            d = random_monotone(256, rng)
            i = int(rng.integers(10, 120))
            j = i + int(rng.integers(0, 40))
            dp, w = inject_missing(d, i, j)
            if w < 1e-4 or w > 0.45:
                continue
            alpha = 0.2
            rep = estimate_weights(DistAccess.from_pmf(dp, seed=seed), i, j,
                                   alpha=alpha, delta=0.1, exact=True)
            if rep.gamma <= 0 or rep.window_j(256)[1] >= rep.c:
                continue
            out = corrected_pmf_exact(dp, rep)
            assert tv_distance(out, dp) <= 2 * (rep.gamma + alpha**3) + 1e-9

    def test_overlap_rejected(self):
        dp, _ = eight_point_faulty()
        rep = MissingDataReport(kind=GAP, a=4, b=4, gamma=0.08, gamma_prime=0.1, c=5)
        with pytest.raises(OverlapError):
            corrected_pmf_exact(dp, rep)

    def test_untouched_outside_the_three_windows(self):
        dp, _ = eight_point_faulty()
        rep = estimate_weights(DistAccess.from_pmf(dp, seed=0), 4, 4,
                               alpha=0.3, delta=0.1, exact=True)
        out = corrected_pmf_exact(dp, rep)
        j_lo, j_hi = rep.window_j(8)
        for x in range(1, 9):
            if rep.a <= x <= rep.b or j_lo <= x <= j_hi:
                continue
            if x >= rep.c:
                assert out.p[x - 1] == pytest.approx(
                    dp.p[x - 1] * (1 - rep.gamma / rep.gamma_prime), abs=1e-12
                )
            else:
                assert out.p[x - 1] == pytest.approx(dp.p[x - 1], abs=1e-12)


class TestImprover:
    def test_pass_through_on_monotone(self):
        d = make_zipf(128, 1.2)
        acc = DistAccess.from_pmf(d, seed=0)
        batch = missing_data_improver(acc, eps=0.2, eps2=0.1, batch=50,
                                      rng=make_rng(1), exact=True)
        assert batch.pass_through
        assert batch.exact_pmf() is d
        before = acc.draws
        batch.take(50)
        assert acc.draws - before == 50  # one input draw per output

    def test_exact_mode_bounds(self):
        d = make_zipf(512, 1.1)
        dp, w = inject_missing(d, 60, 100)
        eps = max(1.5 * w, 0.05)
        eps2 = eps / 2
        acc = DistAccess.from_pmf(dp, seed=2)
        batch = missing_data_improver(acc, eps=eps, eps2=eps2, batch=10,
                                      rng=make_rng(3), exact=True)
        out = batch.exact_pmf()
        assert distance_to_monotone_exact(out) <= 3 * eps2 + 1e-9
        assert tv_distance(out, dp) <= 6 * eps + 1e-9

    def test_per_query_distribution_matches_exact(self):
        dp, _ = eight_point_faulty()
        acc = DistAccess.from_pmf(dp, seed=4)
        batch = missing_data_improver(acc, eps=0.15, eps2=0.07, batch=10**5,
                                      rng=make_rng(5), exact=True)
        samples = batch.take(10**5)
        assert tv_distance(empirical_pmf(samples, 8), batch.exact_pmf()) <= 0.02

    def test_batch_budget(self):
        dp, _ = eight_point_faulty()
        batch = missing_data_improver(DistAccess.from_pmf(dp, seed=6), eps=0.15,
                                      eps2=0.07, batch=2, rng=make_rng(7), exact=True)
        batch.take(2)
        with pytest.raises(ParameterError):
            batch.draw()

    def test_parameter_validation(self):
        dp, _ = eight_point_faulty()
        with pytest.raises(ParameterError):
            missing_data_improver(DistAccess.from_pmf(dp, seed=8), eps=0.1, eps2=0.2)
