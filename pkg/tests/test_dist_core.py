import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distfix.dist_core import (
    CorrectorParams,
    DistAccess,
    Pmf,
    convolve,
    convolve_power,
    dkw_sample_count,
    empirical_pmf,
    kolmogorov_distance,
    load_pmf_dict,
    make_rng,
    tv_distance,
)
from distfix.errors import CapabilityError, DomainMismatchError, ParameterError


def random_pmf(n, rng):
    return Pmf.make(rng.dirichlet(np.ones(n)))


pmf_strategy = st.integers(2, 12).flatmap(
    lambda n: st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n)
).map(lambda w: Pmf.make(np.array(w) / np.sum(w), renormalize=True))


class TestDistances:
    def test_tv_identity(self):
        u = Pmf.uniform(4)
        assert tv_distance(u, u) == 0.0

    def test_tv_disjoint_supports(self):
        assert tv_distance(Pmf.make([1, 0]), Pmf.make([0, 1])) == 1.0

    def test_tv_worked_example(self):
        assert tv_distance(Pmf.make([0.5, 0.3, 0.2]), Pmf.uniform(3)) == pytest.approx(1 / 6)

    def test_kolmogorov_examples(self):
        u = Pmf.uniform(4)
        assert kolmogorov_distance(u, u) == 0.0
        assert kolmogorov_distance(Pmf.make([1, 0]), Pmf.make([0, 1])) == 1.0
        # max cdf gap of (0.5,0.3,0.2) vs uniform sits at x=1
        p = Pmf.make([0.5, 0.3, 0.2])
        assert kolmogorov_distance(p, Pmf.uniform(3)) == pytest.approx(1 / 6)
        assert abs(p.cdf()[0] - 1 / 3) == pytest.approx(1 / 6)

    def test_domain_mismatch(self):
        with pytest.raises(DomainMismatchError):
            tv_distance(Pmf.uniform(3), Pmf.uniform(4))
        with pytest.raises(DomainMismatchError):
            kolmogorov_distance(Pmf.uniform(3), Pmf.uniform(4))

    @given(pmf_strategy, pmf_strategy)
    @settings(max_examples=60, deadline=None)
    def test_kolmogorov_below_tv(self, p, q):
        if p.n != q.n:
            return
        assert kolmogorov_distance(p, q) <= tv_distance(p, q) + 1e-12

    def test_data_processing_inequality(self):
        rng = make_rng(3)
        for n in range(2, 9):
            for _ in range(40):
                p, q = random_pmf(n, rng), random_pmf(n, rng)
                # random stochastic matrix = randomized map on the domain
                f = rng.dirichlet(np.ones(n), size=n)
                fp = Pmf.make(p.p @ f, renormalize=True)
                fq = Pmf.make(q.p @ f, renormalize=True)
                assert tv_distance(fp, fq) <= tv_distance(p, q) + 1e-12


class TestEmpirical:
    def test_counting(self):
        assert np.allclose(empirical_pmf([1, 1, 2, 2], 2).p, [0.5, 0.5])
        assert np.allclose(empirical_pmf([3, 3, 3], 3).p, [0, 0, 1])

    def test_out_of_range(self):
        with pytest.raises(ParameterError):
            empirical_pmf([0, 1], 2)
        with pytest.raises(ParameterError):
            empirical_pmf([], 2)

    def test_dkw_count_example(self):
        # solve 2 exp(-2 m eps^2) <= delta at eps=0.1, delta=0.05
        assert dkw_sample_count(0.1, 0.05) == 185

    def test_dkw_exceedance_rate(self):
        rng = make_rng(11)
        d = random_pmf(40, rng)
        acc = DistAccess.from_pmf(d, seed=4)
        bad = 0
        for _ in range(500):
            emp = empirical_pmf(acc.draw_many(185), 40)
            if kolmogorov_distance(d, emp) > 0.1:
                bad += 1
        assert bad / 500 <= 0.07

    def test_empirical_tv_shrinks_with_m(self):
        d = random_pmf(32, make_rng(1))
        means = []
        for m in (10**2, 10**3, 10**4, 10**5):
            vals = []
            for rep in range(20):
                acc = DistAccess.from_pmf(d, seed=1000 * m + rep)
                vals.append(tv_distance(empirical_pmf(acc.draw_many(m), 32), d))
            means.append(np.mean(vals))
        assert all(a > b for a, b in zip(means, means[1:]))


class TestConvolve:
    def test_uniform_absorbing(self):
        rng = make_rng(2)
        for n in (3, 10, 100):
            q = random_pmf(n, rng)
            assert tv_distance(convolve(Pmf.uniform(n), q), Pmf.uniform(n)) < 1e-12

    def test_worked_example(self):
        p = Pmf.make([0.5, 0.25, 0.25])
        out = convolve(p, p)
        assert np.allclose(out.p, [0.375, 0.3125, 0.3125])
        u = Pmf.uniform(3)
        assert tv_distance(u, out) == pytest.approx(1 / 24)
        assert 1 / 24 <= 2 * tv_distance(u, p) ** 2 == pytest.approx(1 / 18)

    def test_commutative(self):
        rng = make_rng(5)
        p, q = random_pmf(7, rng), random_pmf(7, rng)
        assert np.allclose(convolve(p, q).p, convolve(q, p).p)

    def test_contraction_bound(self):
        rng = make_rng(6)
        u_cache = {}
        for n in (3, 10, 100):
            u_cache[n] = Pmf.uniform(n)
            for _ in range(100):
                p, q = random_pmf(n, rng), random_pmf(n, rng)
                lhs = tv_distance(u_cache[n], convolve(p, q))
                rhs = 2 * tv_distance(u_cache[n], p) * tv_distance(u_cache[n], q)
                assert lhs <= rhs + 1e-9

    def test_power_identity(self):
        p = random_pmf(6, make_rng(7))
        assert convolve_power(p, 1) is p
        with pytest.raises(ParameterError):
            convolve_power(p, 0)

    def test_fft_path_matches_direct(self):
        from distfix import dist_core

        rng = make_rng(8)
        p, q = random_pmf(600, rng), random_pmf(600, rng)
        direct = convolve(p, q)
        old = dist_core._DIRECT_CONV_LIMIT
        dist_core._DIRECT_CONV_LIMIT = 10
        try:
            fft = convolve(p, q)
        finally:
            dist_core._DIRECT_CONV_LIMIT = old
        assert tv_distance(direct, fft) < 1e-9


class TestAccess:
    def test_draw_concentration(self):
        acc = DistAccess.from_pmf(Pmf.uniform(2), seed=9)
        s = acc.draw_many(10**5)
        assert 0.49 <= np.mean(s == 1) <= 0.51
        assert acc.draws == 10**5

    def test_ceval(self):
        d = random_pmf(20, make_rng(10))
        acc = DistAccess.from_pmf(d, seed=0)
        assert acc.ceval(20) == pytest.approx(1.0)
        vals = [acc.ceval(j) for j in range(1, 21)]
        assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))
        assert acc.cdf_queries == 21

    def test_capability_errors(self):
        acc = DistAccess.from_stream(iter([1, 2]), n=4)
        with pytest.raises(CapabilityError):
            acc.ceval(2)
        assert acc.draw() == 1
        acc2 = DistAccess(n=4)
        with pytest.raises(CapabilityError):
            acc2.draw()

    def test_stream_access_with_cdf_table(self):
        acc = DistAccess.from_stream(iter([2, 2, 1]), n=2, cdf_table=[0.5, 1.0])
        assert acc.ceval(1) == 0.5
        assert [acc.draw() for _ in range(3)] == [2, 2, 1]
        with pytest.raises(CapabilityError):
            acc.draw()

    def test_seed_reproducibility(self):
        d = random_pmf(16, make_rng(12))
        a = DistAccess.from_pmf(d, seed=42).draw_many(1000)
        b = DistAccess.from_pmf(d, seed=42).draw_many(1000)
        assert np.array_equal(a, b)


class TestPmfPlumbing:
    def test_loader_rejects_drift(self):
        with pytest.raises(ParameterError):
            load_pmf_dict({"n": 2, "p": [0.6, 0.5]})
        pm = load_pmf_dict({"n": 2, "p": [0.6, 0.5]}, renormalize=True)
        assert pm.p.sum() == pytest.approx(1.0)
        with pytest.raises(ParameterError):
            load_pmf_dict({"n": 3, "p": [0.5, 0.5]})

    def test_negative_mass_rejected(self):
        with pytest.raises(ParameterError):
            Pmf.make([0.5, -0.1, 0.6])

    def test_renorm_recorded(self):
        p = Pmf.make([0.5, 0.5 + 5e-10])
        assert 0 < p.renorm < 1e-9

    def test_params_feasibility(self):
        CorrectorParams(eps=0.2, eps1=0.1, eps2=0.1)
        with pytest.raises(ParameterError):
            CorrectorParams(eps=0.3, eps1=0.1, eps2=0.1)
