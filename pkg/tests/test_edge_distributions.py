import math

import numpy as np
import pytest
from scipy.stats import kstest

from fppvar import edge_distributions as ed

FAMILIES = [ed.exponential(), ed.gamma_family(2.0), ed.beta_family(2.0, 3.0),
            ed.uniform_family(), ed.chi2_family(2.0, 0.5), ed.half_normal()]


class TestFamilies:
    @pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.name)
    def test_cdf_quantile_round_trip(self, dist):
        ps = np.concatenate([np.geomspace(1e-12, 0.5, 60),
                             1.0 - np.geomspace(1e-12, 0.4, 60)])
        back = dist.cdf(dist.ppf(ps))
        assert np.max(np.abs(back - ps)) <= 1e-10

    @pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.name)
    def test_density_positive_inside_support(self, dist):
        qs = np.linspace(0.001, 0.999, 41)
        ys = dist.ppf(qs)
        assert np.all(dist.pdf(ys) > 0)

    @pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.name)
    def test_sampler_ks(self, dist):
        s = ed.sample(dist, 2024, 10_000)
        assert kstest(s, dist.cdf).statistic <= 0.02

    def test_sampler_deterministic(self):
        d = ed.exponential()
        a = ed.sample(d, 7, 3)
        b = ed.sample(d, 7, 3)
        assert np.array_equal(a, b)

    def test_sampler_moment(self):
        d = ed.gamma_family(2.0)
        s = ed.sample(d, 11, 10_000)
        se = d.std() / math.sqrt(s.size)
        assert abs(s.mean() - 2.0) <= 3 * se

    def test_sample_validation(self):
        with pytest.raises(ValueError):
            ed.sample(ed.exponential(), 0, 0)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            ed.uniform_family(1.0, 1.0)
        with pytest.raises(ValueError):
            ed.exponential(0.0)
        with pytest.raises(ValueError):
            ed.uniform_family(-1.0, 1.0)


class TestParser:
    def test_specs(self):
        assert ed.parse_distribution("exp:rate=2").name == "exp:rate=2"
        assert ed.parse_distribution("gamma:shape=3").name == "gamma:shape=3,rate=1"
        assert ed.parse_distribution("beta:a=2,b=3").name == "beta:a=2,b=3"
        assert ed.parse_distribution("uniform:lo=0,hi=2").name == "uniform:lo=0,hi=2"
        assert ed.parse_distribution("chi2:k=2,alpha=0.5").name == "chi2:k=2,alpha=0.5"
        assert ed.parse_distribution("halfnormal").name == "halfnormal"

    def test_bad_specs(self):
        for bad in ("nope", "exp:speed=1", "gamma:shape"):
            with pytest.raises(ValueError):
                ed.parse_distribution(bad)

    def test_names_round_trip(self):
        for dist in FAMILIES:
            assert ed.parse_distribution(dist.name).name == dist.name


class TestPsi:
    def test_uniform_midpoint(self):
        assert ed.psi(ed.uniform_family(), 0.5) == pytest.approx(
            1.0 / math.sqrt(2 * math.pi), abs=1e-14)

    def test_exponential_tail_asymptotic(self):
        # psi(y) ~ sqrt(2y) for the exponential; mpmath golden 0.9668215942
        d = ed.exponential()
        assert ed.psi(d, 30.0) / math.sqrt(60.0) == pytest.approx(0.9668215942, abs=1e-8)
        assert 0.9 <= ed.psi(d, 30.0) / math.sqrt(60.0) <= 1.1

    def test_exponential_ratio_monotone(self):
        d = ed.exponential()
        ratios = [ed.psi(d, float(y)) / math.sqrt(2.0 * y) for y in (10, 20, 40)]
        assert all(b > a - 0.05 for a, b in zip(ratios, ratios[1:]))
        assert all(r <= 1.0 for r in ratios)

    def test_half_normal_deep_tail(self):
        # frozen from an mpmath composition through the log-space cdf
        assert ed.psi(ed.half_normal(), 10.0) == pytest.approx(0.9932443447769326, rel=1e-9)

    @pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.name)
    def test_positive_on_support(self, dist):
        qs = np.linspace(0.001, 0.999, 101)
        vals = ed.psi(dist, dist.ppf(qs))
        assert np.all(vals > 0)
        assert np.all(np.isfinite(vals))

    def test_outside_support_rejected(self):
        with pytest.raises(ValueError):
            ed.psi(ed.uniform_family(), 1.5)
        with pytest.raises(ValueError):
            ed.psi(ed.exponential(), 0.0)


class TestNearGamma:
    def test_sufficient_pass_families(self):
        for dist in (ed.exponential(), ed.gamma_family(2.0),
                     ed.beta_family(2.0, 3.0), ed.uniform_family()):
            rep = ed.check_near_gamma_sufficient(dist)
            assert rep.sufficient_alpha_ok, dist.name
            assert rep.sufficient_beta_or_tail_ok, dist.name
            assert rep.verdict == "sufficient-conditions-pass"

    def test_exponential_tail_ratio_is_one(self):
        rep = ed.check_near_gamma_sufficient(ed.exponential())
        lo, hi = rep.tail_constants
        assert lo == pytest.approx(1.0, abs=1e-9)
        assert hi == pytest.approx(1.0, abs=1e-9)

    def test_half_normal_fails_tail_only(self):
        rep = ed.check_near_gamma_sufficient(ed.half_normal())
        assert rep.sufficient_alpha_ok
        assert not rep.sufficient_beta_or_tail_ok
        assert rep.verdict == "fail"

    def test_direct_uniform(self):
        rep = ed.check_near_gamma_direct(ed.uniform_family(), 50_000)
        assert rep.direct_pass
        assert 0.7 <= rep.direct_epsilon_hat <= 1.3

    def test_direct_exponential(self):
        rep = ed.check_near_gamma_direct(ed.exponential(), 50_000)
        assert rep.direct_pass

    def test_direct_half_normal(self):
        rep = ed.check_near_gamma_direct(ed.half_normal(), 50_000)
        assert rep.direct_pass

    def test_direct_grid_validation(self):
        with pytest.raises(ValueError):
            ed.check_near_gamma_direct(ed.exponential(), 50)

    def test_classify_merges(self):
        rep = ed.classify(ed.half_normal(), 20_000)
        assert rep.verdict == "direct-evidence-only"
        rep = ed.classify(ed.gamma_family(2.0), 20_000)
        assert rep.verdict == "sufficient-conditions-pass"

    def test_sufficient_pass_implies_direct_pass(self):
        for dist in (ed.exponential(), ed.gamma_family(2.0),
                     ed.beta_family(2.0, 3.0), ed.uniform_family()):
            rep = ed.classify(dist, 20_000)
            if rep.verdict == "sufficient-conditions-pass":
                assert rep.direct_pass, dist.name
