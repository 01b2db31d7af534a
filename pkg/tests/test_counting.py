import math

import numpy as np
import pytest
from scipy import stats

from htl._numerics import DIVERGENT
from htl.counting import (CountingCapExceeded, CountingProcessModel, Exponential, MixingLaw,
                          mixing_inverse_mean, mixing_laplace, sample_count)
from htl.distributions import ParetoTypeModel


class TestMixingLaw:
    def test_degenerate_laplace(self):
        assert mixing_laplace(MixingLaw.degenerate(1.0), 1.0) == pytest.approx(math.exp(-1), rel=1e-15)

    def test_gamma_laplace(self):
        assert mixing_laplace(MixingLaw.gamma(2.0, 2.0), 2.0) == pytest.approx(0.25, rel=1e-14)

    @pytest.mark.parametrize("law", [MixingLaw.degenerate(3.0), MixingLaw.gamma(0.5, 4.0)])
    def test_normalized(self, law):
        assert mixing_laplace(law, 0.0) == 1.0

    def test_inverse_means(self):
        assert mixing_inverse_mean(MixingLaw.degenerate(2.0)) == 0.5
        assert mixing_inverse_mean(MixingLaw.gamma(3.0, 3.0)) == pytest.approx(1.5)
        assert mixing_inverse_mean(MixingLaw.gamma(0.5, 1.0)) is DIVERGENT

    def test_gamma_inverse_mean_by_simulation(self, rng):
        lam = MixingLaw.gamma(3.0, 3.0).sample(rng, 10**6)
        inv = 1 / lam
        assert abs(inv.mean() - 1.5) <= 4 * inv.std() / math.sqrt(inv.size)

    def test_negative_theta(self):
        with pytest.raises(ValueError):
            mixing_laplace(MixingLaw.degenerate(1.0), -1.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            MixingLaw.gamma(0.0, 1.0)


class TestCounts:
    def test_deterministic_floor(self, rng):
        assert sample_count(CountingProcessModel.deterministic(), 10.7, rng) == 10

    def test_poisson_mean(self, rng):
        n = sample_count(CountingProcessModel.poisson(2.0), 1000.0, rng, 10_000)
        assert abs(n.mean() - 2000) <= 3 * n.std() / 100

    def test_mixed_mean(self, rng):
        n = sample_count(CountingProcessModel.mixed_poisson_gamma(3.0, 3.0), 1000.0, rng, 10_000)
        ratio = n / 1000.0
        assert abs(ratio.mean() - 1.0) <= 3 * ratio.std() / 100

    def test_negative_binomial_matches_gamma_poisson(self):
        model = CountingProcessModel.mixed_poisson_gamma(3.0, 3.0)
        a = sample_count(model, 50.0, np.random.default_rng(1), 20_000, method="gamma-poisson")
        b = sample_count(model, 50.0, np.random.default_rng(2), 20_000, method="negative-binomial")
        assert stats.ks_2samp(a, b).pvalue > 1e-3

    def test_exponential_renewal_is_poisson(self):
        renewal = CountingProcessModel.renewal(Exponential(1.0))
        a = sample_count(renewal, 30.0, np.random.default_rng(3), 20_000)
        b = sample_count(CountingProcessModel.poisson(1.0), 30.0, np.random.default_rng(4), 20_000)
        assert stats.ks_2samp(a, b).pvalue > 1e-3

    def test_pareto_renewal_rate(self, rng):
        # x_min = 2/3 gives mean interarrival 1 for alpha = 3
        inter = ParetoTypeModel(3.0, x_min=2.0 / 3.0)
        model = CountingProcessModel.renewal(inter)
        assert model.mixing.lam == pytest.approx(1.0)
        n = sample_count(model, 1000.0, rng, 2000)
        assert abs(n.mean() / 1000 - 1.0) < 0.01

    def test_renewal_cap(self, rng):
        model = CountingProcessModel.renewal(Exponential(1.0), renewal_cap=100)
        with pytest.raises(CountingCapExceeded):
            sample_count(model, 1000.0, rng, 10)

    def test_infinite_mean_interarrival_rejected(self):
        with pytest.raises(ValueError):
            CountingProcessModel.renewal(ParetoTypeModel(0.8))

    def test_unknown_method(self, rng):
        with pytest.raises(ValueError):
            sample_count(CountingProcessModel.mixed_poisson_gamma(1, 1), 1.0, rng, 2, method="x")


class TestModelConfig:
    @pytest.mark.parametrize("model", [
        CountingProcessModel.deterministic(),
        CountingProcessModel.poisson(2.5, averaging="p"),
        CountingProcessModel.mixed_poisson_gamma(3.0, 2.0),
        CountingProcessModel.renewal(Exponential(2.0)),
        CountingProcessModel.renewal(ParetoTypeModel(3.0)),
    ])
    def test_round_trip(self, model):
        assert CountingProcessModel.from_dict(model.to_dict()) == model

    def test_mixing_of_each_kind(self):
        assert CountingProcessModel.deterministic().mixing == MixingLaw.degenerate(1.0)
        assert CountingProcessModel.poisson(2.0).mixing == MixingLaw.degenerate(2.0)
        assert CountingProcessModel.renewal(Exponential(4.0)).mixing.lam == pytest.approx(4.0)

    def test_bad_averaging(self):
        with pytest.raises(ValueError):
            CountingProcessModel.poisson(1.0, averaging="x")
