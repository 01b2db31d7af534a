import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from htl._numerics import DIVERGENT
from htl.counting import MixingLaw
from htl.distributions import ParetoTypeModel
from htl.limits import (LimitLawSpec, RegimeMismatch, case6_variances, check_regime, delta_alpha,
                        gamma_fn, limit_reference_sampler, lt_limit, regime_of, sample_stable,
                        sigma_star_sq, sigma_star_star_sq)
from htl.montecarlo import empirical_laplace

ONE = MixingLaw.degenerate(1.0)


def delta_oracle(r, s, alpha):
    # 2 r^{alpha/2} int_0^inf e^{-u^2 - 2uc} (u + c) u^{-alpha} du, c = s / 2 sqrt r,
    # at 30 digits; v = u^{1-alpha} removes the endpoint singularity
    mpmath.mp.dps = 30
    r, s, a = mpmath.mpf(r), mpmath.mpf(s), mpmath.mpf(alpha)
    c = s / (2 * mpmath.sqrt(r))
    q = 1 - a
    f = lambda v: mpmath.exp(-v ** (2 / q) - 2 * v ** (1 / q) * c) * (v ** (1 / q) + c) / q
    return float(2 * r ** (a / 2) * mpmath.quad(f, [0, 0.5, 1, 2, mpmath.inf]))


class TestDelta:
    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
    @pytest.mark.parametrize("r", [0.25, 1.0, 4.0])
    def test_s_zero_closed_form(self, alpha, r):
        want = r ** (alpha / 2) * gamma_fn(1 - alpha / 2)
        assert delta_alpha(r, 0.0, alpha) == pytest.approx(want, rel=1e-7)

    def test_gamma_three_quarters(self):
        assert delta_alpha(1.0, 0.0, 0.5) == pytest.approx(math.gamma(0.75), rel=1e-12)

    def test_small_r_limit(self):
        assert abs(delta_alpha(1e-6, 1.0, 0.5) - math.sqrt(math.pi)) < 1e-3

    @pytest.mark.parametrize("r,s,alpha", [(0.25, 2.0, 0.7), (1.0, 0.5, 0.3), (2.0, 1.0, 0.9),
                                           (0.01, 3.0, 0.5), (5.0, 0.1, 0.1)])
    def test_against_mpmath(self, r, s, alpha):
        assert delta_alpha(r, s, alpha) == pytest.approx(delta_oracle(r, s, alpha), rel=1e-9)

    def test_large_ratio_no_overflow(self):
        val = delta_alpha(1e-8, 50.0, 0.6)
        assert math.isfinite(val)
        assert val == pytest.approx(50 ** 0.6 * math.gamma(0.4), rel=1e-3)

    def test_monotone_grid(self):
        grid = np.linspace(0.1, 3.0, 5)
        vals = np.array([[delta_alpha(r, s, 0.6) for s in grid] for r in grid])
        assert np.all(np.diff(vals, axis=0) > 0)
        assert np.all(np.diff(vals, axis=1) > 0)

    @pytest.mark.parametrize("args", [(0.0, 1.0, 0.5), (1.0, -1.0, 0.5), (1.0, 1.0, 1.0)])
    def test_domain(self, args):
        with pytest.raises(ValueError):
            delta_alpha(*args)


def spec(case, alpha, mixing=ONE, mus=None, **kw):
    mus = mus if mus is not None else (2.0, math.inf, math.inf, math.inf)
    return LimitLawSpec(case, alpha, mixing, mus, **kw)


class TestLaplace:
    def test_case1_s_zero(self):
        assert lt_limit(spec("1", 0.5), 1.0, 0.0) == pytest.approx(math.exp(-math.gamma(0.75)),
                                                                   rel=1e-12)

    def test_case1_r_zero_is_v_transform(self):
        assert lt_limit(spec("1", 0.5), 0.0, 1.0) == pytest.approx(math.exp(-math.sqrt(math.pi)))

    @given(st.floats(0.0, 5.0))
    def test_case2_independent_of_s(self, s):
        assert lt_limit(spec("2", 1.0), 1.0, s) == pytest.approx(math.exp(-math.sqrt(math.pi)),
                                                                rel=1e-14)

    def test_case4b_gamma(self):
        assert lt_limit(spec("4b", 2.0, MixingLaw.gamma(2.0, 2.0)), 1.0, 1.0) == pytest.approx(1 / 9)

    def test_case3b_forms(self):
        mus = (3.0, math.inf, math.inf, math.inf)
        corrected = spec("3b", 1.5, MixingLaw.gamma(2.0, 1.0), mus)
        printed = spec("3b", 1.5, MixingLaw.gamma(2.0, 1.0), mus, case3b_lt="s_free")
        u = math.gamma(0.25)
        assert lt_limit(corrected, 1.0, 1.0) == pytest.approx((1 + u + 3.0) ** -2)
        assert lt_limit(printed, 1.0, 1.0) == pytest.approx((1 + u) ** -2)

    @pytest.mark.parametrize("case,alpha,mixing", [("1", 0.7, MixingLaw.gamma(3, 3)),
                                                   ("3a", 1.5, ONE), ("3b", 1.5, MixingLaw.gamma(2, 1)),
                                                   ("4a", 2.0, ONE), ("2", 1.0, ONE)])
    def test_origin_and_monotone(self, case, alpha, mixing):
        sp = spec(case, alpha, mixing)
        assert lt_limit(sp, 0.0, 0.0) == pytest.approx(1.0)
        grid = [0.0, 0.5, 1.0, 2.0]
        vals = np.array([[lt_limit(sp, r, s) for s in grid] for r in grid])
        assert np.all(np.diff(vals, axis=0) <= 1e-15)
        assert np.all(np.diff(vals, axis=1) <= 1e-15)

    @pytest.mark.parametrize("case", ["5", "6"])
    def test_two_sided_cases_have_no_transform(self, case):
        with pytest.raises(RegimeMismatch):
            lt_limit(spec(case, 5.0), 1.0, 0.0)

    def test_negative_arguments(self):
        with pytest.raises(ValueError):
            lt_limit(spec("1", 0.5), -1.0, 0.0)


class TestRegime:
    @pytest.mark.parametrize("model,case", [
        (ParetoTypeModel(0.7), "1"), (ParetoTypeModel(1.0), "2"),
        (ParetoTypeModel(1.0, "log_perturbed", rho=-2.0), "3"), (ParetoTypeModel(1.5), "3"),
        (ParetoTypeModel(2.0), "4"), (ParetoTypeModel(2.0, "log_perturbed", rho=-3.0), "5"),
        (ParetoTypeModel(3.0), "5"), (ParetoTypeModel(5.0), "6"),
    ])
    def test_regime_of(self, model, case):
        assert regime_of(model) == case

    def test_case2_message(self):
        with pytest.raises(ValueError, match="alpha=1 and mu_1=inf"):
            check_regime(ParetoTypeModel(3.0), "2")

    def test_alpha_four_boundary(self):
        with pytest.raises(RegimeMismatch):
            regime_of(ParetoTypeModel(4.0))


def _delta_oracle_variances(mu1, mu2, mu3, mu4):
    """Delta method from scratch: gradients of g(m1, m2) against Cov(X, X^2)."""
    cov = np.array([[mu2 - mu1 ** 2, mu3 - mu1 * mu2], [mu3 - mu1 * mu2, mu4 - mu2 ** 2]])
    grads = {
        "T": np.array([-2 * mu2 / mu1 ** 3, 1 / mu1 ** 2]),
        "cov": np.array([-mu2 / mu1 ** 3, 0.5 / mu1 ** 2]) / math.sqrt(mu2 / mu1 ** 2 - 1),
        "disp": np.array([-mu2 / mu1 ** 2 - 1, 1 / mu1]),
    }
    return {k: float(g @ cov @ g) for k, g in grads.items()}


class TestDeltaMethod:
    PARETO5 = (1.25, 5 / 3, 2.5, 5.0)

    def test_sigma_star_pareto5(self):
        assert sigma_star_sq(*self.PARETO5) == pytest.approx(0.3034, abs=5e-5)

    def test_against_gradient_oracle(self):
        want = _delta_oracle_variances(*self.PARETO5)
        got = case6_variances(LimitLawSpec.from_models(ParetoTypeModel(5.0), ONE, "6"))
        for k in want:
            assert got[k] == pytest.approx(want[k], rel=1e-12)

    @given(st.floats(4.1, 12.0), st.floats(0.5, 3.0))
    def test_oracle_on_pareto_family(self, alpha, xm):
        mus = [xm ** k * alpha / (alpha - k) for k in (1, 2, 3, 4)]
        want = _delta_oracle_variances(*mus)
        assert sigma_star_sq(*mus) == pytest.approx(want["T"], rel=1e-8, abs=1e-12)
        assert sigma_star_star_sq(*mus) == pytest.approx(want["disp"], rel=1e-8, abs=1e-9 * xm ** 2)

    @given(st.floats(0.1, 10.0))
    def test_degenerate_claims(self, c):
        mus = (c, c ** 2, c ** 3, c ** 4)
        assert sigma_star_sq(*mus) == pytest.approx(0.0, abs=1e-9)
        assert sigma_star_star_sq(*mus) == pytest.approx(0.0, abs=1e-9 * c ** 2)

    def test_cov_target(self):
        sp = LimitLawSpec.from_models(ParetoTypeModel(5.0), ONE, "6")
        assert sp.cov_target() == pytest.approx(0.2582, abs=5e-5)

    def test_infinite_moment_refused(self):
        with pytest.raises(ValueError):
            sigma_star_sq(1.5, 3.0, DIVERGENT, 1.0)


class TestStable:
    def test_one_sided_half(self):
        w = sample_stable(0.5, np.random.default_rng(5), 10**6)
        emp, se = empirical_laplace(w, np.zeros_like(w), [(r, 0.0) for r in (0.5, 1.0, 2.0)])
        for (r, e, s) in zip((0.5, 1.0, 2.0), emp, se):
            assert abs(e - math.exp(-math.sqrt(r))) <= 4 * s

    def test_tail_exponent(self):
        from htl.montecarlo import tail_slope

        w = sample_stable(0.5, np.random.default_rng(6), 10**6)
        assert tail_slope(w, 0.01) == pytest.approx(-0.5, abs=0.05)

    def test_centred_three_halves(self):
        w = sample_stable(1.5, np.random.default_rng(7), 10**6)
        assert abs(w.mean()) <= 4 * w.std() / 1000

    @pytest.mark.parametrize("p", [0.0, 1.0, 2.0])
    def test_domain(self, p):
        with pytest.raises(ValueError):
            sample_stable(p, np.random.default_rng(0), 10)


class TestReferenceSampler:
    def test_case3a_u_transform(self):
        # mu_1^2 * limit = U; its LT at r=1 is exp(-Gamma(1 - alpha/2))
        sp = LimitLawSpec("3a", 1.5, ONE, (3.0, math.inf, math.inf, math.inf))
        x = limit_reference_sampler(sp, np.random.default_rng(8), 200_000) * 9.0
        emp, se = empirical_laplace(x, np.zeros_like(x), [(1.0, 0.0)])
        assert abs(emp[0] - math.exp(-math.gamma(0.25))) <= 4 * se[0]

    def test_case4a_constant(self):
        sp = LimitLawSpec("4a", 2.0, ONE, (2.0, math.inf, math.inf, math.inf))
        x = limit_reference_sampler(sp, np.random.default_rng(9), 10)
        assert np.allclose(x, 0.5)

    def test_case6_normal(self):
        sp = LimitLawSpec.from_models(ParetoTypeModel(5.0), ONE, "6")
        x = limit_reference_sampler(sp, np.random.default_rng(10), 200_000)
        assert x.var() == pytest.approx(sp.sigma_star_sq, rel=0.02)
