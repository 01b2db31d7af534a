import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from htl.distributions import ParetoTypeModel, survival
from htl.normalizers import (RegimeError, normalizer_table, residuals, solve_a, solve_a_prime,
                             solve_case5)


class TestA:
    def test_square_root(self):
        assert solve_a(ParetoTypeModel(2.0), 1e4) == pytest.approx(100.0, rel=1e-15)

    def test_half(self):
        assert solve_a(ParetoTypeModel(0.5), 1e4) == pytest.approx(1e8, rel=1e-14)

    def test_log_perturbed(self):
        m = ParetoTypeModel(1.0, "log_perturbed", rho=1.0)
        root = optimize.brentq(lambda x: x - 1e3 * (1 + math.log(x)), 1e3, 1e6, xtol=1e-12)
        x = solve_a(m, 1e3)
        assert x == pytest.approx(root, rel=1e-11)
        assert abs(1e3 * survival(m, x) - 1) < 1e-9

    @given(st.floats(0.3, 6.0), st.floats(0.2, 2.5), st.floats(0.0, 1.0), st.floats(1.0, 9.0))
    def test_residual_small(self, alpha, beta, d, log_t):
        m = ParetoTypeModel(alpha, "hall", hall_C=1.5, hall_D=d, hall_beta=beta)
        x = solve_a(m, 10 ** log_t * 1.5)
        assert abs(10 ** log_t * 1.5 * survival(m, x) - 1) < 1e-9

    def test_t_must_exceed_one(self):
        with pytest.raises(ValueError):
            solve_a(ParetoTypeModel(2.0), 0.5)


class TestAPrime:
    def test_kappa_one(self):
        root = optimize.brentq(lambda x: x - 1e3 * math.log(x), 1e3, 1e5, xtol=1e-12)
        assert root == pytest.approx(9118.0, abs=0.1)
        assert solve_a_prime(ParetoTypeModel(1.0), 1e3, 1) == pytest.approx(root, rel=1e-11)

    def test_kappa_two(self):
        root = optimize.brentq(lambda x: x * x - 1e4 * math.log(x), 10.0, 1e4, xtol=1e-12)
        assert solve_a_prime(ParetoTypeModel(2.0), 1e4, 2) == pytest.approx(root, rel=1e-11)

    def test_largest_root(self):
        # x = 10 log x has two roots; the larger one is wanted
        x = solve_a_prime(ParetoTypeModel(1.0), 10.0, 1)
        assert x > 10
        assert x == pytest.approx(10 * math.log(x), rel=1e-11)

    def test_finite_mean_rejected(self):
        with pytest.raises(RegimeError):
            solve_a_prime(ParetoTypeModel(5.0), 1e3, 1)

    def test_finite_boundary_moment_rejected(self):
        with pytest.raises(RegimeError):
            solve_a_prime(ParetoTypeModel(1.0, "log_perturbed", rho=-2.0), 1e3, 1)

    @given(st.floats(-1.0, 1.0), st.floats(1.5, 8.0))
    def test_log_perturbed_residual(self, rho, log_t):
        m = ParetoTypeModel(2.0, "log_perturbed", rho=rho)
        table = normalizer_table(m, 10 ** log_t, "4a")
        assert residuals(m, table)["a_prime_t"] < 1e-9


class TestCase5:
    def test_exact_pareto(self):
        c, ell_star, b = solve_case5(ParetoTypeModel(3.0), 1e3)
        assert c == pytest.approx(100.0, rel=1e-14)
        assert ell_star == pytest.approx(1.0, rel=1e-14)
        assert b == pytest.approx(10.0, rel=1e-13)

    def test_hall(self):
        m = ParetoTypeModel(3.0, "hall", hall_C=1.0, hall_D=1.0, hall_beta=1.0)
        root = optimize.brentq(lambda x: 1e3 * x ** -1.5 * (1 + x ** -0.5) - 1, 10.0, 1e4,
                               xtol=1e-12)
        c, _, _ = solve_case5(m, 1e3)
        assert c == pytest.approx(root, rel=1e-10)

    @given(st.floats(2.05, 3.95), st.floats(1.2, 9.0))
    def test_b_times_c_is_t(self, alpha, log_t):
        t = 10 ** log_t
        c, _, b = solve_case5(ParetoTypeModel(alpha, "log_perturbed", rho=0.3), t)
        assert b * c == pytest.approx(t, rel=1e-12)

    def test_wrong_regime(self):
        with pytest.raises(RegimeError):
            solve_case5(ParetoTypeModel(5.0), 1e3)


def test_table_per_case():
    assert normalizer_table(ParetoTypeModel(0.7), 1e3, "1").a_prime_t is None
    assert normalizer_table(ParetoTypeModel(2.0), 1e3, "4b").a_prime_t is not None
    assert normalizer_table(ParetoTypeModel(3.0), 1e3, "5").b_t == pytest.approx(10.0)
