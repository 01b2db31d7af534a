"""Limiting laws of the normalized ratio statistics.

Case labels follow the moment regime of the claim sizes:

====  =====================================  ==================================
case  regime                                 statistic limit
====  =====================================  ==================================
1     alpha in (0, 1)                        U / V**2
2     alpha = 1, mu_1 infinite               U_1 / Lambda**2
3a    alpha in (1, 2), or 1 with mu_1 < inf  U / mu_1**2
3b    same                                   U / (mu_1 Lambda)**2
4a    alpha = 2, mu_2 infinite               2 Lambda / mu_1**2
4b    same                                   2 / (mu_1**2 Lambda)
5     alpha in (2, 4), or 2 with mu_2 < inf  W / (mu_1**2 Lambda**(1-2/alpha))
6     mu_4 finite                            N(0, sigma_*^2) / sqrt(Lambda)
====  =====================================  ==================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special, stats

from htl._numerics import DIVERGENT, is_finite, require_finite
from htl.counting import MixingLaw, mixing_laplace
from htl.distributions import ParetoTypeModel, moment

CASES = ("1", "2", "3a", "3b", "4a", "4b", "5", "6")
LT_CASES = ("1", "2", "3a", "3b", "4a", "4b")
TARGETS = ("T", "cov", "disp")


class RegimeMismatch(ValueError):
    pass


def regime_of(model: ParetoTypeModel) -> str:
    """Case family ("1".."6") whose hypotheses the model satisfies."""
    a = model.alpha
    if a < 1:
        return "1"
    if a == 1:
        return "2" if not is_finite(moment(model, 1.0)) else "3"
    if a < 2:
        return "3"
    if a == 2:
        return "4" if not is_finite(moment(model, 2.0)) else "5"
    if a < 4:
        return "5"
    if is_finite(moment(model, 4.0)):
        return "6"
    raise RegimeMismatch("alpha = 4 with mu_4 infinite is not covered")


_REGIME_TEXT = {
    "1": "alpha in (0,1)",
    "2": "alpha=1 and mu_1=inf",
    "3": "alpha in (1,2), or alpha=1 with mu_1<inf",
    "4": "alpha=2 and mu_2=inf",
    "5": "alpha in (2,4), or alpha=2 with mu_2<inf",
    "6": "mu_4<inf",
}


def check_regime(model: ParetoTypeModel, case_id: str) -> None:
    case_id = str(case_id)
    if case_id not in CASES:
        raise ValueError(f"unknown case {case_id!r}; expected one of {CASES}")
    family = case_id[0]
    try:
        actual = regime_of(model)
    except RegimeMismatch as exc:
        raise RegimeMismatch(f"case {case_id} requires {_REGIME_TEXT[family]}: {exc}") from None
    if actual != family:
        raise RegimeMismatch(
            f"case {case_id} requires {_REGIME_TEXT[family]}; model has alpha={model.alpha} "
            f"(regime of case {actual})")


def gamma_fn(x: float) -> float:
    return float(special.gamma(x))


# -- the Case 1 exponent ---------------------------------------------------

def delta_alpha(r: float, s: float, alpha: float) -> float:
    """2 e^{s^2/4r} int_0^inf e^{-(u+c)^2} (u+c) (u/sqrt r)^-alpha du, c = s/(2 sqrt r).

    The prefactor is folded into the integrand (e^{-u^2 - 2uc}) so large s^2/r
    cannot overflow, and u = v**(1/(1-alpha)) removes the u**-alpha singularity.
    """
    if not r > 0:
        raise ValueError("delta_alpha requires r > 0")
    if not s >= 0:
        raise ValueError("delta_alpha requires s >= 0")
    if not 0 < alpha < 1:
        raise ValueError("delta_alpha requires alpha in (0, 1)")
    c = s / (2.0 * math.sqrt(r))
    q = 1.0 - alpha
    pref = 2.0 * r ** (alpha / 2.0) / q
    # e^{-(U^2 + 2Uc)} <= e^{-745} underflows: the neglected tail is below
    # r^{a/2} U^{-a} e^{-745}, far under any representable fraction of the result.
    upper = -c + math.sqrt(c * c + 745.0)
    scale = min(1.0, 1.0 / (2.0 * c)) if c > 0 else 1.0

    def f(v: float) -> float:
        u = v ** (1.0 / q)
        return math.exp(-u * (u + 2.0 * c)) * (u + c)

    breaks_u = [0.0]
    k = scale * 1e-4
    while k < upper:
        breaks_u.append(k)
        k *= 10.0
    breaks_u.append(upper)
    breaks_v = [u ** q for u in breaks_u]
    pieces = []
    for lo, hi in zip(breaks_v[:-1], breaks_v[1:]):
        val, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
        pieces.append(val)
    return pref * math.fsum(pieces)


# -- limit specification ---------------------------------------------------

@dataclass(frozen=True)
class LimitLawSpec:
    """Everything needed to evaluate or sample the limit of one case."""

    case_id: str
    alpha: float
    mixing: MixingLaw
    moments: tuple = (DIVERGENT, DIVERGENT, DIVERGENT, DIVERGENT)
    case3b_lt: str = "corrected"

    def __post_init__(self):
        object.__setattr__(self, "case_id", str(self.case_id))
        if self.case_id not in CASES:
            raise ValueError(f"unknown case {self.case_id!r}")
        if self.case3b_lt not in ("corrected", "s_free"):
            raise ValueError("case3b_lt must be 'corrected' or 's_free'")

    @classmethod
    def from_models(cls, model: ParetoTypeModel, mixing: MixingLaw, case_id: str,
                    case3b_lt: str = "corrected") -> "LimitLawSpec":
        check_regime(model, case_id)
        mus = tuple(moment(model, float(k)) for k in (1, 2, 3, 4))
        return cls(str(case_id), model.alpha, mixing, mus, case3b_lt)

    @property
    def mu1(self) -> float:
        return require_finite("mu_1", self.moments[0])

    @property
    def sigma_sq(self) -> float:
        m1 = self.mu1
        return require_finite("mu_2", self.moments[1]) - m1 * m1

    @property
    def sigma_star_sq(self) -> float:
        return sigma_star_sq(*self.moments)

    @property
    def sigma_star_star_sq(self) -> float:
        return sigma_star_star_sq(*self.moments)

    def cov_target(self) -> float:
        return math.sqrt(self.sigma_sq) / self.mu1

    def disp_target(self) -> float:
        return self.sigma_sq / self.mu1

    def ratio_target(self) -> float:
        """mu_2 / mu_1**2, the in-probability limit of N * T."""
        return require_finite("mu_2", self.moments[1]) / self.mu1 ** 2


def lt_limit(spec: LimitLawSpec, r: float, s: float) -> float:
    """Limiting joint Laplace transform of the (squares, sums) pair of each case.

    The pair is (sum X^2 / A^2, sum X / B) with the case's normalizers:
    1: (a, a); 2: (a, a'); 3a: (a, N); 3b: (a, t); 4a: (a', N); 4b: (a', t).
    """
    if r < 0 or s < 0:
        raise ValueError("r and s must be >= 0")
    cid, a, lam = spec.case_id, spec.alpha, spec.mixing
    if cid == "1":
        if r > 0:
            expo = delta_alpha(r, s, a)
        else:
            expo = s ** a * gamma_fn(1.0 - a)
        return mixing_laplace(lam, expo)
    if cid == "2":
        return mixing_laplace(lam, math.sqrt(r * math.pi))
    if cid in ("3a", "3b"):
        u_part = r ** (a / 2.0) * gamma_fn(1.0 - a / 2.0)
        if cid == "3a":
            return mixing_laplace(lam, u_part) * math.exp(-s * spec.mu1)
        if spec.case3b_lt == "s_free":
            return mixing_laplace(lam, u_part)
        return mixing_laplace(lam, u_part + spec.mu1 * s)
    if cid == "4a":
        return mixing_laplace(lam, 2.0 * r) * math.exp(-s * spec.mu1)
    if cid == "4b":
        return mixing_laplace(lam, 2.0 * r + spec.mu1 * s)
    raise RegimeMismatch(f"case {cid} has a two-sided limit without a Laplace transform")


# -- stable sampling -------------------------------------------------------

def sample_stable(p: float, rng: np.random.Generator, size=None, skew: float = 1.0):
    """Chambers-Mallows-Stuck draws of a stable law with exponent p != 1.

    For p < 1 and skew = 1 the output is positive with E exp(-rW) = exp(-r**p).
    For p in (1, 2) the output has characteristic function
    exp(-|th|**p (1 - i skew sign(th) tan(pi p / 2))), which has mean zero.
    """
    if not (0 < p < 2) or p == 1:
        raise ValueError("stable exponent must lie in (0,1) or (1,2)")
    if not -1 <= skew <= 1:
        raise ValueError("skew must lie in [-1, 1]")
    v = rng.uniform(-math.pi / 2, math.pi / 2, size)
    w = rng.standard_exponential(size)
    tan_term = skew * math.tan(math.pi * p / 2)
    shift = math.atan(tan_term) / p
    scale = (1.0 + tan_term ** 2) ** (1.0 / (2.0 * p))
    x = (scale * np.sin(p * (v + shift)) / np.cos(v) ** (1.0 / p)
         * (np.cos(v - p * (v + shift)) / w) ** ((1.0 - p) / p))
    if p < 1 and skew == 1.0:
        # scale so that -log E e^{-rW} = r**p exactly
        x = x * math.cos(math.pi * p / 2) ** (1.0 / p)
    return x


# -- delta-method variances -----------------------------------------------

def sigma_star_sq(mu1, mu2, mu3, mu4) -> float:
    """Asymptotic variance of sqrt(n) (n T_n - mu2/mu1^2)."""
    m1, m2, m3, m4 = (require_finite(n, v) for n, v in
                      zip(("mu_1", "mu_2", "mu_3", "mu_4"), (mu1, mu2, mu3, mu4)))
    if not m1 > 0:
        raise ValueError("mu_1 must be positive")
    k = m2 / m1 ** 2
    return m4 / m1 ** 4 - k ** 2 + 4.0 * k ** 3 - 4.0 * m2 * m3 / m1 ** 5


def sigma_star_star_sq(mu1, mu2, mu3, mu4) -> float:
    """Asymptotic variance of sqrt(n) (sample dispersion - dispersion)."""
    m1, m2, m3, m4 = (require_finite(n, v) for n, v in
                      zip(("mu_1", "mu_2", "mu_3", "mu_4"), (mu1, mu2, mu3, mu4)))
    if not m1 > 0:
        raise ValueError("mu_1 must be positive")
    return (m2 - m1 ** 2 + m2 ** 3 / m1 ** 4 - 2.0 * m3 / m1 - 2.0 * m2 * m3 / m1 ** 3
            + 2.0 * (m2 / m1) ** 2 + m4 / m1 ** 2)


def case6_variances(spec: LimitLawSpec) -> dict:
    """Delta-method variances for N*T, the sample CoV and the sample dispersion."""
    s_star = spec.sigma_star_sq
    return {
        "T": s_star,
        "cov": s_star * spec.mu1 ** 2 / (4.0 * spec.sigma_sq),
        "disp": spec.sigma_star_star_sq,
    }


# -- reference samplers ----------------------------------------------------

SAMPLED_CASES = ("3a", "3b", "4a", "4b", "6")


def _sample_u(spec: LimitLawSpec, lam: np.ndarray, rng: np.random.Generator, size) -> np.ndarray:
    """U_alpha given Lambda: (Lambda Gamma(1-alpha/2))**(2/alpha) * positive stable(alpha/2)."""
    a = spec.alpha
    w = sample_stable(a / 2.0, rng, size)
    return (lam * gamma_fn(1.0 - a / 2.0)) ** (2.0 / a) * w


def limit_reference_sampler(spec: LimitLawSpec, rng: np.random.Generator, size: int,
                            target: str = "T") -> np.ndarray:
    """Draws from the limit law, built from independent tractable factors.

    Case 3b uses U conditionally on the same Lambda draw, which realizes the
    corrected joint transform of (U, mu_1 Lambda).
    """
    cid = spec.case_id
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}")
    if cid not in SAMPLED_CASES:
        raise RegimeMismatch(f"no reference sampler for case {cid}")
    lam = np.asarray(spec.mixing.sample(rng, size), dtype=float)
    if cid in ("3a", "3b"):
        mu1 = spec.mu1
        u = _sample_u(spec, lam, rng, size)
        denom_lam = lam if cid == "3b" else 1.0
        if target == "T":
            return u / (mu1 * denom_lam) ** 2
        if target == "cov":
            return np.sqrt(u) / (mu1 * denom_lam)
        return u / (mu1 * denom_lam)
    if cid in ("4a", "4b"):
        mu1 = spec.mu1
        if target == "T":
            return 2.0 * lam / mu1 ** 2 if cid == "4a" else 2.0 / (mu1 ** 2 * lam)
        if target == "cov":
            return math.sqrt(2.0) / mu1 * (np.sqrt(lam) if cid == "4a" else 1.0 / np.sqrt(lam))
        return 2.0 * lam / mu1 if cid == "4a" else np.full(size, 2.0 / mu1)
    var = case6_variances(spec)[target]
    return rng.normal(0.0, math.sqrt(var), size) / np.sqrt(lam)


def limit_reference_cdf(spec: LimitLawSpec, target: str = "T") -> Optional[Callable]:
    """Closed-form CDF of the limit where one exists (case 6, point-mass Lambda)."""
    if spec.case_id != "6" or not spec.mixing.is_degenerate:
        return None
    sd = math.sqrt(case6_variances(spec)[target] / spec.mixing.lam)
    return stats.norm(0.0, sd).cdf
